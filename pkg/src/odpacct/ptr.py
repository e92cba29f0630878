"""Propose-Test-Release accounting.

A PTR function ``T(x, s)`` returns a value or ⊥. An (eps, delta)-PTR
function is (2 eps, delta)-DP, and ODP with the value cell at 2 eps and the
⊥ cell at eps. Chaining two of them (the second only after a ⊥ from the
first) gives the three-case accounting in ``run_ptr_pair``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from .core import BOTTOM, BOTTOM_CELL, VALUE_CELL, OdpGuarantee, SubsetDpGuarantee, combine_subset_dp
from .noise import NoiseSource


@dataclass(frozen=True)
class PtrStage:
    """A PTR function with its declared (eps, delta).

    ``evaluate(db, proposal)`` must return ⊥ whenever ``proposal`` is ⊥.
    """

    evaluate: Callable[[Any, Any], Any]
    eps: float
    delta: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("PTR eps must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("PTR delta must lie in [0, 1]")

    def __call__(self, db, proposal):
        if proposal is BOTTOM:
            return BOTTOM
        return self.evaluate(db, proposal)


@dataclass(frozen=True)
class PtrPairOutcome:
    result: Any
    case_id: int
    charged: tuple[float, float]
    swapped: bool = False


# case -> (eps multiplier, delta multiplier)
CASE_CHARGES = {1: (2, 1), 2: (3, 2), 3: (2, 2)}


def ptr_stage_odp(eps: float, delta: float) -> OdpGuarantee:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return OdpGuarantee(((VALUE_CELL, 2.0 * eps), (BOTTOM_CELL, eps)), delta)


def iqr_single_odp(eps: float, delta: float) -> OdpGuarantee:
    """Two chained PTR stages treated as one mechanism: value 3 eps, ⊥ 2 eps.

    The value cell inherits the (3 eps, delta)-DP bound; ⊥ needs both stages
    to say ⊥, which is (2 eps, 0)-subset DP by independence.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return combine_subset_dp(
        [SubsetDpGuarantee(VALUE_CELL, 3.0 * eps, delta), SubsetDpGuarantee(BOTTOM_CELL, 2.0 * eps, 0.0)]
    )


def case_charge(case_id: int, eps: float, delta: float) -> tuple[float, float]:
    a, b = CASE_CHARGES[case_id]
    return a * eps, b * delta


def run_ptr_pair(
    stage1: PtrStage,
    stage2: PtrStage,
    db,
    s1,
    s2,
    noise: NoiseSource | None = None,
    *,
    randomize_order: bool = False,
) -> PtrPairOutcome:
    """Run stage 1, and stage 2 only if stage 1 returned ⊥.

    With ``randomize_order`` a fair coin from ``noise`` decides which stage
    goes first.
    """
    if (stage1.eps, stage1.delta) != (stage2.eps, stage2.delta):
        raise ValueError("both PTR stages must share (eps, delta)")
    swapped = False
    if randomize_order:
        if noise is None:
            raise ValueError("randomize_order needs a noise source")
        if noise.uniform() >= 0.5:
            stage1, stage2, s1, s2 = stage2, stage1, s2, s1
            swapped = True
    eps, delta = stage1.eps, stage1.delta
    r1 = stage1(db, s1)
    if r1 is not BOTTOM:
        return PtrPairOutcome(r1, 1, case_charge(1, eps, delta), swapped)
    r2 = stage2(db, s2)
    case = 2 if r2 is not BOTTOM else 3
    return PtrPairOutcome(r2, case, case_charge(case, eps, delta), swapped)


def distance_test_stage(
    distance_fn: Callable[[Any], float],
    answer_fn: Callable[[Any], float],
    eps: float,
    delta: float,
    noise: NoiseSource,
) -> PtrStage:
    """Synthetic PTR stage built on a distance-to-instability test.

    ``distance_fn`` must have sensitivity 1. The stage releases
    ``answer_fn(db) + Lap(s / eps)`` (the proposal ``s`` is the proposed
    sensitivity bound) when ``distance + Lap(1/eps) > ln(1/(2 delta)) / eps``,
    and ⊥ otherwise. At distance 0 the release probability is
    ``0.5 * exp(-ln(1/(2 delta))) = delta``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1) for the distance test")
    cutoff = math.log(1.0 / (2.0 * delta)) / eps

    def evaluate(db, s):
        d_hat = distance_fn(db) + noise.laplace(1.0 / eps)
        if d_hat > cutoff:
            return answer_fn(db) + noise.laplace(float(s) / eps)
        return BOTTOM

    return PtrStage(evaluate, eps, delta)
