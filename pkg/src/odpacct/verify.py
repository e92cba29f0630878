"""Monte-Carlo checks of (eps, delta) claims, for single mechanisms and for whole composition runs.

The harness estimates Pr(M(x0) in S) and Pr(M(x1) in S) for a user-chosen
event S and flags a claim only when the one-sided 99% Clopper-Pearson bounds
make the violation statistically certain. It validates proofs; it does not
hunt for worst-case events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import beta

from .core import BOTTOM, BOTTOM_CELL, VALUE_CELL, DpGuarantee, OdpGuarantee, dp_to_odp
from .iterative import rr_sample
from .ledger import Budget, ChargeRejected, Decision, LedgerState, admit, charge, new_ledger
from .mechanisms import SvtParams, svt_odp_guarantee, svt_run, toy_guarantee, toy_mechanism
from .noise import NoiseSource

MIN_TRIALS = 1000
CONFIDENCE = 0.99


# -- single-event estimation ---------------------------------------------------


@dataclass(frozen=True)
class EventProbe:
    """A fixed output event S, given by its indicator.

    With ``vectorized`` the classifier maps an array of outputs to a boolean
    array, which is what batched mechanisms need.
    """

    classifier: Callable[[Any], Any]
    label: str = ""
    vectorized: bool = False


@dataclass(frozen=True)
class EventEstimate:
    hits0: int
    hits1: int
    trials: int
    label: str = ""

    @property
    def p0_hat(self) -> float:
        return self.hits0 / self.trials

    @property
    def p1_hat(self) -> float:
        return self.hits1 / self.trials

    @property
    def ci0(self) -> tuple[float, float]:
        return clopper_pearson(self.hits0, self.trials)

    @property
    def ci1(self) -> tuple[float, float]:
        return clopper_pearson(self.hits1, self.trials)


@dataclass(frozen=True)
class DistinguishResult:
    p0_hat: float
    p1_hat: float
    ci0: tuple[float, float]
    ci1: tuple[float, float]
    epsilon_claimed: float
    delta_claimed: float
    verdict: str  # "consistent" or "violated"
    trials: int
    label: str = ""

    def to_json_obj(self) -> dict:
        return {
            "label": self.label,
            "trials": self.trials,
            "p0_hat": self.p0_hat,
            "p1_hat": self.p1_hat,
            "ci0": list(self.ci0),
            "ci1": list(self.ci1),
            "epsilon_claimed": self.epsilon_claimed,
            "delta_claimed": self.delta_claimed,
            "verdict": self.verdict,
        }


def clopper_pearson(k: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """One-sided exact bounds: each of lower and upper holds with probability ``confidence``."""
    alpha = 1.0 - confidence
    lo = 0.0 if k == 0 else float(beta.ppf(alpha, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(confidence, k + 1, n - k))
    return lo, hi


def _count_hits(mechanism, db, probe: EventProbe, trials: int, noise: NoiseSource, batched: bool) -> int:
    if batched:
        outputs = mechanism(db, trials, noise)
        if probe.vectorized:
            hits = np.asarray(probe.classifier(outputs), dtype=bool)
        else:
            hits = np.fromiter((bool(probe.classifier(o)) for o in outputs), dtype=bool, count=trials)
        if hits.shape != (trials,):
            raise ValueError(f"batched mechanism returned {hits.shape[0] if hits.ndim else 0} outputs, expected {trials}")
        return int(hits.sum())
    return sum(bool(probe.classifier(mechanism(db, noise))) for _ in range(trials))


def estimate_event(
    mechanism: Callable,
    input0,
    input1,
    probe: EventProbe,
    trials: int,
    seed: int,
    *,
    batched: bool = False,
) -> EventEstimate:
    """Estimate the event probability under each input from independent runs.

    ``mechanism(db, noise)`` returns one output; with ``batched`` it is
    called as ``mechanism(db, trials, noise)`` and returns ``trials`` outputs.
    """
    if isinstance(trials, bool) or int(trials) != trials or trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")
    trials = int(trials)
    n0, n1 = NoiseSource.spawn(seed, 2)
    h0 = _count_hits(mechanism, input0, probe, trials, n0, batched)
    h1 = _count_hits(mechanism, input1, probe, trials, n1, batched)
    return EventEstimate(h0, h1, trials, probe.label)


def check_dp_bound(est: EventEstimate, eps: float, delta: float) -> DistinguishResult:
    """Flag a violation iff, in either direction, lower(p_a) > e^eps upper(p_b) + delta."""
    lo0, hi0 = est.ci0
    lo1, hi1 = est.ci1
    factor = math.exp(eps)
    violated = lo0 > factor * hi1 + delta or lo1 > factor * hi0 + delta
    return DistinguishResult(
        est.p0_hat,
        est.p1_hat,
        (lo0, hi0),
        (lo1, hi1),
        float(eps),
        float(delta),
        "violated" if violated else "consistent",
        est.trials,
        est.label,
    )


# -- reference mechanisms ------------------------------------------------------
# Each entry: batched mechanism (db, trials, noise) -> outputs, the two
# neighboring inputs, a vectorized event, and the claimed (eps, delta).


@dataclass(frozen=True)
class VerifyCase:
    name: str
    mechanism: Callable
    input0: Any
    input1: Any
    probe: EventProbe
    eps: float
    delta: float


def _laplace_batch(scale: float):
    def mech(f_value, trials, noise):
        return f_value + np.asarray(noise.laplace(scale, size=trials))

    return mech


def _toy_batch(eps: float):
    def mech(f_value, trials, noise):
        heads = np.asarray(noise.uniform(trials)) < 0.5
        vals = f_value + np.asarray(noise.laplace(1.0 / eps, size=trials))
        return np.where(heads, vals, np.nan)  # nan encodes ⊥

    return mech


def _svt_batch(params: SvtParams, threshold: float):
    # Two queries; the event is "first query answers ⊤".
    def mech(q_first, trials, noise):
        rho = np.asarray(noise.laplace(params.threshold_scale, size=trials))
        nu = np.asarray(noise.laplace(params.query_scale, size=trials))
        return q_first + nu >= threshold + rho

    return mech


def _rr_batch(eps: float, delta: float):
    def mech(bit, trials, noise):
        return np.asarray(rr_sample(eps, delta, bit, noise, size=trials))

    return mech


def reference_case(name: str, eps: float = 1.0, delta: float = 0.0) -> VerifyCase:
    """Known mechanisms for the ``verify`` command; ``broken`` claims eps but uses half the Laplace scale."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if name == "laplace":
        return VerifyCase(name, _laplace_batch(1.0 / eps), 0.0, 1.0,
                          EventProbe(lambda o: o > 0.0, "output > 0", True), eps, 0.0)
    if name == "broken":
        return VerifyCase(name, _laplace_batch(1.0 / (2.0 * eps)), 0.0, 1.0,
                          EventProbe(lambda o: o > 1.0, "output > 1", True), eps, 0.0)
    if name == "toy":
        return VerifyCase(name, _toy_batch(eps), 0.0, 1.0,
                          EventProbe(lambda o: o > 0.0, "output > 0 (⊥ excluded)", True), eps, 0.0)
    if name == "svt":
        # eps1 + eps2 = eps; one ⊤ costs at most eps.
        params = SvtParams(eps / 2.0, eps / 2.0, 1)
        return VerifyCase(name, _svt_batch(params, 0.0), 0.0, 1.0,
                          EventProbe(lambda o: o, "first answer is ⊤", True), eps, 0.0)
    if name == "rr":
        d = delta if delta > 0 else 1e-3
        return VerifyCase(name, _rr_batch(eps, d), 0, 1,
                          EventProbe(lambda o: o == 0, "output is 0", True), eps, d)
    raise ValueError(f"unknown mechanism {name!r}")


def verify_mechanism(name: str, trials: int, seed: int, eps: float = 1.0, delta: float = 0.0) -> DistinguishResult:
    case = reference_case(name, eps, delta)
    est = estimate_event(case.mechanism, case.input0, case.input1, case.probe, trials, seed, batched=True)
    return check_dp_bound(est, case.eps, case.delta)


# -- composition experiment ----------------------------------------------------


@dataclass(frozen=True)
class Round:
    """One adversary move: neighboring inputs, a declared guarantee and the mechanism.

    ``mechanism(db, noise)`` returns an output and ``cell_of(output)`` maps it
    to a cell of ``guarantee``.
    """

    input0: Any
    input1: Any
    guarantee: OdpGuarantee
    mechanism: Callable[[Any, NoiseSource], Any]
    cell_of: Callable[[Any], Any]
    label: str = ""


Strategy = Callable[[tuple, LedgerState], "Round | None"]


@dataclass(frozen=True)
class View:
    outputs: tuple
    ledger: LedgerState = field(repr=False)


def composition_experiment(
    strategy: Strategy,
    budget: Budget,
    b: int,
    rounds: int,
    noise: NoiseSource,
) -> View:
    """Play the adaptive composition game on side ``b`` for at most ``rounds`` rounds.

    Each round the strategy sees the outputs so far and the ledger and picks a
    Round, or None to stop. The mechanism runs on input ``b``, its output is
    classified into a cell and that cell is charged. The adversary's own
    randomness must come from ``noise`` so that paired seeds give paired
    views.
    """
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    if rounds < 1:
        raise ValueError("rounds must be positive")
    state = new_ledger(budget)
    outputs: list = []
    for _ in range(rounds):
        move = strategy(tuple(outputs), state)
        if move is None:
            break
        db = move.input0 if b == 0 else move.input1
        if admit(state, move.guarantee) is Decision.HALT:
            raise ChargeRejected(f"strategy chose {move.label or 'a mechanism'} that does not fit the budget")
        out = move.mechanism(db, noise)
        state = charge(state, move.guarantee, move.cell_of(out), move.label)
        outputs.append(out)
    return View(tuple(outputs), state)


def composition_check(
    strategy_factory: Callable[[NoiseSource], Strategy],
    budget: Budget,
    event: Callable[[View], bool],
    runs: int,
    seed: int,
    rounds: int = 50,
    label: str = "",
) -> DistinguishResult:
    """Estimate Pr(V^0 in S) and Pr(V^1 in S) and check them against the total budget.

    Run r on both sides uses the same seed, so the adversary's coins are
    paired and the two views differ only through database-dependent sampling.
    """
    if runs < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} runs")
    hits = [0, 0]
    for r in range(runs):
        for b in (0, 1):
            noise = NoiseSource([seed, r])
            view = composition_experiment(strategy_factory(noise), budget, b, rounds, noise)
            hits[b] += bool(event(view))
    est = EventEstimate(hits[0], hits[1], runs, label)
    return check_dp_bound(est, budget.eps_total, budget.delta_total)


# -- scripted adversaries ------------------------------------------------------


def _toy_round(eps: float) -> Round:
    return Round(
        0.0, 1.0, toy_guarantee(eps),
        lambda f, noise: toy_mechanism(f, eps, noise),
        lambda o: BOTTOM_CELL if o is BOTTOM else VALUE_CELL,
        "toy",
    )


def toy_until_exhausted(eps: float = 0.5) -> Callable[[NoiseSource], Strategy]:
    """Keep invoking the coin-flip mechanism while it is admitted."""
    rnd = _toy_round(eps)

    def factory(noise):
        def strategy(outputs, state):
            return rnd if admit(state, rnd.guarantee) is Decision.CONT else None

        return strategy

    return factory


def svt_then_laplace(eps_total: float = 1.0, c: int = 3, n_queries: int = 6) -> Callable[[NoiseSource], Strategy]:
    """One SVT run costing half the budget at worst, then Laplace releases with whatever is left."""
    params = SvtParams(eps_total / 4.0, eps_total / 4.0, c)
    g_svt = svt_odp_guarantee(params)
    lap_eps = eps_total / 4.0
    g_lap = dp_to_odp(DpGuarantee(lap_eps, 0.0), [VALUE_CELL])
    # Queries sit near the threshold so that c' varies from run to run.
    queries = [0.0] * n_queries

    def svt_mech(shift, noise):
        return svt_run(params, (q + shift for q in queries), 0.0, noise)

    svt_round = Round(0.0, 1.0, g_svt, svt_mech, lambda t: t.top_count, "svt")
    lap_round = Round(0.0, 1.0, g_lap, lambda f, noise: f + noise.laplace(1.0 / lap_eps), lambda o: VALUE_CELL, "laplace")

    def factory(noise):
        def strategy(outputs, state):
            if not outputs:
                return svt_round
            return lap_round if admit(state, g_lap) is Decision.CONT else None

        return strategy

    return factory


def adaptive_rr_mix(eps: float = 0.25, delta: float = 1e-3) -> Callable[[NoiseSource], Strategy]:
    """Randomized response with delta > 0 and the coin-flip mechanism, chosen from the previous output.

    The adversary also flips its own coin each round to pick the mechanism,
    which exercises the paired-randomness requirement.
    """
    g_rr = dp_to_odp(DpGuarantee(eps, delta), [0, 1, 2, 3])
    rr_round = Round(0, 1, g_rr, lambda bit, noise: int(rr_sample(eps, delta, bit, noise)), lambda o: o, "rr")
    toy = _toy_round(eps)

    def factory(noise):
        def strategy(outputs, state):
            coin = noise.uniform() < 0.5
            prefer_rr = (outputs and outputs[-1] in (0, 1)) or coin
            for rnd in ((rr_round, toy) if prefer_rr else (toy, rr_round)):
                if admit(state, rnd.guarantee) is Decision.CONT:
                    return rnd
            return None

        return strategy

    return factory


def broken_canary(eps: float = 1.0) -> Callable[[NoiseSource], Strategy]:
    """Single Laplace round declared eps-DP but run at half the required scale."""
    g = dp_to_odp(DpGuarantee(eps, 0.0), [VALUE_CELL])
    rnd = Round(0.0, 1.0, g, lambda f, noise: f + noise.laplace(1.0 / (2.0 * eps)), lambda o: VALUE_CELL, "broken")

    def factory(noise):
        def strategy(outputs, state):
            return None if outputs else rnd

        return strategy

    return factory


def _released_values(view: View) -> list[float]:
    return [o for o in view.outputs if isinstance(o, (float, np.floating))]


def toy_event(view: View) -> bool:
    """At least one released value above 1."""
    return any(v > 1.0 for v in _released_values(view))


def svt_event(view: View) -> bool:
    """SVT answered ⊤ at least once and the first Laplace release is above 1."""
    svt = view.outputs[0]
    vals = _released_values(view)
    return svt.top_count >= 1 and bool(vals) and vals[0] > 1.0


def rr_event(view: View) -> bool:
    """Every randomized-response output is 0 or 1, and there was at least one."""
    rr = [o for o in view.outputs if isinstance(o, int)]
    return bool(rr) and all(o in (0, 1) for o in rr)


def canary_event(view: View) -> bool:
    return bool(view.outputs) and view.outputs[0] > 1.0


SCRIPTED_STRATEGIES: dict[str, tuple[Callable[[], Callable], Callable[[View], bool], Budget]] = {
    "toy": (toy_until_exhausted, toy_event, Budget(1.0, 0.0)),
    "svt+laplace": (svt_then_laplace, svt_event, Budget(1.0, 0.0)),
    "rr+toy": (adaptive_rr_mix, rr_event, Budget(1.0, 4e-3)),
}


def run_scripted(name: str, runs: int, seed: int) -> DistinguishResult:
    make, event, budget = SCRIPTED_STRATEGIES[name]
    return composition_check(make(), budget, event, runs, seed, label=name)


def run_canary(runs: int, seed: int) -> DistinguishResult:
    return composition_check(broken_canary(), Budget(1.0, 0.0), canary_event, runs, seed, label="broken")
