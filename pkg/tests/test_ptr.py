import math

import pytest

from odpacct.core import BOTTOM, BOTTOM_CELL, VALUE_CELL, DpGuarantee, odp_to_dp
from odpacct.ledger import Budget, charge, new_ledger
from odpacct.noise import NoiseSource
from odpacct.ptr import (
    PtrStage,
    case_charge,
    distance_test_stage,
    iqr_single_odp,
    ptr_stage_odp,
    run_ptr_pair,
)

EPS, DELTA = 0.1, 1e-6


def const_stage(value, eps=EPS, delta=DELTA):
    return PtrStage(lambda db, s: value, eps, delta)


def test_stage_odp():
    g = ptr_stage_odp(EPS, DELTA)
    assert g.as_dict() == {VALUE_CELL: pytest.approx(0.2), BOTTOM_CELL: pytest.approx(0.1)}
    assert g.delta == DELTA
    assert odp_to_dp(g) == DpGuarantee(2 * EPS, DELTA)
    assert g.epsilon(BOTTOM_CELL) == g.epsilon(VALUE_CELL) / 2


def test_iqr_single():
    g = iqr_single_odp(EPS, DELTA)
    assert g.epsilon(VALUE_CELL) == pytest.approx(0.3)
    assert g.epsilon(BOTTOM_CELL) == pytest.approx(0.2)
    assert g.delta == DELTA
    assert odp_to_dp(g) == DpGuarantee(g.epsilon(VALUE_CELL), DELTA)
    assert odp_to_dp(g).epsilon - g.epsilon(BOTTOM_CELL) == pytest.approx(EPS, abs=1e-15)


def test_case_1():
    out = run_ptr_pair(const_stage(7.0), const_stage(9.0), None, 1, 1)
    assert (out.result, out.case_id) == (7.0, 1)
    assert out.charged == pytest.approx((0.2, 1e-6))


def test_case_2():
    out = run_ptr_pair(const_stage(BOTTOM), const_stage(7.0), None, 1, 1)
    assert (out.result, out.case_id) == (7.0, 2)
    assert out.charged == pytest.approx((0.3, 2e-6))


def test_case_3():
    out = run_ptr_pair(const_stage(BOTTOM), const_stage(BOTTOM), None, 1, 1)
    assert out.result is BOTTOM and out.case_id == 3
    assert out.charged == pytest.approx((0.2, 2e-6))


def test_stage_two_not_run_after_a_value():
    calls = []
    s2 = PtrStage(lambda db, s: calls.append(s) or 1.0, EPS, DELTA)
    run_ptr_pair(const_stage(3.0), s2, None, 1, 1)
    assert calls == []


def test_cases_one_and_three_save_eps_over_dp_analysis():
    dp_eps = odp_to_dp(iqr_single_odp(EPS, DELTA)).epsilon
    for case in (1, 3):
        assert dp_eps - case_charge(case, EPS, DELTA)[0] == pytest.approx(EPS)


def test_bottom_proposal_short_circuits():
    stage = PtrStage(lambda db, s: 1 / 0, EPS, DELTA)
    assert stage(None, BOTTOM) is BOTTOM


def test_mismatched_stages_rejected():
    with pytest.raises(ValueError):
        run_ptr_pair(const_stage(1.0), const_stage(1.0, eps=0.2), None, 1, 1)


def test_randomized_order_needs_noise():
    with pytest.raises(ValueError):
        run_ptr_pair(const_stage(1.0), const_stage(2.0), None, 1, 1, randomize_order=True)


def test_randomized_order_swaps_with_the_coin():
    first = run_ptr_pair(const_stage(1.0), const_stage(2.0), None, 1, 1, NoiseSource.zero(0.2), randomize_order=True)
    swapped = run_ptr_pair(const_stage(1.0), const_stage(2.0), None, 1, 1, NoiseSource.zero(0.8), randomize_order=True)
    assert (first.result, first.swapped) == (1.0, False)
    assert (swapped.result, swapped.swapped) == (2.0, True)


def test_randomized_order_is_fair():
    n = 4000
    noise = NoiseSource(5)
    swaps = sum(
        run_ptr_pair(const_stage(1.0), const_stage(2.0), None, 1, 1, noise, randomize_order=True).swapped
        for _ in range(n)
    )
    assert abs(swaps / n - 0.5) < 4 * math.sqrt(0.25 / n)


@pytest.mark.parametrize(
    "r1, r2",
    [(5.0, None), (BOTTOM, 5.0), (BOTTOM, BOTTOM)],
)
def test_ledger_path_totals_bounded(r1, r2):
    # Per-stage ODP charges through the ledger never exceed (3 eps, 2 delta).
    g = ptr_stage_odp(EPS, DELTA)
    s = new_ledger(Budget(3 * EPS, 2 * DELTA))
    s = charge(s, g, VALUE_CELL if r1 is not BOTTOM else BOTTOM_CELL)
    if r1 is BOTTOM:
        s = charge(s, g, VALUE_CELL if r2 is not BOTTOM else BOTTOM_CELL)
    spent = (3 * EPS - s.eps_remaining, 2 * DELTA - s.delta_remaining)
    out = run_ptr_pair(const_stage(r1), const_stage(r2 if r2 is not None else 0.0), None, 1, 1)
    assert spent == pytest.approx(out.charged, abs=1e-15)
    assert spent[0] <= 3 * EPS + 1e-15 and spent[1] <= 2 * DELTA + 1e-21


def test_distance_stage_zero_noise():
    far = distance_test_stage(lambda db: 1e6, lambda db: 4.0, 0.5, 1e-3, NoiseSource.zero())
    near = distance_test_stage(lambda db: 0, lambda db: 4.0, 0.5, 1e-3, NoiseSource.zero())
    assert far(None, 1.0) == 4.0
    assert near(None, 1.0) is BOTTOM
    assert far(None, BOTTOM) is BOTTOM


@pytest.mark.parametrize("delta", [0.0, 1.0])
def test_distance_stage_rejects_degenerate_delta(delta):
    with pytest.raises(ValueError):
        distance_test_stage(lambda db: 0, lambda db: 0, 1.0, delta, NoiseSource(0))


def test_distance_stage_release_rate_at_zero_distance():
    eps, delta, n = 1.0, 0.01, 100_000
    stage = distance_test_stage(lambda db: 0, lambda db: 0.0, eps, delta, NoiseSource(11))
    released = sum(stage(None, 1.0) is not BOTTOM for _ in range(n))
    assert released / n <= delta + 3 * math.sqrt(delta * (1 - delta) / n)
