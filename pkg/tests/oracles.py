"""Reference computations that share no code with the package.

They are slow and only valid on small inputs, which is the point: each one
computes the same quantity as a package function by a different route.
"""

from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np


def rr_table(eps: float, delta: float) -> tuple[list[float], list[float]]:
    """Randomized-response output laws on inputs 0 and 1, written out directly."""
    e = math.exp(eps)
    p0 = [delta, (1 - delta) * e / (1 + e), (1 - delta) / (1 + e), 0.0]
    p1 = [0.0, (1 - delta) / (1 + e), (1 - delta) * e / (1 + e), delta]
    return p0, p1


def sequence_probs(eps: list[float], delta: list[float], length: int) -> dict[tuple, tuple[float, float]]:
    """Pr_0 and Pr_1 of every output sequence of the given length, by explicit products."""
    tables = [rr_table(eps[i], delta[i]) for i in range(length)]
    out = {}
    for seq in itertools.product(range(4), repeat=length):
        a = b = 1.0
        for i, s in enumerate(seq):
            a *= tables[i][0][s]
            b *= tables[i][1][s]
        out[seq] = (a, b)
    return out


def _subset_sums(w: np.ndarray) -> np.ndarray:
    """sums[mask] = sum of w[j] over bits j set in mask."""
    sums = np.zeros(1 << len(w))
    for j, wj in enumerate(w):
        step = 1 << j
        sums[step : 2 * step] = sums[:step] + wj
    return sums


def antichain_opt_delta(stops, eps, delta, targets) -> float:
    """Brute-force maximum over prefix-disjoint families for stop depths within {1, 2}.

    Enumerates every subset of the depth-1 nodes together with every subset of
    the depth-2 nodes (up to 2^4 * 2^16 pairs) and keeps the feasible ones.
    """
    stops = list(stops)
    assert set(stops) <= {1, 2}, "oracle handles depths 1 and 2 only"
    weights = {}
    for k, t in zip(stops, targets):
        probs = sequence_probs(list(eps), list(delta), k)
        seqs = sorted(probs)
        weights[k] = (seqs, np.array([probs[s][0] - math.exp(t) * probs[s][1] for s in seqs]))
    if len(stops) == 1:
        sums = _subset_sums(weights[stops[0]][1])
        return float(sums.max())
    seqs1, w1 = weights[1]
    seqs2, w2 = weights[2]
    sums1 = _subset_sums(w1)
    sums2 = _subset_sums(w2)
    child_mask = []
    for a in seqs1:
        m = 0
        for j, s in enumerate(seqs2):
            if s[0] == a[0]:
                m |= 1 << j
        child_mask.append(m)
    all2 = np.arange(1 << 16)
    best = -math.inf
    for m1 in range(1 << 4):
        forbidden = 0
        for i in range(4):
            if m1 >> i & 1:
                forbidden |= child_mask[i]
        ok = (all2 & forbidden) == 0
        best = max(best, sums1[m1] + sums2[ok].max())
    return float(best)


def brute_force_single_level(eps: float, delta: float, target: float) -> float:
    """max over the 16 subsets Q of {0,1,2,3} of Pr0(Q) - e^target Pr1(Q)."""
    p0, p1 = rr_table(eps, delta)
    best = 0.0
    for r in range(5):
        for q in itertools.combinations(range(4), r):
            best = max(best, sum(p0[i] for i in q) - math.exp(target) * sum(p1[i] for i in q))
    return best


def homogeneous_delta_mp(k: int, eps: float, eps_prime: float, dps: int = 50) -> float:
    """The homogeneous pure-DP delta in 50-digit arithmetic."""
    with mpmath.workdps(dps):
        e = mpmath.mpf(eps)
        ep = mpmath.mpf(eps_prime)
        total = mpmath.mpf(0)
        for j in range(k + 1):
            term = mpmath.exp(j * e) - mpmath.exp(ep) * mpmath.exp((k - j) * e)
            if term > 0:
                total += mpmath.binomial(k, j) * term
        return float(total / (1 + mpmath.exp(e)) ** k)


def kov_composition_delta(k: int, eps: float, delta: float, eps_prime: float, dps: int = 50) -> float:
    """Optimal delta for k-fold composition of (eps, delta)-DP steps at target eps_prime.

    delta' = 1 - (1 - delta)^k (1 - sum_l C(k,l) max(0, e^{(k-l)eps} - e^{eps'} e^{l eps}) / (1+e^eps)^k).
    """
    with mpmath.workdps(dps):
        e = mpmath.mpf(eps)
        ep = mpmath.mpf(eps_prime)
        s = mpmath.mpf(0)
        for l in range(k + 1):
            term = mpmath.exp((k - l) * e) - mpmath.exp(ep) * mpmath.exp(l * e)
            if term > 0:
                s += mpmath.binomial(k, l) * term
        pure = s / (1 + mpmath.exp(e)) ** k
        return float(1 - (1 - mpmath.mpf(delta)) ** k * (1 - pure))


def laplace_tail(scale: float, t: float) -> float:
    """Pr(Lap(scale) > t)."""
    if t >= 0:
        return 0.5 * math.exp(-t / scale)
    return 1.0 - 0.5 * math.exp(t / scale)
