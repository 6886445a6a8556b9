"""Independent reference computations used by the test-suite.

Nothing here calls into ``retainer``; each function recomputes a quantity
by the most direct route available (exact rationals, enumeration, LP).
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog


def erlang_factorial(rho, c: int) -> Fraction:
    """Erlang loss from the factorial sum, in exact rational arithmetic."""
    r = Fraction(rho)
    terms = [r**i / math.factorial(i) for i in range(c + 1)]
    return terms[c] / sum(terms)


def busy_factorial(rho, c: int) -> list[Fraction]:
    r = Fraction(rho)
    terms = [r**i / math.factorial(i) for i in range(c + 1)]
    total = sum(terms)
    return [t / total for t in terms]


def linear_min_pool(rho: float, p_max: float) -> int:
    c = 0
    while float(erlang_factorial(rho, c)) > p_max:
        c += 1
    return c


def routing_by_subsets(lams, mus, caps) -> float:
    """Min-max intensity as the worst ratio lambda(S) / mu(N(S)) over task subsets S."""
    n = len(lams)
    best = 0.0
    for r in range(1, n + 1):
        for subset in itertools.combinations(range(n), r):
            s = set(subset)
            supply = sum(mu for mu, cap in zip(mus, caps) if cap & s)
            demand = sum(lams[j] for j in subset)
            if supply == 0:
                return math.inf
            best = max(best, demand / supply)
    return best


def routing_by_lp(lams, mus, caps) -> float:
    """Same program as an LP in t = 1/rho: maximise t s.t. sum_i a_ij >= lam_j t, sum_j a_ij <= mu_i."""
    pairs = [(i, j) for i, cap in enumerate(caps) for j in sorted(cap)]
    nv = len(pairs) + 1
    cost = np.zeros(nv)
    cost[-1] = -1.0
    a_ub, b_ub = [], []
    for j, lam in enumerate(lams):
        row = np.zeros(nv)
        for k, (_, jj) in enumerate(pairs):
            if jj == j:
                row[k] = -1.0
        row[-1] = lam
        a_ub.append(row)
        b_ub.append(0.0)
    for i, mu in enumerate(mus):
        row = np.zeros(nv)
        for k, (ii, _) in enumerate(pairs):
            if ii == i:
                row[k] = 1.0
        a_ub.append(row)
        b_ub.append(mu)
    res = linprog(cost, A_ub=np.array(a_ub), b_ub=b_ub, bounds=[(0, None)] * nv, method="highs")
    assert res.status == 0
    return 1.0 / res.x[-1]


def loss_curve(rho: float, c_max: int) -> np.ndarray:
    """Erlang loss for every c in 0..c_max from log factorial terms and a running log-sum-exp."""
    i = np.arange(c_max + 1)
    log_terms = i * math.log(rho) - np.array([math.lgamma(k + 1) for k in i])
    return np.exp(log_terms - np.logaddexp.accumulate(log_terms))


def total_cost_scan(rho: float, s: float, c_task: float) -> int:
    """Exhaustive minimiser of c_task * pi(c) + s * (c - rho (1 - pi(c))).

    Any c beyond rho + c_task / s costs more than the empty pool, so the scan
    range is finite.  Ties go to the smaller c.
    """
    c_max = math.ceil(rho + c_task / s) + 2
    loss = loss_curve(rho, c_max)
    c = np.arange(c_max + 1)
    cost = c_task * loss + s * (c - rho * (1 - loss))
    return int(np.argmin(cost))
