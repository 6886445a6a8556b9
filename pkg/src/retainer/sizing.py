"""Choosing retainer pool sizes.

Constraint modes return the smallest pool meeting a miss-probability or
expected-wait target; :func:`optimize_total_cost` trades missed tasks against
wages.  Shared pools and precruitment rates are sized here as well.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .erlang import DomainError, RetainerParams, erlang_loss, total_cost, _check_rho

__all__ = [
    "SizingResult",
    "BufferRow",
    "BufferReport",
    "min_pool_for_miss_prob",
    "min_pool_for_wait",
    "optimize_total_cost",
    "shared_pool_size",
    "buffer_scaling_report",
    "precruit_rate",
]

MISS = "miss-probability"
WAIT = "wait-time"
COST = "cost"


@dataclass
class SizingResult:
    c_star: int
    achieved_loss: float
    achieved_wait: float | None = None
    objective: float | None = None
    binding_constraint: str = MISS

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SizingResult":
        return cls(**d)


def _smallest_pool(rho: float, p_max: float) -> int:
    if erlang_loss(rho, 0) <= p_max:
        return 0
    # bracket by doubling from the knee at c ~ rho, then bisect on the
    # strictly decreasing loss
    lo, hi = 0, max(1, math.ceil(rho))
    while erlang_loss(rho, hi) > p_max:
        lo, hi = hi, 2 * hi
    # invariant: loss(lo) > p_max >= loss(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if erlang_loss(rho, mid) <= p_max:
            hi = mid
        else:
            lo = mid
    return hi


def min_pool_for_miss_prob(rho: float, p_max: float, mu: float | None = None) -> SizingResult:
    """Smallest ``c`` with ``erlang_loss(rho, c) <= p_max``.

    Passing ``mu`` also fills in the expected wait at the chosen size.
    """
    rho = _check_rho(rho)
    if not (0.0 < p_max <= 1.0):
        raise DomainError(f"p_max must lie in (0, 1], got {p_max}")
    c = _smallest_pool(rho, p_max)
    loss = erlang_loss(rho, c)
    wait = loss / mu if mu else None
    return SizingResult(c, loss, wait, None, MISS)


def min_pool_for_wait(lam: float, mu: float, w_max: float) -> SizingResult:
    """Smallest ``c`` whose expected wait ``pi(c) / mu`` is at most ``w_max`` seconds."""
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    if not w_max > 0:
        raise DomainError(f"w_max must be > 0, got {w_max}")
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    rho = lam / mu
    if lam == 0:
        # no task ever arrives, so none waits
        return SizingResult(0, erlang_loss(0.0, 0), 0.0, None, WAIT)
    p_max = mu * w_max
    c = 0 if p_max >= 1.0 else _smallest_pool(rho, p_max)
    loss = erlang_loss(rho, c)
    return SizingResult(c, loss, loss / mu, None, WAIT)


def optimize_total_cost(params: RetainerParams, *, per_time: bool = False) -> SizingResult:
    """Pool size minimising :func:`retainer.erlang.total_cost`.

    Scans upward from ``c = 0``.  Since the idle count is at least ``c - rho``,
    the scan stops as soon as ``s (c - rho)`` exceeds the best objective found.
    Ties go to the smaller pool.
    """
    rho = params.rho
    s = params.s
    if s == 0:
        if params.c_task == 0 or rho == 0:
            return SizingResult(0, erlang_loss(rho, 0), 1.0 / params.mu, total_cost(params, 0, per_time=per_time), COST)
        warnings.warn("zero wage with a positive miss cost: the optimal pool is unbounded", RuntimeWarning)
        c = _smallest_pool(rho, np.finfo(float).eps)
        loss = erlang_loss(rho, c)
        return SizingResult(c, loss, loss / params.mu, total_cost(params, c, per_time=per_time), COST)

    best_c, best = 0, total_cost(params, 0, per_time=per_time)
    c = 1
    while s * (c - rho) <= best:
        v = total_cost(params, c, per_time=per_time)
        if v < best:
            best_c, best = c, v
        c += 1
    loss = erlang_loss(rho, best_c)
    return SizingResult(best_c, loss, loss / params.mu, best, COST)


def shared_pool_size(rho: float, k: int, p_max: float) -> SizingResult:
    """Size one pool shared by ``k`` requesters, each bringing traffic ``rho``."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k}")
    return min_pool_for_miss_prob(int(k) * _check_rho(rho), p_max)


@dataclass
class BufferRow:
    k: int
    pool: int
    epsilon: float
    buffer: float
    flagged: bool


@dataclass
class BufferReport:
    rho: float
    p_max: float
    rows: list[BufferRow]
    slope: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BufferReport":
        d = dict(d)
        d["rows"] = [BufferRow(**r) for r in d["rows"]]
        return cls(**d)


def buffer_scaling_report(rho: float, p_max: float, k_values: Sequence[int]) -> BufferReport:
    """Spare-capacity fraction needed as ``k`` requesters share one pool.

    For each ``k`` the merged pool (traffic ``k rho``) is sized exactly; the
    buffer fraction is ``epsilon = pool / (k rho) - 1``, i.e. the smallest
    ``epsilon`` for which the integer pool ``(1 + epsilon) k rho`` meets
    ``p_max``.  Rows with ``epsilon`` outside ``(0, 1)`` are flagged, and the
    log-log slope of ``epsilon`` against ``k`` is fitted over the rows with
    ``epsilon > 0``.
    """
    rho = _check_rho(rho)
    if rho <= 0:
        raise DomainError("buffer scaling needs rho > 0")
    rows = []
    for k in k_values:
        pool = shared_pool_size(rho, k, p_max).c_star
        load = k * rho
        eps = pool / load - 1.0
        rows.append(BufferRow(int(k), pool, eps, pool - load, not (0.0 < eps < 1.0)))
    pts = [(math.log(r.k), math.log(r.epsilon)) for r in rows if r.epsilon > 0]
    slope = None
    if len({x for x, _ in pts}) >= 2:
        x, y = np.array(pts).T
        slope = float(np.polyfit(x, y, 1)[0])
    return BufferReport(rho, p_max, rows, slope)


def precruit_rate(lam: float, beta: float) -> float:
    """Workers to precruit per second: the task rate plus ``beta`` Poisson standard deviations."""
    if lam < 0 or beta < 0:
        raise DomainError("lambda and beta must be >= 0")
    return lam + beta * math.sqrt(lam)
