"""Closed-form quantities of the M/M/c/c retainer pool.

Tasks arrive at rate ``lambda``; every task that takes a worker out of the
pool triggers one replacement request that completes at rate ``mu``.  The
pool therefore behaves as an Erlang loss system with ``c`` servers and
offered load ``rho = lambda / mu``.  All rates are per second.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

__all__ = [
    "DomainError",
    "RetainerParams",
    "PoolMetrics",
    "CombinedLoss",
    "ChernoffEstimate",
    "erlang_loss",
    "log_erlang_loss",
    "busy_distribution",
    "expected_busy",
    "expected_idle",
    "expected_wait",
    "retainer_cost_rate",
    "total_cost",
    "approx_loss",
    "combined_pool_loss",
    "chernoff_loss_estimate",
    "abandonment_adjusted_loss",
    "pool_metrics",
]


class DomainError(ValueError):
    """An argument lies outside the domain of a queueing formula."""


def _check_rho(rho) -> float:
    try:
        rho = float(rho)
    except (TypeError, ValueError):
        raise DomainError(f"rho must be a real number, got {rho!r}") from None
    if not math.isfinite(rho) or rho < 0:
        raise DomainError(f"rho must be finite and >= 0, got {rho}")
    return rho


def _check_c(c) -> int:
    if isinstance(c, bool):
        raise DomainError("pool size must be an integer, got bool")
    try:
        c = operator.index(c)
    except TypeError:
        raise DomainError(f"pool size must be an integer, got {c!r}") from None
    if c < 0:
        raise DomainError(f"pool size must be >= 0, got {c}")
    return c


@dataclass(frozen=True)
class RetainerParams:
    """Rates, pool size and prices of a single retainer system.

    ``r_mean`` is the mean alert-response time of a recalled worker; it only
    matters to the simulator (re-alert timeouts and latency defaults).
    """

    lam: float
    mu: float
    c: int = 0
    s: float = 0.0
    c_task: float = 0.0
    a: float = 0.0
    alpha: float = 3.0
    r_mean: float = 1.36

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError(f"mu must be finite and > 0, got {self.mu}")
        _check_c(self.c)
        if not math.isfinite(self.lam / self.mu):
            raise DomainError("rho = lambda/mu is not finite")
        if not (0.0 <= self.a <= 1.0):
            raise DomainError(f"abandonment fraction must lie in [0, 1], got {self.a}")
        if self.s < 0 or self.c_task < 0:
            raise DomainError("wage and miss cost must be >= 0")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not self.r_mean > 0:
            raise DomainError(f"r_mean must be > 0, got {self.r_mean}")

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RetainerParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass
class PoolMetrics:
    """Steady-state figures for one pool size."""

    rho: float
    c: int
    loss_prob: float
    busy_dist: list[float] = field(repr=False)
    expected_busy: float
    expected_idle: float
    expected_wait: float
    retainer_cost_rate: float
    total_cost: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PoolMetrics":
        return cls(**d)


def erlang_loss(rho: float, c: int) -> float:
    """Probability that an arriving task finds the retainer pool empty.

    Evaluated with the forward recurrence ``B(j) = rho B(j-1) / (j + rho B(j-1))``
    starting from ``B(0) = 1``, which never forms a factorial and stays
    accurate for very large pools.

    Parameters
    ----------
    rho : float
        Traffic intensity ``lambda / mu``.
    c : int
        Pool size.

    Returns
    -------
    float
        Erlang loss probability in ``[0, 1]``.  Values smaller than the
        smallest double underflow to 0; use :func:`log_erlang_loss` there.
    """
    rho = _check_rho(rho)
    c = _check_c(c)
    b = 1.0
    for j in range(1, c + 1):
        rb = rho * b
        b = rb / (j + rb)
    return b


def log_erlang_loss(rho: float, c: int) -> float:
    """Natural log of :func:`erlang_loss`, finite wherever ``rho > 0``.

    Uses the reciprocal recurrence ``1/B(j) = 1 + (j/rho) / B(j-1)`` carried in
    log space.
    """
    rho = _check_rho(rho)
    c = _check_c(c)
    if c == 0:
        return 0.0
    if rho == 0.0:
        return -math.inf
    log_rho = math.log(rho)
    log_inv = 0.0
    for j in range(1, c + 1):
        x = math.log(j) - log_rho + log_inv
        # log(1 + e^x) without overflow
        log_inv = x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))
    return -log_inv


def busy_distribution(rho: float, c: int) -> np.ndarray:
    """Stationary distribution of the number of busy servers, ``pi(0..c)``.

    Weights ``rho**i / i!`` are built in log space and normalised, so large
    ``c`` neither overflows nor loses the tail.  The last entry is set to the
    recurrence value so that ``busy_distribution(rho, c)[c] == erlang_loss(rho, c)``.
    """
    rho = _check_rho(rho)
    c = _check_c(c)
    out = np.zeros(c + 1)
    if rho == 0.0:
        out[0] = 1.0
        return out
    i = np.arange(1, c + 1, dtype=float)
    logw = np.concatenate(([0.0], np.cumsum(math.log(rho) - np.log(i))))
    w = np.exp(logw - logw.max())
    out = w / math.fsum(w)
    out[c] = erlang_loss(rho, c)
    return out


def expected_busy(rho: float, c: int) -> float:
    """Mean number of busy servers (outstanding replacement requests)."""
    return rho * (1.0 - erlang_loss(rho, c))


def expected_idle(rho: float, c: int) -> float:
    """Mean number of workers waiting on retainer, ``c - rho (1 - pi(c))``."""
    return c - expected_busy(rho, c)


def expected_wait(lam: float, mu: float, c: int) -> float:
    """Expected task wait: the loss probability times the mean recruitment time ``1/mu``."""
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    return erlang_loss(lam / mu, c) / mu


def retainer_cost_rate(s: float, rho: float, c: int) -> float:
    """Wage paid per second to idle retainer workers at wage ``s`` per worker-second."""
    if not s >= 0:
        raise DomainError(f"wage must be >= 0, got {s}")
    return s * expected_idle(rho, c)


def total_cost(params: RetainerParams, c: int | None = None, *, per_time: bool = False) -> float:
    """Requester's objective ``C_task pi(c) + s (c - rho (1 - pi(c)))``.

    The default adds the per-task miss cost to the per-second retainer wage as
    written.  With ``per_time=True`` the miss cost is weighted by the task
    rate, ``lambda C_task pi(c) + s idle``, giving a cost per second.
    """
    if c is None:
        c = params.c
    rho = params.rho
    loss = erlang_loss(rho, c)
    miss = params.c_task * loss
    if per_time:
        miss *= params.lam
    return miss + params.s * (c - rho * (1.0 - loss))


def _log_stirling_term(rho: float, c: int) -> float:
    # log of e^{-rho} (e rho / c)^c
    return -rho + c * (1.0 + math.log(rho) - math.log(c))


def approx_loss(rho: float, c: int, *, corrected: bool = False) -> float:
    """Stirling-based estimate ``e^{-rho} sqrt(2 pi c) (e rho / c)^c`` of the loss.

    This is an estimate, not a probability: it is about ``sqrt(2 pi rho)`` at
    ``c = rho`` and can exceed 1 there.  Substituting Stirling's formula for
    ``c!`` actually divides by ``sqrt(2 pi c)``; ``corrected=True`` returns that
    form, which tracks :func:`erlang_loss` closely once ``c`` is well above ``rho``.
    """
    rho = _check_rho(rho)
    c = _check_c(c)
    if rho <= 0:
        raise DomainError("approx_loss needs rho > 0")
    if c < 1:
        raise DomainError("approx_loss needs c >= 1")
    half_log = 0.5 * math.log(2 * math.pi * c)
    if corrected:
        half_log = -half_log
    return math.exp(half_log + _log_stirling_term(rho, c))


class CombinedLoss(NamedTuple):
    exact: float
    approx: float


def combined_pool_loss(rho: float, c: int, k: int, *, corrected: bool = False) -> CombinedLoss:
    """Loss of ``k`` identical pools merged into one pool of size ``k c``.

    ``exact`` is ``erlang_loss(k rho, k c)``; ``approx`` is
    ``sqrt(2 pi k c) (e^{-rho} (e rho / c)^c)^k`` (square-root factor divided
    instead when ``corrected``, as in :func:`approx_loss`).
    """
    rho = _check_rho(rho)
    c = _check_c(c)
    k = _check_c(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    exact = erlang_loss(k * rho, k * c)
    if rho > 0 and c >= 1:
        half_log = 0.5 * math.log(2 * math.pi * k * c)
        if corrected:
            half_log = -half_log
        approx = math.exp(half_log + k * _log_stirling_term(rho, c))
    else:
        approx = math.nan
    return CombinedLoss(exact, approx)


class ChernoffEstimate(NamedTuple):
    chernoff: float
    simplified: float


def chernoff_loss_estimate(epsilon: float, rho: float) -> ChernoffEstimate:
    """Empty-pool estimate for a pool of size ``(1 + epsilon) rho``.

    Returns the Chernoff-tail form ``(e^eps / (1+eps)^(1+eps))^rho`` and its
    usual simplification ``exp(-eps^2 rho / 3)``.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    if not (rho > 0 and math.isfinite(rho)):
        raise DomainError(f"rho must be > 0, got {rho}")
    log_ch = rho * (epsilon - (1.0 + epsilon) * math.log1p(epsilon))
    return ChernoffEstimate(math.exp(log_ch), math.exp(-epsilon * epsilon * rho / 3.0))


def abandonment_adjusted_loss(a: float, rho: float, c: int) -> float:
    """Conservative miss probability when a fraction ``a`` of alerted workers never respond."""
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"abandonment fraction must lie in [0, 1], got {a}")
    return min(1.0, a + erlang_loss(rho, c))


def pool_metrics(params: RetainerParams, c: int | None = None, *, per_time: bool = False) -> PoolMetrics:
    """All analytic figures for ``params`` at pool size ``c`` (default ``params.c``)."""
    if c is None:
        c = params.c
    rho = params.rho
    loss = erlang_loss(rho, c)
    busy = rho * (1.0 - loss)
    idle = c - busy
    return PoolMetrics(
        rho=rho,
        c=c,
        loss_prob=loss,
        busy_dist=busy_distribution(rho, c).tolist(),
        expected_busy=busy,
        expected_idle=idle,
        expected_wait=loss / params.mu,
        retainer_cost_rate=params.s * idle,
        total_cost=total_cost(params, c, per_time=per_time),
    )
