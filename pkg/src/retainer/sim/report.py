"""Simulation output and batch-means bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, fields


@dataclass(frozen=True)
class Estimate:
    """A point estimate and its standard error (``None`` when not estimable)."""

    mean: float
    se: float | None

    def z(self, target: float, floor: float = 0.0) -> float:
        """Standardised distance to ``target``; the SE is never taken below ``floor``."""
        diff = self.mean - target
        if diff == 0:
            return 0.0
        se = max(self.se or 0.0, floor)
        return math.copysign(math.inf, diff) if se == 0 else diff / se


@dataclass
class TierReport:
    tier: int
    size: int
    arrivals: int
    alerted: int
    responded: int
    diverted: int
    mean_idle_workers: Estimate
    cost_rate: Estimate


@dataclass
class SimReport:
    """Post-warmup statistics of one run (or an aggregate of replications).

    ``empty_pool_fraction`` is the share of tasks that found no worker ready:
    diverted tasks in the retainer modes, unmatched tasks under
    precruitment.  ``miss_fraction`` adds tasks that ran out of re-alerts.
    """

    mode: str
    seed: int
    replications: int
    tasks_arrived: int
    served: int
    diverted: int
    missed: int
    observed_time: float
    empty_pool_fraction: Estimate
    miss_fraction: Estimate
    mean_wait: Estimate
    mean_idle_workers: Estimate
    cost_rate: Estimate
    alerts_per_task: Estimate | None = None
    wasted_worker_fraction: Estimate | None = None
    median_wait: float | None = None
    precruited: int | None = None
    dismissed: int | None = None
    per_tier: list[TierReport] | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        d = dict(d)
        for f in fields(cls):
            v = d.get(f.name)
            if isinstance(v, dict) and set(v) == {"mean", "se"}:
                d[f.name] = Estimate(**v)
        if d.get("per_tier") is not None:
            tiers = []
            for t in d["per_tier"]:
                t = dict(t)
                t["mean_idle_workers"] = Estimate(**t["mean_idle_workers"])
                t["cost_rate"] = Estimate(**t["cost_rate"])
                tiers.append(TierReport(**t))
            d["per_tier"] = tiers
        return cls(**d)


def batch_se(values: list[float]) -> float | None:
    n = len(values)
    if n < 2:
        return None
    m = math.fsum(values) / n
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (n - 1) / n)


def ratio_estimate(num: list[float], den: list[float]) -> Estimate:
    """Overall ratio with a batch-means SE over batches having a non-zero denominator."""
    total = math.fsum(den)
    mean = math.fsum(num) / total if total > 0 else 0.0
    per_batch = [n / d for n, d in zip(num, den) if d > 0]
    return Estimate(mean, batch_se(per_batch))


class Window:
    """Post-warmup observation window split into equal batches.

    Time horizons are cut into equal time slices; task horizons into equal
    runs of consecutive arrivals.  ``advance(t, levels)`` integrates piecewise
    constant state (idle workers per pool) up to time ``t``; ``arrival(t)``
    returns the batch an arriving task belongs to, or ``-1`` during warmup
    and after the end of the window.
    """

    def __init__(self, horizon: float, kind: str, warmup: float, n_batches: int, n_levels: int = 1):
        self.B = n_batches
        self.by_time = kind == "time"
        self.t_last = 0.0
        self.cur = -1
        if self.by_time:
            start = warmup * horizon
            width = (horizon - start) / n_batches
            self.bounds = [start + i * width for i in range(n_batches)] + [float(horizon)]
        else:
            self.N = int(horizon)
            self.warm = int(warmup * self.N)
            self.n_post = self.N - self.warm
            self.count = 0
            self.start_time = None
            self.end_time = None
        self.area = [[0.0] * n_levels for _ in range(n_batches)]
        self.duration = [0.0] * n_batches

    @property
    def open(self) -> bool:
        """True while arrivals still belong to the run."""
        if self.by_time:
            return self.cur < self.B
        return self.count < self.N

    def current(self) -> int:
        return self.cur if 0 <= self.cur < self.B else -1

    def advance(self, t: float, levels) -> None:
        tl = self.t_last
        if t <= tl:
            return
        b = self.cur
        if not self.by_time:
            if 0 <= b < self.B:
                dt = t - tl
                area = self.area[b]
                for i, v in enumerate(levels):
                    area[i] += v * dt
                self.duration[b] += dt
            self.t_last = t
            return
        bounds = self.bounds
        while tl < t:
            if b < 0:
                if t <= bounds[0]:
                    tl = t
                    break
                tl, b = bounds[0], 0
                continue
            if b >= self.B:
                tl = t
                break
            seg = t if t < bounds[b + 1] else bounds[b + 1]
            dt = seg - tl
            area = self.area[b]
            for i, v in enumerate(levels):
                area[i] += v * dt
            self.duration[b] += dt
            tl = seg
            if seg == bounds[b + 1]:
                b += 1
        self.cur = b
        self.t_last = t

    def arrival(self, t: float) -> int:
        """Batch of a task arriving at ``t``; call after ``advance(t, ...)``."""
        if self.by_time:
            return self.current()
        k = self.count
        self.count += 1
        if k < self.warm:
            return -1
        if k == self.warm:
            self.start_time = t
        b = (k - self.warm) * self.B // self.n_post
        self.cur = b
        if k == self.N - 1:
            self.end_time = t
            self.cur = self.B  # stop integrating after the last arrival
        return b

    def finish(self, levels) -> None:
        if self.by_time:
            self.advance(self.bounds[-1], levels)

    def observed_time(self) -> float:
        return math.fsum(self.duration)

    def level_mean(self, i: int | None = None) -> Estimate:
        if i is None:
            per = [math.fsum(a) for a in self.area]
        else:
            per = [a[i] for a in self.area]
        return ratio_estimate(per, self.duration)


def compare_analytic(report: SimReport, params) -> dict[str, dict]:
    """Simulated baseline statistics against the steady-state formulas.

    Each entry holds the estimate, its SE, the analytic value and the z-score.
    When no task was diverted the batch SE is zero, so the z-score uses the
    run's resolution instead: one diversion in the proportion, one mean
    recruitment time in the wait.
    """
    from ..erlang import erlang_loss, expected_idle, expected_wait

    n = max(report.tasks_arrived, 1)
    rho, c = params.rho, params.c
    targets = {
        "empty_pool_fraction": (erlang_loss(rho, c), 1.0 / n),
        "mean_wait": (expected_wait(params.lam, params.mu, c), 1.0 / (params.mu * n)),
        "mean_idle_workers": (expected_idle(rho, c), 0.0),
    }
    out = {}
    for name, (target, floor) in targets.items():
        est = getattr(report, name)
        out[name] = {"simulated": est.mean, "se": est.se, "analytic": target, "z": est.z(target, floor)}
    return out
