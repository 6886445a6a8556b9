"""Event-driven simulation of retainer pools.

Every stochastic input has its own random stream, derived from
``(seed, replication, stream id)`` through :class:`numpy.random.SeedSequence`.
Runs with the same seed therefore draw the same arrivals and recruitment
times whatever the mode, which is what makes mode-to-mode comparisons use
common random numbers.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from itertools import chain
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np

from ..sizing import precruit_rate
from .config import ConfigError, SimConfig, check_same_scenario
from .report import Estimate, SimReport, TierReport, Window, batch_se, ratio_estimate

__all__ = [
    "simulate",
    "simulate_abandonment",
    "simulate_tiered",
    "simulate_precruitment",
    "replicate",
    "aggregate",
]

ARRIVAL, RECRUIT, DIVERT, ABANDON, LATENCY, PRECRUIT = range(6)
_CHUNK = 4096
_REFILL, _TIMEOUT = 0, 1


def _Stream(seed: int, replication: int, stream: int, draw):
    """Callable returning successive draws from one substream, generated in chunks."""
    ss = np.random.SeedSequence(seed, spawn_key=(replication, stream))
    gen = np.random.Generator(np.random.PCG64(ss))

    def chunks():
        while True:
            yield draw(gen, _CHUNK).tolist()

    return chain.from_iterable(chunks()).__next__


def _exponential(rate: float):
    if rate == 0:
        return lambda g, n: np.full(n, math.inf)
    scale = 1.0 / rate
    return lambda g, n: g.exponential(scale, n)


def _recruit_draw(cfg: SimConfig):
    mu = cfg.params.mu
    if cfg.recruitment == "deterministic":
        return lambda g, n: np.full(n, 1.0 / mu)
    return _exponential(mu)


def _latency_draw(cfg: SimConfig):
    lat = cfg.response_latency
    if lat.kind == "point":
        return lambda g, n: np.full(n, float(lat.value))
    if lat.kind == "exponential":
        return lambda g, n: g.exponential(lat.value, n)
    samples = np.asarray(lat.samples)
    return lambda g, n: samples[g.integers(0, len(samples), n)]


class _Tally:
    """Per-batch counters."""

    def __init__(self, n_batches: int, names):
        for name in names:
            setattr(self, name, [0.0] * n_batches)


def _finish(cfg: SimConfig, window: Window, tally: _Tally, **extra) -> SimReport:
    arrived = int(sum(tally.arrivals))
    served = int(sum(tally.served))
    diverted = int(sum(tally.diverted))
    missed = int(sum(tally.missed))
    idle = window.level_mean()
    s = cfg.params.s
    lost = [d + m for d, m in zip(tally.diverted, tally.missed)]
    return SimReport(
        mode=cfg.mode,
        seed=cfg.seed,
        replications=1,
        tasks_arrived=arrived,
        served=served,
        diverted=diverted,
        missed=missed,
        observed_time=window.observed_time(),
        empty_pool_fraction=ratio_estimate(tally.diverted, tally.arrivals),
        miss_fraction=ratio_estimate(lost, tally.arrivals),
        mean_wait=ratio_estimate(tally.wait, tally.arrivals),
        mean_idle_workers=idle,
        cost_rate=Estimate(s * idle.mean, None if idle.se is None else s * idle.se),
        **extra,
    )


def _run_baseline(cfg: SimConfig, rep: int) -> SimReport:
    p = cfg.params
    arrive = _Stream(cfg.seed, rep, ARRIVAL, _exponential(p.lam))
    recruit = _Stream(cfg.seed, rep, RECRUIT, _recruit_draw(cfg))
    divert = _Stream(cfg.seed, rep, DIVERT, _recruit_draw(cfg))
    window = Window(cfg.horizon, cfg.horizon_kind, cfg.warmup, cfg.n_batches)
    tally = _Tally(cfg.n_batches, ("arrivals", "served", "diverted", "missed", "wait"))
    if window.by_time:
        _baseline_by_time(p.c, window, tally, arrive, recruit, divert)
    else:
        _baseline_by_tasks(p.c, window, tally, arrive, recruit, divert)
    return _finish(cfg, window, tally)


def _baseline_by_time(pool, window, tally, arrive, recruit, divert):
    arrivals, served, diverted, wait = tally.arrivals, tally.served, tally.diverted, tally.wait
    advance, arrival = window.advance, window.arrival
    heappush, heappop = heapq.heappush, heapq.heappop
    end = window.bounds[-1]
    pending = []  # completion times of outstanding replacement requests
    t = arrive()
    while t < end:
        while pending and pending[0] <= t:
            tc = heappop(pending)
            advance(tc, (pool,))
            pool += 1
        advance(t, (pool,))
        b = arrival(t)
        if pool > 0:
            pool -= 1
            heappush(pending, t + recruit())
            if b >= 0:
                arrivals[b] += 1
                served[b] += 1
        else:
            w = divert()
            if b >= 0:
                arrivals[b] += 1
                diverted[b] += 1
                wait[b] += w
        t += arrive()
    while pending and pending[0] <= end:
        tc = heappop(pending)
        advance(tc, (pool,))
        pool += 1
    window.finish((pool,))


def _baseline_by_tasks(pool, window, tally, arrive, recruit, divert):
    """Hot loop for task-count horizons with the window bookkeeping inlined.

    The arithmetic mirrors :class:`Window` operation for operation, so the
    result is bit-identical to the generic event loops.
    """
    heappush, heappop = heapq.heappush, heapq.heappop
    N, warm, B, n_post = window.N, window.warm, window.B, window.n_post
    arrivals, served, diverted, wait = tally.arrivals, tally.served, tally.diverted, tally.wait
    pending = []  # completion times of outstanding replacement requests
    t = 0.0
    for _ in range(warm):
        t += arrive()
        while pending and pending[0] <= t:
            heappop(pending)
            pool += 1
        if pool > 0:
            pool -= 1
            heappush(pending, t + recruit())
        else:
            divert()
    # the idle level between consecutive arrivals is charged to the batch
    # of the earlier one; integration stops at the last arrival
    cur = -1
    area = dur = 0.0
    t_last = t
    for k in range(n_post):
        t += arrive()
        while pending and pending[0] <= t:
            tc = heappop(pending)
            if cur >= 0 and tc > t_last:
                dt = tc - t_last
                area += pool * dt
                dur += dt
            t_last = tc
            pool += 1
        if cur >= 0 and t > t_last:
            dt = t - t_last
            area += pool * dt
            dur += dt
        t_last = t
        b = k * B // n_post
        if b != cur:
            if cur >= 0:
                window.area[cur][0] = area
                window.duration[cur] = dur
            cur = b
            area = dur = 0.0
        arrivals[b] += 1
        if pool > 0:
            pool -= 1
            heappush(pending, t + recruit())
            served[b] += 1
        else:
            diverted[b] += 1
            wait[b] += divert()
    window.area[cur][0] = area
    window.duration[cur] = dur
    window.count = N


def _run_alerts(cfg: SimConfig, rep: int) -> SimReport:
    """Abandonment and tiered modes: alerted workers may fail to respond in time."""
    p = cfg.params
    tiered = cfg.mode == "tiered"
    sizes = list(cfg.tiers) if tiered else [p.c]
    n_tiers = len(sizes)
    timeout = cfg.timeout
    a = p.a
    max_alerts = 1 + cfg.max_realerts

    arrive = _Stream(cfg.seed, rep, ARRIVAL, _exponential(p.lam))
    recruit = _Stream(cfg.seed, rep, RECRUIT, _recruit_draw(cfg))
    divert = _Stream(cfg.seed, rep, DIVERT, _recruit_draw(cfg))
    abandon = _Stream(cfg.seed, rep, ABANDON, lambda g, n: g.random(n))
    latency = _Stream(cfg.seed, rep, LATENCY, _latency_draw(cfg))

    B = cfg.n_batches
    window = Window(cfg.horizon, cfg.horizon_kind, cfg.warmup, B, n_tiers)
    tally = _Tally(B, ("arrivals", "served", "diverted", "missed", "wait", "alerts", "alerted"))
    tier_counts = [[0, 0, 0, 0] for _ in range(n_tiers)]  # arrivals, alerted, responded, diverted

    pools = list(sizes)
    events = []  # (time, seq, kind, payload)
    seq = 0
    in_flight = 0

    def resolve(task, outcome, w):
        _, b, _, n_alerts = task
        if b < 0:
            return
        tally.arrivals[b] += 1
        getattr(tally, outcome)[b] += 1
        tally.wait[b] += w
        if n_alerts:
            tally.alerts[b] += n_alerts
            tally.alerted[b] += 1

    def alert(task, now):
        nonlocal seq, in_flight
        tier = task[2]
        counts = tier_counts[tier] if task[1] >= 0 else None
        if counts:
            counts[0] += 1
        if pools[tier] == 0:
            if counts:
                counts[3] += 1
            resolve(task, "diverted", now - task[0] + divert())
            return
        pools[tier] -= 1
        seq += 1
        heapq.heappush(events, (now + recruit(), seq, _REFILL, tier))
        task[3] += 1
        if counts:
            counts[1] += 1
        gone = abandon() < a
        late = latency() > timeout  # drawn either way to keep streams aligned
        if not gone and not late:
            if counts:
                counts[2] += 1
            resolve(task, "served", now - task[0])
            return
        seq += 1
        in_flight += 1
        heapq.heappush(events, (now + timeout, seq, _TIMEOUT, task))

    def on_timeout(task, now):
        if tiered:
            if task[2] + 1 < n_tiers:
                task[2] += 1
                alert(task, now)
            else:
                resolve(task, "missed", now - task[0])
        elif task[3] < max_alerts:
            alert(task, now)
        else:
            resolve(task, "missed", now - task[0])

    t = arrive()
    end = window.bounds[-1] if window.by_time else math.inf
    while True:
        arrivals_open = window.open and t < end
        if arrivals_open and (not events or t < events[0][0]):
            window.advance(t, pools)
            b = window.arrival(t)
            alert([t, b, 0, 0], t)
            t += arrive()
            continue
        if not events:
            break
        if not arrivals_open and in_flight == 0 and events[0][0] > end:
            break
        now, _, kind, x = heapq.heappop(events)
        window.advance(min(now, end), pools)
        if kind == _REFILL:
            pools[x] += 1
        else:
            in_flight -= 1
            on_timeout(x, now)
    window.finish(pools)

    extra = {"alerts_per_task": ratio_estimate(tally.alerts, tally.alerted)}
    if tiered:
        s = p.s
        reports = []
        for i, (size, cnt) in enumerate(zip(sizes, tier_counts)):
            idle = window.level_mean(i)
            reports.append(TierReport(i + 1, size, cnt[0], cnt[1], cnt[2], cnt[3], idle,
                                      Estimate(s * idle.mean, None if idle.se is None else s * idle.se)))
        extra["per_tier"] = reports
    return _finish(cfg, window, tally, **extra)


def _run_precruitment(cfg: SimConfig, rep: int) -> SimReport:
    p = cfg.params
    arrive = _Stream(cfg.seed, rep, ARRIVAL, _exponential(p.lam))
    latency = _Stream(cfg.seed, rep, LATENCY, _latency_draw(cfg))
    B = cfg.n_batches
    window = Window(cfg.horizon, cfg.horizon_kind, cfg.warmup, B)
    tally = _Tally(B, ("arrivals", "served", "diverted", "missed", "wait", "dismissed", "resolved"))
    waits = []
    end = window.bounds[-1] if window.by_time else math.inf

    if not cfg.precruit:
        # alert on arrival: every task waits one response latency
        t = arrive()
        while window.open and t < end:
            window.advance(t, (0,))
            b = window.arrival(t)
            w = latency()
            if b >= 0:
                tally.arrivals[b] += 1
                tally.served[b] += 1
                tally.wait[b] += w
                waits.append(w)
            t += arrive()
        window.finish((0,))
        return _finish(cfg, window, tally, median_wait=float(np.median(waits)) if waits else None,
                       wasted_worker_fraction=Estimate(0.0, None), precruited=0, dismissed=0)

    rate = precruit_rate(p.lam, cfg.beta)
    request = _Stream(cfg.seed, rep, PRECRUIT, _exponential(rate))
    patience = cfg.patience
    in_transit = []          # availability times of precruited workers on their way
    ready = deque()          # availability times of workers waiting for a task, oldest first
    queued = deque()         # (arrival time, batch) of tasks waiting for a worker
    t_task = arrive()
    t_req = request()

    def resolve_worker(dismissed):
        b = window.current()
        if b >= 0:
            tally.resolved[b] += 1
            if dismissed:
                tally.dismissed[b] += 1

    while True:
        arrivals_open = window.open and t_task < end
        if not arrivals_open and not queued:
            break
        t_avail = in_transit[0] if in_transit else math.inf
        t_dismiss = ready[0] + patience if ready else math.inf
        t_arr = t_task if arrivals_open else math.inf
        now = min(t_req, t_avail, t_dismiss, t_arr)
        if now == math.inf:
            break
        window.advance(min(now, end), (len(ready),))
        if now == t_avail:
            heapq.heappop(in_transit)
            if queued:
                arr, b = queued.popleft()
                if b >= 0:
                    tally.wait[b] += now - arr
                    waits.append(now - arr)
                resolve_worker(False)
            else:
                ready.append(now)
        elif now == t_arr:
            b = window.arrival(now)
            if ready:
                ready.popleft()
                resolve_worker(False)
                if b >= 0:
                    tally.arrivals[b] += 1
                    tally.served[b] += 1
                    waits.append(0.0)
            else:
                if b >= 0:
                    tally.arrivals[b] += 1
                    tally.diverted[b] += 1
                queued.append((now, b))
            t_task = now + arrive()
        elif now == t_dismiss:
            ready.popleft()
            resolve_worker(True)
        else:
            heapq.heappush(in_transit, now + latency())
            t_req = now + request()
    window.finish((len(ready),))
    return _finish(
        cfg, window, tally,
        wasted_worker_fraction=ratio_estimate(tally.dismissed, tally.resolved),
        median_wait=float(np.median(waits)) if waits else None,
        precruited=int(sum(tally.resolved)),
        dismissed=int(sum(tally.dismissed)),
    )


_RUNNERS = {
    "baseline": _run_baseline,
    "abandonment": _run_alerts,
    "tiered": _run_alerts,
    "precruitment": _run_precruitment,
}


def _run(cfg: SimConfig, rep: int = 0) -> SimReport:
    return _RUNNERS[cfg.mode](cfg, rep)


def simulate(config: SimConfig) -> SimReport:
    """Run one simulation of ``config``; the report is a pure function of the config."""
    return _run(config)


def simulate_abandonment(config: SimConfig) -> SimReport:
    """Each alerted worker abandons with probability ``a``; silence past the
    timeout triggers another alert, up to ``max_realerts`` times."""
    if config.mode != "abandonment":
        raise ConfigError("simulate_abandonment needs mode='abandonment'")
    return _run(config)


def simulate_tiered(config: SimConfig) -> SimReport:
    if config.mode != "tiered":
        raise ConfigError("simulate_tiered needs mode='tiered'")
    return _run(config)


def simulate_precruitment(config: SimConfig) -> SimReport:
    if config.mode != "precruitment":
        raise ConfigError("simulate_precruitment needs mode='precruitment'")
    return _run(config)


def _mean_estimate(values: list[float]) -> Estimate:
    return Estimate(math.fsum(values) / len(values), batch_se(values))


def aggregate(reports: Sequence[SimReport], seed: int | None = None) -> SimReport:
    """Combine independent replications: counts are summed, estimates are
    averaged with across-replication standard errors.  The result does not
    depend on the order of ``reports``."""
    if len(reports) < 2:
        raise ConfigError("aggregation needs at least two replications")
    modes = {r.mode for r in reports}
    if len(modes) != 1:
        raise ConfigError("cannot aggregate reports from different modes")
    # canonical order so float reductions are order-free
    reports = sorted(reports, key=lambda r: repr(r.to_dict()))

    def est(name):
        vals = [getattr(r, name) for r in reports]
        if any(v is None for v in vals):
            return None
        return _mean_estimate([v.mean for v in vals])

    def total(name):
        vals = [getattr(r, name) for r in reports]
        return None if any(v is None for v in vals) else sum(vals)

    medians = [r.median_wait for r in reports]
    return SimReport(
        mode=reports[0].mode,
        seed=min(r.seed for r in reports) if seed is None else seed,
        replications=sum(r.replications for r in reports),
        tasks_arrived=total("tasks_arrived"),
        served=total("served"),
        diverted=total("diverted"),
        missed=total("missed"),
        observed_time=math.fsum(r.observed_time for r in reports),
        empty_pool_fraction=est("empty_pool_fraction"),
        miss_fraction=est("miss_fraction"),
        mean_wait=est("mean_wait"),
        mean_idle_workers=est("mean_idle_workers"),
        cost_rate=est("cost_rate"),
        alerts_per_task=est("alerts_per_task"),
        wasted_worker_fraction=est("wasted_worker_fraction"),
        median_wait=None if any(m is None for m in medians) else math.fsum(medians) / len(medians),
        precruited=total("precruited"),
        dismissed=total("dismissed"),
        per_tier=None,
    )


def replicate(config: SimConfig | Sequence[SimConfig], n_replications: int | None = None,
              workers: int = 1) -> SimReport:
    """Run independent replications and aggregate them.

    Replication ``r`` uses substreams ``(seed, r, ...)``, so replication 0 is
    exactly :func:`simulate`.  ``config`` may also be a list of per-replication
    configs, which must describe the same scenario.
    """
    if isinstance(config, SimConfig):
        if n_replications is None:
            raise ConfigError("n_replications is required")
        configs = [config] * n_replications
    else:
        configs = list(config)
        if n_replications is not None and n_replications != len(configs):
            raise ConfigError("n_replications does not match the number of configs")
    if len(configs) < 2:
        raise ConfigError("replicate needs n >= 2 to estimate a standard error")
    check_same_scenario(configs)
    jobs = list(enumerate(configs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_job, jobs))
    else:
        reports = [_run_job(j) for j in jobs]
    return aggregate(reports, seed=configs[0].seed)


def _run_job(job):
    rep, cfg = job
    return _run(cfg, rep)
