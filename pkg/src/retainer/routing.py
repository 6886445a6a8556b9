"""Routing worker-group arrivals to task types in a shared retainer pool.

Each worker group ``i`` arrives at rate ``mu_i`` and can serve a fixed set of
task types; task type ``j`` arrives at rate ``lambda_j``.  A plan assigns
rates ``a_ij`` and the per-task intensity is ``lambda_j / sum_i a_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .maxflow import max_flow

__all__ = [
    "InfeasibleError",
    "TaskType",
    "WorkerGroup",
    "RoutingInstance",
    "RoutingPlan",
    "feasible_assignment",
    "min_max_intensity",
    "random_assignment",
]


class InfeasibleError(ValueError):
    """Some task type cannot be served by any worker group."""

    def __init__(self, task_id):
        super().__init__(f"no worker group can serve task {task_id!r}")
        self.task_id = task_id


@dataclass(frozen=True)
class TaskType:
    id: str
    lam: float


@dataclass(frozen=True)
class WorkerGroup:
    id: str
    mu: float
    capabilities: frozenset


@dataclass
class RoutingInstance:
    tasks: list[TaskType]
    groups: list[WorkerGroup]
    subscription_cap: int | None = None

    def __post_init__(self):
        self.tasks = [t if isinstance(t, TaskType) else TaskType(str(t[0]), float(t[1])) for t in self.tasks]
        self.groups = [
            g if isinstance(g, WorkerGroup) else WorkerGroup(str(g[0]), float(g[1]), frozenset(map(str, g[2])))
            for g in self.groups
        ]
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("task ids must be unique")
        gids = [g.id for g in self.groups]
        if len(set(gids)) != len(gids):
            raise ValueError("group ids must be unique")
        for t in self.tasks:
            if not (t.lam > 0 and math.isfinite(t.lam)):
                raise ValueError(f"task {t.id!r}: lambda must be > 0")
        known = set(ids)
        cap = self.subscription_cap
        if cap is not None and (int(cap) != cap or cap < 1):
            raise ValueError("subscription_cap must be an integer >= 1")
        for g in self.groups:
            if not (g.mu > 0 and math.isfinite(g.mu)):
                raise ValueError(f"group {g.id!r}: mu must be > 0")
            if not g.capabilities:
                raise ValueError(f"group {g.id!r} has no capabilities")
            unknown = g.capabilities - known
            if unknown:
                raise ValueError(f"group {g.id!r} lists unknown task types {sorted(unknown)}")
            if cap is not None and len(g.capabilities) > cap:
                raise ValueError(f"group {g.id!r} subscribes to {len(g.capabilities)} task types, cap is {cap}")

    def capable(self, g: WorkerGroup) -> list[int]:
        """Indices of the task types ``g`` can serve, in task order."""
        return [j for j, t in enumerate(self.tasks) if t.id in g.capabilities]

    def to_dict(self) -> dict:
        d = {
            "version": 1,
            "tasks": [{"id": t.id, "lambda": t.lam} for t in self.tasks],
            "groups": [
                {"id": g.id, "mu": g.mu, "capabilities": [t.id for t in self.tasks if t.id in g.capabilities]}
                for g in self.groups
            ],
        }
        if self.subscription_cap is not None:
            d["subscription_cap"] = self.subscription_cap
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingInstance":
        if d.get("version", 1) != 1:
            raise ValueError(f"unsupported instance version {d.get('version')!r}")
        tasks = [TaskType(str(t["id"]), float(t["lambda"])) for t in d["tasks"]]
        groups = [WorkerGroup(str(g["id"]), float(g["mu"]), frozenset(map(str, g["capabilities"]))) for g in d["groups"]]
        return cls(tasks, groups, d.get("subscription_cap"))


@dataclass
class RoutingPlan:
    assignments: dict[tuple[str, str], float]
    worst_rho: float
    per_task_rho: dict[str, float] = field(default_factory=dict)

    def received(self) -> dict[str, float]:
        """Total worker rate routed to each task type."""
        out = {t: 0.0 for t in self.per_task_rho}
        for (_, t), a in self.assignments.items():
            out[t] = out.get(t, 0.0) + a
        return out

    def to_dict(self) -> dict:
        return {
            "assignments": [{"group": g, "task": t, "rate": a} for (g, t), a in self.assignments.items()],
            "worst_rho": self.worst_rho,
            "per_task_rho": dict(self.per_task_rho),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingPlan":
        return cls(
            {(a["group"], a["task"]): a["rate"] for a in d["assignments"]},
            d["worst_rho"],
            dict(d["per_task_rho"]),
        )


def _plan(instance: RoutingInstance, rates: dict[tuple[int, int], float]) -> RoutingPlan:
    got = [0.0] * len(instance.tasks)
    assignments = {}
    for (i, j), a in rates.items():
        assignments[(instance.groups[i].id, instance.tasks[j].id)] = a
        got[j] += a
    per_task = {t.id: (t.lam / g if g > 0 else math.inf) for t, g in zip(instance.tasks, got)}
    return RoutingPlan(assignments, max(per_task.values()), per_task)


def _check_coverage(instance: RoutingInstance) -> list[float]:
    reach = [0.0] * len(instance.tasks)
    for g in instance.groups:
        for j in instance.capable(g):
            reach[j] += g.mu
    for t, r in zip(instance.tasks, reach):
        if r == 0:
            raise InfeasibleError(t.id)
    return reach


def _flow(instance: RoutingInstance, rho: float):
    m, n = len(instance.groups), len(instance.tasks)
    source, sink = 0, m + n + 1
    big = math.fsum(g.mu for g in instance.groups)
    edges, pairs = [], []
    for i, g in enumerate(instance.groups):
        edges.append((source, 1 + i, g.mu))
    for i, g in enumerate(instance.groups):
        for j in instance.capable(g):
            pairs.append((i, j))
            edges.append((1 + i, 1 + m + j, big))
    demand = [t.lam / rho for t in instance.tasks]
    for j, d in enumerate(demand):
        edges.append((1 + m + j, sink, d))
    res = max_flow(m + n + 2, edges, source, sink)
    need = math.fsum(demand)
    ok = res.value >= need - 1e-12 * max(1.0, need)
    rates = {p: res.flows[m + k] for k, p in enumerate(pairs) if res.flows[m + k] > 0}
    return ok, rates, res


def feasible_assignment(instance: RoutingInstance, rho: float) -> RoutingPlan | None:
    """A plan with every per-task intensity at most ``rho``, or ``None`` if there is none."""
    if not rho > 0:
        raise ValueError(f"target intensity must be > 0, got {rho}")
    _check_coverage(instance)
    ok, rates, _ = _flow(instance, rho)
    return _plan(instance, rates) if ok else None


def min_max_intensity(instance: RoutingInstance, rel_tol: float = 1e-12) -> RoutingPlan:
    """Plan minimising the worst per-task intensity.

    Feasibility of a target ``rho`` is a max-flow test (source -> group with
    capacity ``mu_i``, group -> capable task uncapped, task -> sink with
    capacity ``lambda_j / rho``); feasibility is monotone in ``rho`` so the
    optimum is found by bisection.  The lower end of the bracket is the
    larger of ``sum lambda / sum mu`` and the worst single-task ratio; the
    upper end, ``sum lambda`` over the smallest per-task supply, is always
    feasible.
    """
    reach = _check_coverage(instance)
    lams = [t.lam for t in instance.tasks]
    lo = max(math.fsum(lams) / math.fsum(g.mu for g in instance.groups), max(l / r for l, r in zip(lams, reach)))
    ok, rates, _ = _flow(instance, lo)
    if ok:
        return _plan(instance, rates)
    hi = math.fsum(lams) / min(reach)
    ok, best, _ = _flow(instance, hi)
    assert ok
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        ok, rates, _ = _flow(instance, mid)
        if ok:
            hi, best = mid, rates
        else:
            lo = mid
    return _plan(instance, best)


def random_assignment(instance: RoutingInstance) -> RoutingPlan:
    """Uniform split: each group divides its rate equally over the task types it can serve."""
    rates = {}
    for i, g in enumerate(instance.groups):
        caps = instance.capable(g)
        for j in caps:
            rates[(i, j)] = g.mu / len(caps)
    return _plan(instance, rates)
