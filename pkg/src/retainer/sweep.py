"""Parameter sweeps that tabulate analytic metrics as CSV."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

from . import erlang, sizing
from .erlang import RetainerParams

__all__ = ["SweepError", "SweepSpec", "METRICS", "SWEEP_VARIABLES", "run_sweep", "to_csv", "format_value"]

SWEEP_VARIABLES = ("c", "rho", "k", "epsilon", "beta", "C_task")
PARAMETERS = ("c", "rho", "k", "epsilon", "beta", "C_task", "s", "lambda", "a", "p_max", "per_time")
_INTEGER = {"c", "k"}
_DEFAULTS = {"lambda": 1.0, "per_time": False}


class SweepError(ValueError):
    """Malformed sweep specification."""


def _mu(p):
    return p["lambda"] / p["rho"]


def _total_cost(p):
    params = RetainerParams(lam=p["lambda"], mu=_mu(p), c=p["c"], s=p["s"], c_task=p["C_task"])
    return erlang.total_cost(params, per_time=bool(p["per_time"]))


def _optimal_c(p):
    params = RetainerParams(lam=p["lambda"], mu=_mu(p), s=p["s"], c_task=p["C_task"])
    return sizing.optimize_total_cost(params, per_time=bool(p["per_time"])).c_star


def _buffer_epsilon(p):
    pool = sizing.shared_pool_size(p["rho"], p["k"], p["p_max"]).c_star
    return pool / (p["k"] * p["rho"]) - 1.0


# name -> (required parameters, function of the parameter dict)
METRICS: dict[str, tuple[tuple[str, ...], Callable[[dict], float]]] = {
    "loss_prob": (("rho", "c"), lambda p: erlang.erlang_loss(p["rho"], p["c"])),
    "expected_busy": (("rho", "c"), lambda p: erlang.expected_busy(p["rho"], p["c"])),
    "expected_idle": (("rho", "c"), lambda p: erlang.expected_idle(p["rho"], p["c"])),
    "expected_wait": (("rho", "c", "lambda"), lambda p: erlang.expected_wait(p["lambda"], _mu(p), p["c"])),
    "cost_rate": (("rho", "c", "s"), lambda p: erlang.retainer_cost_rate(p["s"], p["rho"], p["c"])),
    "total_cost": (("rho", "c", "s", "C_task", "lambda"), _total_cost),
    "approx_loss": (("rho", "c"), lambda p: erlang.approx_loss(p["rho"], p["c"])),
    "approx_loss_corrected": (("rho", "c"), lambda p: erlang.approx_loss(p["rho"], p["c"], corrected=True)),
    "combined_loss_exact": (("rho", "c", "k"), lambda p: erlang.combined_pool_loss(p["rho"], p["c"], p["k"]).exact),
    "combined_loss_approx": (("rho", "c", "k"), lambda p: erlang.combined_pool_loss(p["rho"], p["c"], p["k"]).approx),
    "chernoff_exact": (("epsilon", "rho"), lambda p: erlang.chernoff_loss_estimate(p["epsilon"], p["rho"]).chernoff),
    "chernoff_simple": (("epsilon", "rho"), lambda p: erlang.chernoff_loss_estimate(p["epsilon"], p["rho"]).simplified),
    "abandon_loss": (("a", "rho", "c"), lambda p: erlang.abandonment_adjusted_loss(p["a"], p["rho"], p["c"])),
    "min_pool": (("rho", "p_max"), lambda p: sizing.min_pool_for_miss_prob(p["rho"], p["p_max"]).c_star),
    "shared_pool": (("rho", "k", "p_max"), lambda p: sizing.shared_pool_size(p["rho"], p["k"], p["p_max"]).c_star),
    "buffer_epsilon": (("rho", "k", "p_max"), _buffer_epsilon),
    "precruit_rate": (("lambda", "beta"), lambda p: sizing.precruit_rate(p["lambda"], p["beta"])),
    "optimal_c": (("rho", "s", "C_task", "lambda"), _optimal_c),
}


def _expand_range(variable: str, spec) -> list:
    if isinstance(spec, (list, tuple)):
        values = list(spec)
    elif isinstance(spec, dict):
        if set(spec) != {"start", "stop", "step"}:
            raise SweepError("a range needs exactly the keys start, stop and step")
        start, stop, step = spec["start"], spec["stop"], spec["step"]
        for x in (start, stop, step):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise SweepError("range bounds and step must be finite numbers")
        if step <= 0:
            raise SweepError("range step must be > 0")
        if stop < start:
            values = []
        elif all(isinstance(x, int) for x in (start, stop, step)):
            values = list(range(start, stop + 1, step))
        else:
            n = math.floor((stop - start) / step * (1 + 1e-12) + 1e-9) + 1
            values = [start + i * step for i in range(n)]
    else:
        raise SweepError("range must be {start, stop, step} or a list of values")
    if not values:
        raise SweepError(f"the range for {variable!r} is empty")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SweepError(f"non-numeric value {v!r} in the range for {variable!r}")
    if len(values) > 1:
        up = all(a < b for a, b in zip(values, values[1:]))
        down = all(a > b for a, b in zip(values, values[1:]))
        if not (up or down):
            raise SweepError(f"the range for {variable!r} must be strictly monotone")
    return [_coerce(variable, v) for v in values]


def _coerce(name: str, v):
    if name in _INTEGER:
        if isinstance(v, bool) or float(v) != int(v):
            raise SweepError(f"{name} takes integer values, got {v!r}")
        return int(v)
    if name == "per_time":
        if not isinstance(v, bool):
            raise SweepError("per_time must be true or false")
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SweepError(f"{name} must be numeric, got {v!r}")
    return float(v)


@dataclass
class SweepSpec:
    """A one-variable grid, optionally repeated over series of fixed parameters.

    ``fixed`` maps parameter names to a scalar or to a list; each list adds a
    series dimension and the grid is repeated for every combination.
    """

    variable: str
    range: list
    fixed: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise SweepError(f"cannot sweep {self.variable!r}; choose one of {', '.join(SWEEP_VARIABLES)}")
        self.range = _expand_range(self.variable, self.range)
        if self.variable in self.fixed:
            raise SweepError(f"{self.variable!r} is both swept and fixed")
        fixed = {}
        for name, v in self.fixed.items():
            if name not in PARAMETERS:
                raise SweepError(f"unknown parameter {name!r}; known: {', '.join(PARAMETERS)}")
            if isinstance(v, (list, tuple)):
                if not v:
                    raise SweepError(f"the series for {name!r} is empty")
                fixed[name] = [_coerce(name, x) for x in v]
            else:
                fixed[name] = _coerce(name, v)
        self.fixed = fixed
        if not self.outputs:
            raise SweepError("no outputs requested")
        self.outputs = list(self.outputs)
        unknown = [m for m in self.outputs if m not in METRICS]
        if unknown:
            raise SweepError(f"unknown metric(s) {', '.join(map(repr, unknown))}; valid metrics: {', '.join(METRICS)}")
        have = {self.variable} | set(self.fixed) | set(_DEFAULTS)
        for m in self.outputs:
            missing = [q for q in METRICS[m][0] if q not in have]
            if missing:
                raise SweepError(f"metric {m!r} needs parameter(s) {', '.join(missing)}")

    @property
    def series(self) -> list[str]:
        return [k for k, v in self.fixed.items() if isinstance(v, list)]

    def columns(self) -> list[str]:
        return [self.variable, *self.series, *self.outputs]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "variable": self.variable,
            "range": list(self.range),
            "fixed": {k: (list(v) if isinstance(v, list) else v) for k, v in self.fixed.items()},
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        if not isinstance(d, dict):
            raise SweepError("a sweep spec must be an object")
        d = dict(d)
        if d.pop("version", 1) != 1:
            raise SweepError("unsupported sweep spec version")
        extra = set(d) - {"variable", "range", "fixed", "outputs"}
        if extra:
            raise SweepError(f"unknown sweep fields {sorted(extra)}")
        try:
            return cls(d["variable"], d["range"], dict(d.get("fixed", {})), list(d.get("outputs", [])))
        except KeyError as exc:
            raise SweepError(f"sweep spec is missing {exc.args[0]!r}") from None


def run_sweep(spec: SweepSpec) -> list[list]:
    """Rows in a fixed order: series combinations outermost, swept values innermost."""
    series = spec.series
    scalars = {k: v for k, v in spec.fixed.items() if k not in series}
    rows = []
    for combo in itertools.product(*(spec.fixed[k] for k in series)):
        base = {**_DEFAULTS, **scalars, **dict(zip(series, combo))}
        for x in spec.range:
            p = {**base, spec.variable: x}
            rows.append([x, *combo, *(METRICS[m][1](p) for m in spec.outputs)])
    return rows


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return "%.12g" % v


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()
