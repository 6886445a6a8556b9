"""Scenario description for the retainer simulator."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from typing import Sequence

from ..erlang import DomainError, RetainerParams

MODES = ("baseline", "abandonment", "tiered", "precruitment")
RECRUITMENT = ("exponential", "deterministic")
LATENCY_KINDS = ("point", "exponential", "empirical")
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid simulator configuration."""


@dataclass(frozen=True)
class LatencySpec:
    """Distribution of a worker's alert-response time, in seconds.

    ``kind`` is ``"point"`` (always ``value``), ``"exponential"`` (mean
    ``value``) or ``"empirical"`` (uniform draw from ``samples``).
    """

    kind: str = "point"
    value: float | None = None
    samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in LATENCY_KINDS:
            raise ConfigError(f"unknown latency kind {self.kind!r}; expected one of {LATENCY_KINDS}")
        if self.kind == "empirical":
            if not self.samples:
                raise ConfigError("empirical latency needs a non-empty sample list")
            object.__setattr__(self, "samples", tuple(sorted(float(x) for x in self.samples)))
            if self.samples[0] < 0:
                raise ConfigError("latency samples must be >= 0")
        elif self.value is None or not (self.value >= 0 and math.isfinite(self.value)):
            raise ConfigError(f"{self.kind} latency needs a finite value >= 0")
        if self.kind == "exponential" and self.value == 0:
            raise ConfigError("exponential latency needs a positive mean")

    @property
    def mean(self) -> float:
        if self.kind == "empirical":
            return math.fsum(self.samples) / len(self.samples)
        return float(self.value)

    def cdf(self, x: float) -> float:
        if self.kind == "point":
            return 1.0 if x >= self.value else 0.0
        if self.kind == "exponential":
            return 1.0 if math.isinf(x) else -math.expm1(-x / self.value)
        return bisect.bisect_right(self.samples, x) / len(self.samples)

    def quantile_for(self, q: float) -> float:
        """Smallest timeout ``x`` with ``cdf(x) == q``; raises if ``q`` is not attainable."""
        if q >= 1.0:
            return math.inf if self.kind == "exponential" else (
                self.value if self.kind == "point" else self.samples[-1])
        if self.kind == "exponential":
            return -self.value * math.log1p(-q)
        if self.kind == "empirical":
            n = len(self.samples)
            k = q * n
            if abs(k - round(k)) < 1e-9 and round(k) >= 1:
                x = self.samples[round(k) - 1]
                if abs(self.cdf(x) - q) < 1e-9:
                    return x
        raise ConfigError(f"{self.kind} latency cannot make exactly a fraction {q} respond in time")

    def to_dict(self) -> dict:
        if self.kind == "empirical":
            return {"kind": self.kind, "samples": list(self.samples)}
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "LatencySpec":
        samples = d.get("samples")
        return cls(d["kind"], d.get("value"), tuple(samples) if samples is not None else None)


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario.

    ``horizon`` is simulated seconds when ``horizon_kind == "time"`` and a
    number of arriving tasks when it is ``"tasks"``; the first ``warmup``
    fraction is discarded.  Within-run standard errors come from
    ``n_batches`` batch means over the remaining window.
    """

    params: RetainerParams
    horizon: float
    horizon_kind: str = "time"
    seed: int = 0
    warmup: float = 0.1
    mode: str = "baseline"
    tiers: tuple[int, ...] | None = None
    respond_fraction: float | None = None
    beta: float | None = None
    patience: float = 10.0
    max_realerts: int = 10
    response_latency: LatencySpec | None = None
    recruitment: str = "exponential"
    precruit: bool = True
    n_batches: int = 50

    def __post_init__(self):
        p = self.params
        if not isinstance(p, RetainerParams):
            raise ConfigError("params must be RetainerParams")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.horizon_kind not in ("time", "tasks"):
            raise ConfigError("horizon_kind must be 'time' or 'tasks'")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be > 0, got {self.horizon}")
        if not (0.0 <= self.warmup < 1.0):
            raise ConfigError(f"warmup must lie in [0, 1), got {self.warmup}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError("seed must be an integer in [0, 2**64)")
        if not (isinstance(self.n_batches, int) and self.n_batches >= 2):
            raise ConfigError("n_batches must be an integer >= 2")
        if self.recruitment not in RECRUITMENT:
            raise ConfigError(f"recruitment must be one of {RECRUITMENT}")
        if self.horizon_kind == "tasks":
            if self.horizon != int(self.horizon):
                raise ConfigError("a task-count horizon must be an integer")
            if p.lam == 0:
                raise ConfigError("a task-count horizon never ends when lambda is 0")
            if int(self.horizon) - int(self.warmup * self.horizon) < self.n_batches:
                raise ConfigError("too few post-warmup tasks for the requested number of batches")
        if (self.tiers is not None and len(self.tiers) > 0) != (self.mode == "tiered"):
            raise ConfigError("tiers must be given (non-empty) exactly when mode is 'tiered'")
        if self.tiers is not None:
            tiers = tuple(self.tiers)
            if any(isinstance(c, bool) or int(c) != c or c < 0 for c in tiers):
                raise ConfigError("tier sizes must be integers >= 0")
            object.__setattr__(self, "tiers", tuple(int(c) for c in tiers))
        lat = self.response_latency
        if lat is None:
            object.__setattr__(self, "response_latency", LatencySpec("point", p.r_mean))
        elif abs(lat.mean - p.r_mean) > 1e-9:
            raise ConfigError(f"response_latency mean {lat.mean} disagrees with r_mean {p.r_mean}")
        if self.mode == "abandonment":
            if p.a >= 1.0:
                raise ConfigError("a = 1 means no alerted worker ever responds")
            if not (isinstance(self.max_realerts, int) and self.max_realerts >= 1):
                raise ConfigError("max_realerts must be an integer >= 1")
        if self.mode == "tiered":
            if p.a >= 1.0:
                raise ConfigError("a = 1 means no alerted worker ever responds")
            f = self.respond_fraction
            if f is not None:
                if not (0.0 < f <= 1.0):
                    raise ConfigError("respond_fraction must lie in (0, 1]")
                if f > 1.0 - p.a + 1e-12:
                    raise ConfigError("respond_fraction cannot exceed 1 - a")
                self.response_latency.quantile_for(min(1.0, f / (1.0 - p.a)))
        if self.mode == "precruitment":
            if self.beta is None or not self.beta >= 0:
                raise ConfigError("precruitment needs beta >= 0")
            if not self.patience > 0:
                raise ConfigError(f"patience must be > 0, got {self.patience}")

    @property
    def timeout(self) -> float:
        """Seconds to wait for an alerted worker before moving on."""
        if self.mode == "tiered" and self.respond_fraction is not None:
            q = min(1.0, self.respond_fraction / (1.0 - self.params.a))
            return self.response_latency.quantile_for(q)
        return self.params.alpha * self.params.r_mean

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "params": self.params.to_dict(),
            "horizon": self.horizon,
            "horizon_kind": self.horizon_kind,
            "seed": self.seed,
            "warmup": self.warmup,
            "mode": self.mode,
            "tiers": list(self.tiers) if self.tiers is not None else None,
            "respond_fraction": self.respond_fraction,
            "beta": self.beta,
            "patience": self.patience,
            "max_realerts": self.max_realerts,
            "response_latency": self.response_latency.to_dict(),
            "recruitment": self.recruitment,
            "precruit": self.precruit,
            "n_batches": self.n_batches,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        version = d.pop("version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config version {version!r}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            pd = dict(d.pop("params"))
        except KeyError:
            raise ConfigError("config needs a 'params' block") from None
        lat = d.get("response_latency")
        if lat is not None:
            lat = LatencySpec.from_dict(lat)
            d["response_latency"] = lat
            pd.setdefault("r_mean", lat.mean)
        try:
            d["params"] = RetainerParams.from_dict(pd)
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"bad params: {exc}") from None
        if d.get("tiers") is not None:
            d["tiers"] = tuple(d["tiers"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def check_same_scenario(configs: Sequence[SimConfig]) -> None:
    """Raise unless the configs differ at most in their seed."""
    first = replace(configs[0], seed=0)
    for c in configs[1:]:
        if replace(c, seed=0) != first:
            raise ConfigError("replications must share one scenario (only the seed may differ)")
