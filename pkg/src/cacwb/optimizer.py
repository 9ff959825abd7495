"""Acceptance-factor search under QoS protection, with a persistent memo cache.

Starting from a guard-band baseline (``MultiFGB`` or ``FGB``), every vector
of acceptance factors on a regular grid is evaluated analytically as a
``UBT`` (resp. ``UFB``) scheme. Candidates that let any protected class
block more than ``(1 + epsilon)`` times its baseline value are discarded;
the best remaining one wins. The all-zero vector reproduces the baseline,
so the feasible set is never empty.
"""
from __future__ import annotations

import itertools
import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from filelock import FileLock

from .errors import ValidationError
from .markov import MetricsReport
from .policies import FGB, UBT, UFB, MultiFGB, evaluate_policy, policy_to_dict

OBJECTIVES = ("min_overall_blocking", "max_utilization")
CACHE_ENV = "CACWB_CACHE"


class CacheWarning(UserWarning):
    pass


def default_protected(num_classes: int) -> frozenset[int]:
    return frozenset(k for k in (1, 2) if k < num_classes)


@dataclass(frozen=True)
class SearchSpec:
    base_policy: MultiFGB | FGB
    rates: tuple[float, ...]
    mu: float
    grid_step: float = 0.1
    protected: Optional[frozenset[int]] = None
    epsilon: float = 0.10
    objective: str = "min_overall_blocking"
    N: Optional[int] = None  # fractional-band top for an FGB baseline; defaults to C

    def __post_init__(self):
        base = self.base_policy
        if not isinstance(base, (MultiFGB, FGB)):
            raise ValidationError("search base policy must be MultiFGB or FGB")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        m = base.num_classes
        if len(self.rates) != m:
            raise ValidationError(f"expected {m} class rates, got {len(self.rates)}")
        if not self.mu > 0:
            raise ValidationError("mu must be > 0")
        if not 0.0 < self.grid_step <= 1.0:
            raise ValidationError("grid_step must lie in (0, 1]")
        if self.epsilon < 0 or not math.isfinite(self.epsilon):
            raise ValidationError("epsilon must be finite and >= 0")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}")
        prot = default_protected(m) if self.protected is None else frozenset(self.protected)
        if not prot <= set(range(1, m + 1)):
            raise ValidationError(f"protected classes must lie in 1..{m}")
        object.__setattr__(self, "protected", prot)
        if isinstance(base, FGB):
            n = base.C if self.N is None else self.N
            if not base.M <= n <= base.C:
                raise ValidationError(f"N must satisfy M <= N <= C, got N={n}")
            object.__setattr__(self, "N", n)
        elif self.N is not None:
            raise ValidationError("N applies only to an FGB baseline")

    @property
    def dimension(self) -> int:
        return self.base_policy.num_classes - 1

    def candidate(self, alpha: Sequence[float]):
        base = self.base_policy
        if isinstance(base, FGB):
            return UFB(base.C, base.M, self.N, alpha[0])
        return UBT(base.C, base.thresholds, tuple(alpha))

    def grid(self) -> list[float]:
        n = int(math.floor(1.0 / self.grid_step + 1e-9))
        values = [float(f"{i * self.grid_step:.12g}") for i in range(n + 1)]
        if values[-1] != 1.0:
            values.append(1.0)
        return values


@dataclass(frozen=True)
class OptimizationResult:
    best_alpha: tuple[float, ...]
    best_metrics: MetricsReport
    baseline_metrics: MetricsReport
    evaluated: int
    feasible_count: int
    from_cache: bool = False
    feasible_set: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "best_alpha": list(self.best_alpha),
            "best_metrics": self.best_metrics.to_dict(),
            "baseline_metrics": self.baseline_metrics.to_dict(),
            "evaluated": self.evaluated,
            "feasible_count": self.feasible_count,
            "from_cache": self.from_cache,
            "feasible_set": [
                {"alpha": list(a), "overall_blocking": ob, "utilization": u}
                for a, ob, u in self.feasible_set
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationResult":
        return cls(
            best_alpha=tuple(float(x) for x in d["best_alpha"]),
            best_metrics=MetricsReport.from_dict(d["best_metrics"]),
            baseline_metrics=MetricsReport.from_dict(d["baseline_metrics"]),
            evaluated=int(d["evaluated"]),
            feasible_count=int(d["feasible_count"]),
            from_cache=bool(d["from_cache"]),
            feasible_set=tuple(
                (tuple(float(x) for x in e["alpha"]), float(e["overall_blocking"]),
                 float(e["utilization"]))
                for e in d["feasible_set"]
            ),
        )


def qos_feasible(candidate: MetricsReport, baseline: MetricsReport,
                 protected: Iterable[int], epsilon: float) -> bool:
    if len(candidate.blocking) != len(baseline.blocking):
        raise ValidationError("reports disagree in class count")
    return all(candidate.blocking[k - 1] <= baseline.blocking[k - 1] * (1.0 + epsilon)
               for k in protected)


def _g12(x: float) -> str:
    return format(float(x), ".12g")


def cache_key(spec: SearchSpec) -> str:
    """Canonical key; depends on loads only, so scaling all rates and mu together hits."""
    base = spec.base_policy
    total = sum(spec.rates)
    ratio = [r / total for r in spec.rates] if total > 0 else [0.0] * len(spec.rates)
    key = {
        "base": policy_to_dict(base),
        "N": spec.N,
        "ratio": [_g12(x) for x in ratio],
        "load": _g12(total / spec.mu),
        "grid_step": _g12(spec.grid_step),
        "epsilon": _g12(spec.epsilon),
        "protected": sorted(spec.protected),
        "objective": spec.objective,
    }
    return json.dumps(key, sort_keys=True, separators=(",", ":"))


def default_cache_path() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "cacwb" / "optimizer-cache.json"


class ResultCache:
    """JSON map from canonical key to result; unreadable files count as empty."""

    def __init__(self, path: os.PathLike | str | None = None):
        self.path = Path(path) if path is not None else default_cache_path()

    def _read(self) -> dict:
        try:
            with open(self.path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            return {}
        except (OSError, ValueError) as exc:
            warnings.warn(f"optimizer cache {self.path} unreadable ({exc}); treating as cold",
                          CacheWarning, stacklevel=3)
            return {}
        if not isinstance(doc, dict):
            warnings.warn(f"optimizer cache {self.path} malformed; treating as cold",
                          CacheWarning, stacklevel=3)
            return {}
        return doc

    def lookup(self, key: str) -> Optional[OptimizationResult]:
        entry = self._read().get(key)
        if entry is None:
            return None
        try:
            return replace(OptimizationResult.from_dict(entry), from_cache=True)
        except (KeyError, TypeError, ValueError):
            warnings.warn("optimizer cache entry malformed; ignoring", CacheWarning, stacklevel=2)
            return None

    def store(self, key: str, result: OptimizationResult) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with FileLock(str(self.path) + ".lock"):
                doc = self._read()
                doc[key] = replace(result, from_cache=False).to_dict()
                tmp = self.path.with_name(self.path.name + ".tmp")
                with open(tmp, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, sort_keys=True)
                os.replace(tmp, self.path)
        except OSError as exc:
            warnings.warn(f"could not write optimizer cache {self.path}: {exc}",
                          CacheWarning, stacklevel=2)


def _rank(objective: str, alpha, metrics: MetricsReport):
    if objective == "max_utilization":
        return (-metrics.utilization, tuple(alpha))
    return (metrics.overall_blocking, -metrics.utilization, tuple(alpha))


def evaluate_grid(spec: SearchSpec, order: Optional[Sequence[tuple]] = None):
    """Evaluate all grid candidates; returns ``[(alpha, metrics, feasible)]``."""
    baseline = evaluate_policy(spec.base_policy, spec.rates, spec.mu).metrics
    points = list(order) if order is not None else list(
        itertools.product(spec.grid(), repeat=spec.dimension))
    out = []
    for alpha in points:
        metrics = evaluate_policy(spec.candidate(alpha), spec.rates, spec.mu).metrics
        out.append((tuple(alpha), metrics, qos_feasible(metrics, baseline, spec.protected,
                                                         spec.epsilon)))
    return baseline, out


def search_acceptance_factors(spec: SearchSpec, cache: Optional[ResultCache] = None,
                              order: Optional[Sequence[tuple]] = None) -> OptimizationResult:
    """Exhaustive grid search for the best QoS-feasible acceptance factors.

    Ties on the objective go to higher utilization, then to the
    lexicographically smallest vector, so the result does not depend on
    evaluation ``order``.
    """
    key = cache_key(spec)
    if cache is not None:
        hit = cache.lookup(key)
        if hit is not None:
            return hit

    baseline, evaluated = evaluate_grid(spec, order)
    feasible = [(a, m) for a, m, ok in evaluated if ok]
    best_alpha, best_metrics = min(feasible, key=lambda am: _rank(spec.objective, *am))
    result = OptimizationResult(
        best_alpha=best_alpha,
        best_metrics=best_metrics,
        baseline_metrics=baseline,
        evaluated=len(evaluated),
        feasible_count=len(feasible),
        feasible_set=tuple(sorted((a, m.overall_blocking, m.utilization) for a, m in feasible)),
    )
    if cache is not None:
        cache.store(key, result)
    return result


def named_candidate_metrics(spec: SearchSpec, alpha: Sequence[float]) -> MetricsReport:
    return evaluate_policy(spec.candidate(alpha), spec.rates, spec.mu).metrics

