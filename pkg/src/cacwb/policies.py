"""Admission schemes compiled into acceptance profiles.

Handover-priority schemes are two-class instances: class 1 is handover
traffic (admitted whenever a channel is free), class 2 is new calls, and the
rate vector is ``(lambda_h, lambda_n)``. Multiclass schemes order classes by
priority, class 1 highest.

Thresholds are strict: a call is admitted in state ``i`` only when
``i < threshold``, so the threshold state itself already blocks.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import ClassVar, Optional, Sequence, Union

import numpy as np

from .errors import ValidationError
from .markov import (
    AdmissionProfile,
    MetricsReport,
    StationaryDistribution,
    compute_metrics,
    stationary_distribution,
)


def _check_channels(c):
    if not isinstance(c, (int, np.integer)) or isinstance(c, bool) or c < 1:
        raise ValidationError(f"C must be an integer >= 1, got {c!r}")


def _check_prob(name, x):
    if not (isinstance(x, (int, float, np.floating)) and 0.0 <= float(x) <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {x!r}")


def _check_threshold(name, x, c):
    if not isinstance(x, (int, np.integer)) or isinstance(x, bool) or not 0 <= x <= c:
        raise ValidationError(f"{name} must be an integer with 0 <= {name} <= C={c}, got {x!r}")


@dataclass(frozen=True)
class NPS:
    """No priority: every call takes any free channel."""

    C: int
    scheme: ClassVar[str] = "NPS"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)

    def _new_call_accept(self):
        return np.ones(self.C)


@dataclass(frozen=True)
class FGB:
    """Fixed guard band: new calls only below ``M`` busy channels."""

    C: int
    M: int
    scheme: ClassVar[str] = "FGB"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)
        _check_threshold("M", self.M, self.C)

    def _new_call_accept(self):
        return (np.arange(self.C) < self.M).astype(np.float64)


@dataclass(frozen=True)
class FGC:
    """Fractional guard channel: new calls admitted with ``alpha[i]`` in state ``i``.

    ``alpha`` has length ``C + 1`` and falls from 1 to 0. Left unset, it is
    the linear ramp ``1 - i/C``.
    """

    C: int
    alpha: Optional[tuple[float, ...]] = None
    scheme: ClassVar[str] = "FGC"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)
        if self.alpha is None:
            object.__setattr__(self, "alpha", tuple(1.0 - i / self.C for i in range(self.C + 1)))
        else:
            object.__setattr__(self, "alpha", tuple(float(x) for x in self.alpha))
        a = self.alpha
        if len(a) != self.C + 1:
            raise ValidationError(f"FGC alpha vector must have length C+1={self.C + 1}, got {len(a)}")
        for i, x in enumerate(a):
            _check_prob(f"alpha[{i}]", x)
        if a[0] != 1.0 or a[-1] != 0.0:
            raise ValidationError("FGC alpha vector must start at 1 and end at 0")
        if any(y > x for x, y in zip(a, a[1:])):
            raise ValidationError("FGC alpha vector must be nonincreasing")

    def _new_call_accept(self):
        return np.array(self.alpha[:-1], dtype=np.float64)


@dataclass(frozen=True)
class LFC:
    """Limited fractional channel: randomised admission at the single state ``M``."""

    C: int
    M: int
    alpha: float
    scheme: ClassVar[str] = "LFC"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)
        _check_threshold("M", self.M, self.C)
        _check_prob("alpha", self.alpha)

    def _new_call_accept(self):
        a = (np.arange(self.C) < self.M).astype(np.float64)
        if self.M < self.C:
            a[self.M] = self.alpha
        return a


@dataclass(frozen=True)
class UFC:
    """Uniform fractional channel: new calls admitted with ``alpha`` in every state."""

    C: int
    alpha: float
    scheme: ClassVar[str] = "UFC"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)
        _check_prob("alpha", self.alpha)

    def _new_call_accept(self):
        return np.full(self.C, float(self.alpha))


@dataclass(frozen=True)
class UFB:
    """Uniform fractional band.

    New calls: always below ``M``, with probability ``alpha`` in ``[M, N)``,
    never from ``N`` up.
    """

    C: int
    M: int
    N: int
    alpha: float
    scheme: ClassVar[str] = "UFB"
    num_classes: ClassVar[int] = 2

    def __post_init__(self):
        _check_channels(self.C)
        _check_threshold("M", self.M, self.C)
        _check_threshold("N", self.N, self.C)
        if self.M > self.N:
            raise ValidationError(f"UFB requires M <= N, got M={self.M}, N={self.N}")
        _check_prob("alpha", self.alpha)

    def _new_call_accept(self):
        i = np.arange(self.C)
        a = np.zeros(self.C)
        a[i < self.M] = 1.0
        a[(i >= self.M) & (i < self.N)] = self.alpha
        return a


def _check_thresholds(c, thresholds):
    th = tuple(thresholds)
    if len(th) < 2:
        raise ValidationError("multiclass schemes need at least two thresholds")
    for j, x in enumerate(th, start=1):
        _check_threshold(f"C_{j}", x, c)
    if th[0] != c:
        raise ValidationError(f"C_1 must equal C={c}, got {th[0]}")
    if any(y > x for x, y in zip(th, th[1:])):
        raise ValidationError(f"thresholds must be nonincreasing in class index, got {list(th)}")
    return tuple(int(x) for x in th)


@dataclass(frozen=True)
class MultiFGB:
    """Multiclass fixed guard bands: class ``k`` admitted only below ``C_k``."""

    C: int
    thresholds: tuple[int, ...]
    scheme: ClassVar[str] = "MultiFGB"

    def __post_init__(self):
        _check_channels(self.C)
        object.__setattr__(self, "thresholds", _check_thresholds(self.C, self.thresholds))

    @property
    def num_classes(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class UBT:
    """Uniform band thinning.

    Class ``k >= 2`` is admitted freely below ``C_k``, with probability
    ``alpha[k-2]`` in ``[C_k, C_{k-1})`` and never above. ``alpha`` has
    ``m - 1`` entries, the factor of class 2 first.
    """

    C: int
    thresholds: tuple[int, ...]
    alpha: tuple[float, ...] = field(default=())
    scheme: ClassVar[str] = "UBT"

    def __post_init__(self):
        _check_channels(self.C)
        object.__setattr__(self, "thresholds", _check_thresholds(self.C, self.thresholds))
        a = tuple(float(x) for x in self.alpha)
        if len(a) != len(self.thresholds) - 1:
            raise ValidationError(
                f"UBT needs {len(self.thresholds) - 1} acceptance factors, got {len(a)}"
            )
        for j, x in enumerate(a, start=1):
            _check_prob(f"alpha_{j}", x)
        object.__setattr__(self, "alpha", a)

    @property
    def num_classes(self) -> int:
        return len(self.thresholds)


PolicySpec = Union[NPS, FGB, FGC, LFC, UFC, UFB, MultiFGB, UBT]
HANDOVER_SCHEMES = (NPS, FGB, FGC, LFC, UFC, UFB)
SCHEMES = {cls.scheme: cls for cls in (*HANDOVER_SCHEMES, MultiFGB, UBT)}


def build_profile(spec: PolicySpec) -> AdmissionProfile:
    """Compile a scheme into its per-class, per-state acceptance matrix."""
    c = spec.C
    if isinstance(spec, HANDOVER_SCHEMES):
        return AdmissionProfile(np.vstack([np.ones(c), spec._new_call_accept()]))
    states = np.arange(c)
    th = spec.thresholds
    rows = [(states < th[0]).astype(np.float64)]
    for k in range(1, len(th)):
        row = (states < th[k]).astype(np.float64)
        if isinstance(spec, UBT):
            row[(states >= th[k]) & (states < th[k - 1])] = spec.alpha[k - 1]
        rows.append(row)
    return AdmissionProfile(np.vstack(rows))


@dataclass(frozen=True)
class PolicyEvaluation:
    spec: PolicySpec
    rates: tuple[float, ...]
    mu: float
    distribution: StationaryDistribution
    metrics: MetricsReport


def evaluate_policy(spec: PolicySpec, rates: Sequence[float], mu: float) -> PolicyEvaluation:
    """Solve the chain for ``spec`` at the given per-class rates."""
    profile = build_profile(spec)
    dist = stationary_distribution(profile, rates, mu)
    metrics = compute_metrics(dist, profile, rates, mu)
    return PolicyEvaluation(spec, tuple(float(x) for x in rates), float(mu), dist, metrics)


def reduction_check(spec: PolicySpec) -> Optional[PolicySpec]:
    """Return a simpler scheme with the identical profile, if one exists."""
    if isinstance(spec, UFB):
        if spec.M == spec.N or spec.alpha == 0.0:
            return FGB(spec.C, spec.M)
        if spec.alpha == 1.0:
            return FGB(spec.C, spec.N)
    elif isinstance(spec, UFC):
        if spec.alpha == 1.0:
            return NPS(spec.C)
    elif isinstance(spec, LFC):
        if spec.alpha == 0.0:
            return FGB(spec.C, spec.M)
        if spec.alpha == 1.0:
            return FGB(spec.C, min(spec.M + 1, spec.C))
    elif isinstance(spec, UBT):
        if all(a == 0.0 for a in spec.alpha):
            return MultiFGB(spec.C, spec.thresholds)
    return None


def policy_to_dict(spec: PolicySpec) -> dict:
    d = asdict(spec)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    d["scheme"] = spec.scheme
    return d


_FIELDS = {
    "NPS": {"C"},
    "FGB": {"C", "M"},
    "FGC": {"C", "alpha"},
    "LFC": {"C", "M", "alpha"},
    "UFC": {"C", "alpha"},
    "UFB": {"C", "M", "N", "alpha"},
    "MultiFGB": {"C", "thresholds"},
    "UBT": {"C", "thresholds", "alpha"},
}
_OPTIONAL = {"FGC": {"alpha"}}


def policy_from_dict(d: dict) -> PolicySpec:
    """Parse ``{"scheme": name, ...params}``; unknown or missing keys are errors."""
    if not isinstance(d, dict) or "scheme" not in d:
        raise ValidationError("policy.scheme is required")
    name = d["scheme"]
    if name not in SCHEMES:
        raise ValidationError(f"policy.scheme {name!r} unknown; choose from {sorted(SCHEMES)}")
    params = {k: v for k, v in d.items() if k != "scheme"}
    allowed = _FIELDS[name]
    unknown = set(params) - allowed
    if unknown:
        raise ValidationError(f"policy: unknown key(s) {sorted(unknown)} for scheme {name}")
    missing = allowed - set(params) - _OPTIONAL.get(name, set())
    if missing:
        raise ValidationError(f"policy: missing key(s) {sorted(missing)} for scheme {name}")
    for key in ("thresholds", "alpha"):
        if isinstance(params.get(key), list):
            params[key] = tuple(params[key])
    if name in ("UFC", "LFC", "UFB") and isinstance(params.get("alpha"), tuple):
        raise ValidationError(f"policy.alpha must be a scalar for scheme {name}")
    return SCHEMES[name](**params)
