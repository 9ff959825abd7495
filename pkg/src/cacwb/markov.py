"""State-dependent birth-death loss chain and its performance metrics.

Every admission scheme is expressed as an :class:`AdmissionProfile`: the
probability ``accept[k, i]`` that a class-``k`` arrival is admitted while
``i`` channels are busy. The chain then has birth rate
``Lambda(i) = sum_k accept[k, i] * rates[k]`` and death rate ``i * mu``, and

    p[i] ~ prod_{j < i} Lambda(j) / ((j + 1) * mu)

Class numbers in the public API are 1-based; class 1 has the highest
priority. A full system (state ``C``) blocks every class regardless of the
profile.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DegenerateInputError, DimensionError, ValidationError


@dataclass(frozen=True, eq=False)
class AdmissionProfile:
    """Per-class, per-state acceptance probabilities, shape ``(m, C)``."""

    accept: np.ndarray

    def __post_init__(self):
        a = np.array(self.accept, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1:
            raise DimensionError(f"accept must be a 2-D (classes, C) array, got shape {a.shape}")
        if not np.all(np.isfinite(a)) or a.min(initial=0.0) < 0.0 or a.max(initial=0.0) > 1.0:
            raise ValidationError("every acceptance probability must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "accept", a)

    @property
    def num_channels(self) -> int:
        return self.accept.shape[1]

    @property
    def num_classes(self) -> int:
        return self.accept.shape[0]

    @property
    def is_monotone(self) -> bool:
        """True when every class is thinned nonincreasingly in occupancy."""
        return bool(np.all(np.diff(self.accept, axis=1) <= 0.0))

    def birth_rates(self, rates) -> np.ndarray:
        r = _rates(rates, self.num_classes)
        return r @ self.accept

    def __eq__(self, other):
        if not isinstance(other, AdmissionProfile):
            return NotImplemented
        return np.array_equal(self.accept, other.accept)

    def __hash__(self):
        return hash((self.accept.shape, self.accept.tobytes()))


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def num_channels(self) -> int:
        return len(self.p) - 1

    def mean_occupancy(self) -> float:
        return float(np.dot(np.arange(len(self.p), dtype=np.float64), self.p))

    def __eq__(self, other):
        if not isinstance(other, StationaryDistribution):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    __hash__ = None


@dataclass(frozen=True)
class MetricsReport:
    """Loss-system metrics; ``blocking[0]`` belongs to class 1."""

    blocking: tuple[float, ...]
    dropping: float
    utilization: float
    overall_blocking: float
    carried_load: float
    mean_occupancy: float

    def to_dict(self) -> dict:
        return {
            "blocking": list(self.blocking),
            "dropping": self.dropping,
            "utilization": self.utilization,
            "overall_blocking": self.overall_blocking,
            "carried_load": self.carried_load,
            "mean_occupancy": self.mean_occupancy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            blocking=tuple(float(x) for x in d["blocking"]),
            dropping=float(d["dropping"]),
            utilization=float(d["utilization"]),
            overall_blocking=float(d["overall_blocking"]),
            carried_load=float(d["carried_load"]),
            mean_occupancy=float(d["mean_occupancy"]),
        )


def _rates(rates, m: int) -> np.ndarray:
    r = np.asarray(rates, dtype=np.float64).reshape(-1)
    if r.shape[0] != m:
        raise DimensionError(f"expected {m} class rates, got {r.shape[0]}")
    if not np.all(np.isfinite(r)) or np.any(r < 0.0):
        raise ValidationError("arrival rates must be finite and >= 0")
    return r


def stationary_distribution(profile: AdmissionProfile, rates, mu: float) -> StationaryDistribution:
    """Exact occupancy distribution ``P(0..C)`` of the thinned loss chain."""
    if not mu > 0.0:
        raise ValidationError(f"departure rate mu must be > 0, got {mu}")
    birth = profile.birth_rates(rates)
    return StationaryDistribution(kernels.birth_death_weights(birth, float(mu)))


def _check_pair(dist: StationaryDistribution, profile: AdmissionProfile, class_index: int) -> None:
    if dist.num_channels != profile.num_channels:
        raise DimensionError(
            f"distribution has C={dist.num_channels} but profile has C={profile.num_channels}"
        )
    if not 1 <= class_index <= profile.num_classes:
        raise DimensionError(f"class index {class_index} outside 1..{profile.num_classes}")


def state_blocking_terms(dist: StationaryDistribution, profile: AdmissionProfile,
                         class_index: int) -> np.ndarray:
    """Per-state contribution to the blocking of one class (length C+1)."""
    _check_pair(dist, profile, class_index)
    a = profile.accept[class_index - 1]
    terms = np.empty_like(dist.p)
    terms[:-1] = (1.0 - a) * dist.p[:-1]
    terms[-1] = dist.p[-1]
    return terms


def blocking_probability(dist: StationaryDistribution, profile: AdmissionProfile,
                         class_index: int) -> float:
    return float(np.sum(state_blocking_terms(dist, profile, class_index)))


def dropping_probability(dist: StationaryDistribution) -> float:
    return float(dist.p[-1])


def band_blocking_decomposition(dist: StationaryDistribution, profile: AdmissionProfile,
                                class_index: int, band_edges: Sequence[int]) -> list[float]:
    """Split a class's blocking over contiguous state bands.

    ``band_edges`` lists ``0 = e_0 < e_1 < ... < e_n = C + 1``; band ``b``
    holds states ``e_b <= i < e_{b+1}``. Contributions sum to the blocking
    probability.
    """
    edges = [int(e) for e in band_edges]
    c = dist.num_channels
    if len(edges) < 2 or edges[0] != 0 or edges[-1] != c + 1:
        raise ValidationError(f"band edges must start at 0 and end at C+1={c + 1}, got {edges}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError(f"band edges must be strictly increasing, got {edges}")
    terms = state_blocking_terms(dist, profile, class_index)
    return [float(np.sum(terms[lo:hi])) for lo, hi in zip(edges, edges[1:])]


def channel_utilization(rates, blocking, mu: float, num_channels: int) -> float:
    r = np.asarray(rates, dtype=np.float64)
    b = np.asarray(blocking, dtype=np.float64)
    if r.shape != b.shape:
        raise DimensionError("rates and blocking must have equal length")
    return float(np.dot(r, 1.0 - b) / (mu * num_channels))


def overall_blocking(rates, blocking) -> float:
    r = np.asarray(rates, dtype=np.float64)
    b = np.asarray(blocking, dtype=np.float64)
    if r.shape != b.shape:
        raise DimensionError("rates and blocking must have equal length")
    total = float(np.sum(r))
    if total <= 0.0:
        raise DegenerateInputError("overall blocking is undefined with zero offered traffic")
    return 1.0 - float(np.dot(r, 1.0 - b)) / total


def compute_metrics(dist: StationaryDistribution, profile: AdmissionProfile, rates,
                    mu: float) -> MetricsReport:
    r = _rates(rates, profile.num_classes)
    blocking = tuple(blocking_probability(dist, profile, k)
                     for k in range(1, profile.num_classes + 1))
    c = profile.num_channels
    carried = float(np.dot(r, 1.0 - np.asarray(blocking))) / mu
    overall = overall_blocking(r, blocking) if np.sum(r) > 0.0 else 0.0
    return MetricsReport(
        blocking=blocking,
        dropping=dropping_probability(dist),
        utilization=channel_utilization(r, blocking, mu, c),
        overall_blocking=overall,
        carried_load=carried,
        mean_occupancy=dist.mean_occupancy(),
    )


def balance_residual(dist: StationaryDistribution, profile: AdmissionProfile, rates,
                     mu: float) -> float:
    """Largest cut-equation imbalance relative to the largest flow term."""
    birth = profile.birth_rates(rates)
    up = birth * dist.p[:-1]
    down = np.arange(1, len(dist.p)) * mu * dist.p[1:]
    scale = max(float(np.max(up, initial=0.0)), float(np.max(down, initial=0.0)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(up - down)) / scale)


def erlang_b(channels: int, load: float) -> float:
    """Erlang-B blocking by the stable recursion ``B(k) = aB/(k + aB)``."""
    b = 1.0
    for k in range(1, channels + 1):
        b = load * b / (k + load * b)
    return b
