"""Seeded discrete-event simulation of the single-cell loss system.

Each class arrives as its own Poisson stream; admitted calls hold a channel
for an exponential time (or the minimum of call duration and dwell time) and
blocked calls are cleared. Statistics come from post-warmup arrivals using
batch means with Student-t 95% intervals.

Random streams are spawned from one ``SeedSequence``: one per arrival class,
one for admission draws and one for holding times, so the same seed and
configuration always reproduce the same event trace.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import kernels
from .errors import ValidationError
from .io import format_float
from .markov import AdmissionProfile
from .policies import FGB, FGC, LFC, NPS, UBT, UFB, UFC, MultiFGB, PolicySpec, build_profile

TRACE_KINDS = ("accept", "block", "depart")


def admit(class_index: int, occupancy: int, profile: AdmissionProfile, u: float) -> bool:
    """Admission decision for a class-``k`` arrival seeing ``occupancy`` busy channels."""
    c = profile.num_channels
    if not 0 <= occupancy <= c:
        raise ValidationError(f"occupancy {occupancy} outside 0..{c}")
    if occupancy == c:
        return False
    return u < profile.accept[class_index - 1, occupancy]


def literal_admit(spec: PolicySpec, class_index: int, occupancy: int, u: float) -> bool:
    """Admission written scheme by scheme, without going through a profile.

    Serves as a cross-check of :func:`cacwb.policies.build_profile`.
    """
    busy = occupancy
    if busy >= spec.C:
        return False
    if isinstance(spec, (MultiFGB, UBT)):
        th = spec.thresholds
        if class_index == 1 or busy < th[class_index - 1]:
            return True
        if isinstance(spec, UBT) and busy < th[class_index - 2]:
            return u < spec.alpha[class_index - 2]
        return False
    if class_index == 1:  # handover call
        return True
    if isinstance(spec, NPS):
        return True
    if isinstance(spec, FGB):
        return busy < spec.M
    if isinstance(spec, FGC):
        return u < spec.alpha[busy]
    if isinstance(spec, LFC):
        if busy < spec.M:
            return True
        return busy == spec.M and u < spec.alpha
    if isinstance(spec, UFC):
        return u < spec.alpha
    if isinstance(spec, UFB):
        if busy < spec.M:
            return True
        return busy < spec.N and u < spec.alpha
    raise ValidationError(f"unknown scheme {spec!r}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    Holding times are ``Exp(mu)`` when ``mu`` is set, otherwise
    ``min(Exp(mu_a), Exp(eta))``.
    """

    policy: PolicySpec
    rates: tuple[float, ...]
    mu: Optional[float] = None
    mu_a: Optional[float] = None
    eta: Optional[float] = None
    total_arrivals: int = 1_000_000
    warmup_fraction: float = 0.1
    batches: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        if len(self.rates) != self.policy.num_classes:
            raise ValidationError(
                f"{self.policy.scheme} has {self.policy.num_classes} classes, got {len(self.rates)} rates")
        if any(not (r >= 0 and math.isfinite(r)) for r in self.rates):
            raise ValidationError("rates must be finite and >= 0")
        if self.mu is not None:
            if self.mu_a is not None or self.eta is not None:
                raise ValidationError("give either mu or (mu_a, eta) for holding times, not both")
            if not self.mu > 0:
                raise ValidationError("mu must be > 0")
        else:
            if self.mu_a is None or self.eta is None:
                raise ValidationError("holding times need mu or both mu_a and eta")
            if self.mu_a < 0 or self.eta < 0 or self.mu_a + self.eta <= 0:
                raise ValidationError("mu_a, eta must be >= 0 with mu_a + eta > 0")
        if self.batches < 2:
            raise ValidationError("batches must be >= 2")
        if self.total_arrivals < 100 * self.batches:
            raise ValidationError("total_arrivals must be >= 100 * batches")
        if not 0.0 <= self.warmup_fraction <= 0.5:
            raise ValidationError("warmup_fraction must lie in [0, 0.5]")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an integer in [0, 2**64)")


@dataclass(frozen=True)
class SimReport:
    blocking: tuple[float, ...]
    blocking_halfwidth: tuple[float, ...]
    dropping: float
    dropping_halfwidth: float
    utilization: float
    utilization_halfwidth: float
    arrivals: tuple[int, ...]
    accepted: tuple[int, ...]
    seed: int
    max_occupancy: int
    trace_digest: Optional[str] = None
    trace: Optional[tuple] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "blocking": list(self.blocking),
            "blocking_halfwidth": list(self.blocking_halfwidth),
            "dropping": self.dropping,
            "dropping_halfwidth": self.dropping_halfwidth,
            "utilization": self.utilization,
            "utilization_halfwidth": self.utilization_halfwidth,
            "arrivals": list(self.arrivals),
            "accepted": list(self.accepted),
            "seed": self.seed,
            "max_occupancy": self.max_occupancy,
            "trace_digest": self.trace_digest,
        }

    def covers(self, metric: str, value: float, class_index: int = 1) -> bool:
        """Whether ``value`` lies inside the 95% interval of ``metric``."""
        if metric == "blocking":
            est = self.blocking[class_index - 1]
            hw = self.blocking_halfwidth[class_index - 1]
        else:
            est = getattr(self, metric)
            hw = getattr(self, f"{metric}_halfwidth")
        return abs(value - est) <= hw


def _merged_arrivals(rates, n, rngs):
    """First ``n`` arrivals of the superposed per-class Poisson streams."""
    total = sum(rates)
    active = [k for k, r in enumerate(rates) if r > 0]
    streams = {}
    for k in active:
        share = n * rates[k] / total
        size = int(share + 6.0 * math.sqrt(share) + 16)
        streams[k] = [np.cumsum(rngs[k].exponential(1.0 / rates[k], size))]

    def last(k):
        return streams[k][-1][-1]

    def extend(k):
        chunk = np.cumsum(rngs[k].exponential(1.0 / rates[k], max(len(streams[k][0]) // 4, 64)))
        streams[k].append(last(k) + chunk)

    while True:
        if sum(sum(len(c) for c in streams[k]) for k in active) < n:
            for k in active:
                extend(k)
            continue
        everything = np.concatenate([c for k in active for c in streams[k]])
        horizon = np.partition(everything, n - 1)[n - 1]
        short = [k for k in active if last(k) < horizon]
        if not short:
            break
        for k in short:
            extend(k)

    times = np.concatenate([np.concatenate(streams[k]) for k in active])
    classes = np.concatenate([np.full(sum(len(c) for c in streams[k]), k, dtype=np.int32)
                              for k in active])
    order = np.argsort(times, kind="stable")[:n]
    return times[order], classes[order]


def _batch_ci(samples: np.ndarray) -> tuple[float, float]:
    if samples.size == 0:
        return 0.0, 0.0
    mean = float(np.mean(samples))
    if samples.size < 2:
        return mean, math.inf
    half = stats.t.ppf(0.975, samples.size - 1) * float(np.std(samples, ddof=1)) / math.sqrt(samples.size)
    return mean, float(half)


def trace_digest(trace) -> str:
    h = hashlib.sha256()
    for arr in trace:
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def sample_holding_times(rng: np.random.Generator, n: int, mu=None, mu_a=None, eta=None) -> np.ndarray:
    if mu is not None:
        return rng.exponential(1.0 / mu, n)
    duration = rng.exponential(1.0 / mu_a, n) if mu_a > 0 else np.full(n, np.inf)
    dwell = rng.exponential(1.0 / eta, n) if eta > 0 else np.full(n, np.inf)
    return np.minimum(duration, dwell)


def simulate(config: SimConfig, record_trace: bool = False) -> SimReport:
    """Run one seeded simulation and summarise it with batch-means intervals."""
    profile = build_profile(config.policy)
    m = profile.num_classes
    c = profile.num_channels
    n = config.total_arrivals
    b = config.batches

    if sum(config.rates) == 0.0:
        empty = tuple(0.0 for _ in range(m))
        trace = tuple(np.empty(0, dtype=dt) for dt in (np.float64, np.int8, np.int32, np.int32))
        return SimReport(empty, empty, 0.0, 0.0, 0.0, 0.0, (0,) * m, (0,) * m, int(config.seed), 0,
                         trace_digest(trace) if record_trace else None,
                         trace if record_trace else None)

    seq = np.random.SeedSequence(int(config.seed))
    children = seq.spawn(m + 2)
    arrival_rngs = [np.random.default_rng(s) for s in children[:m]]
    admission_rng = np.random.default_rng(children[m])
    holding_rng = np.random.default_rng(children[m + 1])

    times, classes = _merged_arrivals(config.rates, n, arrival_rngs)
    uniforms = admission_rng.random(n)
    holding = sample_holding_times(holding_rng, n, config.mu, config.mu_a, config.eta)

    first = int(n * config.warmup_fraction)
    batch_size = (n - first - 1) // b
    arrived, blocked, area, max_occ, trace = kernels.run_loss_system(
        times, classes, uniforms, holding, profile.accept, c, first, batch_size, b, record_trace)

    edges = times[first + batch_size * np.arange(b + 1)]
    util_batches = area / (c * np.diff(edges))
    est, hw = [], []
    for k in range(m):
        mask = arrived[:, k] > 0
        mean, half = _batch_ci(blocked[mask, k] / arrived[mask, k])
        est.append(mean)
        hw.append(half)
    util, util_hw = _batch_ci(util_batches)
    arrivals = tuple(int(x) for x in arrived.sum(axis=0))
    accepted = tuple(int(x) for x in (arrived - blocked).sum(axis=0))
    return SimReport(
        blocking=tuple(est),
        blocking_halfwidth=tuple(hw),
        dropping=est[0],
        dropping_halfwidth=hw[0],
        utilization=util,
        utilization_halfwidth=util_hw,
        arrivals=arrivals,
        accepted=accepted,
        seed=int(config.seed),
        max_occupancy=int(max_occ),
        trace_digest=trace_digest(trace) if record_trace else None,
        trace=trace,
    )


def write_trace_csv(trace, stream) -> None:
    """One row per event: time, kind, class (1-based), occupancy after the event."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["time", "kind", "class", "occupancy"])
    t, kind, cls, occ = trace
    for row in zip(t.tolist(), kind.tolist(), cls.tolist(), occ.tolist()):
        writer.writerow([format_float(row[0]), TRACE_KINDS[row[1]], row[2] + 1, row[3]])
