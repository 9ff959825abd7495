"""Cell traffic parameters and the handover-rate flow balance.

A call leaves its cell either by completing (rate ``mu_a``) or by moving
out (rate ``eta``). The handover arrival rate can be fixed as a ratio of the
new-call rate, or obtained from flow balance: the rate of calls handed in
equals the rate of admitted calls that later hand out, which couples
``lambda_h`` to the blocking it causes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import DegenerateInputError, NonConvergenceError, ValidationError
from .markov import MetricsReport
from .policies import HANDOVER_SCHEMES, evaluate_policy

DAMPING = 0.5
MAX_ITERATIONS = 10_000


def handover_probability(eta: float, mu_a: float) -> float:
    """Probability that a call hands over before it completes."""
    if eta < 0 or mu_a < 0:
        raise ValidationError("eta and mu_a must be >= 0")
    if eta + mu_a == 0:
        raise DegenerateInputError("handover probability undefined when eta + mu_a = 0")
    return eta / (eta + mu_a)


def effective_departure_rate(mu_a: float, eta: float) -> float:
    """Rate of the channel holding time, the minimum of two exponentials."""
    if eta < 0 or mu_a < 0:
        raise ValidationError("eta and mu_a must be >= 0")
    return mu_a + eta


def handover_rate_balance(lambda_n: float, P_h: float, P_B: float, P_D: float) -> float:
    """One evaluation of the flow-balance handover rate."""
    for name, x in (("P_h", P_h), ("P_B", P_B), ("P_D", P_D)):
        if not 0.0 <= x <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {x}")
    if lambda_n < 0:
        raise ValidationError("lambda_n must be >= 0")
    denom = 1.0 - P_h * (1.0 - P_D)
    if denom == 0.0:
        raise DegenerateInputError("flow balance undefined when P_h * (1 - P_D) = 1")
    return lambda_n * (1.0 - P_B) * P_h / denom


def default_tolerance(lambda_n: float) -> float:
    return 1e-9 * max(lambda_n, 1.0)


@dataclass(frozen=True)
class FixedPointReport:
    lambda_n: float
    lambda_h: float
    iterations: int
    residual: float
    converged: bool
    metrics_at_solution: MetricsReport

    def to_dict(self) -> dict:
        return {
            "lambda_n": self.lambda_n,
            "lambda_h": self.lambda_h,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "metrics": self.metrics_at_solution.to_dict(),
        }


def estimate_handover_rate(policy, lambda_n: float, P_h: float, mu: float,
                           tolerance: Optional[float] = None,
                           max_iterations: int = MAX_ITERATIONS,
                           damping: float = DAMPING) -> FixedPointReport:
    """Solve ``lambda_h = balance(lambda_h)`` by damped fixed-point iteration.

    Each step solves the chain at the current ``lambda_h`` for the new-call
    blocking and handover dropping, evaluates the balance, and moves a
    ``damping`` fraction of the way toward it. Starts from the lossless
    value ``lambda_n * P_h / (1 - P_h)``.

    Raises :class:`NonConvergenceError` carrying the last iterate when the
    residual is still above ``tolerance`` after ``max_iterations`` solves.
    """
    if not isinstance(policy, HANDOVER_SCHEMES):
        raise ValidationError(f"handover estimation needs a two-class scheme, got {policy.scheme}")
    if lambda_n < 0:
        raise ValidationError("lambda_n must be >= 0")
    if not 0.0 <= P_h < 1.0:
        raise ValidationError(f"P_h must lie in [0, 1), got {P_h}")
    if not 0.0 < damping <= 1.0:
        raise ValidationError("damping must lie in (0, 1]")
    if max_iterations < 1:
        raise ValidationError("max_iterations must be >= 1")
    tol = default_tolerance(lambda_n) if tolerance is None else tolerance

    lam_h = lambda_n * P_h / (1.0 - P_h)
    for it in range(1, max_iterations + 1):
        metrics = evaluate_policy(policy, (lam_h, lambda_n), mu).metrics
        target = handover_rate_balance(lambda_n, P_h, metrics.blocking[1], metrics.dropping)
        residual = abs(target - lam_h)
        if residual <= tol:
            return FixedPointReport(lambda_n, lam_h, it, residual, True, metrics)
        if it == max_iterations:
            break
        lam_h = lam_h + damping * (target - lam_h)
    report = FixedPointReport(lambda_n, lam_h, max_iterations, residual, False, metrics)
    raise NonConvergenceError(
        f"handover rate did not converge in {max_iterations} iterations "
        f"(residual {residual:.3g} > {tol:.3g})", report)


@dataclass(frozen=True)
class FixedRatio:
    r: float

    def __post_init__(self):
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValidationError(f"handover ratio must be finite and >= 0, got {self.r}")


@dataclass(frozen=True)
class FlowBalance:
    tolerance: Optional[float] = None
    max_iterations: int = MAX_ITERATIONS
    damping: float = DAMPING


HandoverMode = Union[FixedRatio, FlowBalance]


@dataclass(frozen=True)
class TrafficModel:
    """Traffic offered to one cell under a handover-priority scheme.

    ``mu`` is the channel departure rate used by the chain. It is an input
    in its own right; :func:`effective_departure_rate` gives the
    ``mu_a + eta`` alternative. ``P_h`` may be given directly or derived
    from ``eta`` and ``mu_a``, not both.
    """

    lambda_n: float
    mu: float
    handover_mode: HandoverMode = field(default_factory=lambda: FixedRatio(1 / 6))
    mu_a: Optional[float] = None
    eta: Optional[float] = None
    P_h: Optional[float] = None
    lambda_h: Optional[float] = None
    report: Optional[FixedPointReport] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("lambda_n", "mu", "mu_a", "eta", "lambda_h"):
            x = getattr(self, name)
            if x is not None and not (x >= 0 and math.isfinite(x)):
                raise ValidationError(f"{name} must be finite and >= 0, got {x}")
        if self.P_h is not None and (self.mu_a is not None or self.eta is not None):
            raise ValidationError("give P_h directly or derive it from (eta, mu_a), not both")
        if isinstance(self.handover_mode, FixedRatio) and self.lambda_h is None:
            object.__setattr__(self, "lambda_h", self.handover_mode.r * self.lambda_n)

    @property
    def handover_probability(self) -> float:
        if self.P_h is not None:
            return self.P_h
        if self.eta is None or self.mu_a is None:
            raise ValidationError("flow balance needs P_h or both eta and mu_a")
        return handover_probability(self.eta, self.mu_a)

    def resolve(self, policy) -> "TrafficModel":
        """Return a copy with ``lambda_h`` set for ``policy``."""
        if isinstance(self.handover_mode, FixedRatio):
            return self
        if not self.mu > 0:
            raise ValidationError("mu must be > 0 to solve the chain")
        mode = self.handover_mode
        rep = estimate_handover_rate(policy, self.lambda_n, self.handover_probability, self.mu,
                                     tolerance=mode.tolerance, max_iterations=mode.max_iterations,
                                     damping=mode.damping)
        return replace(self, lambda_h=rep.lambda_h, report=rep)

    @property
    def rates(self) -> tuple[float, float]:
        if self.lambda_h is None:
            raise ValidationError("lambda_h unresolved; call resolve(policy) first")
        return (self.lambda_h, self.lambda_n)
