"""Experiment configuration: one strict JSON document per run.

Unknown keys anywhere are errors, and every parameter is validated before
any computation starts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ValidationError
from .policies import HANDOVER_SCHEMES, FGB, MultiFGB, PolicySpec, policy_from_dict
from .traffic import MAX_ITERATIONS, DAMPING, handover_probability

MODES = ("solve", "sweep", "simulate", "optimize", "estimate-handover")
FORMATS = ("csv", "json")
DEFAULT_FORMAT = {"solve": "json", "sweep": "csv", "simulate": "json",
                  "optimize": "json", "estimate-handover": "json"}

_TOP = {"description", "policy", "traffic", "run", "simulation", "search", "fixed_point"}
_TRAFFIC = {"mu", "mean_holding_time", "departure", "mu_a", "eta", "lambda_n",
            "handover_mode", "ratio", "P_h", "rates", "class_ratio", "load", "sweep"}
_RUN = {"mode", "seed", "output", "format"}
_SIM = {"total_arrivals", "warmup_fraction", "batches", "holding", "trace"}
_SEARCH = {"grid_step", "protected", "epsilon", "objective", "N", "cache"}
_FIXED = {"tolerance", "max_iterations", "damping"}
_SWEEP = {"min", "max", "step"}


def _section(doc, name, allowed):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ValidationError(f"{name} must be an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ValidationError(f"{name}: unknown key(s) {sorted(unknown)}")
    return sec


def _number(sec, key, where, *, positive=False, required=False, default=None):
    if key not in sec:
        if required:
            raise ValidationError(f"{where}.{key} is required")
        return default
    x = sec[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ValidationError(f"{where}.{key} must be a finite number, got {x!r}")
    if positive and not x > 0:
        raise ValidationError(f"{where}.{key} must be > 0, got {x}")
    if not positive and x < 0:
        raise ValidationError(f"{where}.{key} must be >= 0, got {x}")
    return float(x)


def _integer(sec, key, where, default, minimum=0):
    x = sec.get(key, default)
    if isinstance(x, bool) or not isinstance(x, int) or x < minimum:
        raise ValidationError(f"{where}.{key} must be an integer >= {minimum}, got {x!r}")
    return x


@dataclass(frozen=True)
class SimSettings:
    total_arrivals: int = 1_000_000
    warmup_fraction: float = 0.1
    batches: int = 20
    holding: str = "direct"
    trace: Optional[str] = None


@dataclass(frozen=True)
class SearchSettings:
    grid_step: float = 0.1
    protected: Optional[frozenset] = None
    epsilon: float = 0.10
    objective: str = "min_overall_blocking"
    N: Optional[int] = None
    cache: Optional[str] = None


@dataclass(frozen=True)
class FixedPointSettings:
    tolerance: Optional[float] = None
    max_iterations: int = MAX_ITERATIONS
    damping: float = DAMPING


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    policy: PolicySpec
    mu: float
    mu_a: Optional[float] = None
    eta: Optional[float] = None
    handover_mode: Optional[str] = None
    ratio: float = 1 / 6
    P_h: Optional[float] = None
    point: Optional[float] = None
    rates: Optional[tuple] = None
    class_ratio: Optional[tuple] = None
    sweep: Optional[tuple] = None
    seed: Optional[int] = None
    output: Optional[str] = None
    format: str = "json"
    simulation: SimSettings = field(default_factory=SimSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    fixed_point: FixedPointSettings = field(default_factory=FixedPointSettings)

    @property
    def two_class(self) -> bool:
        return isinstance(self.policy, HANDOVER_SCHEMES)

    @property
    def axis(self) -> str:
        return "lambda_n" if self.two_class else "load"

    def sweep_points(self) -> list[float]:
        lo, hi, step = self.sweep
        n = int(math.floor((hi - lo) / step + 1e-9))
        return [float(f"{lo + i * step:.12g}") for i in range(n + 1)]

    def multiclass_rates(self, load: Optional[float]) -> tuple:
        if self.rates is not None:
            return self.rates
        total = sum(self.class_ratio)
        return tuple(r / total * load * self.mu for r in self.class_ratio)


def parse_config(doc: Any, mode: str, *, seed: Optional[int] = None,
                 output: Optional[str] = None, fmt: Optional[str] = None) -> ExperimentConfig:
    """Validate a decoded config document for ``mode``; CLI overrides win."""
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(doc) - _TOP
    if unknown:
        raise ValidationError(f"unknown top-level key(s) {sorted(unknown)}")
    if "policy" not in doc:
        raise ValidationError("policy section is required")
    if "traffic" not in doc:
        raise ValidationError("traffic section is required")

    run = _section(doc, "run", _RUN)
    if "mode" in run and run["mode"] != mode:
        raise ValidationError(f"run.mode is {run['mode']!r} but the subcommand is {mode!r}")
    policy = policy_from_dict(doc["policy"])
    tr = _section(doc, "traffic", _TRAFFIC)
    two_class = isinstance(policy, HANDOVER_SCHEMES)

    # departure rate
    departure = tr.get("departure", "direct")
    if departure not in ("direct", "effective"):
        raise ValidationError("traffic.departure must be 'direct' or 'effective'")
    mu_a = _number(tr, "mu_a", "traffic")
    eta = _number(tr, "eta", "traffic")
    if departure == "direct":
        if ("mu" in tr) == ("mean_holding_time" in tr):
            raise ValidationError("traffic needs exactly one of mu or mean_holding_time")
        if "mu" in tr:
            mu = _number(tr, "mu", "traffic", positive=True)
        else:
            mu = 1.0 / _number(tr, "mean_holding_time", "traffic", positive=True)
    else:
        if "mu" in tr or "mean_holding_time" in tr:
            raise ValidationError("traffic.departure 'effective' derives mu; drop mu/mean_holding_time")
        if mu_a is None or eta is None or mu_a + eta <= 0:
            raise ValidationError("traffic.departure 'effective' needs mu_a and eta with mu_a + eta > 0")
        mu = mu_a + eta

    # sweep
    sweep = None
    if "sweep" in tr:
        sw = tr["sweep"]
        if not isinstance(sw, dict) or set(sw) != _SWEEP:
            raise ValidationError("traffic.sweep must have exactly the keys min, max, step")
        lo = _number(sw, "min", "traffic.sweep")
        hi = _number(sw, "max", "traffic.sweep")
        step = _number(sw, "step", "traffic.sweep", positive=True)
        if lo > hi:
            raise ValidationError("traffic.sweep requires min <= max")
        sweep = (lo, hi, step)

    kw: dict[str, Any] = {}
    if two_class:
        for key in ("rates", "class_ratio", "load"):
            if key in tr:
                raise ValidationError(f"traffic.{key} applies to multiclass schemes only")
        hm = tr.get("handover_mode", "flow_balance" if mode == "estimate-handover" else "fixed_ratio")
        if hm not in ("fixed_ratio", "flow_balance"):
            raise ValidationError("traffic.handover_mode must be 'fixed_ratio' or 'flow_balance'")
        kw["handover_mode"] = hm
        if hm == "fixed_ratio":
            if "P_h" in tr:
                raise ValidationError("traffic.P_h applies to flow_balance only")
            kw["ratio"] = _number(tr, "ratio", "traffic", default=1 / 6)
        else:
            if "ratio" in tr:
                raise ValidationError("traffic.ratio applies to fixed_ratio only")
            if "P_h" in tr:
                if "mu_a" in tr or "eta" in tr:
                    raise ValidationError("give traffic.P_h or derive it from (eta, mu_a), not both")
                p_h = _number(tr, "P_h", "traffic")
            elif mu_a is not None and eta is not None:
                p_h = handover_probability(eta, mu_a)
            else:
                raise ValidationError("flow_balance needs traffic.P_h or both eta and mu_a")
            if not p_h < 1.0:
                raise ValidationError(f"handover probability must be < 1, got {p_h}")
            kw["P_h"] = p_h
        kw["point"] = _number(tr, "lambda_n", "traffic")
    else:
        for key in ("lambda_n", "handover_mode", "ratio", "P_h"):
            if key in tr:
                raise ValidationError(f"traffic.{key} applies to two-class handover schemes only")
        m = policy.num_classes
        if "rates" in tr:
            if "class_ratio" in tr or "load" in tr or sweep is not None:
                raise ValidationError("traffic.rates excludes class_ratio, load and sweep")
            rates = tr["rates"]
            if not isinstance(rates, list) or len(rates) != m:
                raise ValidationError(f"traffic.rates must list {m} class rates")
            kw["rates"] = tuple(_number({"r": r}, "r", "traffic.rates") for r in rates)
        else:
            cr = tr.get("class_ratio")
            if not isinstance(cr, list) or len(cr) != m:
                raise ValidationError(f"traffic.class_ratio must list {m} class weights")
            ratio = tuple(_number({"r": r}, "r", "traffic.class_ratio") for r in cr)
            if sum(ratio) <= 0:
                raise ValidationError("traffic.class_ratio must have a positive sum")
            kw["class_ratio"] = ratio
            kw["point"] = _number(tr, "load", "traffic")

    has_point = kw.get("point") is not None or kw.get("rates") is not None
    if mode == "sweep":
        if sweep is None:
            raise ValidationError("sweep mode needs traffic.sweep")
        if has_point:
            raise ValidationError(f"sweep mode takes traffic.sweep, not a single traffic.{'lambda_n' if two_class else 'load'}")
    elif mode == "estimate-handover":
        if not two_class:
            raise ValidationError("estimate-handover needs a two-class handover scheme")
        if kw["handover_mode"] != "flow_balance":
            raise ValidationError("estimate-handover needs traffic.handover_mode 'flow_balance'")
        if has_point == (sweep is not None):
            raise ValidationError("estimate-handover takes either traffic.lambda_n or traffic.sweep")
    else:
        if sweep is not None:
            raise ValidationError(f"{mode} mode takes a single traffic point, not traffic.sweep")
        if not has_point:
            raise ValidationError(f"{mode} mode needs traffic.{'lambda_n' if two_class else 'load or traffic.rates'}")

    # run section
    run_seed = run.get("seed")
    if seed is not None:
        run_seed = seed
    if run_seed is not None and (isinstance(run_seed, bool) or not isinstance(run_seed, int)
                                 or not 0 <= run_seed < 2**64):
        raise ValidationError("run.seed must be an integer in [0, 2**64)")
    if mode == "simulate" and run_seed is None:
        raise ValidationError("simulate mode needs run.seed or --seed")
    out = output if output is not None else run.get("output")
    if out is not None and not isinstance(out, str):
        raise ValidationError("run.output must be a path string")
    form = fmt if fmt is not None else run.get("format", DEFAULT_FORMAT[mode])
    if form not in FORMATS:
        raise ValidationError(f"run.format must be one of {FORMATS}")

    sim = _section(doc, "simulation", _SIM)
    holding = sim.get("holding", "direct")
    if holding not in ("direct", "dwell"):
        raise ValidationError("simulation.holding must be 'direct' or 'dwell'")
    if mode == "simulate" and holding == "dwell" and (mu_a is None or eta is None):
        raise ValidationError("simulation.holding 'dwell' needs traffic.mu_a and traffic.eta")
    trace = sim.get("trace")
    if trace is not None and not isinstance(trace, str):
        raise ValidationError("simulation.trace must be a path string")
    sim_settings = SimSettings(
        total_arrivals=_integer(sim, "total_arrivals", "simulation", 1_000_000, 1),
        warmup_fraction=_number(sim, "warmup_fraction", "simulation", default=0.1),
        batches=_integer(sim, "batches", "simulation", 20, 2),
        holding=holding,
        trace=trace,
    )
    if not sim_settings.warmup_fraction <= 0.5:
        raise ValidationError("simulation.warmup_fraction must lie in [0, 0.5]")
    if sim_settings.total_arrivals < 100 * sim_settings.batches:
        raise ValidationError("simulation.total_arrivals must be >= 100 * batches")

    se = _section(doc, "search", _SEARCH)
    protected = se.get("protected")
    if protected is not None:
        if not isinstance(protected, list) or not all(
                isinstance(k, int) and not isinstance(k, bool) for k in protected):
            raise ValidationError("search.protected must be a list of class numbers")
        protected = frozenset(protected)
    n_top = se.get("N")
    if n_top is not None and (isinstance(n_top, bool) or not isinstance(n_top, int)):
        raise ValidationError("search.N must be an integer")
    cache = se.get("cache")
    if cache is not None and not isinstance(cache, str):
        raise ValidationError("search.cache must be a path string")
    search = SearchSettings(
        grid_step=_number(se, "grid_step", "search", positive=True, default=0.1),
        protected=protected,
        epsilon=_number(se, "epsilon", "search", default=0.10),
        objective=se.get("objective", "min_overall_blocking"),
        N=n_top,
        cache=cache,
    )
    if mode == "optimize" and not isinstance(policy, (MultiFGB, FGB)):
        raise ValidationError("optimize needs a MultiFGB or FGB baseline policy")
    if mode == "optimize" and two_class and kw["handover_mode"] != "fixed_ratio":
        raise ValidationError("optimize supports traffic.handover_mode 'fixed_ratio' only")

    fp = _section(doc, "fixed_point", _FIXED)
    tol = _number(fp, "tolerance", "fixed_point", positive=True)
    fixed = FixedPointSettings(
        tolerance=tol,
        max_iterations=_integer(fp, "max_iterations", "fixed_point", MAX_ITERATIONS, 1),
        damping=_number(fp, "damping", "fixed_point", positive=True, default=DAMPING),
    )
    if fixed.damping > 1:
        raise ValidationError("fixed_point.damping must lie in (0, 1]")

    return ExperimentConfig(
        mode=mode, policy=policy, mu=mu, mu_a=mu_a, eta=eta, sweep=sweep, seed=run_seed,
        output=out, format=form, simulation=sim_settings, search=search, fixed_point=fixed, **kw,
    )


def load_config(path: str, mode: str, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, mode, **overrides)
