"""Protocol-parameter optimization and tolerance solvers.

Problems are described by flat parameter dictionaries so that the same
machinery serves the asymptotic, finite-size and fading objectives:

>>> params = {"V": 0.5, "Vx": 4.0, "T": 0.5, "eps": 0.05, "side": "RR"}
>>> round(evaluate("asymptotic", params).key_rate, 4) > 0
True

Recognized keys and their defaults are listed in ``DEFAULT_PARAMS``. The
channel transmittance comes from ``T`` or, if present, from ``distance_km``
at ``loss_db_per_km``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from .exceptions import (
    BracketingFailure,
    DomainError,
    EvaluationFailure,
    NoPositiveKey,
    QKDError,
)
from .fading import FadingMoments, key_rate_fading
from .finite_size import BlockAllocation, key_rate_finite
from .protocol import Channel, SourceSpec, distance_to_transmittance
from .security import (
    BiasedHomodyne,
    HomodyneP,
    HomodyneX,
    ImbalancedHeterodyne,
    KeyRateResult,
    key_rate_asymptotic,
)

OBJECTIVES = ("asymptotic", "finite", "fading")
SCHEMES = ("homodyne-x", "homodyne-p", "biased-homodyne", "heterodyne")

DEFAULT_PARAMS = {
    "V": 0.5, "Vx": 4.0, "Vp": 0.0, "dV_trusted": 0.0, "dV_untrusted": 0.0,
    "T": 1.0, "distance_km": None, "loss_db_per_km": 0.2, "eps": 0.05,
    "scheme": "homodyne-x", "t_het": 0.5, "disclose_as": False, "as_for_key": False,
    "side": "RR", "beta": 0.95,
    "N": 10 ** 7, "r_x": 0.5, "r_p": None, "r_k": None, "disclose": False,
    "eps_bar": 1e-10, "multiplier": 6.5, "var_sqrtT": 0.0,
}

# free parameters in tie-break order, with default search intervals
FREE_PARAMS = ("V", "Vx", "Vp", "t_het", "r_x", "r_p", "r_k")
DEFAULT_BOUNDS = {
    "V": (0.01, 1.0), "Vx": (0.01, 10.0), "Vp": (0.01, 10.0),
    "t_het": (0.01, 0.99), "r_x": (0.01, 0.99), "r_p": (0.01, 0.99), "r_k": (0.01, 0.99),
}
LOG_SCALED = frozenset({"V", "Vx", "Vp"})

GRID_POINTS = 8
XATOL = 1e-4
FAILURE_LIMIT = 0.9


def resolve(params: dict) -> dict:
    """Merge ``params`` over the defaults, rejecting unknown keys."""
    unknown = set(params) - set(DEFAULT_PARAMS)
    if unknown:
        raise DomainError(f"unknown parameters: {sorted(unknown)}")
    out = dict(DEFAULT_PARAMS)
    out.update(params)
    return out


def transmittance(p: dict) -> float:
    if p.get("distance_km") is not None:
        return float(distance_to_transmittance(p["distance_km"], p["loss_db_per_km"]))
    return float(p["T"])


def make_scheme(p: dict):
    name = p["scheme"]
    if name == "homodyne-x":
        return HomodyneX()
    if name == "homodyne-p":
        return HomodyneP()
    if name == "biased-homodyne":
        return BiasedHomodyne(r_switch=p["r_x"])
    if name == "heterodyne":
        return ImbalancedHeterodyne(t_het=p["t_het"], disclose_as=bool(p["disclose_as"]),
                                    as_for_key=bool(p["as_for_key"]))
    raise DomainError(f"unknown scheme {name!r}; expected one of {SCHEMES}")


def make_source(p: dict) -> SourceSpec:
    return SourceSpec(V=p["V"], Vx=p["Vx"], Vp=p["Vp"], dV_trusted=p["dV_trusted"],
                      dV_untrusted=p["dV_untrusted"])


def make_allocation(p: dict, scheme) -> BlockAllocation:
    N = int(p["N"])
    r_k = p["r_k"] if p["disclose"] else None
    if isinstance(scheme, ImbalancedHeterodyne):
        return BlockAllocation.heterodyne(N, r_k)
    return BlockAllocation.homodyne(N, p["r_x"], p["r_p"], r_k)


def evaluate(objective: str, params: dict) -> KeyRateResult:
    """Key rate of a fully specified parameter dictionary."""
    p = resolve(params)
    src = make_source(p)
    T = transmittance(p)
    if objective == "asymptotic":
        return key_rate_asymptotic(src, Channel(T, p["eps"]), make_scheme(p), p["side"], p["beta"])
    if objective == "finite":
        scheme = make_scheme(p)
        return key_rate_finite(src, Channel(T, p["eps"]), scheme, p["side"], p["beta"],
                               make_allocation(p, scheme), p["eps_bar"], p["multiplier"])
    if objective == "fading":
        mom = FadingMoments.from_variance(T, p["var_sqrtT"])
        return key_rate_fading(src, mom, p["eps"], p["side"], p["beta"])
    raise DomainError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")


@dataclass
class OptimizationProblem:
    """Maximize the key of ``objective`` over ``free`` parameters.

    ``bounds`` overrides ``DEFAULT_BOUNDS`` per parameter; everything not free
    is taken from ``fixed`` (then from ``DEFAULT_PARAMS``).
    """

    objective: str = "asymptotic"
    fixed: dict = field(default_factory=dict)
    free: tuple = ()
    bounds: dict = field(default_factory=dict)
    grid_points: int = GRID_POINTS
    threads: int = 1

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise DomainError(f"unknown objective {self.objective!r}")
        bad = [f for f in self.free if f not in FREE_PARAMS]
        if bad:
            raise DomainError(f"parameters {bad} cannot be optimized")
        if len(set(self.free)) != len(self.free):
            raise DomainError("free parameters repeat")
        self.free = tuple(f for f in FREE_PARAMS if f in self.free)
        resolve(self.fixed)
        for name in self.free:
            lo, hi = self.interval(name)
            if not lo <= hi:
                raise DomainError(f"empty interval for {name}: {(lo, hi)}")
            if name in LOG_SCALED and lo <= 0.0:
                raise DomainError(f"{name} is searched on a log scale and needs a positive lower bound")

    def interval(self, name: str):
        lo, hi = self.bounds.get(name, DEFAULT_BOUNDS[name])
        return float(lo), float(hi)


class OptimizationResult(NamedTuple):
    params: dict
    key: float
    margin: float
    result: Optional[KeyRateResult]


def _to_value(problem: OptimizationProblem, name: str, u: float) -> float:
    lo, hi = problem.interval(name)
    u = min(max(float(u), 0.0), 1.0)
    if name in LOG_SCALED:
        value = math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
    else:
        value = lo + u * (hi - lo)
    return float(min(max(value, lo), hi))


def _objective(problem: OptimizationProblem):
    def score(u) -> tuple:
        params = dict(problem.fixed)
        for name, ui in zip(problem.free, u):
            params[name] = _to_value(problem, name, ui)
        try:
            res = evaluate(problem.objective, params)
        except (QKDError, ValueError, ArithmeticError):
            return -math.inf, params, None
        margin = res.margin if math.isfinite(res.margin) else -math.inf
        return margin, params, res
    return score


def maximize_key(problem: OptimizationProblem) -> OptimizationResult:
    """Coarse grid search followed by a bounded Nelder-Mead polish.

    Grid points are visited in lexicographic order of the free parameters
    and ties keep the first point, so the result is reproducible for any
    thread count. The unclamped key is maximized, which keeps the search
    informative when no point is secure.
    """
    score = _objective(problem)
    k = len(problem.free)
    if k == 0:
        margin, params, res = score(())
        if res is None:
            raise EvaluationFailure("objective cannot be evaluated at the fixed parameters")
        return OptimizationResult(params, max(margin, 0.0), margin, res)

    axis = np.linspace(0.0, 1.0, problem.grid_points)
    points = list(itertools.product(axis, repeat=k))
    if problem.threads > 1:
        with ThreadPoolExecutor(problem.threads) as pool:
            evaluated = list(pool.map(score, points))
    else:
        evaluated = [score(u) for u in points]
    margins = np.array([e[0] for e in evaluated])
    failed = np.count_nonzero(~np.isfinite(margins))
    if failed > FAILURE_LIMIT * len(points):
        raise EvaluationFailure(f"objective failed on {failed} of {len(points)} grid points")
    best = int(np.argmax(margins))
    best_margin, best_params, best_res = evaluated[best]

    def loss(u):
        value = score(u)[0]
        return -value if np.isfinite(value) else 1e6

    res = minimize(loss, np.asarray(points[best]), method="Nelder-Mead", bounds=[(0.0, 1.0)] * k,
                   options={"xatol": XATOL, "fatol": 1e-10, "maxiter": 400 * k})
    polished = score(res.x)
    if polished[0] > best_margin:
        best_margin, best_params, best_res = polished
    return OptimizationResult(best_params, max(best_margin, 0.0), best_margin, best_res)


AXES = ("eps", "dV_untrusted", "var_sqrtT", "distance_km")
AXIS_CAPS = {"eps": 10.0, "dV_untrusted": 10.0, "var_sqrtT": 0.25, "distance_km": 500.0}
BISECTION_TOL = 1e-4
SCAN_POINTS = 9


@dataclass
class ToleranceQuery:
    """Largest value of ``axis`` with a positive key.

    ``inner`` (optional) describes the parameters optimized at every probe;
    its ``fixed`` dictionary holds the protocol parameters. Without it the
    parameters come from ``fixed`` alone.
    """

    axis: str
    fixed: dict = field(default_factory=dict)
    inner: Optional[OptimizationProblem] = None
    objective: str = "asymptotic"
    upper: Optional[float] = None
    tol: float = BISECTION_TOL
    scan_points: int = SCAN_POINTS

    def __post_init__(self):
        if self.axis not in AXES:
            raise DomainError(f"unknown tolerance axis {self.axis!r}; expected one of {AXES}")
        if self.inner is not None and self.axis in self.inner.free:
            raise DomainError("the tolerance axis cannot be an inner free parameter")
        if self.tol <= 0.0:
            raise DomainError("tolerance must be positive")

    def cap(self) -> float:
        cap = AXIS_CAPS[self.axis] if self.upper is None else float(self.upper)
        if self.axis == "var_sqrtT":
            base = self.inner.fixed if self.inner is not None else self.fixed
            mean_T = transmittance(resolve(base))
            cap = min(cap, mean_T * (1.0 - 1e-9))
        return cap


class Tolerance(NamedTuple):
    value: float
    cap_reached: bool


def _probe(query: ToleranceQuery, value: float) -> float:
    if query.inner is None:
        params = dict(query.fixed)
        params[query.axis] = value
        try:
            return evaluate(query.objective, params).margin
        except (QKDError, ValueError, ArithmeticError):
            return -math.inf
    inner = query.inner
    fixed = dict(inner.fixed)
    fixed[query.axis] = value
    problem = OptimizationProblem(objective=inner.objective, fixed=fixed, free=inner.free,
                                  bounds=inner.bounds, grid_points=inner.grid_points,
                                  threads=inner.threads)
    try:
        return maximize_key(problem).margin
    except EvaluationFailure:
        return -math.inf


def solve_tolerance(query: ToleranceQuery) -> Tolerance:
    """Bisect the axis for the point where the key stops being positive.

    A coarse scan brackets the first sign change; a positive key beyond it
    means the key is not monotone along the axis and is reported as a
    bracketing failure.
    """
    lo, cap = 0.0, query.cap()
    if not _probe(query, lo) > 0.0:
        raise NoPositiveKey(f"no positive key at {query.axis}={lo}")
    scan = np.linspace(lo, cap, query.scan_points)
    signs = [True] + [_probe(query, float(v)) > 0.0 for v in scan[1:]]
    if all(signs):
        return Tolerance(cap, True)
    first = signs.index(False)
    if any(signs[first:]):
        raise BracketingFailure(f"key along {query.axis} is positive again after {scan[first]:g}")
    a, b = float(scan[first - 1]), float(scan[first])
    while b - a > query.tol:
        mid = 0.5 * (a + b)
        if _probe(query, mid) > 0.0:
            a = mid
        else:
            b = mid
    return Tolerance(a, False)
