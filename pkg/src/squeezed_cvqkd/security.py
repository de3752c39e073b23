"""Mutual information, Holevo bounds and asymptotic key rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import gaussian
from .exceptions import DomainError
from .gaussian import P, X, g_function, von_neumann_entropy
from .protocol import (
    Channel,
    EBState,
    NoisySqueezedState,
    SourceSpec,
    allocate_noise,
    eb_state,
    two_mode_cm,
)


class Side(str, Enum):
    """Reconciliation reference: Alice (direct) or Bob (reverse)."""

    DR = "DR"
    RR = "RR"


@dataclass(frozen=True)
class HomodyneX:
    """Bob homodynes the squeezed quadrature only."""


@dataclass(frozen=True)
class HomodyneP:
    """Bob homodynes the anti-squeezed quadrature only."""


@dataclass(frozen=True)
class BiasedHomodyne:
    """Bob switches between x and p; ``r_switch`` is the fraction of x rounds.

    The ratio only matters for finite-size estimation; asymptotically both
    branches contribute their full key.
    """

    r_switch: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.r_switch <= 1.0:
            raise DomainError("r_switch must lie in [0, 1]")


@dataclass(frozen=True)
class ImbalancedHeterodyne:
    """Bob splits the signal on a ``t_het`` beamsplitter: x on B, p on B'.

    By default only x-outcomes form the key and the p-outcomes stay private.
    ``as_for_key`` uses both for the key, ``disclose_as`` announces the
    p-outcomes publicly.
    """

    t_het: float = 0.5
    disclose_as: bool = False
    as_for_key: bool = False

    def __post_init__(self):
        if not 0.0 < self.t_het < 1.0:
            raise DomainError(f"t_het must lie in (0, 1), got {self.t_het}")
        if self.disclose_as and self.as_for_key:
            raise DomainError("disclosed AS outcomes cannot be part of the key")


MeasurementScheme = Union[HomodyneX, HomodyneP, BiasedHomodyne, ImbalancedHeterodyne]


@dataclass(frozen=True)
class KeyRateResult:
    """Key rate in bits per symbol.

    ``margin`` equals ``key_rate`` when the key is positive and otherwise the
    (negative) unclamped value, which keeps tolerance searches informative in
    the insecure region.
    """

    mutual_info: float
    holevo: float
    key_rate: float
    beta: float
    margin: float
    side: Side
    scheme: object = None
    regime: str = "asymptotic"
    branches: tuple = field(default=(), repr=False)


def mutual_information(VA: float, VB: float, CAB: float) -> float:
    """``0.5 * log2(VA / V_{A|B})`` for jointly Gaussian data."""
    if VA <= 0 or VB <= 0:
        raise DomainError("variances must be positive")
    if CAB * CAB > VA * VB * (1.0 + 1e-12):
        raise DomainError("covariance violates the Cauchy-Schwarz bound")
    if CAB == 0.0:
        return 0.0
    cond = VA - CAB * CAB / VB
    if cond <= 0.0:
        return math.inf
    return max(0.5 * math.log2(VA / cond), 0.0)


def _data_statistics(src: SourceSpec, T: float, noise_x: float, noise_p: float,
                     amplitude: float, t_het: Optional[float] = None):
    # (VA, VB, C) of Alice's modulation and Bob's outcome in each quadrature
    bx = T * (src.V + src.Vx + noise_x) + 1.0 - T
    bp = T * (1.0 / src.V + src.Vp_eff + noise_p) + 1.0 - T
    gx = gp = 1.0
    if t_het is not None:
        gx, gp = t_het, 1.0 - t_het
    x = (src.Vx, gx * bx + 1.0 - gx, math.sqrt(gx) * amplitude * src.Vx)
    p = (src.Vp, gp * bp + 1.0 - gp, math.sqrt(gp) * amplitude * src.Vp)
    return x, p


def _info(stats) -> float:
    VA, VB, C = stats
    if VA == 0.0:
        return 0.0
    return mutual_information(VA, VB, C)


def _holevo(state: EBState, eve_knows=(), reference=()) -> float:
    """``S(rest | eve_knows) - S(rest | eve_knows + reference)``.

    Eve purifies the state, so her entropy equals that of the trusted modes,
    both before and after conditioning on the pure-state homodyne outcomes.
    """
    before = gaussian.condition(state.gamma, *eve_knows) if eve_knows else state.gamma
    after = gaussian.condition(state.gamma, *eve_knows, *reference)
    return max(von_neumann_entropy(before) - von_neumann_entropy(after), 0.0)


def holevo_bound(state: EBState, scheme: MeasurementScheme, side: Side,
                 quadrature: str = "x") -> float:
    """Holevo bound on Eve's information about the reference data.

    For homodyne schemes ``quadrature`` selects which branch (x or p) is the
    key. Heterodyne schemes ignore it and follow the AS usage of ``scheme``.
    """
    side = Side(side)
    if isinstance(scheme, ImbalancedHeterodyne):
        if len(state.bob) != 2:
            raise DomainError("heterodyne scheme needs the four-mode state")
        b, b2 = state.bob
        eve = (P(b2),) if scheme.disclose_as else ()
        if side is Side.RR:
            ref = (X(b), P(b2)) if scheme.as_for_key else (X(b),)
        else:
            ref = [state.alice_x]
            if scheme.as_for_key and state.alice_p is not None:
                ref.append(state.alice_p)
            ref = tuple(ref)
        return _holevo(state, eve, ref)
    if len(state.bob) != 1:
        raise DomainError("homodyne scheme needs the three-mode state")
    b = state.bob[0]
    if side is Side.RR:
        ref = X(b) if quadrature == "x" else P(b)
    else:
        ref = state.alice_x if quadrature == "x" else state.alice_p
        if ref is None:
            return 0.0
    return _holevo(state, (), (ref,))


def _single(I: float, chi: float, beta: float, side: Side, scheme, regime="asymptotic"):
    raw = beta * I - chi
    return KeyRateResult(mutual_info=I, holevo=chi, key_rate=max(raw, 0.0), beta=beta,
                         margin=raw, side=side, scheme=scheme, regime=regime)


def key_rate_from_parameters(src: SourceSpec, T: float, noise_x: float, noise_p: float,
                             scheme: MeasurementScheme, side: Side, beta: float = 0.95,
                             amplitude: Optional[float] = None) -> KeyRateResult:
    """Asymptotic key for explicit channel parameters.

    ``noise_x`` and ``noise_p`` are the input-referred excess noises of the two
    quadratures (``noise_p`` includes untrusted AS noise); ``amplitude``
    overrides ``sqrt(T)`` in the correlations for fading channels.
    """
    side = Side(side)
    if not 0.0 < beta <= 1.0:
        raise DomainError("beta must lie in (0, 1]")
    amp = math.sqrt(T) if amplitude is None else amplitude
    t_het = scheme.t_het if isinstance(scheme, ImbalancedHeterodyne) else None
    state = eb_state(src, T, noise_x, noise_p, amplitude=amp, t_het=t_het)
    sx, sp = _data_statistics(src, T, noise_x, noise_p, amp, t_het)
    if isinstance(scheme, ImbalancedHeterodyne):
        I = _info(sx) + (_info(sp) if scheme.as_for_key else 0.0)
        return _single(I, holevo_bound(state, scheme, side), beta, side, scheme)
    if isinstance(scheme, HomodyneX):
        return _single(_info(sx), holevo_bound(state, scheme, side, "x"), beta, side, scheme)
    if isinstance(scheme, HomodyneP):
        return _single(_info(sp), holevo_bound(state, scheme, side, "p"), beta, side, scheme)
    if isinstance(scheme, BiasedHomodyne):
        kx = _single(_info(sx), holevo_bound(state, scheme, side, "x"), beta, side, HomodyneX())
        kp = _single(_info(sp), holevo_bound(state, scheme, side, "p"), beta, side, HomodyneP())
        key = kx.key_rate + kp.key_rate
        margin = key if key > 0 else max(kx.margin, kp.margin)
        return KeyRateResult(mutual_info=kx.mutual_info + kp.mutual_info,
                             holevo=kx.holevo + kp.holevo, key_rate=key, beta=beta,
                             margin=margin, side=side, scheme=scheme, branches=(kx, kp))
    raise DomainError(f"unknown measurement scheme {scheme!r}")


def key_rate_asymptotic(src: SourceSpec, ch: Channel, scheme: MeasurementScheme,
                        side: Side, beta: float = 0.95) -> KeyRateResult:
    """Asymptotic key rate over a fixed channel."""
    return key_rate_from_parameters(src, ch.T, ch.eps, ch.eps + src.dV_untrusted,
                                    scheme, side, beta)


def pure_loss_limits(src: SourceSpec, T: float, side: Side) -> float:
    """Holevo bound of a pure-loss channel in the limit of infinite trusted AS noise.

    In this limit it equals Eve's classical information from homodyning her
    beamsplitter output.
    """
    side = Side(side)
    s = src.V + src.Vx
    if side is Side.RR:
        return 0.5 * math.log2((s - T * (s - 1.0)) * (1.0 + T * (s - 1.0)) / s)
    return 0.5 * math.log2(1.0 + src.Vx * (1.0 - T) / (T + src.V * (1.0 - T)))


# --- single-state noise allocation -------------------------------------------------

ALL_IN_SQUEEZED = "squeezed"
ALL_IN_AS = "anti-squeezed"


def allocation_holevo(V: float, Vx: float, allocation: str, eps_max: float, side: Side) -> float:
    """Closed-form Holevo bound when all source noise sits in one quadrature.

    ``allocation`` is ``"squeezed"`` (noise ``eps_max`` on x) or
    ``"anti-squeezed"`` (noise ``eps_max`` on p).
    """
    side = Side(side)
    if eps_max < 0:
        raise DomainError("eps_max must be >= 0")
    G = g_function
    if allocation == ALL_IN_SQUEEZED:
        if side is Side.DR:
            return 0.0
        total = G((math.sqrt((eps_max + V) / V) - 1.0) / 2.0)
        cond = (eps_max + V) * (V + Vx) / (V * (eps_max + V + Vx))
        return max(total - G((math.sqrt(cond) - 1.0) / 2.0), 0.0)
    if allocation == ALL_IN_AS:
        total = G((math.sqrt(1.0 + eps_max * (V + Vx)) - 1.0) / 2.0)
        if side is Side.RR:
            return total
        return max(total - G((math.sqrt(1.0 + eps_max * V) - 1.0) / 2.0), 0.0)
    raise DomainError(f"unknown allocation {allocation!r}")


def holevo_two_mode(V: float, Vx: float, eps_x: float, eps_p: float, side: Side) -> float:
    """Holevo bound of the single-mode noisy source via its two-mode purification."""
    gamma = two_mode_cm(V, Vx, eps_x, eps_p)
    ref = X(1) if Side(side) is Side.RR else X(0)
    total = von_neumann_entropy(gamma)
    return max(total - von_neumann_entropy(gaussian.condition_on_homodyne(gamma, ref)), 0.0)


def allocation_key(state: NoisySqueezedState, Vx: float, eps_x: float, side: Side) -> float:
    """Key of the noisy source when ``eps_x`` of its noise sits in x."""
    V, eps_x, eps_p = allocate_noise(state, eps_x)
    return 0.5 * math.log2(1.0 + Vx / state.var_x) - holevo_two_mode(V, Vx, eps_x, eps_p, side)


def dr_key_with_allocation(state: NoisySqueezedState, Vx: float, eps_x: float) -> float:
    return allocation_key(state, Vx, eps_x, Side.DR)


def worst_case_allocation(state: NoisySqueezedState, Vx: float, side: Side,
                          grid: int = 201, xatol: float = 1e-6):
    """Noise split minimizing the key; returns ``(eps_x, key)``.

    A grid scan locates the basin and a bounded Brent search refines it, so
    boundary minima are found exactly.
    """
    hi = state.max_eps_x
    if hi <= 0.0:
        return 0.0, allocation_key(state, Vx, 0.0, side)
    xs = np.linspace(0.0, hi, grid)
    keys = np.array([allocation_key(state, Vx, x, side) for x in xs])
    k = int(np.argmin(keys))
    best_x, best_k = float(xs[k]), float(keys[k])
    lo, up = xs[max(k - 1, 0)], xs[min(k + 1, grid - 1)]
    res = minimize_scalar(lambda e: allocation_key(state, Vx, e, side), bounds=(lo, up),
                          method="bounded", options={"xatol": xatol})
    if res.fun < best_k:
        best_x, best_k = float(res.x), float(res.fun)
    return best_x, best_k
