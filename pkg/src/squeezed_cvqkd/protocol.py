"""Source, channel and covariance-matrix models of the squeezed-state protocol.

Mode order is ``(A1, A2, B)`` for homodyne detection and ``(A1, A2, B, B')``
for the imbalanced heterodyne detector. ``A1``/``A2`` are the two outputs of
Alice's heterodyne in the entanglement-based picture: she reads ``x`` on
``A1`` and ``p`` on ``A2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gaussian
from .exceptions import AllocationOutOfRange, DomainError, SingularModulation
from .gaussian import P, Quadrature, X

MIN_MODULATION = 1e-12
# below this feed squeezing the three-mode form loses precision; use its limit
MIN_FEED = 1e-9


@dataclass(frozen=True)
class SourceSpec:
    """Noisy squeezed source with Gaussian modulation (all in SNU).

    ``V`` is the squeezed x-variance; the anti-squeezed quadrature has variance
    ``1/V + dV_trusted + dV_untrusted``.
    """

    V: float
    Vx: float
    Vp: float = 0.0
    dV_trusted: float = 0.0
    dV_untrusted: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.V <= 1.0:
            raise DomainError(f"squeezed variance V must lie in (0, 1], got {self.V}")
        for name in ("Vx", "Vp", "dV_trusted", "dV_untrusted"):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise DomainError(f"{name} must be finite and >= 0, got {value}")

    @property
    def Vp_eff(self) -> float:
        """AS modulation seen by the purification: trusted noise is folded in."""
        return self.Vp + self.dV_trusted

    def replace(self, **changes) -> "SourceSpec":
        fields = dict(V=self.V, Vx=self.Vx, Vp=self.Vp,
                      dV_trusted=self.dV_trusted, dV_untrusted=self.dV_untrusted)
        fields.update(changes)
        return SourceSpec(**fields)


@dataclass(frozen=True)
class Channel:
    """Fixed channel: transmittance ``T`` and input-referred excess noise ``eps``."""

    T: float
    eps: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise DomainError(f"transmittance must lie in (0, 1], got {self.T}")
        if not (self.eps >= 0.0 and math.isfinite(self.eps)):
            raise DomainError(f"excess noise must be finite and >= 0, got {self.eps}")


@dataclass(frozen=True)
class FadingChannel:
    """Discrete transmittance distribution ``{(T_i, tau_i)}`` plus excess noise."""

    transmittances: tuple
    weights: tuple
    eps: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.transmittances, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "transmittances", tuple(t.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))
        if t.ndim != 1 or t.shape != w.shape or t.size == 0:
            raise DomainError("transmittances and weights must be equal-length 1-D sequences")
        if np.any(t <= 0.0) or np.any(t > 1.0):
            raise DomainError("every transmittance must lie in (0, 1]")
        if np.any(w <= 0.0):
            raise DomainError("every probability must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities must sum to 1, got {w.sum()!r}")
        if not (self.eps >= 0.0 and math.isfinite(self.eps)):
            raise DomainError("excess noise must be finite and >= 0")


@dataclass(frozen=True)
class EBEquivalents:
    V1: float
    V2: float
    Vm: float


def eb_equivalents(src: SourceSpec) -> EBEquivalents:
    """x-variances of the entanglement-based source equivalent to ``src``.

    ``V1 <= V2`` are the two oppositely squeezed modes combined on Alice's
    beamsplitter and ``Vm`` is the squeezed feed of her heterodyne.
    """
    V, Vx, Vp = src.V, src.Vx, src.Vp_eff
    if Vx <= MIN_MODULATION:
        raise SingularModulation("x-modulation variance must be positive (use Vx=1e-8 for the coherent limit)")
    s = V + Vx
    root = math.sqrt(s * (Vx + V * Vp * s) / (1.0 + V * Vp))
    # V1 = s - root cancels catastrophically for weak squeezing of V1
    prod = V * s / (1.0 + V * Vp)
    V2 = s + root
    V1 = prod / V2
    Vm = V * V * Vp * s / (Vx * (1.0 + V * Vp))
    return EBEquivalents(V1=V1, V2=V2, Vm=Vm)


@dataclass(frozen=True)
class EBState:
    """Purified protocol state with bookkeeping of who holds which mode.

    ``alice_p`` is ``None`` when the AS quadrature carries no modulation; the
    heterodyne feed is then infinitely squeezed and Alice's two detector modes
    collapse into a single mode that she homodynes in ``x``.
    """

    gamma: np.ndarray
    alice_x: Quadrature
    alice_p: Optional[Quadrature]
    bob: tuple

    @property
    def alice_modes(self) -> tuple:
        modes = [self.alice_x.mode]
        if self.alice_p is not None:
            modes.append(self.alice_p.mode)
        return tuple(modes)


def _source_blocks(src: SourceSpec):
    eb = eb_equivalents(src)
    V1, V2, Vm = eb.V1, eb.V2, eb.Vm
    r2 = math.sqrt(2.0)
    ab = np.diag([(V2 - V1) / (2.0 * r2), (V1 - V2) / (2.0 * r2 * V1 * V2)])
    bx = (V1 + V2) / 2.0
    bp = (V1 + V2) / (2.0 * V1 * V2)
    if Vm <= MIN_FEED:
        a = np.diag([bx, bp])
        return None, a, ab * r2, bx, bp
    ga = np.diag([(V1 + V2 + 2 * Vm) / 4.0, (Vm * (V1 + V2) + 2 * V1 * V2) / (4 * V1 * V2 * Vm)])
    sa = np.diag([(V1 + V2 - 2 * Vm) / 4.0, (Vm * (V1 + V2) - 2 * V1 * V2) / (4 * V1 * V2 * Vm)])
    return (ga, sa), None, ab, bx, bp


def eb_state(src: SourceSpec, T: float, noise_x: float, noise_p: float,
             amplitude: Optional[float] = None, t_het: Optional[float] = None) -> EBState:
    """Purified state after a channel with per-quadrature input-referred noise.

    ``noise_x``/``noise_p`` are excess noises added in the x and p quadratures
    (``noise_p`` already contains any untrusted AS noise). ``amplitude``
    replaces ``sqrt(T)`` in the correlations, which is how a fading channel
    enters (``T -> <T>``, ``sqrt(T) -> <sqrt(T)>``).
    """
    amp = math.sqrt(T) if amplitude is None else amplitude
    het, single, ab, bx, bp = _source_blocks(src)
    gb = np.diag([T * (bx + noise_x) + 1.0 - T, T * (bp + noise_p) + 1.0 - T])
    if het is None:
        gamma = np.block([[single, amp * ab], [amp * ab, gb]])
        alice_x, alice_p, bob = X(0), None, (1,)
    else:
        ga, sa = het
        c = amp * ab
        gamma = np.block([[ga, sa, c], [sa, ga, c], [c, c, gb]])
        alice_x, alice_p, bob = X(0), P(1), (2,)
    if t_het is not None:
        gamma = _split_bob(gamma, bob[0], t_het)
        bob = (bob[0], bob[0] + 1)
    return EBState(gamma=gamma, alice_x=alice_x, alice_p=alice_p, bob=bob)


def _split_bob(gamma: np.ndarray, bob: int, t_het: float) -> np.ndarray:
    if not 0.0 < t_het < 1.0:
        raise DomainError(f"heterodyne transmittance must lie in (0, 1), got {t_het}")
    n = gamma.shape[0]
    out = np.eye(n + 2)
    out[:n, :n] = gamma
    S = np.eye(n + 2)
    i = 2 * bob
    S[i:i + 4, i:i + 4] = gaussian.beamsplitter(t_het)
    out = S @ out @ S.T
    return 0.5 * (out + out.T)


def build_cm_homodyne(src: SourceSpec, ch: Channel) -> np.ndarray:
    """Covariance matrix of ``(A1, A2, B)`` after a fixed channel."""
    return eb_state(src, ch.T, ch.eps, ch.eps + src.dV_untrusted).gamma


def build_cm_heterodyne(src: SourceSpec, ch: Channel, t_het: float) -> np.ndarray:
    """Covariance matrix of ``(A1, A2, B, B')`` with Bob's imbalanced heterodyne.

    ``B`` is the transmitted port (measured in x) and ``B'`` the reflected one
    (measured in p); the splitter convention gives the ``-sqrt((1-t)T)`` sign
    on the ``A``-``B'`` correlations.
    """
    if not 0.0 < t_het < 1.0:
        raise DomainError(f"heterodyne transmittance must lie in (0, 1), got {t_het}")
    return eb_state(src, ch.T, ch.eps, ch.eps + src.dV_untrusted, t_het=t_het).gamma


def pure_loss_eve_cm(src: SourceSpec, T: float) -> np.ndarray:
    """Eve's mode at the reflected port of a pure-loss channel.

    Valid for trusted AS noise only; untrusted AS noise needs the full
    purification.
    """
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {T}")
    return np.diag([
        (1.0 - T) * (src.Vx + src.V) + T,
        (1.0 - T) * (1.0 / src.V + src.Vp + src.dV_trusted) + T,
    ])


@dataclass(frozen=True)
class NoisySqueezedState:
    var_x: float
    var_p: float

    def __post_init__(self):
        if self.var_x <= 0 or self.var_p <= 0:
            raise DomainError("quadrature variances must be positive")
        if self.var_x * self.var_p < 1.0 - 1e-12:
            raise DomainError("variances violate the uncertainty relation")

    @property
    def purity(self) -> float:
        return 1.0 / math.sqrt(self.var_x * self.var_p)

    @property
    def max_eps_x(self) -> float:
        """Largest squeezed-quadrature noise compatible with the state."""
        return max(self.var_x - 1.0 / self.var_p, 0.0)


def noisy_state_from_loss(Vs: float, eta: float) -> NoisySqueezedState:
    """Pure squeezed state ``(Vs, 1/Vs)`` after a loss of transmittance ``eta``."""
    if not 0.0 < Vs <= 1.0:
        raise DomainError(f"Vs must lie in (0, 1], got {Vs}")
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    return NoisySqueezedState(var_x=eta * Vs + 1.0 - eta, var_p=eta / Vs + 1.0 - eta)


def loss_purity(Vs: float, eta: float) -> float:
    """Closed-form purity of the attenuated squeezed state."""
    return (1.0 + (eta - eta * eta) * (1.0 / Vs + Vs - 2.0)) ** -0.5


def allocate_noise(state: NoisySqueezedState, eps_x: float):
    """Split the state's noise as ``eps_x`` on x and the rest on p.

    Returns ``(V, eps_x, eps_p)`` with the underlying pure squeezing ``V`` such
    that ``var_x = V + eps_x`` and ``var_p = 1/V + eps_p``.
    """
    hi = state.max_eps_x
    if eps_x < -1e-15 or eps_x > hi + 1e-12 * max(1.0, hi):
        raise AllocationOutOfRange(f"eps_x={eps_x} outside [0, {hi}]")
    eps_x = min(max(eps_x, 0.0), hi)
    V = state.var_x - eps_x
    eps_p = max(state.var_p - 1.0 / V, 0.0)
    return V, eps_x, eps_p


def distance_to_transmittance(distance_km, loss_db_per_km: float = 0.2):
    return 10.0 ** (-loss_db_per_km * np.asarray(distance_km, dtype=float) / 10.0)


def db_to_transmittance(db):
    """``-10 dB -> 0.1``; positive or negative sign both mean attenuation."""
    return 10.0 ** (-np.abs(np.asarray(db, dtype=float)) / 10.0)


def two_mode_cm(V: float, Vx: float, eps_x: float, eps_p: float) -> np.ndarray:
    """Two-mode ``(A, B)`` matrix of a noisy squeezed state with x-modulation only."""
    s = V + Vx
    root = math.sqrt(s * Vx)
    V2 = s + root
    V1 = V * s / V2
    return np.array([
        [(V1 + V2) / 2, 0.0, (V2 - V1) / 2, 0.0],
        [0.0, (1 / V2 + 1 / V1) / 2, 0.0, (1 / V2 - 1 / V1) / 2],
        [(V2 - V1) / 2, 0.0, (V1 + V2) / 2 + eps_x, 0.0],
        [0.0, (1 / V2 - 1 / V1) / 2, 0.0, (1 / V2 + 1 / V1) / 2 + eps_p],
    ])

