"""Fluctuating-transmittance channels treated by gaussification.

A fading channel mixes fixed channels ``T_i`` with probabilities ``tau_i``.
The mixture is replaced by the Gaussian state with the same second moments,
which depend on the distribution only through ``<T>`` and ``<sqrt(T)>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .protocol import FadingChannel, SourceSpec, eb_state
from .security import HomodyneX, KeyRateResult, Side, key_rate_from_parameters

WEAK_TURBULENCE_VAR = 0.02


@dataclass(frozen=True)
class FadingMoments:
    mean_T: float
    mean_sqrtT: float

    def __post_init__(self):
        if not 0.0 < self.mean_T <= 1.0:
            raise DomainError(f"<T> must lie in (0, 1], got {self.mean_T}")
        if self.mean_sqrtT <= 0.0:
            raise DomainError("<sqrt(T)> must be positive")
        # Jensen: <sqrt(T)>^2 <= <T>
        if self.mean_sqrtT ** 2 > self.mean_T * (1.0 + 1e-12):
            raise DomainError("moments violate <sqrt(T)>^2 <= <T>")

    @property
    def var_sqrtT(self) -> float:
        return max(self.mean_T - self.mean_sqrtT ** 2, 0.0)

    @classmethod
    def from_variance(cls, mean_T: float, var_sqrtT: float) -> "FadingMoments":
        """Moments with a given ``<T>`` and ``Var(sqrt(T))``."""
        if var_sqrtT < 0.0 or var_sqrtT >= mean_T:
            raise DomainError("need 0 <= Var(sqrt(T)) < <T>")
        return cls(mean_T=mean_T, mean_sqrtT=math.sqrt(mean_T - var_sqrtT))

    @classmethod
    def fixed(cls, T: float) -> "FadingMoments":
        return cls(mean_T=T, mean_sqrtT=math.sqrt(T))


def fading_moments(dist: FadingChannel) -> FadingMoments:
    t = np.asarray(dist.transmittances)
    w = np.asarray(dist.weights)
    return FadingMoments(mean_T=float(w @ t), mean_sqrtT=float(w @ np.sqrt(t)))


def build_cm_fading(src: SourceSpec, mom: FadingMoments, eps: float) -> np.ndarray:
    """Gaussified ``(A1, A2, B)`` covariance matrix after a fading channel.

    The excess noise ``eps`` is referred to the channel input, so it enters
    Bob's variances scaled by ``<T>``.
    """
    if eps < 0.0:
        raise DomainError("excess noise must be >= 0")
    return eb_state(src, mom.mean_T, eps, eps + src.dV_untrusted,
                    amplitude=mom.mean_sqrtT).gamma


def fading_mutual_information(src: SourceSpec, mom: FadingMoments, eps: float) -> float:
    """x-quadrature mutual information of the gaussified channel."""
    signal = mom.mean_T * (src.V + eps - 1.0 + src.Vx)
    den = 1.0 - mom.mean_sqrtT ** 2 * src.Vx + signal
    if den <= 0.0:
        raise DomainError("parameters give a non-positive conditional variance")
    return 0.5 * math.log2((1.0 + signal) / den)


def fading_equivalent_noise(src: SourceSpec, mom: FadingMoments):
    """Extra output noise ``(eps_f_x, eps_f_p)`` caused by the fluctuations.

    Relative to a fixed channel of transmittance ``<sqrt(T)>^2`` the fading
    adds these variances to Bob's x and p. The AS term uses the total AS
    excess noise, trusted or not, and all of it is attributed to Eve.
    """
    var = mom.var_sqrtT
    dV = src.dV_trusted + src.dV_untrusted
    return var * (src.V + src.Vx - 1.0), var * (1.0 / src.V + src.Vp + dV - 1.0)


def key_rate_fading(src: SourceSpec, mom: FadingMoments, eps: float, side: Side,
                    beta: float = 0.95) -> KeyRateResult:
    """Asymptotic key of the x-homodyne protocol over a fading channel."""
    res = key_rate_from_parameters(src, mom.mean_T, eps, eps + src.dV_untrusted, HomodyneX(),
                                   side, beta, amplitude=mom.mean_sqrtT)
    return KeyRateResult(mutual_info=res.mutual_info, holevo=res.holevo, key_rate=res.key_rate,
                         beta=beta, margin=res.margin, side=res.side, scheme=res.scheme,
                         regime="fading")
