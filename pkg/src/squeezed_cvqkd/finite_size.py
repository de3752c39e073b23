"""Parameter-estimation statistics and finite-size key rates.

The estimators act on Alice's modulation ``M`` and Bob's outcomes ``B``:

* transmittance ``T_hat = C_hat**2 / (r_x Vx + r_p Vp)**2`` with the pooled
  correlation ``C_hat = (sum Mx Bx + sum Mp Bp) / (m + n)``;
* output-referred channel noise per quadrature, whose expectation is
  ``T * eps`` for x and ``T * (eps + dV_untrusted)`` for p.

In planning mode the estimates are replaced by these expectations and the
worst-case bounds sit ``multiplier`` standard deviations away from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import DomainError
from .protocol import Channel, SourceSpec
from .security import (
    BiasedHomodyne,
    HomodyneX,
    ImbalancedHeterodyne,
    KeyRateResult,
    MeasurementScheme,
    Side,
    key_rate_asymptotic,
    key_rate_from_parameters,
)

CONFIDENCE_MULTIPLIER = 6.5
DEFAULT_EPS_BAR = 1e-10
T_FLOOR = 1e-12


@dataclass(frozen=True)
class EstimatorStats:
    """Estimator variances: ``var_T`` of T_hat and ``var_eps_x``/``var_eps_p``
    of the output-referred noise estimates (SNU^2)."""

    var_T: float
    var_eps_x: float
    var_eps_p: float


@dataclass(frozen=True)
class BlockAllocation:
    """How the ``N`` exchanged symbols are split.

    ``m``/``n`` symbols enter x/p parameter estimation and ``n_k`` symbols form
    the raw key. With ``disclose`` the estimation symbols are announced and
    lost for the key; otherwise all data is reused. ``paired`` marks a
    heterodyne detector, where one symbol yields both an x and a p outcome.
    """

    N: int
    m: int
    n: int
    n_k: int
    disclose: bool = False
    paired: bool = False

    def __post_init__(self):
        for name in ("N", "m", "n", "n_k"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.N < 1 or self.n_k < 1:
            raise DomainError("need N >= 1 and n_k >= 1")
        if self.disclose:
            used = max(self.m, self.n) if self.paired else self.m + self.n
            if used + self.n_k > self.N:
                raise DomainError("disclosed estimation and key blocks exceed N")
        elif self.paired:
            if max(self.m, self.n, self.n_k) > self.N:
                raise DomainError("blocks exceed N")
        elif self.m + self.n > self.N or self.n_k > self.N:
            raise DomainError("blocks exceed N")

    @property
    def prefactor(self) -> float:
        return self.n_k / self.N

    @classmethod
    def homodyne(cls, N: int, r_x: float, r_p: Optional[float] = None,
                 r_k: Optional[float] = None) -> "BlockAllocation":
        """Switching homodyne detector.

        Without ``r_k`` Bob measures x on a fraction ``r_x`` and p on the rest,
        every outcome is used for estimation and the x outcomes form the key.
        With ``r_k`` the fractions ``r_x``, ``r_p`` are disclosed for
        estimation and ``r_k`` (x outcomes) is kept for the key.
        """
        if r_k is None:
            if not 0.0 < r_x <= 1.0:
                raise DomainError("r_x must lie in (0, 1]")
            m = int(round(r_x * N))
            return cls(N=N, m=m, n=N - m, n_k=m)
        r_p = 1.0 - r_x - r_k if r_p is None else r_p
        if min(r_x, r_p, r_k) < 0.0 or r_x + r_p + r_k > 1.0 + 1e-12:
            raise DomainError("fractions must be >= 0 and sum to at most 1")
        m, n, n_k = (int(math.floor(r * N + 1e-9)) for r in (r_x, r_p, r_k))
        return cls(N=N, m=m, n=n, n_k=n_k, disclose=True)

    @classmethod
    def heterodyne(cls, N: int, r_k: Optional[float] = None) -> "BlockAllocation":
        """Heterodyne detector; every symbol gives an x and a p outcome."""
        if r_k is None:
            return cls(N=N, m=N, n=N, n_k=N, paired=True)
        if not 0.0 < r_k < 1.0:
            raise DomainError("r_k must lie in (0, 1)")
        n_k = int(round(r_k * N))
        return cls(N=N, m=N - n_k, n=N - n_k, n_k=n_k, disclose=True, paired=True)


def _transmittance_variance(src, T, m, n, noise_x_var, noise_p_var):
    wx, wp = m * src.Vx, n * src.Vp
    if wx + wp <= 0.0:
        raise DomainError("transmittance is not estimable: n*Vp + m*Vx = 0")
    num = wp * (noise_p_var + 2.0 * T * src.Vp) + wx * (noise_x_var + 2.0 * T * src.Vx)
    return 4.0 * T * num / (wp + wx) ** 2


def _variances(src, T, eps, m, n, nx, npv):
    var_T = _transmittance_variance(src, T, m, n, nx, npv)
    var_x = 2.0 / m * nx ** 2 + (1.0 - src.V) ** 2 * var_T if m > 0 else math.inf
    coef_p = 1.0 - 1.0 / src.V - src.dV_trusted
    var_p = 2.0 / n * npv ** 2 + coef_p ** 2 * var_T if n > 0 else math.inf
    return EstimatorStats(var_T=var_T, var_eps_x=var_x, var_eps_p=var_p)


def output_noise_variances(src: SourceSpec, T: float, eps: float):
    """Variances of Bob's x and p noise around ``sqrt(T) M`` (homodyne)."""
    nx = 1.0 + T * (src.V + eps - 1.0)
    npv = 1.0 + T * (1.0 / src.V + src.dV_trusted + eps + src.dV_untrusted - 1.0)
    return nx, npv


def estimator_variances_homodyne(src: SourceSpec, T: float, eps: float, m: int,
                                 n: int) -> EstimatorStats:
    """Approximate estimator variances for ``m`` x and ``n`` p homodyne samples.

    Quantities whose sample count is zero are reported as ``inf``.
    """
    if m < 0 or n < 0 or m + n < 1:
        raise DomainError("need m, n >= 0 and m + n >= 1")
    nx, npv = output_noise_variances(src, T, eps)
    return _variances(src, T, eps, m, n, nx, npv)


def estimator_variances_heterodyne(src: SourceSpec, T: float, eps: float, m: int, n: int,
                                   t_het: float) -> EstimatorStats:
    """Estimator variances after an imbalanced heterodyne detector.

    Outcomes are rescaled by ``1/sqrt(t_het)`` and ``1/sqrt(1 - t_het)``,
    which adds ``(1 - t)/t`` units of splitter vacuum to each noise variance.
    """
    if not 0.0 < t_het < 1.0:
        raise DomainError(f"t_het must lie in (0, 1), got {t_het}")
    if m < 0 or n < 0 or m + n < 1:
        raise DomainError("need m, n >= 0 and m + n >= 1")
    nx, npv = output_noise_variances(src, T, eps)
    nx += (1.0 - t_het) / t_het
    npv += t_het / (1.0 - t_het)
    return _variances(src, T, eps, m, n, nx, npv)


def worst_case_bounds(T_hat: float, eps_x_hat: float, eps_p_hat: float, stats: EstimatorStats,
                      multiplier: float = CONFIDENCE_MULTIPLIER):
    """Pessimistic ``(T_low, Veps_x_up, Veps_p_up)`` confidence bounds."""
    T_low = max(T_FLOOR, T_hat - multiplier * math.sqrt(stats.var_T))
    ex = max(0.0, eps_x_hat + multiplier * math.sqrt(stats.var_eps_x))
    ep = max(0.0, eps_p_hat + multiplier * math.sqrt(stats.var_eps_p))
    return T_low, ex, ep


def delta_n(n: int, eps_bar: float = DEFAULT_EPS_BAR) -> float:
    """Privacy-amplification correction ``7 sqrt(log2(2/eps_bar) / n)``."""
    if n < 1:
        raise DomainError("block length must be >= 1")
    if not 0.0 < eps_bar < 1.0:
        raise DomainError("eps_bar must lie in (0, 1)")
    return 7.0 * math.sqrt(math.log2(2.0 / eps_bar) / n)


@dataclass(frozen=True)
class FiniteKeyRateResult(KeyRateResult):
    """Finite-size key with the bounds and corrections that produced it.

    ``mutual_info`` and ``holevo`` are evaluated at the worst-case bounds;
    ``asymptotic`` is the key with perfectly known parameters and the same
    prefactor ``n_k / N``.
    """

    T_low: float = math.nan
    noise_x_up: float = math.nan
    noise_p_up: float = math.nan
    delta: float = 0.0
    prefactor: float = 1.0
    asymptotic: float = math.nan
    stats: Optional[EstimatorStats] = None
    allocation: Optional[BlockAllocation] = None


def _key_scheme(scheme: MeasurementScheme) -> MeasurementScheme:
    # switching homodyne: p outcomes feed estimation, x outcomes the key
    return HomodyneX() if isinstance(scheme, BiasedHomodyne) else scheme


def key_rate_finite(src: SourceSpec, ch: Channel, scheme: MeasurementScheme, side: Side,
                    beta: float, alloc: BlockAllocation, eps_bar: float = DEFAULT_EPS_BAR,
                    multiplier: float = CONFIDENCE_MULTIPLIER) -> FiniteKeyRateResult:
    """Finite-size key ``(n_k/N) [K(T_low, Veps_x_up, Veps_p_up) - Delta(n_k)]``.

    Estimates are replaced by their expectations at the true channel, and
    the upper noise bounds are referred back to the channel input through
    ``T_low``.
    """
    side = Side(side)
    T, eps = ch.T, ch.eps
    if alloc.m < 1 or alloc.n < 1:
        raise DomainError("both quadratures need estimation samples (m, n >= 1)")
    if isinstance(scheme, ImbalancedHeterodyne):
        stats = estimator_variances_heterodyne(src, T, eps, alloc.m, alloc.n, scheme.t_het)
    else:
        stats = estimator_variances_homodyne(src, T, eps, alloc.m, alloc.n)
    T_low, ex, ep = worst_case_bounds(T, T * eps, T * (eps + src.dV_untrusted), stats, multiplier)
    key_scheme = _key_scheme(scheme)
    inner = key_rate_from_parameters(src, T_low, ex / T_low, ep / T_low, key_scheme, side, beta)
    delta = delta_n(alloc.n_k, eps_bar)
    pre = alloc.prefactor
    margin = pre * (inner.margin - delta)
    ideal = key_rate_asymptotic(src, ch, key_scheme, side, beta)
    return FiniteKeyRateResult(
        mutual_info=inner.mutual_info, holevo=inner.holevo, key_rate=max(margin, 0.0),
        beta=beta, margin=margin, side=side, scheme=scheme, regime="finite",
        branches=inner.branches, T_low=T_low, noise_x_up=ex / T_low, noise_p_up=ep / T_low,
        delta=delta, prefactor=pre, asymptotic=pre * ideal.key_rate, stats=stats,
        allocation=alloc,
    )
