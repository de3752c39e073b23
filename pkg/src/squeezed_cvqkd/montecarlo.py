"""Monte Carlo sampler of the parameter-estimation data.

Each repetition draws Alice's modulation ``M`` and Bob's outcomes
``B = sqrt(T) M + noise`` for ``m`` x-rounds and ``n`` p-rounds and applies
the transmittance and noise estimators. With a heterodyne detector Bob's
outcomes are attenuated by the splitter and pick up its vacuum; the
estimators undo the attenuation by ``1/sqrt(t_het)`` (x) and
``1/sqrt(1 - t_het)`` (p).

Repetitions are processed in fixed-size chunks, each with its own
counter-based (Philox) stream spawned from the seed, so results do not
depend on how many threads run the chunks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .finite_size import (
    EstimatorStats,
    estimator_variances_heterodyne,
    estimator_variances_homodyne,
)
from .protocol import SourceSpec
from .security import ImbalancedHeterodyne, MeasurementScheme

CHUNK = 64
AGREEMENT_RSE = 5.0
# rows of the per-repetition result array
T_HAT, EPS_X_HAT, EPS_P_HAT, EPS_HAT = range(4)


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.

    ``het_scaling`` selects how heterodyne outcomes are rescaled in the noise
    estimators: ``"sqrt"`` divides by ``sqrt(t_het)`` and removes the
    ``1/t_het`` vacuum level, ``"verbatim"`` divides by ``t_het`` and removes
    one shot-noise unit.
    """

    src: SourceSpec
    T: float
    eps: float
    scheme: MeasurementScheme
    samples_x: int
    samples_p: int
    repetitions: int
    seed: int = 0
    het_scaling: str = "sqrt"

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise DomainError("T must lie in (0, 1]")
        if self.eps < 0.0:
            raise DomainError("eps must be >= 0")
        if self.samples_x < 0 or self.samples_p < 0 or self.samples_x + self.samples_p < 1:
            raise DomainError("need samples_x, samples_p >= 0 with at least one sample")
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.het_scaling not in ("sqrt", "verbatim"):
            raise DomainError(f"unknown het_scaling {self.het_scaling!r}")
        wx = self.samples_x * self.src.Vx
        wp = self.samples_p * self.src.Vp
        if wx + wp <= 0.0:
            raise DomainError("the sampled quadratures carry no modulation")

    @property
    def t_het(self) -> Optional[float]:
        return self.scheme.t_het if isinstance(self.scheme, ImbalancedHeterodyne) else None


def _quadrature_sums(rng, reps, count, Vmod, sqrtT, noise_var, gain, scale):
    """Per-repetition sums ``(sum M^2, sum M B, sum B^2)`` with ``B`` rescaled."""
    if count == 0:
        z = np.zeros(reps)
        return z, z, z
    M = rng.standard_normal((reps, count)) * math.sqrt(Vmod)
    B = sqrtT * M + rng.standard_normal((reps, count)) * math.sqrt(noise_var)
    if gain is not None:
        # detector splitter: attenuate and add vacuum, then rescale
        B = math.sqrt(gain) * B + math.sqrt(1.0 - gain) * rng.standard_normal((reps, count))
        B = B / scale
    return np.einsum("ij,ij->i", M, M), np.einsum("ij,ij->i", M, B), np.einsum("ij,ij->i", B, B)


def _chunk(cfg: SimConfig, seq: np.random.SeedSequence, reps: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seq))
    src, T, eps = cfg.src, cfg.T, cfg.eps
    m, n = cfg.samples_x, cfg.samples_p
    nx = 1.0 + T * (src.V + eps - 1.0)
    npv = 1.0 + T * (1.0 / src.V + src.dV_trusted + eps + src.dV_untrusted - 1.0)
    t = cfg.t_het
    sqrtT = math.sqrt(T)
    if t is None:
        gx = gp = None
        sx = sp = 1.0
        vac_x = vac_p = 1.0
    else:
        gx, gp = t, 1.0 - t
        if cfg.het_scaling == "sqrt":
            sx, sp = math.sqrt(gx), math.sqrt(gp)
            vac_x, vac_p = 1.0 / gx, 1.0 / gp
        else:
            sx, sp = gx, gp
            vac_x = vac_p = 1.0
    mxx, mxb, bxx = _quadrature_sums(rng, reps, m, src.Vx, sqrtT, nx, gx, sx)
    mpp, mpb, bpp = _quadrature_sums(rng, reps, n, src.Vp, sqrtT, npv, gp, sp)

    C = (mxb + mpb) / (m + n)
    T_hat = C ** 2 / ((m * src.Vx + n * src.Vp) / (m + n)) ** 2
    root = np.sqrt(T_hat)
    res_x = bxx - 2.0 * root * mxb + T_hat * mxx
    res_p = bpp - 2.0 * root * mpb + T_hat * mpp
    out = np.empty((4, reps))
    out[T_HAT] = T_hat
    out[EPS_X_HAT] = res_x / m + T_hat * (1.0 - src.V) - vac_x if m else np.nan
    out[EPS_P_HAT] = (res_p / n + T_hat * (1.0 - 1.0 / src.V - src.dV_trusted) - vac_p
                      if n else np.nan)
    out[EPS_HAT] = (res_x + res_p) / (m + n) - 1.0
    return out


@dataclass(frozen=True)
class SimResult:
    """Per-repetition estimates, one row per quantity (``T_HAT``, ...)."""

    config: SimConfig
    estimates: np.ndarray

    @property
    def T_hat(self) -> np.ndarray:
        return self.estimates[T_HAT]

    @property
    def eps_x_hat(self) -> np.ndarray:
        return self.estimates[EPS_X_HAT]

    @property
    def eps_p_hat(self) -> np.ndarray:
        return self.estimates[EPS_P_HAT]

    @property
    def eps_hat(self) -> np.ndarray:
        """Pooled noise estimate, meaningful for symmetric coherent sources."""
        return self.estimates[EPS_HAT]


def simulate_block(cfg: SimConfig, threads: int = 1) -> SimResult:
    """Run ``cfg.repetitions`` independent estimation rounds."""
    R = cfg.repetitions
    sizes = [min(CHUNK, R - start) for start in range(0, R, CHUNK)]
    seqs = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = list(zip(seqs, sizes))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda job: _chunk(cfg, *job), jobs))
    else:
        parts = [_chunk(cfg, *job) for job in jobs]
    return SimResult(config=cfg, estimates=np.concatenate(parts, axis=1))


def formula_stats(cfg: SimConfig) -> EstimatorStats:
    """Analytic estimator variances matching ``cfg``."""
    if cfg.t_het is None:
        return estimator_variances_homodyne(cfg.src, cfg.T, cfg.eps, cfg.samples_x, cfg.samples_p)
    return estimator_variances_heterodyne(cfg.src, cfg.T, cfg.eps, cfg.samples_x,
                                          cfg.samples_p, cfg.t_het)


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    empirical: float
    formula: float
    relative_error: float
    rse: float
    agree: Optional[bool]
    mean: float
    expected_mean: float
    mean_bias_flag: bool


def empirical_variance_report(result: SimResult, stats: Optional[EstimatorStats] = None,
                              threshold: float = AGREEMENT_RSE) -> list:
    """Compare empirical estimator variances with the analytic ones.

    ``rse`` is the relative standard error of a sample variance of a Gaussian
    estimator, ``sqrt(2 / (R - 1))``; it is ``nan`` for a single repetition
    and ``agree`` is then ``None``. ``mean_bias_flag`` marks estimators whose
    mean misses its target by more than ``threshold`` standard errors.
    """
    cfg = result.config
    stats = formula_stats(cfg) if stats is None else stats
    R = cfg.repetitions
    rse = math.sqrt(2.0 / (R - 1)) if R > 1 else math.nan
    targets = {
        "T_hat": (result.T_hat, stats.var_T, cfg.T),
        "eps_x_hat": (result.eps_x_hat, stats.var_eps_x, cfg.T * cfg.eps),
        "eps_p_hat": (result.eps_p_hat, stats.var_eps_p, cfg.T * (cfg.eps + cfg.src.dV_untrusted)),
    }
    rows = []
    for name, (values, formula, target) in targets.items():
        if not np.all(np.isfinite(values)) or not math.isfinite(formula):
            continue
        emp = float(np.var(values, ddof=1)) if R > 1 else math.nan
        rel = emp / formula - 1.0 if formula > 0 else math.nan
        agree = None if math.isnan(rse) else bool(abs(rel) <= threshold * rse)
        mean = float(np.mean(values))
        sem = math.sqrt(emp / R) if R > 1 else math.nan
        flag = bool(R > 1 and abs(mean - target) > threshold * sem)
        rows.append(ReportRow(name, emp, formula, rel, rse, agree, mean, target, flag))
    return rows
