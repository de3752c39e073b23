"""Gaussian-state linear algebra in shot-noise units.

Covariance matrices are plain ``numpy`` arrays of shape ``(2M, 2M)`` with the
quadratures ordered mode by mode, ``(x_1, p_1, x_2, p_2, ...)``, and the vacuum
variance equal to 1 (hbar = 2).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

from .exceptions import (
    DegenerateMeasurement,
    DomainError,
    NonSymmetric,
    NumericalFailure,
    Unphysical,
)

SYMMETRY_RTOL = 1e-12
PHYSICAL_TOL = 1e-9
DEGENERATE_VARIANCE = 1e-12


class Quadrature(NamedTuple):
    """Selects the quadrature ``"x"`` or ``"p"`` of mode ``mode``."""

    quadrature: str
    mode: int

    @property
    def index(self) -> int:
        return 2 * self.mode + (0 if self.quadrature == "x" else 1)


def X(mode: int) -> Quadrature:
    return Quadrature("x", mode)


def P(mode: int) -> Quadrature:
    return Quadrature("p", mode)


def omega(modes: int) -> np.ndarray:
    """Symplectic form, a direct sum of ``[[0, 1], [-1, 0]]`` blocks."""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def as_covariance(gamma) -> np.ndarray:
    """Validate shape and symmetry and return ``gamma`` as a float array."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
        raise DomainError(f"covariance matrix must be square with even size, got {gamma.shape}")
    scale = max(np.max(np.abs(gamma)), 1.0)
    if np.max(np.abs(gamma - gamma.T)) > SYMMETRY_RTOL * scale:
        raise NonSymmetric("covariance matrix is not symmetric")
    return 0.5 * (gamma + gamma.T)


def mode_count(gamma) -> int:
    return np.shape(gamma)[0] // 2


def symplectic_eigenvalues(gamma) -> np.ndarray:
    """Symplectic spectrum of ``gamma``, sorted in descending order.

    The values are the moduli of the eigenvalues of ``Omega @ gamma``. For a
    positive-definite ``gamma = L L^T`` the same spectrum is obtained from the
    antisymmetric matrix ``L^T Omega L``, whose eigenproblem is normal and
    therefore well conditioned even when the entries span many decades.
    """
    gamma = as_covariance(gamma)
    m = mode_count(gamma)
    om = omega(m)
    try:
        chol = np.linalg.cholesky(gamma)
    except np.linalg.LinAlgError:
        chol = None
    try:
        if chol is not None:
            spectrum = np.linalg.eigvalsh(1j * (chol.T @ om @ chol))
            return np.sort(np.abs(spectrum[m:]))[::-1]
        spectrum = np.linalg.eigvals(om @ gamma)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return _pair_spectrum(spectrum, m)


def _pair_spectrum(spectrum: np.ndarray, m: int, tol: float = 1e-8) -> np.ndarray:
    # eigenvalues of Omega@gamma come in +-i*lambda pairs
    mags = np.sort(np.abs(spectrum.imag))[::-1]
    pairs = mags.reshape(m, 2)
    scale = np.maximum(pairs[:, 0], 1.0)
    if np.any(np.abs(pairs[:, 0] - pairs[:, 1]) > tol * scale):
        raise NumericalFailure("symplectic eigenvalues do not pair up")
    return pairs.mean(axis=1)


def roundoff_tolerance(gamma) -> float:
    """Physicality tolerance for ``gamma``: ``PHYSICAL_TOL`` or the float floor.

    Storing a nearly pure, strongly squeezed state in doubles perturbs its
    unit symplectic eigenvalues by up to about ``eps * cond(gamma)``, so a
    fixed tolerance would reject states that are pure up to rounding.
    """
    cond = np.linalg.cond(np.asarray(gamma, dtype=float))
    if not np.isfinite(cond):
        return PHYSICAL_TOL
    return max(PHYSICAL_TOL, float(np.finfo(float).eps * cond))


def is_physical(gamma, tol: float | None = None) -> bool:
    if tol is None:
        tol = roundoff_tolerance(gamma)
    return bool(np.all(symplectic_eigenvalues(gamma) >= 1.0 - tol))


def g_function(x):
    """Bosonic entropy function ``(x+1) log2(x+1) - x log2(x)`` in bits."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12):
        raise DomainError("g_function is defined for x >= 0")
    x = np.maximum(x, 0.0)
    out = (xlogy(x + 1.0, x + 1.0) - xlogy(x, x)) / np.log(2.0)
    return out.item() if out.ndim == 0 else out


def entropy_from_spectrum(spectrum, tol: float = PHYSICAL_TOL) -> float:
    spectrum = np.asarray(spectrum, dtype=float)
    if np.any(spectrum < 1.0 - tol):
        raise Unphysical(f"symplectic eigenvalue below 1: {spectrum.min():.12g}")
    spectrum = np.maximum(spectrum, 1.0)
    return float(np.sum(g_function((spectrum - 1.0) / 2.0)))


def von_neumann_entropy(gamma) -> float:
    """Entropy in bits, ``sum_i G((lambda_i - 1) / 2)``."""
    gamma = as_covariance(gamma)
    return entropy_from_spectrum(symplectic_eigenvalues(gamma), roundoff_tolerance(gamma))


def _remaining(m: int, mode: int) -> np.ndarray:
    keep = [k for k in range(m) if k != mode]
    return np.array([2 * k + q for k in keep for q in (0, 1)], dtype=int)


def condition_on_homodyne(gamma, measured: Quadrature) -> np.ndarray:
    """Covariance of the other modes after homodyning one quadrature.

    Implements ``gamma_i - sigma (Q gamma_j Q)^+ sigma^T`` where ``Q`` projects
    on the measured quadrature. The pseudoinverse of the rank-one block is
    ``1 / var`` on the measured entry and zero elsewhere.
    """
    gamma = as_covariance(gamma)
    m = mode_count(gamma)
    if not 0 <= measured.mode < m:
        raise DomainError(f"mode {measured.mode} out of range for {m} modes")
    if measured.quadrature not in ("x", "p"):
        raise DomainError(f"unknown quadrature {measured.quadrature!r}")
    q = measured.index
    var = gamma[q, q]
    if var <= DEGENERATE_VARIANCE:
        raise DegenerateMeasurement(f"measured quadrature variance {var:g} is not positive")
    rest = _remaining(m, measured.mode)
    col = gamma[rest, q]
    out = gamma[np.ix_(rest, rest)] - np.outer(col, col) / var
    return 0.5 * (out + out.T)


def condition_on_heterodyne(gamma, mode_x: Quadrature, mode_p: Quadrature) -> np.ndarray:
    """Condition on two quadratures of two distinct modes (a double homodyne).

    Mode indices refer to ``gamma``; the reindexing after the first
    measurement is handled here.
    """
    if mode_x.mode == mode_p.mode:
        raise DomainError("heterodyne outputs must be distinct modes")
    first = condition_on_homodyne(gamma, mode_x)
    shift = 1 if mode_p.mode > mode_x.mode else 0
    return condition_on_homodyne(first, Quadrature(mode_p.quadrature, mode_p.mode - shift))


def condition(gamma, *measured: Quadrature) -> np.ndarray:
    """Sequentially condition on any number of quadratures of distinct modes."""
    if len({q.mode for q in measured}) != len(measured):
        raise DomainError("each mode can be measured only once")
    out = gamma
    remaining = sorted(measured, key=lambda q: q.mode, reverse=True)
    # highest mode first so lower indices stay valid
    for q in remaining:
        out = condition_on_homodyne(out, q)
    return out


def reduced(gamma, modes) -> np.ndarray:
    """Marginal covariance matrix of the listed modes (partial trace)."""
    gamma = np.asarray(gamma, dtype=float)
    idx = np.array([2 * k + q for k in modes for q in (0, 1)], dtype=int)
    return gamma[np.ix_(idx, idx)]


def single_mode_squeezer(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def beamsplitter(t: float) -> np.ndarray:
    """Two-mode beamsplitter symplectic with intensity transmittance ``t``."""
    a, b = np.sqrt(t), np.sqrt(1.0 - t)
    eye = np.eye(2)
    return np.block([[a * eye, b * eye], [-b * eye, a * eye]])
