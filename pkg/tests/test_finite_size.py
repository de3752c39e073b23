import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from squeezed_cvqkd.exceptions import DomainError
from squeezed_cvqkd.finite_size import (
    BlockAllocation,
    EstimatorStats,
    delta_n,
    estimator_variances_heterodyne,
    estimator_variances_homodyne,
    key_rate_finite,
    worst_case_bounds,
)
from squeezed_cvqkd.protocol import Channel, SourceSpec, distance_to_transmittance
from squeezed_cvqkd.security import (
    BiasedHomodyne,
    HomodyneX,
    ImbalancedHeterodyne,
    key_rate_asymptotic,
    key_rate_from_parameters,
)


def plain_formulas(V, Vx, Vp, dVu, T, eps, m, n):
    """Untrusted-noise estimator variances written out term by term."""
    VNx = 1 + T * (V + eps - 1)
    VNp = 1 + T * (1 / V + eps + dVu - 1)
    ups = 4 * T * (n * Vp * (VNp + 2 * T * Vp) + m * Vx * (VNx + 2 * T * Vx)) / (n * Vp + m * Vx) ** 2
    sx = 2 / m * VNx ** 2 + (1 - V) ** 2 * ups
    sp = 2 / n * VNp ** 2 + (1 - 1 / V) ** 2 * ups
    return ups, sx, sp


def test_plain_formulas_reproduced():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0, dV_untrusted=0.2)
    stats = estimator_variances_homodyne(src, 0.5, 0.05, 10 ** 5, 2 * 10 ** 5)
    ref = plain_formulas(0.5, 10.0, 10.0, 0.2, 0.5, 0.05, 10 ** 5, 2 * 10 ** 5)
    assert (stats.var_T, stats.var_eps_x, stats.var_eps_p) == pytest.approx(ref, rel=1e-14)


@given(st.floats(0.05, 1.0), st.floats(0.1, 20.0), st.floats(0.0, 20.0), st.floats(0.0, 2.0),
       st.floats(0.05, 1.0), st.floats(0.0, 0.5), st.integers(1, 10 ** 7), st.integers(1, 10 ** 7))
def test_trusted_variant_reduces_exactly(V, Vx, Vp, dVu, T, eps, m, n):
    src = SourceSpec(V=V, Vx=Vx, Vp=Vp, dV_untrusted=dVu)
    stats = estimator_variances_homodyne(src, T, eps, m, n)
    ref = plain_formulas(V, Vx, Vp, dVu, T, eps, m, n)
    assert (stats.var_T, stats.var_eps_x, stats.var_eps_p) == pytest.approx(ref, rel=1e-12)


def test_trusted_variant():
    # the trusted AS noise rides on Bob's p noise (scaled by T) and shifts the
    # p-noise estimator's dependence on T_hat
    V, Vx, Vp, dVt, T, eps, m, n = 0.5, 4.0, 2.0, 3.0, 0.6, 0.05, 10 ** 5, 10 ** 5
    src = SourceSpec(V=V, Vx=Vx, Vp=Vp, dV_trusted=dVt)
    stats = estimator_variances_homodyne(src, T, eps, m, n)
    VNx = 1 + T * (V + eps - 1)
    VNp = 1 + T * (1 / V + dVt + eps - 1)
    ups = 4 * T * (n * Vp * (VNp + 2 * T * Vp) + m * Vx * (VNx + 2 * T * Vx)) / (n * Vp + m * Vx) ** 2
    assert stats.var_T == pytest.approx(ups, rel=1e-14)
    assert stats.var_eps_p == pytest.approx(2 / n * VNp ** 2 + (1 - 1 / V - dVt) ** 2 * ups, rel=1e-14)


def test_coherent_symmetric_pooled_variance():
    # V = 1, equal modulation: the per-quadrature noise estimators have equal
    # variance 2 (1 + V_eps)^2 / count, so pooling them gives count = m + n
    src = SourceSpec(V=1.0, Vx=5.0, Vp=5.0)
    T, eps, m, n = 0.4, 0.1, 30000, 30000
    stats = estimator_variances_homodyne(src, T, eps, m, n)
    Veps = T * eps
    assert stats.var_eps_x == pytest.approx(2 * (1 + Veps) ** 2 / m, rel=1e-12)
    pooled = 1.0 / (1.0 / stats.var_eps_x + 1.0 / stats.var_eps_p)
    assert pooled == pytest.approx(2 * (1 + Veps) ** 2 / (m + n), rel=1e-12)


def test_variances_vanish_with_many_samples():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0)
    stats = estimator_variances_homodyne(src, 0.5, 0.05, 10 ** 15, 10 ** 15)
    assert max(stats.var_T, stats.var_eps_x, stats.var_eps_p) < 1e-12


@given(st.floats(0.05, 1.0), st.floats(0.1, 20.0), st.floats(0.1, 20.0), st.floats(0.05, 1.0),
       st.integers(10 ** 4, 10 ** 8), st.integers(10 ** 4, 10 ** 8))
def test_one_over_n_scaling(V, Vx, Vp, T, m, n):
    src = SourceSpec(V=V, Vx=Vx, Vp=Vp)
    a = estimator_variances_homodyne(src, T, 0.05, m, n)
    b = estimator_variances_homodyne(src, T, 0.05, 2 * m, 2 * n)
    for x, y in ((a.var_T, b.var_T), (a.var_eps_x, b.var_eps_x), (a.var_eps_p, b.var_eps_p)):
        assert y == pytest.approx(x / 2, rel=0.1)


def test_zero_counts():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0)
    stats = estimator_variances_homodyne(src, 0.5, 0.05, 100, 0)
    assert math.isinf(stats.var_eps_p) and math.isfinite(stats.var_eps_x)
    with pytest.raises(DomainError):
        estimator_variances_homodyne(SourceSpec(V=0.5, Vx=10.0), 0.5, 0.05, 0, 100)
    with pytest.raises(DomainError):
        estimator_variances_homodyne(src, 0.5, 0.05, 0, 0)


def test_heterodyne_variances():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0, dV_untrusted=0.1)
    T, eps, m, n, t = 0.5, 0.05, 10 ** 5, 10 ** 5, 0.3
    stats = estimator_variances_heterodyne(src, T, eps, m, n, t)
    VNx = 1 / t + T * (src.V + eps - 1)
    VNp = 1 / (1 - t) + T * (1 / src.V + eps + src.dV_untrusted - 1)
    ups = 4 * T * (n * 10 * (VNp + 2 * T * 10) + m * 10 * (VNx + 2 * T * 10)) / (n * 10 + m * 10) ** 2
    assert stats.var_T == pytest.approx(ups, rel=1e-14)
    assert stats.var_eps_x == pytest.approx(2 / m * VNx ** 2 + 0.25 * ups, rel=1e-14)
    assert stats.var_eps_p == pytest.approx(2 / n * VNp ** 2 + 1.0 * ups, rel=1e-14)
    with pytest.raises(DomainError):
        estimator_variances_heterodyne(src, T, eps, m, n, 1.0)


def test_heterodyne_limits():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0)
    T, eps, m, n = 0.5, 0.05, 10 ** 5, 10 ** 5
    # each quadrature recovers its homodyne form once the other one, whose
    # vacuum penalty diverges, no longer feeds the transmittance estimate
    hom_x = estimator_variances_homodyne(src, T, eps, m, 0)
    near_x = estimator_variances_heterodyne(src, T, eps, m, 0, 1 - 1e-12)
    assert near_x.var_eps_x == pytest.approx(hom_x.var_eps_x, rel=1e-6)
    hom_p = estimator_variances_homodyne(src, T, eps, 0, n)
    near_p = estimator_variances_heterodyne(src, T, eps, 0, n, 1e-12)
    assert near_p.var_eps_p == pytest.approx(hom_p.var_eps_p, rel=1e-6)
    # balanced detector: the splitter adds one vacuum unit to both quadratures
    bal = estimator_variances_heterodyne(src, T, eps, m, n, 0.5)
    VNx = 2 + T * (src.V + eps - 1)
    assert bal.var_eps_x == pytest.approx(2 / m * VNx ** 2 + 0.25 * bal.var_T, rel=1e-14)


def test_worst_case_bounds():
    zero = EstimatorStats(0.0, 0.0, 0.0)
    assert worst_case_bounds(0.5, 0.02, 0.03, zero) == (0.5, 0.02, 0.03)
    T_low, ex, ep = worst_case_bounds(0.5, 0.02, 0.03, EstimatorStats(1e-4, 4e-6, 9e-6))
    assert T_low == pytest.approx(0.435)
    assert ex == pytest.approx(0.02 + 6.5 * 2e-3)
    assert ep == pytest.approx(0.03 + 6.5 * 3e-3)
    T_low, _, _ = worst_case_bounds(0.01, 0.0, 0.0, EstimatorStats(1.0, 0.0, 0.0))
    assert T_low == 1e-12


def test_delta_n():
    assert delta_n(10 ** 7) == pytest.approx(7 * math.sqrt(math.log2(2e10) / 1e7), rel=1e-14)
    assert delta_n(10 ** 7) == pytest.approx(0.0130, abs=1e-4)
    assert delta_n(10 ** 6) > delta_n(10 ** 7)
    assert delta_n(10 ** 30) < 1e-12
    with pytest.raises(DomainError):
        delta_n(0)


def test_block_allocation():
    a = BlockAllocation.homodyne(1000, 0.3)
    assert (a.m, a.n, a.n_k, a.prefactor) == (300, 700, 300, 0.3)
    d = BlockAllocation.homodyne(1000, 0.1, 0.1, 0.3)
    assert (d.m, d.n, d.n_k) == (100, 100, 300)
    assert BlockAllocation.homodyne(1000, 0.1, r_k=0.3).n == 600
    h = BlockAllocation.heterodyne(1000)
    assert (h.m, h.n, h.n_k) == (1000, 1000, 1000)
    hd = BlockAllocation.heterodyne(1000, 0.4)
    assert (hd.m, hd.n, hd.n_k, hd.prefactor) == (600, 600, 400, 0.4)
    with pytest.raises(DomainError):
        BlockAllocation(N=100, m=50, n=40, n_k=20, disclose=True)
    with pytest.raises(DomainError):
        BlockAllocation(N=100, m=60, n=60, n_k=10)
    with pytest.raises(DomainError):
        BlockAllocation.homodyne(100, 0.5, 0.5, 0.5)


def test_disclosure_reduces_prefactor_and_key():
    src = SourceSpec(V=0.5, Vx=4.0, Vp=1.0)
    ch = Channel(0.6, 0.02)
    # same x/p split; disclosing part of the x outcomes removes them from the key
    reuse = key_rate_finite(src, ch, BiasedHomodyne(), "RR", 0.95, BlockAllocation.homodyne(10 ** 8, 0.5))
    shown = key_rate_finite(src, ch, BiasedHomodyne(), "RR", 0.95,
                            BlockAllocation.homodyne(10 ** 8, 0.1, 0.5, 0.4))
    assert shown.allocation.n_k < reuse.allocation.n_k
    assert shown.prefactor < reuse.prefactor
    assert shown.key_rate < reuse.key_rate


def test_finite_key_straight_line_oracle():
    # oracle: the finite-size recipe spelled out step by step
    src = SourceSpec(V=0.5, Vx=4.0, Vp=1.0)
    T = float(distance_to_transmittance(10.0))
    eps, N, beta = 0.05, 10 ** 7, 0.95
    m = n = N // 2
    ups, sx, sp = plain_formulas(0.5, 4.0, 1.0, 0.0, T, eps, m, n)
    T_low = T - 6.5 * math.sqrt(ups)
    ex = (T * eps + 6.5 * math.sqrt(sx)) / T_low
    ep = (T * eps + 6.5 * math.sqrt(sp)) / T_low
    inner = key_rate_from_parameters(src, T_low, ex, ep, HomodyneX(), "RR", beta)
    expected = m / N * (inner.margin - 7 * math.sqrt(math.log2(2e10) / m))
    res = key_rate_finite(src, Channel(T, eps), BiasedHomodyne(), "RR", beta, BlockAllocation.homodyne(N, 0.5))
    assert res.key_rate == pytest.approx(expected, rel=1e-12)
    assert res.T_low == pytest.approx(T_low, rel=1e-14)
    assert res.key_rate > 0


def test_finite_key_ordering_at_10km():
    src = SourceSpec(V=0.5, Vx=4.0, Vp=1.0)
    ch = Channel(float(distance_to_transmittance(10.0)), 0.05)
    k6 = key_rate_finite(src, ch, BiasedHomodyne(), "RR", 0.95, BlockAllocation.homodyne(10 ** 6, 0.5))
    k7 = key_rate_finite(src, ch, BiasedHomodyne(), "RR", 0.95, BlockAllocation.homodyne(10 ** 7, 0.5))
    asym = key_rate_asymptotic(src, ch, BiasedHomodyne(), "RR", 0.95)
    assert 0 < k6.key_rate < k7.key_rate < k7.asymptotic <= asym.key_rate


def test_finite_requires_both_quadratures():
    with pytest.raises(DomainError):
        key_rate_finite(SourceSpec(V=0.5, Vx=4.0), Channel(0.5, 0.01), HomodyneX(), "RR", 0.95,
                        BlockAllocation(N=100, m=100, n=0, n_k=100))


@given(st.floats(0.1, 1.0), st.floats(0.5, 20.0), st.floats(0.0, 10.0), st.floats(0.05, 1.0),
       st.floats(0.0, 0.2), st.sampled_from(["RR", "DR"]), st.integers(5, 12),
       st.sampled_from(["biased", "het"]))
def test_finite_below_asymptotic(V, Vx, Vp, T, eps, side, logN, kind):
    src = SourceSpec(V=V, Vx=Vx, Vp=Vp + 0.1)
    ch = Channel(T, eps)
    if kind == "het":
        scheme, alloc = ImbalancedHeterodyne(0.5), BlockAllocation.heterodyne(10 ** logN)
    else:
        scheme, alloc = BiasedHomodyne(), BlockAllocation.homodyne(10 ** logN, 0.5)
    res = key_rate_finite(src, ch, scheme, side, 0.95, alloc)
    assert res.key_rate <= res.asymptotic + 1e-12
    assert res.key_rate <= key_rate_asymptotic(src, ch, scheme, side, 0.95).key_rate + 1e-12


def test_convergence_to_asymptotic():
    src = SourceSpec(V=0.5, Vx=10.0, Vp=10.0)
    ch = Channel(0.5, 0.02)
    scheme = ImbalancedHeterodyne(0.5)
    ideal = key_rate_asymptotic(src, ch, scheme, "RR", 0.95).key_rate
    gaps = [abs(key_rate_finite(src, ch, scheme, "RR", 0.95, BlockAllocation.heterodyne(10 ** k)).key_rate - ideal)
            for k in (6, 8, 10, 12)]
    assert gaps[-1] < 1e-3
    assert np.all(np.diff(gaps) < 0)
