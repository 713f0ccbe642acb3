import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binls import model
from binls.model import StatePair, SystemParams, UndefinedQuotientError
from binls.spectral import GridSpec, RealField

from .helpers import bandlimited, random_pair


def P(**kw):
    base = dict(dimension=1, alpha1=1.0, alpha2=1.0, beta=1.0, r1=2.0, r2=2.0, rho=1.0)
    base.update(kw)
    return SystemParams(**base)


def mode_pair(A=1.0, n=64):
    g = GridSpec(1, n, 2 * math.pi)
    u = A * np.cos(g.axis())
    return StatePair.from_arrays(g, u, u)


@pytest.mark.parametrize(
    "kw",
    [dict(alpha1=0.0), dict(alpha2=-1.0), dict(beta=-1.0), dict(r1=1.0), dict(r2=0.5), dict(rho=0.0)],
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        P(**kw)


def test_params_sobolev_bound():
    SystemParams(5, 1, 1, 1, 4.0, 5.9, 1.0)
    with pytest.raises(ValueError):
        SystemParams(5, 1, 1, 1, 5.0, 5.0, 1.0)


def test_derived_exponents():
    p = SystemParams(2, 1, 1, 1, 4, 4, 1)
    assert p.r == 8 and p.r_bar == 6 and math.isinf(p.two_star_star)
    assert p.gamma_r == pytest.approx(0.375)


def test_pair_grid_check():
    with pytest.raises(ValueError):
        StatePair(RealField.zeros(GridSpec(1, 8, 1.0)), RealField.zeros(GridSpec(1, 8, 2.0)))


def test_coupling_examples():
    g = GridSpec(1, 32, 3.0)
    p = StatePair.from_arrays(g, np.ones(32), np.zeros(32))
    assert model.coupling_integral(p, P()) == 0.0
    c = 1.7
    q = StatePair.from_arrays(g, np.full(32, c), np.full(32, c))
    prm = P(r1=2.5, r2=1.5)
    assert model.coupling_integral(q, prm) == pytest.approx(c**4 * 3.0, rel=1e-14)


def test_coupling_grid_refinement():
    # smooth positive fields sampled at two resolutions
    def pair(n):
        g = GridSpec(1, n, 20.0)
        x = g.axis()
        return StatePair.from_arrays(g, np.exp(-(x**2) / 4) * (1.2 + np.cos(x) / 2), np.exp(-((x - 1) ** 2) / 3))

    prm = P(r1=2.3, r2=1.9)
    a = model.coupling_integral(pair(64), prm)
    b = model.coupling_integral(pair(256), prm)
    assert a == pytest.approx(b, rel=1e-6)


def test_energy_zero_pair():
    g = GridSpec(2, 16, 4.0)
    z = StatePair(RealField.zeros(g), RealField.zeros(g))
    assert model.energy_I(z, P(dimension=2)) == 0.0
    assert model.pohozaev_P(z, P(dimension=2)) == 0.0


def test_energy_single_mode():
    # |u|² = |∇u|² = |Δu|² = A²π for A cos x on [0, 2π)
    A = 1.3
    p = mode_pair(A)
    m = A * A * math.pi
    for a1, a2 in [(1.0, 1.0), (2.0, 0.5)]:
        prm = P(alpha1=a1, alpha2=a2, beta=0.0)
        assert model.energy_I(p, prm) == pytest.approx(m - 0.5 * (a1 + a2) * m, abs=1e-12)
    prm = P(beta=0.7, r1=2.0, r2=2.0)
    K = A**4 * 2 * math.pi * 3 / 8  # ∫cos⁴ = 3π/4
    assert model.coupling_integral(p, prm) == pytest.approx(K, rel=1e-13)
    assert model.energy_I(p, prm) == pytest.approx(-0.7 * K, rel=1e-12)


def test_mj_and_j_minus_i(rng):
    assert model.mj_value(P(alpha1=2.0, alpha2=1.0)) == -0.5
    g = GridSpec(1, 64, 10.0)
    p = random_pair(g, rng)
    prm = P(beta=2.3, r1=2.2, r2=3.1)
    assert model.energy_J(p, prm) - model.energy_I(p, prm) == pytest.approx(
        2.3 * model.coupling_integral(p, prm), rel=1e-12
    )


def test_modulated_packet_approaches_mj():
    # spreading packets on the carrier |ξ|² = α1/2 approach m^J from above
    prm = P(alpha1=2.0, alpha2=1.0)
    vals = []
    for sigma in (10.0, 40.0, 160.0):
        g = GridSpec(1, 4096, 16 * sigma)
        x = g.axis()
        u = np.cos(x) * np.exp(-(x**2) / sigma**2)
        u = u / math.sqrt(np.sum(u * u) * g.cell_volume)
        p = StatePair.from_arrays(g, u, np.zeros_like(u))
        vals.append(model.energy_J(p, prm))
    assert vals[0] > vals[1] > vals[2] > model.mj_value(prm)
    assert abs(vals[2] - (-0.5)) <= 0.05 * 0.5


def test_quotient_and_gap(rng):
    g = GridSpec(1, 128, 30.0)
    prm = P(beta=1.5, r1=2.5, r2=2.0, alpha1=1.0, alpha2=1.7, rho=1.3)
    u = bandlimited(g, rng, 2.0, envelope=5.0)
    p = StatePair.from_arrays(g, u, np.zeros_like(u))
    assert model.quotient_Q(p, prm) == 0.0
    q = StatePair.from_arrays(g, u, bandlimited(g, rng, 2.0, envelope=5.0))
    q = q.scaled(prm.rho / math.sqrt(q.total_mass))
    H = model.gap_H(q, prm)
    assert H == pytest.approx(model.energy_I(q, prm) + prm.max_alpha**2 / 8 * prm.rho**2, rel=1e-13)
    D = model.q_denominator(q, prm)
    Q = model.quotient_Q(q, prm)
    assert abs(H - 0.5 * D * (1 - 2 * prm.beta * prm.rho ** (prm.r - 2) * Q)) <= 1e-8 * (1 + abs(H))
    for c in (0.3, 2.0, 11.0):
        assert model.quotient_Q(q.scaled(c), prm) == pytest.approx(Q, rel=1e-12)
    z = StatePair.from_arrays(g, np.zeros(128), np.zeros(128))
    with pytest.raises(UndefinedQuotientError):
        model.quotient_Q(z, prm)


def test_quotient_relabels_without_mutation(rng):
    g = GridSpec(1, 64, 20.0)
    p = random_pair(g, rng, envelope=4.0)
    prm = P(alpha1=0.5, alpha2=2.0, r1=2.5, r2=3.0)
    q1 = model.quotient_Q(p, prm)
    assert prm.alpha1 == 0.5
    assert q1 == pytest.approx(model.quotient_Q(p.swapped(), prm.swapped()), rel=1e-14)


def test_pohozaev_mode_example():
    p = mode_pair(0.8)
    prm = P(alpha1=2.0, alpha2=2.0, beta=0.0)
    assert model.pohozaev_P(p, prm) == pytest.approx(0.0, abs=1e-12)


def test_multiplier_mode_example():
    p = mode_pair(1.1)
    for a in (0.5, 1.0, 3.0):
        prm = P(alpha1=a, alpha2=a, beta=0.0)
        assert model.multiplier_estimate(p, prm) == pytest.approx(a - 1.0, abs=1e-12)
    g = GridSpec(1, 8, 1.0)
    with pytest.raises(ValueError):
        model.multiplier_estimate(StatePair.from_arrays(g, np.zeros(8), np.zeros(8)), P())


def test_gradient_linear_case(rng):
    g = GridSpec(2, 32, 9.0)
    p = random_pair(g, rng)
    prm = SystemParams(2, 0.7, 1.9, 0.0, 2.0, 2.0, 1.0)
    gr = model.l2_gradient_I(p, prm)
    from binls.spectral import apply_bilaplacian, apply_laplacian

    np.testing.assert_allclose(
        gr.u.samples, (apply_bilaplacian(p.u) + 0.7 * apply_laplacian(p.u)).samples, atol=1e-10
    )
    np.testing.assert_allclose(
        gr.v.samples, (apply_bilaplacian(p.v) + 1.9 * apply_laplacian(p.v)).samples, atol=1e-10
    )
    z = StatePair.from_arrays(g, np.zeros(g.shape), np.zeros(g.shape))
    assert np.all(model.l2_gradient_I(z, prm).u.samples == 0)


def test_gradient_zero_crossing_is_finite():
    g = GridSpec(1, 16, 2.0)
    u = np.linspace(-1, 1, 16)
    u[8] = 0.0
    p = StatePair.from_arrays(g, u, np.abs(u))
    gr = model.l2_gradient_I(p, P(r1=1.5, r2=1.2))
    assert np.all(np.isfinite(gr.u.samples)) and np.all(np.isfinite(gr.v.samples))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r1=st.floats(1.2, 4.0), r2=st.floats(1.2, 4.0), N=st.sampled_from([1, 2]))
def test_gradient_directional_derivative(seed, r1, r2, N):
    rng = np.random.default_rng(seed)
    g = GridSpec(N, 32, 8.0)
    prm = SystemParams(N, 1.3, 0.6, 0.9, r1, r2, 1.0)
    p = random_pair(g, rng, 2.0)
    h = random_pair(g, rng, 2.0)
    gr = model.l2_gradient_I(p, prm)
    d = (np.sum(gr.u.samples * h.u.samples) + np.sum(gr.v.samples * h.v.samples)) * g.cell_volume
    eps = 1e-5
    fd = (model.energy_I(StatePair(p.u + h.u * eps, p.v + h.v * eps), prm)
          - model.energy_I(StatePair(p.u - h.u * eps, p.v - h.v * eps), prm)) / (2 * eps)
    assert abs(fd - d) <= 1e-6 * (1 + abs(d))


def test_residuals_zero_pair_and_reproducible(rng):
    g = GridSpec(1, 32, 6.0)
    z = StatePair.from_arrays(g, np.zeros(32), np.zeros(32))
    prm = P()
    assert model.pohozaev_identity_residual(z, prm, 0.3) == 0.0
    assert model.euler_lagrange_residual(z, prm, 0.3) == 0.0
    p = random_pair(g, rng)
    a = (model.pohozaev_identity_residual(p, prm, 0.3), model.euler_lagrange_residual(p, prm, 0.3))
    b = (model.pohozaev_identity_residual(p, prm, 0.3), model.euler_lagrange_residual(p, prm, 0.3))
    assert a == b
    assert abs(a[0]) > 1e-6 and a[1] > 1e-6


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.sampled_from([1, 2]))
def test_psi_identity(seed, N):
    rng = np.random.default_rng(seed)
    g = GridSpec(N, 32, 8.0)
    prm = SystemParams(N, 1.0, 0.5, 1.2, 2.5, 2.0, 1.0)
    p = random_pair(g, rng, 2.5)
    t = model.evaluate_terms(p, prm)
    for s in (-1.0, -0.3, 0.0, 0.55, 1.0):
        exact = model.psi_by_dilation(p, prm, s)
        closed = model.psi_closed_form(t, prm, s)
        assert abs(exact - closed) <= 1e-10 * (1 + abs(exact))
    h = 1e-4
    d = (model.psi_by_dilation(p, prm, h) - model.psi_by_dilation(p, prm, -h)) / (2 * h)
    Pv = model.pohozaev_P(p, prm)
    assert abs(d - Pv) <= 1e-6 * (1 + abs(Pv))


def test_psi_closed_form_vectorized(rng):
    g = GridSpec(1, 32, 8.0)
    prm = P()
    t = model.evaluate_terms(random_pair(g, rng), prm)
    s = np.linspace(-1, 1, 5)
    v = model.psi_closed_form(t, prm, s)
    assert v.shape == (5,)
    assert v[2] == pytest.approx(t.energy(prm), rel=1e-14)
