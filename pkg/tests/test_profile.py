import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_forge import (
    DomainError,
    GridError,
    PowerLog,
    PowerSum,
    PurePower,
    build_context,
    classify,
    nonlinear_term,
    nonlinear_term_at,
    tilde_u,
    to_radial,
)


def test_tilde_u_pure_power_closed_form():
    nl = PurePower(2.0)
    cls = classify(nl, 5)
    rng = np.random.default_rng(1)
    r = rng.uniform(0.01, 1.0, size=20)
    # b = 2, F^-1(sig) = 1/sig: tilde_u = 2/r^2 = L_p r^{-2/(p-1)}, L_p = 2
    assert_allclose(tilde_u(nl, cls, r), 2.0 / r ** 2, rtol=1e-13)


def test_tilde_u_model_identity():
    # G(v_pf(r)) = r^2 / (2N - 4 q_f) with G(s) = s^{1-p}/(p-1)
    for p, N in [(2.0, 5), (1.75, 5), (2.2, 6)]:
        nl = PurePower(p)
        cls = classify(nl, N)
        if not cls.in_scope:
            continue
        L = (2.0 / (p - 1.0) * (N - 2.0 - 2.0 / (p - 1.0))) ** (1.0 / (p - 1.0))
        rng = np.random.default_rng(2)
        r = rng.uniform(0.05, 0.9, size=15)
        v = L * r ** (-2.0 / (p - 1.0))
        G = v ** (1.0 - p) / (p - 1.0)
        assert_allclose(G, r ** 2 / cls.b, rtol=1e-12)


def test_tilde_u_power_sum_value():
    nl = PowerSum(2.0, 1.0)
    cls = classify(nl, 5)
    assert_allclose(tilde_u(nl, cls, 1.0), 1.5414940825367983, rtol=1e-13)


def test_tilde_u_domain_error():
    nl = PowerLog(2.0, 1.0)  # F bounded: F(2) ~ 0.377
    cls = classify(nl, 5)
    with pytest.raises(DomainError):
        tilde_u(nl, cls, 2.0)  # r^2/b = 2 >> F_sup


def test_build_context_pure_power_degeneracy():
    nl = PurePower(2.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 2.0, 30.0, 257)
    assert np.max(np.abs(ctx.I)) + np.max(np.abs(ctx.L1)) + np.max(
        np.abs(ctx.L2)
    ) <= 1e-10


def test_build_context_hand_chain_at_rho_zero():
    # frozen chain for f = s^2 + s at rho = 0, N = 5 (phi = F^-1(1/2))
    nl = PowerSum(2.0, 1.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 0.0, 10.0, 501)
    assert_allclose(ctx.phi[0], 1.5414940825367983, rtol=1e-12)
    assert_allclose(ctx.I[0], 0.21091393045513268, rtol=1e-10)
    assert_allclose(ctx.L1[0], -0.24759198700806904, rtol=1e-10)
    assert_allclose(ctx.L2[0], 1.08298816507359657, rtol=1e-10)
    # phi' = 2 f F
    assert_allclose(
        ctx.dphi[0],
        2.0 * float(nl.f(ctx.phi[0])) * float(nl.F(ctx.phi[0])),
        rtol=1e-11,
    )


def test_build_context_grid_error_near_smin():
    nl = PowerLog(2.0, 1.0)
    cls = classify(nl, 5)
    with pytest.raises(GridError):
        build_context(nl, cls, 0.05, 10.0, 101)


def test_forcing_decay_slope_matches_prediction():
    # I ~ e^{-2(p-r) rho/(p-1)}; nondegenerate case p - r = 0.1.  On
    # [10, 20] the k = 2 series correction still biases the local slope by
    # ~3%; it settles onto -0.2 further out.
    nl = PowerSum(2.0, 1.9)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 10.0, 20.0, 401)
    slope = np.polyfit(ctx.rho, np.log(np.abs(ctx.I)), 1)[0]
    assert abs(slope - (-0.2)) <= 0.04 * 0.2
    ctx = build_context(nl, cls, 30.0, 45.0, 401)
    deep = np.polyfit(ctx.rho, np.log(np.abs(ctx.I)), 1)[0]
    assert abs(deep - (-0.2)) <= 0.005 * 0.2


def test_degenerate_forcing_decays_at_doubled_rate():
    # p - r = 1: leading series coefficient vanishes, I ~ e^{-4(p-r)rho/(p-1)}
    nl = PowerSum(2.0, 1.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 5.0, 12.0, 301)
    slope = np.polyfit(ctx.rho, np.log(np.abs(ctx.I)), 1)[0]
    assert abs(slope - (-4.0)) <= 0.02


def test_nonlinear_term_zero_and_closed_form():
    nl = PurePower(2.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 2.0, 12.0, 101)
    assert np.all(nonlinear_term(ctx, np.zeros(101)) == 0.0)
    # N[eta] = b ((1+eta)^2 - 1 - 2 eta)/(p-1) = 2 eta^2 for p = 2, N = 5
    eta = np.full(101, 0.1)
    assert_allclose(nonlinear_term(ctx, eta), 0.02, rtol=1e-12)
    assert_allclose(nonlinear_term_at(ctx, 7, 0.1), 0.02, rtol=1e-12)


def test_nonlinear_term_quadratic_smallness():
    nl = PowerSum(2.0, 1.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 3.0, 23.0, 257)
    for ev in (1e-2, 1e-4):
        vals = nonlinear_term(ctx, np.full(257, ev))
        assert np.max(np.abs(vals)) <= 10.0 * ev ** 2


def test_nonlinear_term_domain_error():
    nl = PowerLog(2.0, 1.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 1.0, 6.0, 101)
    # phi(rho0) ~ 3.1; eta = -0.9 pulls phi(1+eta) well below s_min = 2
    with pytest.raises(DomainError):
        nonlinear_term(ctx, np.full(101, -0.9))


def test_phi_log_ratio_tail():
    # phi'/phi -> 2/(p_f - 1) (within 1e-2 on the tail for rho_max >= 20)
    for nl in [PowerSum(2.0, 1.0), PowerSum(1.75, 1.0), PowerLog(2.0, 0.1)]:
        cls = classify(nl, 5)
        if not cls.in_scope:
            continue
        ctx = build_context(nl, cls, 2.0, 26.0, 513)
        tail = ctx.rho >= 0.9 * ctx.rho[-1]
        ratio = ctx.dphi[tail] / ctx.phi[tail]
        assert np.max(np.abs(ratio - cls.m)) <= 1e-2


def test_to_radial_trivial_remainder():
    nl = PurePower(2.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 3.0, 20.0, 2049)
    z = np.zeros(2049)
    prof = to_radial(ctx, z, z)
    assert np.all(prof.u == prof.tilde_u)
    assert np.all(np.diff(prof.r) < 0.0)
    # exact solution: residual is pure differencing error
    assert float(np.max(prof.residual[2:-2])) <= 1e-6
    # u' = tilde_u' = -2 L_p r^{-3} here
    assert_allclose(prof.u_prime, -4.0 / prof.r ** 3, rtol=1e-11)


def test_to_radial_boundary_data():
    nl = PowerSum(2.0, 1.0)
    cls = classify(nl, 5)
    ctx = build_context(nl, cls, 3.0, 23.0, 513)
    rng = np.random.default_rng(8)
    eta = 1e-3 * rng.standard_normal(513)
    deta = 1e-3 * rng.standard_normal(513)
    prof = to_radial(ctx, eta, deta)
    # theta(r0) = eta(rho0) and r0 theta'(r0) = -eta'(rho0)
    assert prof.theta[0] == eta[0]
    assert prof.rtheta_prime[0] == -deta[0]
    assert_allclose(prof.u, prof.tilde_u * (1.0 + eta), rtol=1e-14)
