import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_forge import (
    KernelSet,
    OrderError,
    PurePower,
    PowerSum,
    classify,
    convolve_cumulative,
    convolve_Q_cumulative,
    fundamental_pair,
    homogeneous_coeffs,
    homogeneous_pair,
    kernel_values,
    super_kernel,
    weight_P,
    wronskian,
)
from singular_forge.kernels import convolve_cumulative_direct

CLS_REAL = classify(PowerSum(1.75, 1.0), 5)     # lam1 = 1/3, lam2 = 2
CLS_DOUBLE = classify(PurePower(1.8), 5)        # lam* = 1
CLS_COMPLEX = classify(PurePower(2.0), 5)       # a/2 = 1/2, k = sqrt7/2
ALL_CLS = [CLS_REAL, CLS_DOUBLE, CLS_COMPLEX]


def test_fundamental_pair_examples():
    p1, p2, d1, d2 = fundamental_pair(CLS_REAL, 0.0)
    assert_allclose([p1, p2, d1, d2], [1.0, 1.0, -1.0 / 3.0, -2.0], atol=1e-14)
    p1, p2, d1, d2 = fundamental_pair(CLS_DOUBLE, 1.0)
    e = np.exp(-1.0)
    assert_allclose([p1, p2, d1, d2], [e, e, -e, 0.0], atol=1e-12)
    p1, p2, d1, d2 = fundamental_pair(CLS_COMPLEX, 0.0)
    assert_allclose([p1, p2, d1, d2], [1.0, 0.0, -0.5, CLS_COMPLEX.regime.k],
                    atol=1e-14)


def test_kernel_normalization_random():
    rng = np.random.default_rng(2)
    for cls in ALL_CLS:
        rho = rng.uniform(0.0, 50.0, size=100)
        K, dK = kernel_values(cls, rho, rho)
        assert np.max(np.abs(K)) <= 1e-14
        assert np.max(np.abs(dK - 1.0)) <= 1e-14


def test_kernel_value_oracles():
    K, _ = kernel_values(CLS_REAL, 2.0, 1.0)
    assert_allclose(K, 0.34871761640230594, rtol=1e-12)
    K, dK = kernel_values(CLS_DOUBLE, 2.0, 1.0)
    assert_allclose(K, 0.36787944117144233, rtol=1e-12)
    assert_allclose(dK, 0.0, atol=1e-12)
    K, dK = kernel_values(CLS_COMPLEX, 2.0, 1.0)
    assert_allclose(K, 0.4444755161333574, rtol=1e-12)
    assert_allclose(dK, -0.07340196466362296, rtol=1e-10)


def test_kernel_order_error():
    with pytest.raises(OrderError):
        kernel_values(CLS_REAL, 1.0, 2.0)
    with pytest.raises(OrderError):
        super_kernel(CLS_REAL, 1.0, 2.0)


def test_super_kernel_values():
    for cls in ALL_CLS:
        assert_allclose(super_kernel(cls, 3.0, 3.0), 1.0, atol=1e-15)
    assert_allclose(super_kernel(CLS_DOUBLE, 2.0, 1.0), 2.0 * np.exp(-1.0),
                    rtol=1e-13)


def test_weight_P_identity():
    rng = np.random.default_rng(3)
    for cls in ALL_CLS:
        s = rng.uniform(0.2, 0.9, size=50)
        r = s * rng.uniform(0.05, 1.0, size=50)
        P = weight_P(cls, r, s)
        Q = super_kernel(cls, np.log(1.0 / r), np.log(1.0 / s))
        assert_allclose(P, Q, rtol=1e-14)


def test_kernel_bounded_by_super_kernel():
    # |K| + |dK| <= C Q with a finite constant over a wide offset sweep
    d = np.linspace(0.0, 30.0, 3001)
    for cls in ALL_CLS:
        K, dK = kernel_values(cls, d, 0.0)
        Q = super_kernel(cls, d, 0.0)
        ratio = (np.abs(K) + np.abs(dK)) / Q
        assert np.all(np.isfinite(ratio))
        assert np.max(ratio) < 10.0


def test_homogeneous_coeffs_example():
    c1, c2 = homogeneous_coeffs(CLS_REAL, 0.0, 0.01, 0.005)
    assert_allclose(c1, 0.015, rtol=1e-12)
    assert_allclose(c2, -0.005, rtol=1e-12)
    # reconstruction: C1 Phi1 + C2 Phi2 == (alpha, beta) at rho0
    rng = np.random.default_rng(4)
    for cls in ALL_CLS:
        for _ in range(20):
            rho0 = float(rng.uniform(0.0, 20.0))
            alpha, beta = rng.uniform(-1.0, 1.0, size=2)
            c1, c2 = homogeneous_coeffs(cls, rho0, alpha, beta)
            p1, p2, d1, d2 = fundamental_pair(cls, rho0)
            assert_allclose(c1 * p1 + c2 * p2, alpha, rtol=0, atol=1e-13)
            assert_allclose(c1 * d1 + c2 * d2, beta, rtol=0, atol=1e-13)


def test_homogeneous_pair_matches_coefficient_form():
    rng = np.random.default_rng(5)
    for cls in ALL_CLS:
        rho0 = 2.0
        alpha, beta = 0.37, 0.81
        c1, c2 = homogeneous_coeffs(cls, rho0, alpha, beta)
        delta = rng.uniform(0.0, 10.0, size=30)
        p1, p2, _, _ = fundamental_pair(cls, rho0 + delta)
        phi, _ = homogeneous_pair(cls, delta, alpha, beta)
        assert_allclose(phi, c1 * p1 + c2 * p2, rtol=1e-11, atol=1e-14)
    # boundary data exact at delta = 0
    for cls in ALL_CLS:
        phi, dphi = homogeneous_pair(cls, 0.0, 1e-3, 2e-3)
        assert phi == 1e-3 and dphi == 2e-3


def test_wronskian_values():
    assert_allclose(wronskian(CLS_REAL, 1.0),
                    -(2.0 - 1.0 / 3.0) * np.exp(-(1 / 3 + 2.0)), rtol=1e-12)
    assert_allclose(wronskian(CLS_DOUBLE, 1.5), np.exp(-3.0), rtol=1e-12)


def test_convolve_zero_forcing():
    rho = np.linspace(0.0, 5.0, 257)
    for cls in ALL_CLS:
        ik, idk = convolve_cumulative(KernelSet(cls), rho, np.zeros_like(rho))
        assert np.all(ik == 0.0) and np.all(idk == 0.0)


def test_convolve_constant_forcing_value():
    # closed form at Delta = 1 for the (1/3, 2) pair
    rho = np.linspace(0.0, 1.0, 20001)
    ik, _ = convolve_cumulative(KernelSet(CLS_REAL), rho, np.ones_like(rho))
    assert_allclose(ik[-1], 0.25084422593816316, rtol=1e-8)


def test_convolve_steady_state_g_over_b():
    # particular solution of y'' + a y' + b y = 1 with zero data tends to 1/b
    for cls in ALL_CLS:
        rho = np.linspace(0.0, 75.0, 2 ** 18 + 1)
        ik, idk = convolve_cumulative(KernelSet(cls), rho, np.ones_like(rho))
        assert abs(ik[-1] - 1.0 / cls.b) <= 1e-8
        assert abs(idk[-1]) <= 5e-8


def test_recurrence_matches_direct():
    rng = np.random.default_rng(6)
    for cls in ALL_CLS:
        for M in (257, 1025, 4097):
            rho = np.linspace(1.0, 17.0, M)
            g = np.sin(1.7 * rho) + 0.25 * rng.standard_normal(M)
            ks = KernelSet(cls)
            i1, d1 = convolve_cumulative(ks, rho, g)
            i2, d2 = convolve_cumulative_direct(ks, rho, g)
            scale = max(np.max(np.abs(i2)), np.max(np.abs(d2)))
            assert np.max(np.abs(i1 - i2)) <= 1e-12 * scale
            assert np.max(np.abs(d1 - d2)) <= 1e-12 * scale


def test_convolution_solves_ode():
    # y = int K g must satisfy y'' + a y' + b y = g, y(rho0) = y'(rho0) = 0
    h = 1e-3
    rho = np.arange(0.0, 3.0 + h / 2, h)
    polys = 1.0 + rho - 0.1 * rho ** 2
    for cls in ALL_CLS:
        for g in (np.sin(rho), polys):
            ik, idk = convolve_cumulative(KernelSet(cls), rho, g)
            d1 = (ik[2:] - ik[:-2]) / (2 * h)
            d2 = (ik[2:] - 2 * ik[1:-1] + ik[:-2]) / (h * h)
            res = d2 + cls.a * d1 + cls.b * ik[1:-1] - g[1:-1]
            assert np.max(np.abs(res)) <= 1e-6 * np.max(np.abs(g))
            # the dK channel is the derivative of the K channel
            assert np.max(np.abs(idk[1:-1] - d1)) <= 1e-6 * np.max(np.abs(g))


def test_convolve_Q_cumulative_basic():
    rho = np.linspace(0.0, 20.0, 4001)
    g = np.exp(-0.5 * rho)
    for cls in ALL_CLS:
        q = convolve_Q_cumulative(KernelSet(cls), rho, g)
        assert q[0] == 0.0
        assert np.all(q >= 0.0)
        # exponential-forcing integral stays bounded
        assert np.max(q) < 10.0
