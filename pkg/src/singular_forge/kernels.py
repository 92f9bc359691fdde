"""Fundamental pair, variation-of-parameters kernel, super-kernel, and the
O(M) cumulative convolution.

All kernel evaluations use the shifted difference d = rho - tau, so nothing
here over- or underflows for large rho and the recurrence multipliers stay
below one.  The cumulative convolution implements the trapezoid rule
exactly: per exponential term

    A_{i+1} = e^{-lam h} (A_i + g_i / 2) + g_{i+1} / 2

reproduces h * sum w_j e^{-lam(rho_i - rho_j)} g_j with trapezoid weights,
so the result agrees with the direct O(M^2) sum to rounding.  Polynomial
and trigonometric factors get one auxiliary accumulator each.
"""

import math

import numpy as np

from .classification import (
    REGIME_COMPLEX,
    REGIME_DOUBLE,
    REGIME_TWO_REAL,
)
from .errors import OrderError


class KernelSet:
    """Precomputed regime constants for a Classification (immutable)."""

    def __init__(self, cls):
        if not cls.in_scope:
            raise ValueError("kernels undefined out of scope")
        self.cls = cls
        self.kind = cls.regime.kind
        reg = cls.regime
        if self.kind == REGIME_TWO_REAL:
            self.lam1, self.lam2 = reg.lam1, reg.lam2
        elif self.kind == REGIME_DOUBLE:
            self.lam_star = reg.lam_star
        else:
            self.a_half, self.k = reg.a_half, reg.k


def fundamental_pair(cls, rho):
    """(Phi1, Phi2, Phi1', Phi2') at rho, per regime branch."""
    reg = cls.regime
    rho = np.asarray(rho, dtype=float)
    if reg.kind == REGIME_TWO_REAL:
        e1 = np.exp(-reg.lam1 * rho)
        e2 = np.exp(-reg.lam2 * rho)
        return e1, e2, -reg.lam1 * e1, -reg.lam2 * e2
    if reg.kind == REGIME_DOUBLE:
        lam = reg.lam_star
        e = np.exp(-lam * rho)
        return e, rho * e, -lam * e, (1.0 - lam * rho) * e
    if reg.kind == REGIME_COMPLEX:
        d, k = reg.a_half, reg.k
        e = np.exp(-d * rho)
        c, s = np.cos(k * rho), np.sin(k * rho)
        return e * c, e * s, e * (-d * c - k * s), e * (-d * s + k * c)
    raise ValueError("out of scope")


def wronskian(cls, tau):
    reg = cls.regime
    tau = np.asarray(tau, dtype=float)
    if reg.kind == REGIME_TWO_REAL:
        return -(reg.lam2 - reg.lam1) * np.exp(-(reg.lam1 + reg.lam2) * tau)
    if reg.kind == REGIME_DOUBLE:
        return np.exp(-2.0 * reg.lam_star * tau)
    if reg.kind == REGIME_COMPLEX:
        return reg.k * np.exp(-2.0 * reg.a_half * tau)
    raise ValueError("out of scope")


def _check_order(rho, tau):
    if np.any(np.asarray(rho) < np.asarray(tau)):
        raise OrderError("kernel requires rho >= tau")


def kernel_values(cls, rho, tau):
    """(K, dK/drho) for rho >= tau; K(rho, rho) = 0, dK at tau = rho is 1."""
    _check_order(rho, tau)
    d = np.asarray(rho, dtype=float) - np.asarray(tau, dtype=float)
    reg = cls.regime
    if reg.kind == REGIME_TWO_REAL:
        l1, l2 = reg.lam1, reg.lam2
        e1, e2 = np.exp(-l1 * d), np.exp(-l2 * d)
        return (e1 - e2) / (l2 - l1), (-l1 * e1 + l2 * e2) / (l2 - l1)
    if reg.kind == REGIME_DOUBLE:
        lam = reg.lam_star
        e = np.exp(-lam * d)
        return d * e, (1.0 - lam * d) * e
    if reg.kind == REGIME_COMPLEX:
        dh, k = reg.a_half, reg.k
        e = np.exp(-dh * d)
        s, c = np.sin(k * d), np.cos(k * d)
        return s * e / k, (c - dh / k * s) * e
    raise ValueError("out of scope")


def super_kernel(cls, rho, tau):
    """Positive envelope Q dominating |K| + |dK| (Case A/B weight)."""
    _check_order(rho, tau)
    d = np.asarray(rho, dtype=float) - np.asarray(tau, dtype=float)
    reg = cls.regime
    if reg.kind == REGIME_TWO_REAL:
        return np.exp(-reg.lam1 * d)
    if reg.kind == REGIME_DOUBLE:
        return (1.0 + d) * np.exp(-reg.lam_star * d)
    if reg.kind == REGIME_COMPLEX:
        return np.exp(-reg.a_half * d)
    raise ValueError("out of scope")


def weight_P(cls, r, s):
    """Radial-variable form of the super-kernel: P(r, s) = Q(log 1/r, log 1/s)."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0.0) or np.any(r > s):
        raise OrderError("weight_P requires 0 < r <= s")
    return super_kernel(cls, np.log(1.0 / r), np.log(1.0 / s))


def homogeneous_coeffs(cls, rho0, alpha, beta):
    """C1, C2 with C1 Phi1 + C2 Phi2 matching (alpha, beta) at rho0."""
    p1, p2, d1, d2 = fundamental_pair(cls, rho0)
    w = wronskian(cls, rho0)
    c1 = (d2 * alpha - p2 * beta) / w
    c2 = (-d1 * alpha + p1 * beta) / w
    return c1, c2


def homogeneous_pair(cls, delta, alpha, beta):
    """(Phi, Phi') of the homogeneous part with data (alpha, beta) at rho0,
    evaluated at delta = rho - rho0 in shifted (overflow-free) form.

    Identical to C1 Phi1 + C2 Phi2 with the coefficients of
    homogeneous_coeffs; at delta = 0 returns exactly (alpha, beta).
    """
    d = np.asarray(delta, dtype=float)
    reg = cls.regime
    if reg.kind == REGIME_TWO_REAL:
        l1, l2 = reg.lam1, reg.lam2
        dl = l2 - l1
        e1, e2 = np.exp(-l1 * d), np.exp(-l2 * d)
        psi = (l2 * e1 - l1 * e2) / dl
        dpsi = -l1 * l2 * (e1 - e2) / dl
        kk = (e1 - e2) / dl
        dkk = (-l1 * e1 + l2 * e2) / dl
    elif reg.kind == REGIME_DOUBLE:
        lam = reg.lam_star
        e = np.exp(-lam * d)
        psi = (1.0 + lam * d) * e
        dpsi = -lam * lam * d * e
        kk = d * e
        dkk = (1.0 - lam * d) * e
    elif reg.kind == REGIME_COMPLEX:
        dh, k = reg.a_half, reg.k
        e = np.exp(-dh * d)
        s, c = np.sin(k * d), np.cos(k * d)
        psi = e * (c + dh / k * s)
        dpsi = -(dh * dh + k * k) / k * e * s
        kk = e * s / k
        dkk = e * (c - dh / k * s)
    else:
        raise ValueError("out of scope")
    return alpha * psi + beta * kk, alpha * dpsi + beta * dkk


def _accumulate_exp(lam, h, g):
    """Trapezoid accumulators A_i = sum w_j e^{-lam(rho_i-rho_j)} g_j."""
    q = math.exp(-lam * h)
    out = np.empty_like(g)
    acc = 0.0
    out[0] = 0.0
    for i in range(len(g) - 1):
        acc = q * (acc + 0.5 * g[i]) + 0.5 * g[i + 1]
        out[i + 1] = acc
    return out


def _accumulate_exp_poly(lam, h, g):
    """(A_i, B_i) with B_i = sum w_j (rho_i-rho_j) e^{-lam(rho_i-rho_j)} g_j."""
    q = math.exp(-lam * h)
    a_out = np.empty_like(g)
    b_out = np.empty_like(g)
    acc_a = 0.0
    acc_b = 0.0
    a_out[0] = 0.0
    b_out[0] = 0.0
    for i in range(len(g) - 1):
        promoted = acc_a + 0.5 * g[i]
        acc_b = q * (acc_b + h * promoted)
        acc_a = q * promoted + 0.5 * g[i + 1]
        a_out[i + 1] = acc_a
        b_out[i + 1] = acc_b
    return a_out, b_out


def _accumulate_exp_trig(lam, k, h, g):
    """(C_i, S_i) accumulators with cos/sin(k(rho_i-rho_j)) factors."""
    q = math.exp(-lam * h)
    ch, sh = math.cos(k * h), math.sin(k * h)
    c_out = np.empty_like(g)
    s_out = np.empty_like(g)
    acc_c = 0.0
    acc_s = 0.0
    c_out[0] = 0.0
    s_out[0] = 0.0
    for i in range(len(g) - 1):
        pc = acc_c + 0.5 * g[i]
        ps = acc_s
        acc_c = q * (ch * pc - sh * ps) + 0.5 * g[i + 1]
        acc_s = q * (sh * pc + ch * ps)
        c_out[i + 1] = acc_c
        s_out[i + 1] = acc_s
    return c_out, s_out


def convolve_cumulative(ks, rho, g):
    """Cumulative trapezoid integrals (int K g, int dK g) on a uniform grid.

    Returns grid functions y1(rho_i) = int_{rho_0}^{rho_i} K(rho_i, tau) g
    and y2 with the dK kernel, in O(M) total work.
    """
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(g, dtype=float)
    h = rho[1] - rho[0]
    if ks.kind == REGIME_TWO_REAL:
        l1, l2 = ks.lam1, ks.lam2
        a1 = _accumulate_exp(l1, h, g)
        a2 = _accumulate_exp(l2, h, g)
        ik = h * (a1 - a2) / (l2 - l1)
        idk = h * (-l1 * a1 + l2 * a2) / (l2 - l1)
        return ik, idk
    if ks.kind == REGIME_DOUBLE:
        lam = ks.lam_star
        a, b = _accumulate_exp_poly(lam, h, g)
        return h * b, h * (a - lam * b)
    if ks.kind == REGIME_COMPLEX:
        dh, k = ks.a_half, ks.k
        c, s = _accumulate_exp_trig(dh, k, h, g)
        return h * s / k, h * (c - dh / k * s)
    raise ValueError("out of scope")


def convolve_cumulative_direct(ks, rho, g):
    """O(M^2) reference with the same trapezoid rule (testing only)."""
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(g, dtype=float)
    h = rho[1] - rho[0]
    n = len(rho)
    ik = np.zeros(n)
    idk = np.zeros(n)
    for i in range(1, n):
        kv, dkv = kernel_values(ks.cls, rho[i], rho[: i + 1])
        w = np.ones(i + 1)
        w[0] = w[-1] = 0.5
        ik[i] = h * np.sum(w * kv * g[: i + 1])
        idk[i] = h * np.sum(w * dkv * g[: i + 1])
    return ik, idk


def convolve_Q_cumulative(ks, rho, g):
    """Cumulative trapezoid of the super-kernel: int_{rho0}^rho Q(rho,tau) g."""
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(g, dtype=float)
    h = rho[1] - rho[0]
    if ks.kind == REGIME_TWO_REAL:
        return h * _accumulate_exp(ks.lam1, h, g)
    if ks.kind == REGIME_DOUBLE:
        a, b = _accumulate_exp_poly(ks.lam_star, h, g)
        return h * (a + b)
    if ks.kind == REGIME_COMPLEX:
        return h * _accumulate_exp(ks.a_half, h, g)
    raise ValueError("out of scope")
