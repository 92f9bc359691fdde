"""Emden-side profile context and conversion back to radial variables.

The approximate solution in Emden variables is phi(rho) = F^{-1}(e^{-2rho}/b);
by construction F(phi) = e^{-2rho}/b exactly, so that value is cached rather
than re-evaluated.  The forcing and linear coefficients

    I  = 4 (fF/phi) (f'F - q_f)
    L1 = b [ (f'F - q_f) - (fF/phi - 1/(p_f-1)) ] + I
    L2 = 4 (fF/phi - 1/(p_f-1))

are assembled from the nonlinearity's deficit evaluations, and the quadratic
remainder N[eta] uses the exact integral form of the Taylor remainder

    f(phi(1+eta)) - f(phi) - f'(phi) phi eta
        = (phi eta)^2 int_0^1 (1-t) f''(phi(1+t eta)) dt

(16-point Gauss-Legendre; exact to rounding for |eta| <= 0.5 since the
integrand is analytic), which keeps N[eta] relatively accurate where the
direct difference of near-equal f values would drown in rounding.
"""

from dataclasses import dataclass, field

import numpy as np

from ._special import GL01_NODES, GL01_WEIGHTS
from .errors import DomainError, GridError

_GAUSS_T = GL01_NODES
_GAUSS_W = GL01_WEIGHTS * (1.0 - GL01_NODES)  # weights folded with (1-t)


@dataclass(frozen=True)
class Grid:
    rho0: float
    rho_max: float
    M: int

    def __post_init__(self):
        if not self.rho0 < self.rho_max:
            raise GridError("rho0 must be below rho_max")
        if self.M < 9:
            raise GridError("grid needs at least 9 nodes")

    @property
    def h(self):
        return (self.rho_max - self.rho0) / (self.M - 1)

    @property
    def rho(self):
        return np.linspace(self.rho0, self.rho_max, self.M)


@dataclass(frozen=True)
class ProfileContext:
    nl: object
    cls: object
    grid: Grid
    phi: np.ndarray
    dphi: np.ndarray
    Fphi: np.ndarray
    I: np.ndarray
    L1: np.ndarray
    L2: np.ndarray

    @property
    def rho(self):
        return self.grid.rho


def tilde_u(nl, cls, r):
    """Approximate singular solution F^{-1}(r^2 / b)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("r must be positive")
    sigma = r * r / cls.b
    if np.any(sigma >= nl.F_sup):
        raise DomainError("r too large: r^2/b must stay below F(s_min)")
    return nl.F_inv(sigma)


def build_context(nl, cls, rho0, rho_max, M):
    """Cache phi, phi', I, L1, L2 on the uniform rho-grid."""
    if not cls.in_scope:
        raise GridError(f"regime out of scope: {cls.regime.reason}")
    grid = Grid(float(rho0), float(rho_max), int(M))
    rho = grid.rho
    b = cls.b
    sigma = np.exp(-2.0 * rho) / b
    if sigma[0] >= nl.F_sup:
        raise GridError(
            "phi(rho0) would fall below s_min; increase rho0"
        )
    phi = np.asarray(nl.F_inv(sigma), dtype=float)
    if phi[0] <= nl.s_min:
        raise GridError("phi(rho0) <= s_min; increase rho0")

    d1 = np.asarray(nl.deficit_fpF(phi), dtype=float)
    d2 = np.asarray(nl.deficit_fF(phi), dtype=float)
    m_half = 1.0 / (nl.pf - 1.0)
    fF_over_phi = m_half + d2
    I = 4.0 * fF_over_phi * d1
    L1 = b * (d1 - d2) + I
    L2 = 4.0 * d2
    dphi = 2.0 * phi * fF_over_phi
    return ProfileContext(nl, cls, grid, phi, dphi, sigma, I, L1, L2)


def nonlinear_term(ctx, eta):
    """N[eta] nodewise: b (F(phi)/phi) (f(phi(1+eta)) - f(phi) - f'(phi) phi eta).

    eta may be a scalar with a node index baked in by the caller or a full
    grid array.  Raises DomainError when phi(1+eta) leaves (s_min, inf).
    """
    eta = np.asarray(eta, dtype=float)
    phi = ctx.phi
    smin = ctx.nl.s_min
    arg_min = (1.0 + eta) * phi
    if np.any(arg_min <= smin):
        bad = int(np.argmax(arg_min <= smin))
        raise DomainError(
            f"iterate leaves domain at node {bad}: phi(1+eta) <= s_min"
        )
    acc = np.zeros_like(phi)
    for t, w in zip(_GAUSS_T, _GAUSS_W):
        acc += w * np.asarray(ctx.nl.f2(phi * (1.0 + t * eta)), dtype=float)
    return ctx.cls.b * ctx.Fphi * phi * eta * eta * acc


def nonlinear_term_at(ctx, node, eta_val):
    """Scalar N[eta] at one grid node."""
    phi = ctx.phi[node]
    smin = ctx.nl.s_min
    if (1.0 + eta_val) * phi <= smin:
        raise DomainError("argument leaves the nonlinearity domain")
    acc = 0.0
    for t, w in zip(_GAUSS_T, _GAUSS_W):
        acc += w * float(ctx.nl.f2(phi * (1.0 + t * eta_val)))
    return ctx.cls.b * ctx.Fphi[node] * phi * eta_val * eta_val * acc


@dataclass(frozen=True)
class SolutionProfile:
    """Radial-variable view of a remainder solution (descending r)."""

    ctx: ProfileContext
    r: np.ndarray
    tilde_u: np.ndarray
    theta: np.ndarray
    rtheta_prime: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    residual: np.ndarray = field(default=None)


def to_radial(ctx, eta, deta):
    """Convert a remainder grid pair (eta, eta') to the radial profile.

    r_i = e^{-rho_i} (descending), theta = eta, r theta' = -eta',
    u = tilde_u (1 + theta); u' is assembled analytically from
    tilde_u' = -(2/r) f F and the chain rule.
    """
    from .verify import radial_residual_grid

    eta = np.asarray(eta, dtype=float)
    deta = np.asarray(deta, dtype=float)
    rho = ctx.rho
    r = np.exp(-rho)
    phi = ctx.phi
    u = phi * (1.0 + eta)
    # u'(r) = -e^rho (phi'(1+eta) + phi eta')
    u_prime = -(ctx.dphi * (1.0 + eta) + phi * deta) / r
    prof = SolutionProfile(
        ctx=ctx,
        r=r,
        tilde_u=phi.copy(),
        theta=eta.copy(),
        rtheta_prime=-deta,
        u=u,
        u_prime=u_prime,
    )
    res = radial_residual_grid(prof)
    object.__setattr__(prof, "residual", res)
    return prof
