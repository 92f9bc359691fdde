"""Small numerical helpers: incomplete gamma for arbitrary order, quadrature.

scipy's regularized gammaincc requires a positive order; the log-weighted
nonlinearity families need Gamma(a, x) for arbitrary real a (including
a <= 0).  For large x a Lentz continued fraction is used (stable for any a);
for small x the order is lifted to the positive range and recursed back down,
which is safe there because the recurrence subtraction only cancels when
x >> |a|.
"""

import numpy as np
from scipy import special

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# Gauss-Legendre rule mapped onto [0, 1]
GL01_NODES = 0.5 * (_GL_NODES + 1.0)
GL01_WEIGHTS = 0.5 * _GL_WEIGHTS


def _upper_gamma_cf(a, x, max_iter=300, tol=1e-16):
    """Gamma(a, x) by modified Lentz continued fraction; x must be > 0."""
    x = np.asarray(x, dtype=float)
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1e300)
    d = 1.0 / np.where(np.abs(b) < tiny, tiny, b)
    h = d.copy()
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < tol):
            break
    return np.exp(a * np.log(x) - x) * h


def upper_gamma(a, x):
    """Upper incomplete gamma Gamma(a, x) for real a and x > 0.

    Vectorized in x; a is scalar.
    """
    a = float(a)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).astype(float)
    if np.any(x <= 0.0):
        raise ValueError("upper_gamma requires x > 0")
    out = np.empty_like(x)

    if a > 0.0:
        out[:] = special.gammaincc(a, x) * np.exp(special.gammaln(a))
    else:
        big = x >= max(1.5 * abs(a) + 10.0, 20.0)
        if np.any(big):
            out[big] = _upper_gamma_cf(a, x[big])
        small = ~big
        if np.any(small):
            xs = x[small]
            # lift order to a + n in (0, 1], recurse down:
            #   Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a
            n = int(np.ceil(-a)) + 1
            atop = a + n
            g = special.gammaincc(atop, xs) * np.exp(special.gammaln(atop))
            for j in range(n - 1, -1, -1):
                aj = a + j
                if abs(aj) < 1e-12:
                    # Gamma(0, x) = E1(x); resume the downward pass from it
                    g = special.exp1(xs)
                    continue
                g = (g - xs ** aj * np.exp(-xs)) / aj
            out[small] = g
    return out[0] if scalar else out
