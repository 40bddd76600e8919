"""Classical closed forms for the isotropic alpha-stable process.

These are the reference values the Monte Carlo estimates are compared
against.  They hold for the process whose generator is -(-Delta)^{alpha/2},
i.e. the kernel with constant coefficient ``kappa0 = A(d, -alpha)``.
"""

import math

import numpy as np
from scipy import special

from .errors import DomainError

#: principal Dirichlet eigenvalue of (-Delta)^{1/2} on (-1, 1)
CAUCHY_INTERVAL_EIGENVALUE = 1.1577738836977


def cauchy_density(t, r):
    """Transition density of the standard Cauchy process in d = 1."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return t / (np.pi * (t * t + r * r))


def getoor_mean_exit_time(d, alpha, x=0.0, radius=1.0):
    """E_x[tau] for the ball B(0, radius)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = radius**2 - float(x @ x)
    if s <= 0:
        raise DomainError("x must lie inside the ball")
    c = math.gamma(d / 2.0) / (2.0**alpha * math.gamma(1.0 + alpha / 2.0) * math.gamma((d + alpha) / 2.0))
    return c * s ** (alpha / 2.0)


def bgr_green(d, alpha, x, y, radius=1.0):
    """Green function of the ball B(0, radius) (Blumenthal, Getoor and Ray)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r2 = float((x - y) @ (x - y))
    if r2 == 0.0:
        raise DomainError("the Green function is singular at x = y")
    R2 = radius * radius
    sx, sy = R2 - float(x @ x), R2 - float(y @ y)
    if sx <= 0 or sy <= 0:
        return 0.0
    w = sx * sy / (R2 * r2)
    c = math.gamma(d / 2.0) / (2.0**alpha * math.pi ** (d / 2.0) * math.gamma(alpha / 2.0) ** 2)
    if d == 1 and alpha == 1.0:
        return c * 2.0 * math.asinh(math.sqrt(w))
    # int_0^w s**(a-1) (1+s)**(-d/2) ds in closed form, a = alpha/2
    a = alpha / 2.0
    val = w**a / a * special.hyp2f1(d / 2.0, a, a + 1.0, -w)
    return c * r2 ** ((alpha - d) / 2.0) * val


def stable_radial_cdf(d, alpha, eps, r):
    """P(|Z| <= r) for a Pareto(alpha) radius above eps (the beta = 0 jump law)."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= eps, 0.0, 1.0 - (eps / np.maximum(r, eps)) ** alpha)


def gamma_ratio(a, b):
    """Gamma(a) / Gamma(b) without overflow."""
    return math.exp(special.gammaln(a) - special.gammaln(b))
