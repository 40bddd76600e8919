"""Stable-like jump kernels.

The jumping intensity is ``J(x, y) = kappa(x, y) * j(|x - y|)`` with
``j(r) = r**(-d - alpha) / psi1(r)``.  The tempering profile is the canonical
continuous representative

    psi1(r) = 1                          for r <= 1
    psi1(r) = exp(gamma * (r**beta - 1)) for r > 1   (beta finite)
    psi1(r) = +inf                       for r > 1   (beta = inf)

which satisfies ``L1 exp(gamma r**beta) <= psi1(r) <= L2 exp(gamma r**beta)``
with ``L1 = exp(-gamma)`` and ``L2 = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError, NumericError

QUAD_TOL = 1e-10


def sphere_area(d):
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def fractional_laplacian_constant(d, alpha):
    """Normalizing constant A(d, -alpha) of the fractional Laplacian."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.pi ** (-d / 2.0)
        * math.gamma((d + alpha) / 2.0)
        / math.gamma(1.0 - alpha / 2.0)
    )


def sphere_cosine_average(d, k):
    """Integral over the unit sphere of cos(k * u_1) d sigma(u)."""
    k = np.asarray(k, dtype=float)
    nu = d / 2.0 - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (2.0 * np.pi) ** (d / 2.0) * np.abs(k) ** (-nu) * special.jv(nu, np.abs(k))
    return np.where(np.abs(k) < 1e-12, sphere_area(d), out)


@dataclass(frozen=True)
class KappaModel:
    """Symmetric coefficient ``kappa(x, y) = kappa0 + eps * sin(omega * (s(x) + s(y)))``.

    ``s`` is the coordinate sum, so the bump is symmetric, bounded by one and
    Lipschitz in each argument with constant ``omega * sqrt(d)``.  ``eps = 0``
    gives the constant model.
    """

    kappa0: float = 1.0
    eps: float = 0.0
    omega: float = 0.0

    @property
    def kind(self):
        return "constant" if self.eps == 0.0 else "perturbed"

    @property
    def upper(self):
        return self.kappa0 + abs(self.eps)

    @property
    def lower(self):
        return self.kappa0 - abs(self.eps)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.eps == 0.0:
            return np.full(np.broadcast_shapes(x.shape, y.shape)[:-1], self.kappa0)
        return self.kappa0 + self.eps * np.sin(self.omega * (x.sum(axis=-1) + y.sum(axis=-1)))

    def lipschitz(self, d):
        return abs(self.eps) * self.omega * math.sqrt(d)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the stable-like kernel family."""

    d: int
    alpha: float
    beta: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    L1: Optional[float] = None
    L2: float = 1.0
    L3: float = 1.0
    L4: float = 1.0
    rho: float = 1.0
    kappa: KappaModel = field(default_factory=KappaModel)
    mass: Optional[float] = None

    def __post_init__(self):
        if self.L1 is None:
            object.__setattr__(self, "L1", math.exp(-self.gamma1))
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    @property
    def gamma(self):
        return self.gamma1

    @property
    def beta_is_inf(self):
        return math.isinf(self.beta)

    def problems(self):
        """Every violated invariant, as human readable strings."""
        out = []
        if int(self.d) != self.d or self.d < 1:
            out.append(f"d must be a positive integer, got {self.d}")
        if not 0.0 < self.alpha < 2.0:
            out.append(f"alpha must lie in (0, 2), got {self.alpha}")
        if not (self.beta >= 0.0):
            out.append(f"beta must be >= 0 or inf, got {self.beta}")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            out.append("gamma1 and gamma2 must be positive")
        if self.gamma1 != self.gamma2:
            out.append("the concrete psi1 profile needs gamma1 == gamma2")
        if self.L3 < 1.0:
            out.append(f"L3 must be >= 1, got {self.L3}")
        if self.L4 <= 0.0:
            out.append(f"L4 must be positive, got {self.L4}")
        if not self.rho > self.alpha / 2.0:
            out.append(f"rho must exceed alpha/2 = {self.alpha / 2}, got {self.rho}")
        k = self.kappa
        if not 1.0 / self.L3 <= k.kappa0 <= self.L3:
            out.append(f"kappa0 = {k.kappa0} outside [1/L3, L3] = [{1 / self.L3}, {self.L3}]")
        if k.eps != 0.0:
            if k.lower < 1.0 / self.L3 or k.upper > self.L3:
                out.append("kappa0 +/- eps leaves [1/L3, L3]")
            if self.rho > 1.0:
                out.append("the perturbed kappa model is only Hoelder-certified for rho <= 1")
            if k.lipschitz(self.d) > self.L4:
                out.append(f"eps*omega*sqrt(d) = {k.lipschitz(self.d)} exceeds L4 = {self.L4}")
        if self.mass is not None and self.mass <= 0.0:
            out.append("mass must be positive when given")
        return out

    def with_(self, **changes):
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        if "gamma" in data:
            g = data.pop("gamma")
            data["gamma1"] = data["gamma2"] = g
            data["L1"] = None
        return KernelSpec(**data)

    # -- constructors -----------------------------------------------------

    @classmethod
    def stable_like(cls, d, alpha, beta=0.0, gamma=1.0, kappa0=1.0, **kw):
        L3 = kw.pop("L3", max(kappa0, 1.0 / kappa0, 1.0))
        return cls(d=d, alpha=alpha, beta=beta, gamma1=gamma, gamma2=gamma, L3=L3,
                   kappa=KappaModel(kappa0), **kw)

    @classmethod
    def standard_stable(cls, d, alpha, beta=0.0, gamma=1.0, **kw):
        """Kernel whose untempered part is the fractional Laplacian's Levy density."""
        return cls.stable_like(d, alpha, beta, gamma, kappa0=fractional_laplacian_constant(d, alpha), **kw)

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        out = asdict(self)
        out["beta"] = "inf" if self.beta_is_inf else self.beta
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if isinstance(data.get("beta"), str):
            data["beta"] = float(data["beta"])
        kap = data.get("kappa", {})
        if not isinstance(kap, KappaModel):
            data["kappa"] = KappaModel(**kap)
        if "gamma" in data:
            g = data.pop("gamma")
            data.setdefault("gamma1", g)
            data.setdefault("gamma2", g)
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# profiles


def psi1(spec, r):
    """Tempering profile; 1 on [0, 1], exp(gamma (r**beta - 1)) beyond."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("psi1 needs r >= 0")
    if spec.beta_is_inf:
        out = np.where(r > 1.0, np.inf, 1.0)
    else:
        with np.errstate(over="ignore"):
            out = np.where(r > 1.0, np.exp(spec.gamma1 * (np.power(r, spec.beta) - 1.0)), 1.0)
    return out if out.ndim else float(out)


def j_small(spec, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("j(r) needs r > 0")
    out = np.power(r, -(spec.d + spec.alpha)) / psi1(spec, r)
    return out if np.ndim(out) else float(out)


def jump_kernel(spec, x, y):
    """J(x, y) = kappa(x, y) j(|x - y|) for points of shape (..., d)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0):
        raise DomainError("J is singular on the diagonal x = y")
    out = spec.kappa(x, y) * j_small(spec, r)
    return out if np.ndim(out) else float(out)


def _quad(f, a, b, what, tol=QUAD_TOL, limit=400, **kw):
    """scipy quad that raises NumericError instead of warning when it misses its tolerance."""
    res = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=limit, full_output=1, **kw)
    val, err = res[0], res[1]
    # quad flags roundoff even when the achieved error is fine; judge by the estimate
    if len(res) > 3 and abs(err) > 100.0 * max(tol, tol * abs(val)):
        raise NumericError(f"{what}: quadrature did not converge",
                           {"value": val, "abserr": err, "message": res[3]})
    return val, err


def relativistic_psi(spec, r):
    """psi(r) = int_0^inf s**((d+alpha)/2 - 1) exp(-s/4 - r**2/s) ds by quadrature.

    Integrated in ``u = log s``, where the integrand is smooth with double
    exponential decay at both ends.
    """
    if spec.mass is None:
        raise DomainError("relativistic_psi needs a kernel with a mass")
    if r < 0:
        raise DomainError("relativistic_psi needs r >= 0")
    a = (spec.d + spec.alpha) / 2.0
    r2 = float(r) ** 2

    def f(u):
        return math.exp(a * u - math.exp(u) / 4.0 - r2 * math.exp(-u))

    # integrand peaks at s* solving a = s/4 - r2/s
    s_star = 2.0 * (a + math.sqrt(a * a + r2))
    u0 = math.log(s_star)
    lo, hi = u0 - 60.0, u0 + 6.0
    val, _ = _quad(f, lo, hi, "relativistic_psi", points=[u0])
    return val


def relativistic_jump_density(spec, y):
    """Levy density A(d,-alpha) |y|**(-d-alpha) psi(m**(1/alpha) |y|) of the relativistic process."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(y))
    if r == 0:
        raise DomainError("Levy density is singular at the origin")
    m = spec.mass
    return fractional_laplacian_constant(spec.d, spec.alpha) * r ** (-spec.d - spec.alpha) * relativistic_psi(
        spec, m ** (1.0 / spec.alpha) * r
    )


# ---------------------------------------------------------------------------
# radial integrals of the kernel


def _cos_radial(c, base, r_lo, r_hi, what):
    """int_{r_lo}^{r_hi} base(r) cos(c r) dr with QUADPACK's Fourier-weighted rules."""
    c = abs(c)
    if c < 1e-12:
        if math.isinf(r_hi) and r_lo < 1.0:
            return _quad(base, r_lo, 1.0, what)[0] + _quad(base, 1.0, r_hi, what)[0]
        return _quad(base, r_lo, r_hi, what)[0]
    if math.isinf(r_hi):
        head = 0.0
        if r_lo < 1.0:
            head = _quad(base, r_lo, 1.0, what, weight="cos", wvar=c)[0]
            r_lo = 1.0
        return head + _quad(base, r_lo, r_hi, what, weight="cos", wvar=c)[0]
    return _quad(base, r_lo, r_hi, what, weight="cos", wvar=c)[0]


def _sphere_cos_radial(d, scale, base, r_lo, r_hi, what):
    """int base(r) * (int_{S^{d-1}} cos(scale r u_1) dsigma(u)) dr.

    The sphere average is written as an angular integral so that each radial
    piece is a Fourier integral, which avoids truncating the slowly decaying
    oscillatory tail.
    """
    if d == 1:
        return 2.0 * _cos_radial(scale, base, r_lo, r_hi, what)
    w = sphere_area(d - 1)

    def ang(theta):
        return w * math.sin(theta) ** (d - 2) * _cos_radial(scale * math.cos(theta), base, r_lo, r_hi, what)

    # symmetric about pi/2
    return 2.0 * _quad(ang, 0.0, math.pi / 2.0, what, tol=QUAD_TOL, limit=200)[0]


def kappa_radial_integral(spec, x, weight, r_lo, r_hi=math.inf, what="radial integral"):
    """int_{r_lo < |z| < r_hi} kappa(x, x + z) |z|**(-d-alpha) weight(|z|) dz.

    Uses the spherical Fourier transform of the sine bump, so the result is a
    sum of one dimensional quadratures for every d.
    """
    d, alpha = spec.d, spec.alpha
    k = spec.kappa
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def base(r):
        return r ** (-1.0 - alpha) * weight(r)

    pts = [p for p in (1.0,) if r_lo < p < r_hi]
    if math.isinf(r_hi) and pts:
        v1, _ = _quad(base, r_lo, pts[0], what)
        v2, _ = _quad(base, pts[0], r_hi, what)
        main = v1 + v2
    else:
        main, _ = _quad(base, r_lo, r_hi, what, **({"points": pts} if pts else {}))
    total = k.kappa0 * sphere_area(d) * main
    if k.eps != 0.0:
        scale = k.omega * math.sqrt(d)
        o = _sphere_cos_radial(d, scale, base, r_lo, r_hi, what)
        total += k.eps * math.sin(2.0 * k.omega * x.sum()) * o
    return total


def meyer_rate(spec, x):
    """Removal intensity int kappa(x,y) |x-y|**(-d-alpha) (1 - 1/psi1(|x-y|)) dy."""
    if spec.beta == 0.0:
        raise DomainError("meyer_rate needs beta > 0 (nothing is removed at beta = 0)")
    if spec.beta_is_inf:
        return kappa_radial_integral(spec, x, lambda r: 1.0, 1.0, what="meyer_rate")
    g, b = spec.gamma1, spec.beta
    return kappa_radial_integral(
        spec, x, lambda r: -math.expm1(-g * (r ** b - 1.0)), 1.0, what="meyer_rate"
    )


def meyer_rate_sup(spec):
    """Upper bound on sup_x of the removal intensity, used in the domination factor."""
    flat = spec.with_(kappa=KappaModel(spec.kappa.upper))
    return meyer_rate(flat, np.zeros(spec.d))
