"""Fractional Laplacian of the boundary barrier h(y) = delta_D(y)**(alpha/2) 1_{D ∩ B(Q, r)}(y).

The principal value is split into three zones around x:

* ``|y - x| < eps_pv``: second-order Taylor expansion, integrated exactly;
* ``eps_pv <= |y - x| <= L``: adaptive quadrature of the symmetric pair
  ``h(x + z) + h(x - z) - 2 h(x)``, with every crossing of the domain
  boundary and of the truncation sphere passed as a breakpoint;
* ``|y - x| > L``: h vanishes there, so the tail ``-h(x) int |z|**(-d-alpha)``
  is added in closed form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, optimize

from .errors import ContractError, DomainError, NumericError
from .geometry import DomainSpec, graph_dphi, graph_phi, nb_contains, nb_dist
from .kernels import fractional_laplacian_constant

SUPPORTED = ("half_space", "ball", "graph_domain")


def frac_laplacian_normalizer(d, alpha):
    """A(d, -alpha) = alpha 2**(alpha-1) pi**(-d/2) Gamma((d+alpha)/2) / Gamma(1 - alpha/2)."""
    return fractional_laplacian_constant(d, alpha)


@dataclass(frozen=True)
class BarrierSpec:
    dom: DomainSpec
    Q: tuple
    r: float
    alpha: float

    def __post_init__(self):
        if self.dom.shape not in SUPPORTED:
            raise ContractError(f"barrier supports {SUPPORTED}, not {self.dom.shape}")
        if not 0.0 < self.alpha < 2.0:
            raise DomainError("alpha must lie in (0, 2)")
        Q = np.atleast_1d(np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "Q", tuple(Q))
        if not math.isinf(self.r) and self.r > self.dom.R_char * (1 + 1e-12):
            raise ContractError(f"r = {self.r} exceeds R = {self.dom.R_char}")
        # Q must sit on the boundary: its distance to the graph/sphere/plane is ~0
        kind, fp, rp = self.dom.pack()
        probe = Q.copy()
        if self.dom.shape == "ball":
            off = np.linalg.norm(Q - np.asarray(self.dom.center)) - self.dom.radius
        elif self.dom.shape == "half_space":
            off = Q[-1]
        else:
            off = Q[1] - graph_phi(fp, Q[0])
        if abs(off) > 1e-9:
            raise ContractError(f"Q = {tuple(probe)} is not on the boundary (offset {off:g})")


@dataclass(frozen=True)
class BarrierResult:
    value: float
    abserr: float
    eps_pv: float


@njit(cache=True, nogil=True)
def _h(kind, d, fp, rp, Q, r, half_alpha, y):
    if not nb_contains(kind, d, fp, rp, y):
        return 0.0
    acc = 0.0
    for i in range(d):
        u = y[i] - Q[i]
        acc += u * u
    if acc >= r * r:
        return 0.0
    return nb_dist(kind, d, fp, rp, y) ** half_alpha


@njit(cache=True, nogil=True)
def _pair(kind, d, fp, rp, Q, r, half_alpha, x, u, s, hx):
    yp = np.empty(d)
    ym = np.empty(d)
    for i in range(d):
        yp[i] = x[i] + s * u[i]
        ym[i] = x[i] - s * u[i]
    return (_h(kind, d, fp, rp, Q, r, half_alpha, yp) + _h(kind, d, fp, rp, Q, r, half_alpha, ym)
            - 2.0 * hx)


class _Evaluator:
    def __init__(self, b):
        self.b = b
        self.d = b.dom.d
        self.kind, self.fp, _ = b.dom.pack()
        self.rp = np.zeros(self.d + 1)
        self.Q = np.asarray(b.Q, dtype=float)
        self.r = float(b.r) if not math.isinf(b.r) else 1e300
        self.ha = b.alpha / 2.0

    def h(self, y):
        return _h(self.kind, self.d, self.fp, self.rp, self.Q, self.r, self.ha, np.asarray(y, dtype=float))

    def pair(self, x, u, s, hx):
        return _pair(self.kind, self.d, self.fp, self.rp, self.Q, self.r, self.ha, x, u, s, hx)

    def crossings(self, x, u, smax):
        """Radii s in (0, smax) where x + s u or x - s u crosses the boundary or the truncation sphere."""
        out = []
        for sign in (1.0, -1.0):
            v = sign * u
            out += _sphere_hits(x, v, self.Q, self.r, smax)
            shape = self.b.dom.shape
            if shape == "half_space":
                if v[-1] < 0:
                    out.append(-x[-1] / v[-1])
            elif shape == "ball":
                out += _sphere_hits(x, v, np.asarray(self.b.dom.center), self.b.dom.radius, smax)
            else:
                out += _graph_hits(self.fp, x, v, smax)
        return sorted(s for s in out if 0.0 < s < smax)

    def hessian_trace(self, x, k):
        """Finite-difference Laplacian and (for the quadratic form) the full Hessian of h at x."""
        d = self.d
        H = np.zeros((d, d))
        h0 = self.h(x)
        E = np.eye(d)
        for i in range(d):
            H[i, i] = (self.h(x + k * E[i]) + self.h(x - k * E[i]) - 2 * h0) / k**2
            for j in range(i + 1, d):
                H[i, j] = H[j, i] = (
                    self.h(x + k * (E[i] + E[j])) - self.h(x + k * (E[i] - E[j]))
                    - self.h(x - k * (E[i] - E[j])) + self.h(x - k * (E[i] + E[j]))
                ) / (4 * k**2)
        return H


def _sphere_hits(x, v, c, R, smax):
    if R >= 1e299:
        return []
    w = x - c
    b = float(w @ v)
    cc = float(w @ w) - R * R
    disc = b * b - cc
    if disc <= 0:
        return []
    sq = math.sqrt(disc)
    return [s for s in (-b - sq, -b + sq) if 0.0 < s < smax]


def _phi_np(fp, s):
    n = int(fp[0])
    out = np.zeros_like(s)
    for k in range(n):
        out += fp[1 + 3 * k] * np.sin(fp[2 + 3 * k] * s + fp[3 + 3 * k])
    return out


def _graph_hits(fp, x, v, smax, n=2000):
    def g(s):
        return x[1] + s * v[1] - graph_phi(fp, x[0] + s * v[0])

    grid = np.linspace(0.0, smax, n + 1)
    vals = x[1] + grid * v[1] - _phi_np(fp, x[0] + grid * v[0])
    out = []
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        out.append(optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    out += [grid[i] for i in np.nonzero(vals[1:-1] == 0.0)[0] + 1]
    return out


def _quad(f, a, b, points, tol, what):
    pts = [p for p in points if a < p < b]
    res = integrate.quad(f, a, b, points=pts or None, epsabs=tol, epsrel=tol, limit=400, full_output=1)
    val, err = res[0], res[1]
    if len(res) > 3 and err > 1e3 * max(tol, tol * abs(val)):
        raise NumericError(f"{what}: quadrature did not converge", {"value": val, "abserr": err, "message": res[3]})
    return val, err


def frac_laplacian_barrier(b, x, eps_pv=None, tol=1e-10):
    """Delta^{alpha/2} h_{Q,r}(x) by principal-value quadrature; returns a BarrierResult."""
    ev = _Evaluator(b)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d, alpha = ev.d, b.alpha
    kind, fp, rp = b.dom.pack()
    if not nb_contains(kind, d, fp, rp, x):
        raise DomainError("x must lie in D")
    dQ = float(np.linalg.norm(x - ev.Q))
    if not math.isinf(b.r) and dQ >= b.r:
        raise ContractError("x must lie in B(Q, r)")
    delta = nb_dist(kind, d, fp, rp, x)
    gap = min(delta, ev.r - dQ)
    if eps_pv is None:
        eps_pv = 1e-2 * gap
    if not 0.0 < eps_pv < gap:
        raise ContractError("eps_pv must be positive and below the distance to every kink")
    hx = ev.h(x)
    A = frac_laplacian_normalizer(d, alpha)
    H = ev.hessian_trace(x, 0.5 * eps_pv)
    L = dQ + ev.r

    if d == 1:
        u = np.ones(1)
        inner = H[0, 0] * eps_pv ** (2 - alpha) / (2 - alpha)

        def f(s):
            return ev.pair(x, u, s, hx) * s ** (-1.0 - alpha)

        if math.isinf(b.r):
            pts = [eps_pv, delta]
            v1, e1 = _quad(f, eps_pv, 2 * delta, pts, tol, "barrier")
            v2, e2 = _quad(f, 2 * delta, math.inf, [], tol, "barrier")
            mid, err = v1 + v2, e1 + e2
            tail = 0.0
        else:
            mid, err = _quad(f, eps_pv, L, ev.crossings(x, u, L), tol, "barrier")
            tail = -2.0 * hx * L ** (-alpha) / alpha
        total = inner + mid + tail
    elif d == 2:
        if math.isinf(b.r):
            raise ContractError("the untruncated barrier is only evaluated for d = 1")
        # (pi/2) tr H is the angular integral of u^T H u over half the circle
        inner = 0.5 * math.pi * np.trace(H) * eps_pv ** (2 - alpha) / (2 - alpha)
        errs = []

        def radial(theta):
            u = np.array([math.cos(theta), math.sin(theta)])
            v, e = _quad(lambda s: ev.pair(x, u, s, hx) * s ** (-1.0 - alpha), eps_pv, L,
                         ev.crossings(x, u, L), tol, "barrier radial")
            errs.append(e)
            return v

        # directions tangent to the truncation sphere or hitting Q give kinks in theta
        w = ev.Q - x
        th0 = math.atan2(w[1], w[0]) % math.pi
        pts = [th0, math.pi / 2.0]
        if dQ > 0 and ev.r < dQ:
            a = math.asin(ev.r / dQ)
            pts += [(th0 + a) % math.pi, (th0 - a) % math.pi]
        mid, err = _quad(radial, 0.0, math.pi, sorted(set(pts)), 1e3 * tol, "barrier angular")
        err += math.pi * (max(errs) if errs else 0.0)
        tail = -2.0 * hx * math.pi * L ** (-alpha) / alpha
        total = inner + mid + tail
    else:
        raise ContractError("barrier quadrature is implemented for d = 1 and d = 2")
    # the Taylor remainder is O(eps_pv**2) relative to the inner zone
    err = err + abs(inner) * (eps_pv / gap) ** 2
    return BarrierResult(value=A * total, abserr=A * err, eps_pv=eps_pv)


def boundary_sequence(b, n=10, base=None, lateral=None):
    """Points x_k above Q along the inward normal at delta = base 2**-k, k = 1..n.

    ``base`` defaults to R/8 so every point lies in B(Q, R/8).
    """
    base = b.dom.R_char / 8.0 if base is None else base
    Q = np.asarray(b.Q, dtype=float)
    d = b.dom.d
    kind, fp, _ = b.dom.pack()
    if b.dom.shape == "graph_domain":
        dp = graph_dphi(fp, Q[0])
        nrm = np.array([-dp, 1.0]) / math.hypot(dp, 1.0)
    elif b.dom.shape == "ball":
        nrm = (np.asarray(b.dom.center) - Q) / b.dom.radius
    else:
        nrm = np.eye(d)[-1]
    out = []
    for k in range(1, n + 1):
        delta = base * 2.0 ** (-k)
        out.append((k, delta, Q + delta * nrm))
    return out


def barrier_rows(b, points, **kw):
    rows = []
    for k, delta, x in points:
        res = frac_laplacian_barrier(b, x, **kw)
        rows.append({"k": k, "delta": delta, "x": list(map(float, x)), "value": res.value, "abserr": res.abserr})
    return rows


def write_barrier_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "delta", "x", "value", "abserr"])
        for r in rows:
            w.writerow([r["k"], r["delta"], " ".join(f"{v:.17g}" for v in r["x"]), r["value"], r["abserr"]])
