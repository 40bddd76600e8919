"""Computable open sets with exact boundary distance.

Every shape packs into ``(kind, fp, rp)`` arrays so that membership and
distance can be evaluated inside numba-compiled loops.  ``rp`` optionally
intersects the shape with an open ball, giving sets of the form D ∩ B.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigError, ContractError, DomainError, GeometryError

FULL, HALF_SPACE, BALL, INTERVALS, GRAPH, EXTERIOR_BALL = range(6)
SHAPES = {
    "full_space": FULL,
    "half_space": HALF_SPACE,
    "ball": BALL,
    "interval_union": INTERVALS,
    "graph_domain": GRAPH,
    "exterior_ball": EXTERIOR_BALL,
}


# ---------------------------------------------------------------------------
# compiled primitives


@njit(cache=True, nogil=True, error_model="numpy")
def graph_phi(fp, s):
    n = int(fp[0])
    v = 0.0
    for k in range(n):
        v += fp[1 + 3 * k] * math.sin(fp[2 + 3 * k] * s + fp[3 + 3 * k])
    return v


@njit(cache=True, nogil=True, error_model="numpy")
def graph_dphi(fp, s):
    n = int(fp[0])
    v = 0.0
    for k in range(n):
        a, w, p = fp[1 + 3 * k], fp[2 + 3 * k], fp[3 + 3 * k]
        v += a * w * math.cos(w * s + p)
    return v


@njit(cache=True, nogil=True, error_model="numpy")
def _graph_sq(fp, s, x1, x2):
    u = graph_phi(fp, s) - x2
    return (s - x1) * (s - x1) + u * u


@njit(cache=True, nogil=True, error_model="numpy")
def graph_nearest(fp, x1, x2):
    """Nearest graph point to (x1, x2); returns (distance, s*).

    The vertical gap g = |x2 - phi(x1)| bounds the distance, so the minimizer
    lies in [x1 - g, x1 + g].  A grid finer than the shortest oscillation scale
    brackets the global minimum, which golden-section search then refines.
    """
    g = abs(x2 - graph_phi(fp, x1))
    if g == 0.0:
        return 0.0, x1
    n = int(fp[0])
    wmax = 0.0
    for k in range(n):
        wmax = max(wmax, abs(fp[2 + 3 * k]))
    h = 2.0 * g / 64.0
    if wmax > 0.0:
        h = min(h, 0.05 / wmax)
    m = int(math.ceil(2.0 * g / h))
    h = 2.0 * g / m
    best = np.inf
    ib = 0
    for i in range(m + 1):
        v = _graph_sq(fp, x1 - g + i * h, x1, x2)
        if v < best:
            best = v
            ib = i
    lo = x1 - g + (ib - 1) * h
    hi = x1 - g + (ib + 1) * h
    invphi = 0.6180339887498949
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc = _graph_sq(fp, c, x1, x2)
    fd = _graph_sq(fp, d, x1, x2)
    for _ in range(200):
        if hi - lo < 1e-14 * (1.0 + abs(lo)):
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = _graph_sq(fp, c, x1, x2)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = _graph_sq(fp, d, x1, x2)
    s = 0.5 * (lo + hi)
    v = _graph_sq(fp, s, x1, x2)
    s0 = x1 - g + ib * h
    if best < v:
        s, v = s0, best
    return math.sqrt(v), s


@njit(cache=True, nogil=True, error_model="numpy")
def _norm_diff(x, c, d):
    acc = 0.0
    for i in range(d):
        u = x[i] - c[i]
        acc += u * u
    return math.sqrt(acc)


@njit(cache=True, nogil=True, error_model="numpy")
def shape_contains(kind, d, fp, x):
    if kind == FULL:
        return True
    if kind == HALF_SPACE:
        return x[d - 1] > 0.0
    if kind == BALL:
        return _norm_diff(x, fp, d) < fp[d]
    if kind == EXTERIOR_BALL:
        return _norm_diff(x, fp, d) > fp[d]
    if kind == INTERVALS:
        n = int(fp[0])
        for k in range(n):
            if fp[1 + 2 * k] < x[0] < fp[2 + 2 * k]:
                return True
        return False
    if kind == GRAPH:
        return x[1] > graph_phi(fp, x[0])
    return False


@njit(cache=True, nogil=True, error_model="numpy")
def nb_contains(kind, d, fp, rp, x):
    if rp[0] > 0.0 and _norm_diff(x, rp[1:], d) >= rp[0]:
        return False
    return shape_contains(kind, d, fp, x)


@njit(cache=True, nogil=True, error_model="numpy")
def shape_dist(kind, d, fp, x):
    """Distance from x to the complement of the shape (0 outside)."""
    if kind == FULL:
        return np.inf
    if kind == HALF_SPACE:
        return max(x[d - 1], 0.0)
    if kind == BALL:
        return max(fp[d] - _norm_diff(x, fp, d), 0.0)
    if kind == EXTERIOR_BALL:
        return max(_norm_diff(x, fp, d) - fp[d], 0.0)
    if kind == INTERVALS:
        n = int(fp[0])
        for k in range(n):
            a, b = fp[1 + 2 * k], fp[2 + 2 * k]
            if a < x[0] < b:
                return min(x[0] - a, b - x[0])
        return 0.0
    if kind == GRAPH:
        if x[1] <= graph_phi(fp, x[0]):
            return 0.0
        return graph_nearest(fp, x[0], x[1])[0]
    return 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def nb_dist(kind, d, fp, rp, x):
    v = shape_dist(kind, d, fp, x)
    if rp[0] > 0.0:
        v = min(v, max(rp[0] - _norm_diff(x, rp[1:], d), 0.0))
    return v


# ---------------------------------------------------------------------------
# DomainSpec


@dataclass(frozen=True)
class DomainSpec:
    """An open set D in R^d together with its C^{1,eta} characteristics.

    Use the classmethod constructors rather than the raw initializer; they
    fill in certified defaults for ``R_char``, ``Lambda``, ``kappa_fat`` and
    ``lambda1``.
    """

    shape: str
    d: int
    center: Optional[tuple] = None
    radius: Optional[float] = None
    intervals: tuple = ()
    terms: tuple = ()
    R_char: float = 1.0
    Lambda: float = 2.0
    eta: float = 1.0
    kappa_fat: tuple = (1.0, 0.5)
    lambda1: Optional[float] = 1.0
    restrict: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(tuple(map(float, p)) for p in self.intervals))
        object.__setattr__(self, "terms", tuple(tuple(map(float, t)) for t in self.terms))
        if self.center is not None:
            object.__setattr__(self, "center", tuple(map(float, self.center)))
        object.__setattr__(self, "kappa_fat", tuple(map(float, self.kappa_fat)))
        if self.restrict is not None:
            c, r = self.restrict
            object.__setattr__(self, "restrict", (tuple(map(float, c)), float(r)))
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self):
        out = []
        if self.shape not in SHAPES:
            out.append(f"unknown shape {self.shape!r}")
            return out
        if self.d < 1:
            out.append("d must be positive")
        if self.shape in ("ball", "exterior_ball"):
            if self.center is None or len(self.center) != self.d:
                out.append("ball shapes need a center of length d")
            if not self.radius or self.radius <= 0:
                out.append("ball shapes need a positive radius")
        if self.shape == "interval_union":
            if self.d != 1:
                out.append("interval_union is a d = 1 shape")
            iv = sorted(self.intervals)
            if not iv:
                out.append("interval_union needs at least one interval")
            for a, b in iv:
                if not a < b:
                    out.append(f"empty interval ({a}, {b})")
            for (a0, b0), (a1, b1) in zip(iv, iv[1:]):
                if not b0 < a1:
                    out.append(f"intervals ({a0}, {b0}) and ({a1}, {b1}) are not separated by a positive gap")
        if self.shape == "graph_domain":
            if self.d != 2:
                out.append("graph_domain is implemented for d = 2")
            if not self.terms:
                out.append("graph_domain needs at least one trigonometric term")
            lam = graph_lambda(self.terms)
            if self.Lambda < lam:
                out.append(f"Lambda = {self.Lambda} below the certified constant {lam}")
        if self.R_char <= 0:
            out.append("R_char must be positive")
        if self.shape != "interval_union" and not self.Lambda > 1.0:
            out.append("Lambda must exceed 1")
        if not 0.0 < self.eta <= 1.0:
            out.append("eta must lie in (0, 1]")
        R1, kap = self.kappa_fat
        if R1 <= 0 or not 0.0 < kap <= 0.5:
            out.append("kappa_fat needs R1 > 0 and kappa in (0, 1/2]")
        if self.lambda1 is not None and self.lambda1 < 1.0:
            out.append("lambda1 must be >= 1")
        if self.restrict is not None:
            c, r = self.restrict
            if len(c) != self.d or r <= 0:
                out.append("restrict needs a center of length d and a positive radius")
        return out

    # -- constructors -----------------------------------------------------

    @classmethod
    def full_space(cls, d):
        return cls("full_space", d, R_char=math.inf, kappa_fat=(math.inf, 0.5), lambda1=1.0)

    @classmethod
    def half_space(cls, d, **kw):
        kw.setdefault("kappa_fat", (math.inf, 0.5))
        return cls("half_space", d, **kw)

    @classmethod
    def ball(cls, center, radius, **kw):
        center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
        d = len(center)
        kw.setdefault("R_char", radius / 2.0)
        # local graph rho - sqrt(rho^2 - s^2) on |s| < rho/2 has phi'' <= (4/3)^{3/2}/rho
        kw.setdefault("Lambda", max(2.0, (4.0 / 3.0) ** 1.5 / radius))
        kw.setdefault("kappa_fat", (radius, 0.5))
        if d == 1:
            return cls.interval_union([(center[0] - radius, center[0] + radius)])
        return cls("ball", d, center=center, radius=float(radius), **kw)

    @classmethod
    def exterior_ball(cls, center, radius, **kw):
        center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
        kw.setdefault("R_char", radius / 2.0)
        kw.setdefault("Lambda", max(2.0, (4.0 / 3.0) ** 1.5 / radius))
        kw.setdefault("kappa_fat", (math.inf, 0.5))
        kw.setdefault("lambda1", math.pi / 2.0)
        return cls("exterior_ball", len(center), center=center, radius=float(radius), **kw)

    @classmethod
    def interval_union(cls, intervals, **kw):
        iv = sorted((float(a), float(b)) for a, b in intervals)
        lmin = min(b - a for a, b in iv)
        gaps = [a1 - b0 for (_, b0), (a1, _) in zip(iv, iv[1:])]
        gmin = min(gaps) if gaps else math.inf
        kw.setdefault("R_char", min(lmin, gmin) / 2.0)
        kw.setdefault("Lambda", 1.0)
        kw.setdefault("kappa_fat", (lmin, 0.5))
        return cls("interval_union", 1, intervals=tuple(iv), **kw)

    @classmethod
    def interval(cls, a, b, **kw):
        return cls.interval_union([(a, b)], **kw)

    @classmethod
    def graph(cls, terms, **kw):
        """{x_2 > phi(x_1)} with phi(s) = sum a sin(omega s + phase); terms are (a, omega, phase)."""
        terms = tuple((float(a), float(w), float(p)) for a, w, p in terms)
        G = sum(abs(a * w) for a, w, _ in terms)
        kw.setdefault("Lambda", max(2.0, graph_lambda(terms)))
        kw.setdefault("kappa_fat", (math.inf, 0.5 / math.sqrt(1.0 + G * G)))
        kw.setdefault("lambda1", math.sqrt(1.0 + G * G))
        return cls("graph_domain", 2, terms=terms, **kw)

    def restricted(self, center, radius):
        """D ∩ B(center, radius)."""
        data = self.to_dict()
        data["restrict"] = [list(np.atleast_1d(np.asarray(center, dtype=float))), float(radius)]
        return DomainSpec.from_dict(data)

    # -- packing ----------------------------------------------------------

    @property
    def kind(self):
        return SHAPES[self.shape]

    def pack(self):
        """(kind, fp, rp) arrays for the compiled routines."""
        if self.shape in ("ball", "exterior_ball"):
            fp = np.array(list(self.center) + [self.radius])
        elif self.shape == "interval_union":
            fp = np.array([len(self.intervals)] + [v for p in self.intervals for v in p], dtype=float)
        elif self.shape == "graph_domain":
            fp = np.array([len(self.terms)] + [v for t in self.terms for v in t], dtype=float)
        else:
            fp = np.zeros(1)
        rp = np.zeros(self.d + 1)
        if self.restrict is not None:
            rp[0] = self.restrict[1]
            rp[1:] = self.restrict[0]
        return self.kind, fp, rp

    @property
    def bounded(self):
        return self.shape in ("ball", "interval_union") or self.restrict is not None

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        out = {
            "shape": self.shape,
            "d": self.d,
            "center": list(self.center) if self.center is not None else None,
            "radius": self.radius,
            "intervals": [list(p) for p in self.intervals],
            "terms": [list(t) for t in self.terms],
            "R_char": _enc(self.R_char),
            "Lambda": self.Lambda,
            "eta": self.eta,
            "kappa_fat": [_enc(self.kappa_fat[0]), self.kappa_fat[1]],
            "lambda1": self.lambda1,
            "restrict": None if self.restrict is None else [list(self.restrict[0]), self.restrict[1]],
        }
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "shape" not in data:
            raise ConfigError(["domain needs a shape"])
        shape = data["shape"]
        builders = {
            "half_space": lambda: cls.half_space(int(data["d"])),
            "full_space": lambda: cls.full_space(int(data["d"])),
            "ball": lambda: cls.ball(data["center"], data["radius"]),
            "exterior_ball": lambda: cls.exterior_ball(data["center"], data["radius"]),
            "interval_union": lambda: cls.interval_union(data["intervals"]),
            "graph_domain": lambda: cls.graph(data["terms"]),
        }
        if shape not in builders:
            raise ConfigError([f"unknown shape {shape!r}"])
        try:
            base = builders[shape]()
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError([f"domain {shape}: missing or malformed field ({exc})"]) from exc
        fields = {f: getattr(base, f) for f in base.__dataclass_fields__}
        for key in ("R_char", "Lambda", "eta", "lambda1"):
            if data.get(key) is not None:
                fields[key] = _dec(data[key])
        if data.get("kappa_fat") is not None:
            fields["kappa_fat"] = (_dec(data["kappa_fat"][0]), float(data["kappa_fat"][1]))
        if data.get("restrict") is not None:
            fields["restrict"] = (tuple(data["restrict"][0]), float(data["restrict"][1]))
        return cls(**fields)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _enc(v):
    return "inf" if v is not None and math.isinf(v) else v


def _dec(v):
    return float(v) if isinstance(v, str) else v


def graph_lambda(terms):
    """Certified C^{1,eta} constant for phi = sum a sin(omega s + phase), any eta in (0, 1].

    |phi'| <= G = sum |a omega| and |phi''| <= L = sum |a| omega^2, so
    |phi'(s) - phi'(w)| <= min(2G, L|s - w|) <= max(2G, L) |s - w|^eta.
    """
    G = sum(abs(a * w) for a, w, _ in terms)
    L = sum(abs(a) * w * w for a, w, _ in terms)
    return max(2.0 * G, L)


# ---------------------------------------------------------------------------
# public operations


def _point(dom, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != dom.d:
        raise DomainError(f"point has dimension {x.shape[-1]}, domain has {dom.d}")
    return x


def contains(dom, x):
    """Membership in the open set; accepts a single point or an (n, d) array."""
    x = _point(dom, x)
    kind, fp, rp = dom.pack()
    if x.ndim == 1:
        return bool(nb_contains(kind, dom.d, fp, rp, x))
    return np.array([nb_contains(kind, dom.d, fp, rp, p) for p in x], dtype=bool)


def _check_inside(dom, x):
    kind, fp, rp = dom.pack()
    if not nb_contains(kind, dom.d, fp, rp, x):
        raise DomainError(f"point {x} is not in the domain")


def dist_to_boundary(dom, x):
    """delta_D(x) for x in D."""
    x = _point(dom, x)
    kind, fp, rp = dom.pack()
    if x.ndim == 2:
        for p in x:
            _check_inside(dom, p)
        return np.array([nb_dist(kind, dom.d, fp, rp, p) for p in x])
    _check_inside(dom, x)
    return float(nb_dist(kind, dom.d, fp, rp, x))


def _shape_nearest(dom, x):
    """Nearest point of the shape's boundary and the inward unit normal there."""
    d = dom.d
    if dom.shape == "half_space":
        z = x.copy()
        z[-1] = 0.0
        n = np.zeros(d)
        n[-1] = 1.0
        return z, n
    if dom.shape in ("ball", "exterior_ball"):
        c = np.asarray(dom.center)
        v = x - c
        nv = np.linalg.norm(v)
        if nv == 0.0:
            v = -np.eye(d)[0]
            nv = 1.0
        e = v / nv
        z = c + dom.radius * e
        return z, (-e if dom.shape == "ball" else e)
    if dom.shape == "interval_union":
        for a, b in dom.intervals:
            if a <= x[0] <= b:
                # ties go to the left endpoint
                if x[0] - a <= b - x[0]:
                    return np.array([a]), np.array([1.0])
                return np.array([b]), np.array([-1.0])
        raise DomainError("point not in the closure of any interval")
    if dom.shape == "graph_domain":
        _, fp, _ = dom.pack()
        _, s = graph_nearest(fp, x[0], x[1])
        z = np.array([s, graph_phi(fp, s)])
        dp = graph_dphi(fp, s)
        n = np.array([-dp, 1.0]) / math.hypot(dp, 1.0)
        return z, n
    raise DomainError("full space has no boundary")


def nearest_with_normal(dom, x):
    x = _point(dom, x)
    _check_inside(dom, x)
    if dom.restrict is not None:
        c = np.asarray(dom.restrict[0])
        r = dom.restrict[1]
        kind, fp, _ = dom.pack()
        ds = float(shape_dist(kind, dom.d, fp, x))
        v = x - c
        nv = np.linalg.norm(v)
        db = r - nv
        if db < ds:
            e = v / nv if nv > 0 else -np.eye(dom.d)[0]
            return c + r * e, -e
    return _shape_nearest(dom, x)


def nearest_boundary_point(dom, x):
    """A point z_x of the boundary with |z_x - x| = delta_D(x)."""
    return nearest_with_normal(dom, x)[0]


def fat_point(dom, x, r, n_check=1000, seed=0):
    """Centre A_r(x) of a ball B(A, kappa r) inside D ∩ B(x, r), verified by sampling."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    R1, kap = dom.kappa_fat
    if not 0.0 < r <= R1:
        raise ContractError(f"fat_point needs 0 < r <= R1 = {R1}")
    d = dom.d
    if dom.shape == "half_space":
        A = x.copy()
        A[-1] += r / 2.0
    elif dom.shape == "ball":
        c = np.asarray(dom.center)
        v = x - c
        nv = np.linalg.norm(v)
        A = c.copy() if nv <= r / 2.0 else x - (r / 2.0) * v / nv
    elif dom.shape == "exterior_ball":
        c = np.asarray(dom.center)
        v = x - c
        A = x + (r / 2.0) * v / np.linalg.norm(v)
    elif dom.shape == "interval_union":
        for a, b in dom.intervals:
            if a <= x[0] <= b:
                lo, hi = max(a, x[0] - r), min(b, x[0] + r)
                A = np.array([(lo + hi) / 2.0])
                break
        else:
            raise DomainError("point not in the closure of the domain")
    elif dom.shape == "graph_domain":
        A = x.copy()
        A[1] += r / 2.0
    else:
        A = x.copy()
    _verify_fat(dom, x, r, A, kap * r, n_check, seed)
    return A


def _verify_fat(dom, x, r, A, rad, n_check, seed):
    rng = np.random.default_rng(seed)
    d = dom.d
    if d == 1:
        pts = np.array([[A[0] - rad], [A[0] + rad]])
    else:
        u = rng.standard_normal((n_check, d))
        pts = A + rad * u / np.linalg.norm(u, axis=1, keepdims=True)
    # boundary of the open ball, pulled in by a relative hair
    pts = A + (pts - A) * (1.0 - 1e-9)
    inside = contains(dom, pts)
    near = np.linalg.norm(pts - x, axis=1) < r
    if not (inside.all() and near.all()):
        raise GeometryError(
            f"fat witness failed at x={x}, r={r}: "
            f"{int((~inside).sum())} samples outside D, {int((~near).sum())} outside B(x, r)"
        )


@dataclass(frozen=True)
class BoundaryCone:
    """Truncated cone {2 Lambda |y~| < y_d, r/lam < |y| < r} in the frame at z_x."""

    z: np.ndarray
    normal: np.ndarray
    Lambda: float
    lam: float
    r: float

    def local(self, y):
        """Coordinates (|y~|, y_d) of points y in the frame centred at z with axis the normal."""
        v = np.atleast_2d(np.asarray(y, dtype=float)) - self.z
        yd = v @ self.normal
        yt = np.linalg.norm(v - np.outer(yd, self.normal), axis=1)
        return yt, yd

    def __call__(self, y):
        yt, yd = self.local(y)
        rad = np.hypot(yt, yd)
        out = (2.0 * self.Lambda * yt < yd) & (rad > self.r / self.lam) & (rad < self.r)
        return out if np.ndim(y) > 1 else bool(out[0])


def boundary_cone_indicator(dom, x, lam, r):
    """Membership predicate of the exit cone attached to the nearest boundary point of x."""
    x = _point(dom, x)
    delta = dist_to_boundary(dom, x)
    problems = []
    if lam < 4:
        problems.append(f"lam = {lam} < 4")
    if r > min(dom.R_char, 1.0) / 4.0:
        problems.append(f"r = {r} exceeds (R ∧ 1)/4 = {min(dom.R_char, 1.0) / 4}")
    if not delta < r / (2.0 * lam):
        problems.append(f"delta_D(x) = {delta} is not below r/(2 lam) = {r / (2 * lam)}")
    if problems:
        raise ContractError("; ".join(problems))
    z, n = nearest_with_normal(dom, x)
    return BoundaryCone(z=z, normal=n, Lambda=dom.Lambda, lam=lam, r=r)


def same_component(dom, x, y):
    """Whether x and y lie in the same connected component of D."""
    x = _point(dom, x)
    y = _point(dom, y)
    if dom.shape == "interval_union":
        for a, b in dom.intervals:
            if a < x[0] < b:
                return a < y[0] < b
        return False
    return contains(dom, x) and contains(dom, y)
