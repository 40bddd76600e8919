"""Closed-form heat kernel and Green function envelopes.

All shapes are returned without their free multiplicative constants unless a
slot is passed explicitly; the constants are fitted per experiment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DomainError
from .geometry import contains, dist_to_boundary, same_component


@dataclass(frozen=True)
class EnvelopeParams:
    """Rate constant ``a``, exponent ``gamma`` and horizon ``T`` of h_{a,gamma,T}.

    ``C1_slot`` is the rate constant of the whole-space upper bound; it also
    enters the Dirichlet upper bound through ``C1 ∧ gamma``.
    """

    a: float = 1.0
    gamma: float = 1.0
    T: float = 1.0
    C1_slot: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.gamma > 0 and self.T > 0 and self.C1_slot > 0):
            raise DomainError("a, gamma, T and C1 must be positive")


@dataclass
class EnvelopeSpec:
    lower_shape: Callable
    upper_shape: Callable
    c_lower: float = 1.0
    c_upper: float = 1.0

    def lower(self, *args):
        return self.c_lower * self.lower_shape(*args)

    def upper(self, *args):
        return self.c_upper * self.upper_shape(*args)


def _stable_part(t, r, d, alpha, damp):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        off = t * np.power(r, -(d + alpha)) * damp
    on = np.power(t, -d / alpha)
    return np.where(r == 0.0, on, np.minimum(on, off))


def h_bound(p, beta, t, r, d, alpha):
    """h_{a,gamma,T}(t, r) in all four regimes; broadcasts over t and r."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t <= 0) or np.any(t > p.T * (1 + 1e-12)):
        raise DomainError(f"h needs 0 < t <= T = {p.T}")
    if np.any(r < 0):
        raise DomainError("h needs r >= 0")
    t, r = np.broadcast_arrays(t, r)
    if beta <= 1.0:
        # beta = 0 is the untempered kernel; exp(-gamma r**0) would only be a constant
        with np.errstate(over="ignore"):
            damp = np.exp(-p.gamma * np.power(r, beta)) if beta > 0 else 1.0
        out = _stable_part(t, r, d, alpha, damp)
    else:
        near = _stable_part(t, r, d, alpha, 1.0)
        rr = np.maximum(r, 1.0)
        if math.isinf(beta):
            far = np.power(t / (p.T * rr), p.a * rr)
        else:
            logterm = np.log(p.T * rr / t)
            expo = np.minimum(rr * np.power(logterm, (beta - 1.0) / beta), np.power(rr, beta))
            far = t * np.exp(-p.a * expo)
        out = np.where(r < 1.0, near, far)
    return out if out.ndim else float(out)


def boundary_factor(alpha, t, delta):
    """Psi = 1 ∧ delta**(alpha/2) / sqrt(t)."""
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(t <= 0) or np.any(delta < 0):
        raise DomainError("boundary_factor needs t > 0 and delta >= 0")
    out = np.minimum(1.0, np.power(delta, alpha / 2.0) / np.sqrt(t))
    return out if out.ndim else float(out)


def whole_space_envelope(spec, p_lower, p_upper=None):
    """Shapes h_{c1,gamma2,T} (lower) and h_{C1,gamma1,T} (upper) as functions of (t, r)."""
    p_upper = p_upper or p_lower
    low = EnvelopeParams(a=p_lower.a, gamma=spec.gamma2, T=p_lower.T)
    up = EnvelopeParams(a=p_upper.C1_slot, gamma=spec.gamma1, T=p_upper.T)
    return EnvelopeSpec(
        lower_shape=lambda t, r: h_bound(low, spec.beta, t, r, spec.d, spec.alpha),
        upper_shape=lambda t, r: h_bound(up, spec.beta, t, r, spec.d, spec.alpha),
    )


def _psi_pair(spec, dom, t, x, y):
    for pt in (x, y):
        if not contains(dom, pt):
            raise DomainError(f"point {pt} is not in the domain")
    dx = dist_to_boundary(dom, x)
    dy = dist_to_boundary(dom, y)
    return boundary_factor(spec.alpha, t, dx) * boundary_factor(spec.alpha, t, dy)


def dirichlet_upper(spec, p, t, x, y, dom, c=1.0):
    """c Psi(t,x) Psi(t,y) h_{a,gamma1,T}(t, |x-y|/6) with a = C1 ∧ gamma1 (C1 for beta = inf)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    a = p.C1_slot if math.isinf(spec.beta) else min(p.C1_slot, spec.gamma1)
    q = EnvelopeParams(a=a, gamma=spec.gamma1, T=p.T)
    r = float(np.linalg.norm(x - y))
    return c * _psi_pair(spec, dom, t, x, y) * h_bound(q, spec.beta, t, r / 6.0, spec.d, spec.alpha)


def lower_case(spec, r, same_comp):
    """Which part of the lower bound applies: 'near', 'same_far' or 'cross_far' (None if not covered)."""
    beta = spec.beta
    if beta <= 1.0:
        return "near"
    if math.isinf(beta):
        if r <= 0.8:
            return "near"
        return "same_far" if same_comp else None
    if r < 1.0:
        return "near"
    return "same_far" if same_comp else "cross_far"


def dirichlet_lower(spec, p, t, x, y, dom, same_component=None, comparable_path=True, c=1.0):
    """Lower bound shape with the full case split on beta, |x - y| and the components of x, y.

    ``p.a`` is the rate constant c4 of the same-component far branch.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d, alpha = spec.d, spec.alpha
    if same_component is None:
        same_component = _same_component(dom, x, y)
    r = float(np.linalg.norm(x - y))
    case = lower_case(spec, r, same_component)
    psi = _psi_pair(spec, dom, t, x, y)
    if case is None:
        raise ContractError("no lower bound is available for beta = inf across components at |x-y| > 4/5")
    if case == "near":
        damp = math.exp(-spec.gamma2 * r ** spec.beta) if 0.0 < spec.beta <= 1.0 else 1.0
        shape = float(_stable_part(np.float64(t), np.float64(r), d, alpha, damp))
    elif case == "same_far":
        if not comparable_path:
            raise ContractError("the same-component far lower bound needs path-distance comparability")
        q = EnvelopeParams(a=p.a, gamma=spec.gamma2, T=p.T)
        arg = 1.25 * r if math.isinf(spec.beta) else r
        shape = h_bound(q, spec.beta, t, arg, d, alpha)
    else:
        shape = t * r ** (-d - alpha) * math.exp(-spec.gamma2 * (1.25 * r) ** spec.beta)
    return c * psi * shape


def _same_component(dom, x, y):
    return bool(same_component(dom, x, y))


def green_shape(spec, dom, x, y):
    """Two-sided Green function shape (without constants)."""
    if not dom.bounded:
        raise ContractError("the Green function envelope needs a bounded domain")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise DomainError("the Green function envelope needs x != y")
    for pt in (x, y):
        if not contains(dom, pt):
            raise DomainError(f"point {pt} is not in the domain")
    d, alpha = spec.d, spec.alpha
    dx = dist_to_boundary(dom, x)
    dy = dist_to_boundary(dom, y)
    prod = (dx * dy) ** (alpha / 2.0)
    if d > alpha:
        return r ** (alpha - d) * min(1.0, prod / r ** alpha)
    if d == 1 and alpha == 1.0:
        return math.log1p(prod / r)
    return min((dx * dy) ** ((alpha - 1.0) / 2.0), prod / r)


def green_envelope(spec, dom, x, y, c_lower=1.0, c_upper=1.0):
    """(lower, upper) Green function bounds: the common shape times the two constant slots."""
    s = green_shape(spec, dom, x, y)
    return c_lower * s, c_upper * s


def envelope_table(env, ts, rs):
    """Rows (t, r, lower, upper) over the product grid."""
    rows = []
    for t in ts:
        for r in rs:
            rows.append((float(t), float(r), float(env.lower(t, r)), float(env.upper(t, r))))
    return rows


def write_envelope_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "lower", "upper"])
        w.writerows(rows)
