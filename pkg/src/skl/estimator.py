"""Monte Carlo estimators built on simulated ensembles.

Every estimator returns an :class:`EstimateReport`.  Standard errors are the
usual sample standard errors of per-path quantities, so independent partial
reductions combine exactly.  Estimators that accept an ``ens`` argument reuse
an existing ensemble instead of simulating a new one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .errors import ContractError, DomainError
from .geometry import DomainSpec, boundary_cone_indicator, contains
from .kernels import jump_kernel, meyer_rate_sup
from .simulator import HistSpec, SimConfig, WTable, run_ensemble, run_meyer_ensemble

QUANTITIES = (
    "density",
    "dirichlet_density",
    "survival",
    "mean_exit_time",
    "exit_cone_prob",
    "exit_into_D_prob",
    "green",
    "lambda_D",
)

CENSOR_LIMIT = 0.01
SANDWICH_RATIO = 50.0
SE_RULE = 0.2


@dataclass(frozen=True)
class Verdict:
    """Outcome of a sandwich fit: status is 'pass', 'fail' or 'inconclusive'."""

    c_lower: float
    c_upper: float
    ratio: float
    tolerance: float
    status: str
    reason: str = ""

    @property
    def passed(self):
        return self.status == "pass"


@dataclass
class EstimateReport:
    quantity: str
    value: float
    std_error: float
    n_paths: int
    eps_used: float
    seed: int = 0
    t: float = math.nan
    x: tuple = ()
    y: tuple = ()
    conclusive: bool = True
    note: str = ""
    extra: dict = field(default_factory=dict)
    envelope_verdict: Optional[Verdict] = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ContractError(f"unknown quantity {self.quantity!r}")
        if self.std_error < 0:
            raise ContractError("std_error must be >= 0")
        self.x = tuple(float(v) for v in np.atleast_1d(self.x)) if len(np.atleast_1d(self.x)) else ()
        self.y = tuple(float(v) for v in np.atleast_1d(self.y)) if len(np.atleast_1d(self.y)) else ()

    @property
    def rel_error(self):
        return self.std_error / abs(self.value) if self.value else math.inf

    def row(self, d=None):
        d = d if d is not None else max(len(self.x), len(self.y), 1)
        xs = list(self.x) + [math.nan] * (d - len(self.x))
        ys = list(self.y) + [math.nan] * (d - len(self.y))
        v = self.envelope_verdict
        return (
            [self.quantity, self.t] + xs + ys
            + [self.value, self.std_error, self.n_paths, self.eps_used,
               v.c_lower if v else "", v.c_upper if v else "", v.status if v else ""]
        )


def report_header(d):
    return (["quantity", "t"] + [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)]
            + ["value", "se", "n", "eps", "c_lower", "c_upper", "pass"])


def write_reports_csv(path, reports):
    reports = list(reports)
    d = max([max(len(r.x), len(r.y), 1) for r in reports] or [1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(report_header(d))
        for r in reports:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r.row(d)])


def mean_se(z):
    """Sample mean and standard error of per-path values."""
    z = np.asarray(z, dtype=float)
    n = z.size
    if n == 0:
        return math.nan, math.nan
    m = float(z.mean())
    if n == 1:
        return m, 0.0
    return m, float(z.std(ddof=1) / math.sqrt(n))


def _bernoulli(k, n):
    p = k / n
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _pt(cfg, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cfg.kernel.d,):
        raise DomainError(f"points must have shape ({cfg.kernel.d},)")
    return x


def default_bin_width(alpha, t):
    return 0.1 * t ** (1.0 / alpha)


# ---------------------------------------------------------------------------
# transition densities


def density_reports(ens, t, ys, bin_width, pool_reflect=False):
    """Histogram estimates of p(t, x, y) at every y from one ensemble.

    The estimator counts paths alive at ``t`` whose position lies in the box of
    side ``bin_width`` centred at ``y`` and divides by ``N * bin_width**d``
    (N = all paths, so the estimates integrate to the survival probability).
    With ``pool_reflect`` the box at the mirror point ``2x - y`` is pooled in,
    which is exact for the symmetric whole-space process.
    """
    cfg = ens.cfg
    d = cfg.kernel.d
    try:
        it = cfg.obs_times.index(float(t))
    except ValueError:
        raise ContractError(f"t = {t} is not an observation time of the ensemble") from None
    pos = ens.obs_pos[:, it, :]
    alive = ens.exit_time > t
    n = ens.n_paths
    vol = bin_width**d
    half = bin_width / 2.0
    quantity = "density" if cfg.dom.shape == "full_space" else "dirichlet_density"
    out = []
    for y in ys:
        y = _pt(cfg, y)
        hit = alive & np.all(np.abs(pos - y) < half, axis=1)
        z = hit.astype(float)
        if pool_reflect:
            m = 2.0 * ens.start - y
            if np.all(np.abs(m - y) < bin_width):
                raise ContractError("pooled bins overlap; y is too close to x")
            z = 0.5 * (z + (alive & np.all(np.abs(pos - m) < half, axis=1)))
        val, se = mean_se(z)
        conclusive = bool(alive.any())
        out.append(EstimateReport(
            quantity, val / vol if conclusive else math.nan, se / vol if conclusive else math.nan,
            n, cfg.eps_cut, cfg.seed, float(t), ens.start, y, conclusive,
            "" if conclusive else "no surviving paths: estimate undefined",
            {"bin_width": bin_width, "pooled": bool(pool_reflect)},
        ))
    return out


def estimate_density(cfg, t, x, y, bin_width=None, n_paths=None, workers=1, pool_reflect=False):
    """p(t, x, y) (or p_D for killed runs) by the histogram estimator."""
    if not 0 < t <= cfg.t_max:
        raise DomainError(f"need 0 < t <= t_max = {cfg.t_max}")
    x = _pt(cfg, x)
    y = _pt(cfg, y)
    if cfg.dom.shape != "full_space" and not (contains(cfg.dom, x) and contains(cfg.dom, y)):
        raise DomainError("x and y must lie in the domain")
    bw = bin_width or default_bin_width(cfg.kernel.alpha, t)
    run = cfg.with_(obs_times=(t,), t_max=t)
    ens = run_ensemble(run, x, n_paths, workers=workers)
    return density_reports(ens, t, [y], bw, pool_reflect)[0]


# ---------------------------------------------------------------------------
# survival and exit times


def survival_report(ens, t):
    n = ens.n_paths
    p, se = _bernoulli(int(np.count_nonzero(ens.exit_time > t)), n)
    return EstimateReport("survival", p, se, n, ens.cfg.eps_cut, ens.cfg.seed, float(t), ens.start)


def estimate_survival(cfg, t, x, n_paths=None, workers=1):
    """P_x(tau_D > t)."""
    if not 0 < t <= cfg.t_max:
        raise DomainError(f"need 0 < t <= t_max = {cfg.t_max}")
    ens = run_ensemble(cfg.with_(t_max=t, obs_times=()), x, n_paths, workers=workers)
    return survival_report(ens, t)


def mean_exit_time_report(ens):
    tau = np.minimum(ens.exit_time, ens.cfg.t_max)
    censored = float(np.mean(~np.isfinite(ens.exit_time)))
    m, se = mean_se(tau)
    ok = censored < CENSOR_LIMIT
    return EstimateReport(
        "mean_exit_time", m, se, ens.n_paths, ens.cfg.eps_cut, ens.cfg.seed, ens.cfg.t_max, ens.start,
        conclusive=ok, note="" if ok else f"censored fraction {censored:.3g} >= {CENSOR_LIMIT}",
        extra={"censored": censored},
    )


def estimate_mean_exit_time(cfg, U, x, n_paths=None, workers=1):
    """E_x[tau_U]; paths alive at t_max contribute t_max."""
    ens = run_ensemble(cfg.with_(dom=U, obs_times=()), x, n_paths, workers=workers)
    return mean_exit_time_report(ens)


def estimate_exit_cone_prob(cfg, x, lam, r, n_paths=None, workers=1):
    """P_x(Y at the exit from D ∩ B(z_x, r/lam) lies in the boundary cone set)."""
    x = _pt(cfg, x)
    cone = boundary_cone_indicator(cfg.dom, x, lam, r)
    local = cfg.dom.restricted(cone.z, r / lam)
    ens = run_ensemble(cfg.with_(dom=local, obs_times=()), x, n_paths, workers=workers)
    exited = np.isfinite(ens.exit_time)
    hit = np.zeros(ens.n_paths, dtype=bool)
    hit[exited] = cone(ens.exit_pos[exited])
    p, se = mean_se(hit)
    censored = 1.0 - float(exited.mean())
    ok = censored < CENSOR_LIMIT
    return EstimateReport(
        "exit_cone_prob", p, se, ens.n_paths, cfg.eps_cut, cfg.seed, cfg.t_max, x,
        conclusive=ok, note="" if ok else f"censored fraction {censored:.3g} >= {CENSOR_LIMIT}",
        extra={"censored": censored, "lam": lam, "r": r, "z": tuple(cone.z)},
    )


def estimate_exit_into(cfg, x, target: DomainSpec, n_paths=None, workers=1, ens=None):
    """P_x(Y at the exit time of cfg.dom lies in ``target``)."""
    x = _pt(cfg, x)
    if ens is None:
        ens = run_ensemble(cfg.with_(obs_times=()), x, n_paths, workers=workers)
    exited = np.isfinite(ens.exit_time)
    hit = np.zeros(ens.n_paths, dtype=bool)
    hit[exited] = [contains(target, p) for p in ens.exit_pos[exited]]
    p, se = mean_se(hit)
    censored = 1.0 - float(exited.mean())
    return EstimateReport(
        "exit_into_D_prob", p, se, ens.n_paths, cfg.eps_cut, cfg.seed, cfg.t_max, x,
        conclusive=censored < CENSOR_LIMIT, extra={"censored": censored},
    )


# ---------------------------------------------------------------------------
# Green function and decay rate


def estimate_green(cfg, x, y, bin_width, n_paths=None, workers=1):
    """G_D(x, y) by the occupation time of the box of side ``bin_width`` at y."""
    if not cfg.dom.bounded:
        raise ContractError("the Green function estimator needs a bounded domain")
    x = _pt(cfg, x)
    y = _pt(cfg, y)
    if np.all(x == y):
        raise DomainError("the Green function estimator needs x != y")
    half = bin_width / 2.0
    hist = HistSpec(tuple(y - half), tuple(y + half), 1)
    ens = run_ensemble(cfg.with_(obs_times=()), x, n_paths, workers=workers, hist=hist)
    n = ens.n_paths
    vol = bin_width ** cfg.kernel.d
    m = ens.hist_sum[0] / n
    var = max(ens.hist_sumsq[0] / n - m * m, 0.0) * n / max(n - 1, 1)
    censored = float(np.mean(~np.isfinite(ens.exit_time)))
    ok = censored < CENSOR_LIMIT
    return EstimateReport(
        "green", m / vol, math.sqrt(var / n) / vol, n, cfg.eps_cut, cfg.seed, cfg.t_max, x, y,
        conclusive=ok, note="" if ok else f"censored fraction {censored:.3g} >= {CENSOR_LIMIT}",
        extra={"censored": censored, "bin_width": bin_width},
    )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    std_error: float
    intercept: float
    r2: float

    @property
    def ci95(self):
        return (self.slope - 1.96 * self.std_error, self.slope + 1.96 * self.std_error)


def _r2(resid, y):
    ss = float(((y - y.mean()) ** 2).sum())
    if ss <= y.size * (1e-12 * max(1.0, float(np.abs(y).max()))) ** 2:
        # flat data: a perfect fit has nothing left to explain
        return 1.0 if np.allclose(resid, 0.0, atol=1e-12) else 0.0
    return 1.0 - float(resid @ resid) / ss


def loglog_slope(xs, values, std_errors):
    """Weighted least-squares slope of log(value) against log(x).

    Weights come from the delta-method variance (se / value)**2 of each point.
    """
    lx = np.log(np.asarray(xs, dtype=float))
    v = np.asarray(values, dtype=float)
    s = np.asarray(std_errors, dtype=float)
    if lx.size < 2 or np.any(v <= 0):
        raise DomainError("slope fit needs at least two positive values")
    ly = np.log(v)
    w = 1.0 / np.maximum((s / v) ** 2, 1e-300)
    A = np.column_stack([np.ones_like(lx), lx])
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * ly))
    resid = ly - A @ beta
    r2 = _r2(resid, ly) if lx.size > 2 else 1.0
    return SlopeFit(float(beta[1]), float(math.sqrt(cov[1, 1])), float(beta[0]), r2)


def lambda_fit(exit_time, times):
    """Decay rate -d/dt log P(tau > t) by least squares on the survival curve.

    The standard error uses the exact covariance of the empirical survival
    function, cov(log S_i, log S_j) = (1 - S_i) / (N S_i) for t_i <= t_j.
    Returns (rate, se, r2).
    """
    times = np.sort(np.asarray(times, dtype=float))
    n = exit_time.size
    S = np.array([np.count_nonzero(exit_time > t) for t in times]) / n
    if np.any(S <= 0):
        raise DomainError("no surviving paths at the end of the fit window")
    ly = np.log(S)
    tc = times - times.mean()
    a = tc / float(tc @ tc)
    slope = float(a @ ly)
    v = (1.0 - S) / (n * S)
    C = v[np.minimum.outer(np.arange(times.size), np.arange(times.size))]
    se = math.sqrt(max(float(a @ C @ a), 0.0))
    fit = ly.mean() + slope * tc
    r2 = _r2(ly - fit, ly)
    return -slope, se, r2


def estimate_lambda_D(cfg, x, T, n_times=21, n_paths=None, workers=1, r2_min=0.99):
    """Fit lambda_D on t in [T, 3T] from the survival curve started at x."""
    if not cfg.dom.bounded:
        raise ContractError("lambda_D needs a bounded domain")
    ens = run_ensemble(cfg.with_(t_max=3.0 * T, obs_times=()), x, n_paths, workers=workers)
    rate, se, r2 = lambda_fit(ens.exit_time, np.linspace(T, 3.0 * T, n_times))
    ok = r2 >= r2_min
    return EstimateReport(
        "lambda_D", rate, se, ens.n_paths, cfg.eps_cut, cfg.seed, T, ens.start,
        conclusive=ok, note="" if ok else f"R^2 = {r2:.4f} < {r2_min}",
        extra={"r2": r2, "window": (T, 3.0 * T)},
    )


# ---------------------------------------------------------------------------
# sandwich fits


def _default_point(rep):
    r = float(np.linalg.norm(np.subtract(rep.x, rep.y))) if rep.x and rep.y else 0.0
    return (rep.t, r)


def sandwich_verdict(estimates: Sequence[EstimateReport], envelope, points=None,
                     tolerance=SANDWICH_RATIO, se_rule=SE_RULE):
    """Fit one constant per side and test the ratio c_upper / c_lower.

    ``points`` holds the argument tuple of the envelope shapes for each
    estimate; the default is ``(t, |x - y|)``.
    """
    estimates = list(estimates)
    if not estimates:
        raise ContractError("sandwich_verdict needs a non-empty grid")
    bad = [i for i, e in enumerate(estimates) if not e.conclusive or not np.isfinite(e.value)]
    if bad:
        return Verdict(math.nan, math.nan, math.nan, tolerance, "inconclusive",
                       f"inconclusive estimates at grid points {bad}")
    points = points if points is not None else [_default_point(e) for e in estimates]
    v = np.array([e.value for e in estimates])
    lo = np.array([float(envelope.lower_shape(*p)) for p in points])
    up = np.array([float(envelope.upper_shape(*p)) for p in points])
    if np.any(lo <= 0) or np.any(up <= 0):
        return Verdict(math.nan, math.nan, math.nan, tolerance, "fail", "envelope shape vanishes on the grid")
    c_upper = float(np.max(v / up))
    c_lower = float(np.min(v / lo))
    ratio = c_upper / c_lower if c_lower > 0 else math.inf
    noisy = [i for i, e in enumerate(estimates) if not e.std_error < se_rule * abs(e.value)]
    reasons = []
    if not ratio <= tolerance:
        reasons.append(f"ratio {ratio:.4g} > {tolerance}")
    if noisy:
        reasons.append(f"standard error >= {se_rule:.0%} of the estimate at grid points {noisy}")
    return Verdict(c_lower, c_upper, ratio, tolerance, "fail" if reasons else "pass", "; ".join(reasons))


def attach_verdict(estimates, verdict):
    return [replace(e, envelope_verdict=verdict) for e in estimates]


# ---------------------------------------------------------------------------
# Levy system and Meyer domination


def annulus_intensity(kernel, y, center, r_in, r_out, n_rad=48, n_ang=256):
    """W(y) = int_A J(y, u) du for the annulus A = {r_in < |u - c| < r_out} (d <= 2).

    Gauss-Legendre in the radius and the trapezoid rule in the angle, which is
    spectrally accurate while y stays away from A.
    """
    d = kernel.d
    y = np.atleast_2d(np.asarray(y, dtype=float))
    c = np.atleast_1d(np.asarray(center, dtype=float))
    g, w = np.polynomial.legendre.leggauss(n_rad)
    rho = 0.5 * (r_out - r_in) * g + 0.5 * (r_out + r_in)
    wr = 0.5 * (r_out - r_in) * w
    if d == 1:
        u = np.concatenate([c[0] + rho, c[0] - rho])[None, :, None]
        ww = np.concatenate([wr, wr])
    elif d == 2:
        phi = 2.0 * np.pi * np.arange(n_ang) / n_ang
        R, P = np.meshgrid(rho, phi, indexing="ij")
        u = (c + np.stack([R * np.cos(P), R * np.sin(P)], axis=-1)).reshape(1, -1, 2)
        ww = (np.outer(wr * rho, np.full(n_ang, 2.0 * np.pi / n_ang))).ravel()
    else:
        raise ContractError("annulus_intensity supports d <= 2")
    out = np.empty(len(y))
    for i0 in range(0, len(y), 256):
        blk = y[i0:i0 + 256, None, :]
        out[i0:i0 + 256] = jump_kernel(kernel, np.broadcast_to(blk, (blk.shape[0], u.shape[1], d)),
                                       np.broadcast_to(u, (blk.shape[0], u.shape[1], d))) @ ww
    return out


def intensity_table(kernel, center, r_in, r_out, lo, hi, n=65):
    """Tabulate :func:`annulus_intensity` on the grid [lo, hi]^d with n nodes per axis."""
    d = kernel.d
    ax = np.linspace(lo, hi, n)
    if d == 1:
        nodes = ax[:, None]
    else:
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
    vals = annulus_intensity(kernel, nodes, center, r_in, r_out)
    return WTable(vals, float(lo), float(hi), int(n))


@dataclass(frozen=True)
class LevyCheck:
    frequency: float
    frequency_se: float
    predicted: float
    predicted_se: float
    diff_se: float
    n_paths: int

    @property
    def z(self):
        return (self.frequency - self.predicted) / self.diff_se if self.diff_se > 0 else math.inf

    def passed(self, k=3.0):
        return abs(self.frequency - self.predicted) <= k * self.diff_se


def levy_system_check(cfg, x, r_in, r_out, center=None, n_paths=None, workers=1, table_n=65):
    """Compare P_x(Y_{tau_U} in A) with E_x int_0^{tau_U} W(Y_s) ds.

    U is ``cfg.dom`` (a ball) and A the annulus r_in < |u - center| < r_out.
    The comparison uses the per-path difference of the two sides, so its
    standard error accounts for their correlation.
    """
    dom = cfg.dom
    if dom.shape not in ("ball", "interval_union") or not dom.bounded:
        raise ContractError("the Levy system check needs U = ball")
    d = cfg.kernel.d
    center = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if dom.shape == "ball":
        c0, rad = np.asarray(dom.center, dtype=float), float(dom.radius)
    else:
        (a, b), = dom.intervals
        c0, rad = np.array([(a + b) / 2.0]), (b - a) / 2.0
    lo = float(np.min(c0) - rad)
    hi = float(np.max(c0) + rad)
    table = intensity_table(cfg.kernel, center, r_in, r_out, lo, hi, table_n)
    ens = run_ensemble(cfg.with_(obs_times=()), x, n_paths, workers=workers, wtable=table)
    exited = np.isfinite(ens.exit_time)
    if np.any(~exited):
        raise ContractError("some paths were censored; raise t_max for the Levy system check")
    dist = np.linalg.norm(ens.exit_pos - center, axis=1)
    hit = (dist > r_in) & (dist < r_out)
    f, fse = mean_se(hit)
    p, pse = mean_se(ens.w_integral)
    _, dse = mean_se(hit - ens.w_integral)
    return LevyCheck(f, fse, p, pse, dse, ens.n_paths)


@dataclass(frozen=True)
class MeyerRow:
    x: tuple
    y: tuple
    p_Y: float
    p_X: float
    factor: float
    diff_se: float

    @property
    def margin(self):
        """factor * p_X - p_Y; domination holds when this is >= -3 SE."""
        return self.factor * self.p_X - self.p_Y

    def passed(self, k=3.0):
        return self.p_Y <= self.factor * self.p_X + k * self.diff_se


def meyer_domination(cfg, t, x, ys, bin_width, n_paths=None, workers=1):
    """Histogram estimates of p_D for Y and X from one coupled ensemble.

    The factor is exp(t * sup J) with J the removal intensity.
    """
    x = _pt(cfg, x)
    Jsup = meyer_rate_sup(cfg.kernel)
    factor = math.exp(t * Jsup)
    ens = run_meyer_ensemble(cfg.with_(obs_times=(t,), t_max=t), x, n_paths, workers=workers)
    half = bin_width / 2.0
    vol = bin_width ** cfg.kernel.d
    aX = ens.exit_X > t
    aY = ens.exit_Y > t
    rows = []
    for y in ys:
        y = _pt(cfg, y)
        hX = (aX & np.all(np.abs(ens.obs_X[:, 0, :] - y) < half, axis=1)).astype(float)
        hY = (aY & np.all(np.abs(ens.obs_Y[:, 0, :] - y) < half, axis=1)).astype(float)
        _, dse = mean_se(hY - factor * hX)
        rows.append(MeyerRow(tuple(map(float, x)), tuple(map(float, y)), hY.mean() / vol, hX.mean() / vol, factor, dse / vol))
    return rows, Jsup


def removal_frequency(cfg, x, band, n_paths=None):
    """Fraction of X-jumps with size in ``band`` that Y removes."""
    ens = run_meyer_ensemble(cfg.with_(obs_times=()), x, n_paths, band=band)
    nx, ny = (int(v) for v in ens.band_counts)
    if nx == 0:
        return math.nan, math.nan, 0
    p = 1.0 - ny / nx
    return p, math.sqrt(p * (1 - p) / nx), nx


def bin_average(f, y, bin_width, n=16):
    """Average of a scalar function of y in d = 1 over the bin centred at y (Gauss-Legendre)."""
    g, w = np.polynomial.legendre.leggauss(n)
    return float(sum(wi * f(y + 0.5 * bin_width * gi) for gi, wi in zip(g, w)) / 2.0)


def spearman_trend(values):
    """Spearman rank correlation of values against their index, with its two-sided p-value."""
    res = stats.spearmanr(np.arange(len(values)), values)
    return float(res.statistic), float(res.pvalue)


def two_sided_p(z):
    return float(special.erfc(abs(z) / math.sqrt(2.0)))
