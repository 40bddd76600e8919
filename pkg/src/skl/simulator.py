"""Compound-Poisson simulation of the killed jump process with thinning.

Jumps of size below ``eps_cut`` are either discarded (default) or replaced by
a Brownian motion with matching covariance (``small_jumps="gaussian"``).
Larger jumps come from a homogeneous Poisson clock at the dominating rate

    lam_bar = kappa_max * |S^{d-1}| * eps**(-alpha) / alpha,

each candidate being a Pareto(alpha) radius above eps in a uniform direction,
accepted with probability kappa(x, x + z) / (kappa_max * psi1(|z|)).

Random numbers come from Philox keyed by the seed and addressed by
``(stream, path, event counter)``, so each path is reproducible in isolation
and results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigError, ContractError, DomainError
from .geometry import DomainSpec, nb_contains, nb_dist
from .kernels import KernelSpec, kappa_radial_integral, psi1, sphere_area
from .rng import split_seed, uniforms4

CHUNK = 4096
SMALL_JUMP_MODES = ("discard", "gaussian")

# fpar layout
F_ALPHA, F_EPS, F_LAMBAR, F_KMAX, F_BETA, F_GAMMA, F_K0, F_KEPS, F_KOMEGA, F_TMAX, F_SIGCOEF = range(11)
# ipar layout
I_D, I_KIND, I_SMALL, I_BETAINF, I_HASW, I_HISTNB = range(6)

_OBS_BIT = np.uint64(1) << np.uint64(63)
_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# compiled core


@njit(cache=True, nogil=True, error_model="numpy")
def _kappa(fpar, d, x, y):
    keps = fpar[F_KEPS]
    if keps == 0.0:
        return fpar[F_K0]
    s = 0.0
    for i in range(d):
        s += x[i] + y[i]
    return fpar[F_K0] + keps * math.sin(fpar[F_KOMEGA] * s)


@njit(cache=True, nogil=True, error_model="numpy")
def _accept_prob(fpar, ipar, d, x, y, r):
    if r > 1.0:
        if ipar[I_BETAINF] == 1:
            return 0.0
        if fpar[F_BETA] > 0.0:
            return _kappa(fpar, d, x, y) / fpar[F_KMAX] * math.exp(-fpar[F_GAMMA] * (r ** fpar[F_BETA] - 1.0))
    return _kappa(fpar, d, x, y) / fpar[F_KMAX]


@njit(cache=True, nogil=True, error_model="numpy")
def _normals(k0, k1, stream, path, counter, out, d):
    a, b, c, e = uniforms4(k0, k1, stream, path, counter)
    rad = math.sqrt(-2.0 * math.log(a))
    out[0] = rad * math.cos(_TWO_PI * b)
    if d > 1:
        out[1] = rad * math.sin(_TWO_PI * b)
    if d > 2:
        out[2] = math.sqrt(-2.0 * math.log(c)) * math.cos(_TWO_PI * e)


@njit(cache=True, nogil=True, error_model="numpy")
def _direction(k0, k1, stream, path, ctr, u2, d, out):
    if d == 1:
        out[0] = 1.0 if u2 < 0.5 else -1.0
    elif d == 2:
        out[0] = math.cos(_TWO_PI * u2)
        out[1] = math.sin(_TWO_PI * u2)
    else:
        c0, _, _, _ = uniforms4(k0, k1, stream, path, np.uint64(3 * ctr + 2))
        z = 2.0 * u2 - 1.0
        s = math.sqrt(max(0.0, 1.0 - z * z))
        out[0] = s * math.cos(_TWO_PI * c0)
        out[1] = s * math.sin(_TWO_PI * c0)
        out[2] = z


@njit(cache=True, nogil=True, error_model="numpy")
def _box_index(x, d, hbox, nb):
    # hbox = [lo_0, hi_0, lo_1, hi_1, ...]
    idx = 0
    for i in range(d):
        lo = hbox[2 * i]
        hi = hbox[2 * i + 1]
        if not (lo <= x[i] < hi):
            return -1
        j = int((x[i] - lo) / (hi - lo) * nb)
        if j >= nb:
            j = nb - 1
        idx = idx * nb + j
    return idx


@njit(cache=True, nogil=True, error_model="numpy")
def _w_lookup(x, d, wtab, wlo, whi, wn):
    """Multilinear interpolation of a table on the box [wlo, whi]^d with wn nodes per axis."""
    h = (whi - wlo) / (wn - 1)
    if d == 1:
        s = (x[0] - wlo) / h
        i = min(max(int(s), 0), wn - 2)
        f = s - i
        return (1 - f) * wtab[i] + f * wtab[i + 1]
    s0 = (x[0] - wlo) / h
    s1 = (x[1] - wlo) / h
    i = min(max(int(s0), 0), wn - 2)
    j = min(max(int(s1), 0), wn - 2)
    f = s0 - i
    g = s1 - j
    return ((1 - f) * (1 - g) * wtab[i * wn + j] + f * (1 - g) * wtab[(i + 1) * wn + j]
            + (1 - f) * g * wtab[i * wn + j + 1] + f * g * wtab[(i + 1) * wn + j + 1])


@njit(cache=True, nogil=True, error_model="numpy")
def _path_core(path, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t,
               wtab, wbox, hbox, hloc, touched,
               obs_out, exit_out, pre_out, final_out,
               rec_t, rec_x, rec_k):
    """Simulate one path. Returns (exit_time, n_jumps, w_integral, n_records, n_touched).

    exit_time is +inf when the path survives to t_max.  Occupation time inside
    the histogram box is accumulated into ``hloc`` with the touched bins listed
    in ``touched``; ``rec_*`` receive the event list when they are non-empty.
    """
    d = ipar[I_D]
    kind = ipar[I_KIND]
    gaussian = ipar[I_SMALL] == 1
    hasw = ipar[I_HASW] == 1
    hnb = ipar[I_HISTNB]
    alpha = fpar[F_ALPHA]
    eps = fpar[F_EPS]
    lam = fpar[F_LAMBAR]
    tmax = fpar[F_TMAX]
    ialpha = -1.0 / alpha
    nobs = obs_t.shape[0]
    nrec_max = rec_t.shape[0]

    x = np.empty(d)
    y = np.empty(d)
    z = np.empty(d)
    g = np.empty(3)
    for i in range(d):
        x[i] = start[i]
    t = 0.0
    io = 0
    nj = 0
    nrec = 0
    ntouch = 0
    wint = 0.0
    exit_time = np.inf
    ctr = 0
    while True:
        u0, u1, u2, u3 = uniforms4(k0, k1, stream, np.uint64(path), np.uint64(3 * ctr))
        dt = -math.log(u0) / lam
        t_new = t + dt
        t_end = min(t_new, tmax)
        sig = 0.0
        if gaussian:
            kxx = _kappa(fpar, d, x, x)
            sig = math.sqrt(kxx * fpar[F_SIGCOEF])
        # observations inside (t, t_end]
        while io < nobs and obs_t[io] <= t_end:
            if gaussian:
                _normals(k0, k1, stream, np.uint64(path),
                         _OBS_BIT | np.uint64(64 * ctr + (io & 63)), g, d)
                sd = sig * math.sqrt(obs_t[io] - t)
                for i in range(d):
                    obs_out[io, i] = x[i] + sd * g[i]
            else:
                for i in range(d):
                    obs_out[io, i] = x[i]
            io += 1
        held = t_end - t
        if hasw:
            wint += held * _w_lookup(x, d, wtab, wbox[0], wbox[1], int(wbox[2]))
        if hnb > 0:
            b = _box_index(x, d, hbox, hnb)
            if b >= 0:
                if hloc[b] == 0.0:
                    touched[ntouch] = b
                    ntouch += 1
                hloc[b] += held
        if t_new >= tmax:
            t = tmax
            break
        if gaussian:
            _normals(k0, k1, stream, np.uint64(path), np.uint64(3 * ctr + 1), g, d)
            sd = sig * math.sqrt(dt)
            for i in range(d):
                y[i] = x[i] + sd * g[i]
            crossed = not nb_contains(kind, d, fp, rp, y)
            if not crossed and sd > 0.0:
                # Brownian bridge between the two monitoring times may have left and come back
                expo = 2.0 * nb_dist(kind, d, fp, rp, x) * nb_dist(kind, d, fp, rp, y) / (sd * sd)
                if expo < 40.0:
                    _, c1, _, _ = uniforms4(k0, k1, stream, np.uint64(path), np.uint64(3 * ctr + 2))
                    crossed = c1 < math.exp(-expo)
            if crossed:
                for i in range(d):
                    pre_out[i] = x[i]
                    exit_out[i] = y[i]
                    x[i] = y[i]
                exit_time = t_new
                t = t_new
                break
            for i in range(d):
                x[i] = y[i]
        r = eps * u1 ** ialpha
        _direction(k0, k1, stream, np.uint64(path), ctr, u2, d, z)
        for i in range(d):
            y[i] = x[i] + r * z[i]
        if u3 < _accept_prob(fpar, ipar, d, x, y, r):
            nj += 1
            inside = nb_contains(kind, d, fp, rp, y)
            if nrec < nrec_max:
                rec_t[nrec] = t_new
                for i in range(d):
                    rec_x[nrec, i] = y[i]
                rec_k[nrec] = 0 if inside else 1
            nrec += 1
            if not inside:
                for i in range(d):
                    pre_out[i] = x[i]
                    exit_out[i] = y[i]
                    x[i] = y[i]
                exit_time = t_new
                t = t_new
                break
            for i in range(d):
                x[i] = y[i]
        t = t_new
        ctr += 1
    while io < nobs:
        for i in range(d):
            obs_out[io, i] = np.nan
        io += 1
    for i in range(d):
        final_out[i] = x[i]
    if exit_time == np.inf:
        if nrec < nrec_max:
            rec_t[nrec] = tmax
            for i in range(d):
                rec_x[nrec, i] = x[i]
            rec_k[nrec] = 2
        nrec += 1
    elif gaussian and nrec < nrec_max and (nrec == 0 or rec_t[nrec - 1] != exit_time):
        rec_t[nrec] = exit_time
        for i in range(d):
            rec_x[nrec, i] = x[i]
        rec_k[nrec] = 1
        nrec += 1
    return exit_time, nj, wint, nrec, ntouch


@njit(cache=True, nogil=True, error_model="numpy")
def _run_chunk(p0, p1, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t, wtab, wbox, hbox,
               obs_out, exit_t, exit_x, pre_x, final_x, njumps, wint, hsum, hsq):
    d = ipar[I_D]
    hnb = ipar[I_HISTNB]
    nbins = hsum.shape[0]
    hloc = np.zeros(max(nbins, 1))
    touched = np.empty(max(nbins, 1), dtype=np.int64)
    rec_t = np.empty(0)
    rec_x = np.empty((0, d))
    rec_k = np.empty(0, dtype=np.int8)
    for p in range(p0, p1):
        j = p - p0
        et, nj, wi, _, nt = _path_core(p, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t,
                                       wtab, wbox, hbox, hloc, touched,
                                       obs_out[j], exit_x[j], pre_x[j], final_x[j],
                                       rec_t, rec_x, rec_k)
        exit_t[j] = et
        njumps[j] = nj
        wint[j] = wi
        if hnb > 0:
            for m in range(nt):
                b = touched[m]
                v = hloc[b]
                hsum[b] += v
                hsq[b] += v * v
                hloc[b] = 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def _pair_core(path, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t, band,
               obsX, obsY, exits, counts, rec_t, rec_x, rec_k):
    """Coupled (X, Y) pair driven by one event stream.

    X uses the untempered kernel and accepts when u * kappa_max < kappa; Y
    additionally needs u * kappa_max * psi1(r) < kappa, so while the two sit at
    the same point every Y-jump is an X-jump.  ``counts`` receives
    (X jumps with |z| in band while coupled, of those also taken by Y).
    """
    d = ipar[I_D]
    kind = ipar[I_KIND]
    alpha = fpar[F_ALPHA]
    eps = fpar[F_EPS]
    lam = fpar[F_LAMBAR]
    tmax = fpar[F_TMAX]
    kmax = fpar[F_KMAX]
    ialpha = -1.0 / alpha
    nobs = obs_t.shape[0]
    nrec_max = rec_t.shape[0]
    xX = np.empty(d)
    xY = np.empty(d)
    y = np.empty(d)
    z = np.empty(d)
    for i in range(d):
        xX[i] = start[i]
        xY[i] = start[i]
    aliveX = True
    aliveY = True
    exits[0] = np.inf
    exits[1] = np.inf
    t = 0.0
    io = 0
    ctr = 0
    nrec = 0
    while aliveX or aliveY:
        u0, u1, u2, u3 = uniforms4(k0, k1, stream, np.uint64(path), np.uint64(3 * ctr))
        t_new = t - math.log(u0) / lam
        t_end = min(t_new, tmax)
        while io < nobs and obs_t[io] <= t_end:
            for i in range(d):
                obsX[io, i] = xX[i] if aliveX else np.nan
                obsY[io, i] = xY[i] if aliveY else np.nan
            io += 1
        if t_new >= tmax:
            break
        r = eps * u1 ** ialpha
        _direction(k0, k1, stream, np.uint64(path), ctr, u2, d, z)
        if r > 1.0 and ipar[I_BETAINF] == 1:
            psi = np.inf
        elif r > 1.0:
            psi = math.exp(fpar[F_GAMMA] * (r ** fpar[F_BETA] - 1.0))
        else:
            psi = 1.0
        coupled = aliveX and aliveY
        if coupled:
            for i in range(d):
                if xX[i] != xY[i]:
                    coupled = False
        inband = band[0] <= r < band[1]
        if aliveX:
            for i in range(d):
                y[i] = xX[i] + r * z[i]
            if u3 * kmax < _kappa(fpar, d, xX, y):
                if coupled and inband:
                    counts[0] += 1
                if nrec < nrec_max:
                    rec_t[nrec] = t_new
                    for i in range(d):
                        rec_x[nrec, i] = y[i]
                    rec_k[nrec] = 0
                nrec += 1
                for i in range(d):
                    xX[i] = y[i]
                if not nb_contains(kind, d, fp, rp, xX):
                    aliveX = False
                    exits[0] = t_new
                    if nrec - 1 < nrec_max:
                        rec_k[nrec - 1] = 1
        if aliveY:
            for i in range(d):
                y[i] = xY[i] + r * z[i]
            if u3 * kmax * psi < _kappa(fpar, d, xY, y):
                if coupled and inband:
                    counts[1] += 1
                if nrec < nrec_max:
                    rec_t[nrec] = t_new
                    for i in range(d):
                        rec_x[nrec, i] = y[i]
                    rec_k[nrec] = 10
                nrec += 1
                for i in range(d):
                    xY[i] = y[i]
                if not nb_contains(kind, d, fp, rp, xY):
                    aliveY = False
                    exits[1] = t_new
                    if nrec - 1 < nrec_max:
                        rec_k[nrec - 1] = 11
        t = t_new
        ctr += 1
    while io < nobs:
        for i in range(d):
            obsX[io, i] = np.nan
            obsY[io, i] = np.nan
        io += 1
    return nrec


@njit(cache=True, nogil=True, error_model="numpy")
def _run_pair_chunk(p0, p1, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t, band,
                    obsX, obsY, exits, counts):
    d = ipar[I_D]
    rec_t = np.empty(0)
    rec_x = np.empty((0, d))
    rec_k = np.empty(0, dtype=np.int8)
    for p in range(p0, p1):
        j = p - p0
        _pair_core(p, k0, k1, stream, fpar, ipar, fp, rp, start, obs_t, band,
                   obsX[j], obsY[j], exits[j], counts[j], rec_t, rec_x, rec_k)


@njit(cache=True, nogil=True, error_model="numpy")
def _sample_jumps(n, k0, k1, stream, path, ctr0, fpar, ipar, x, out):
    """n accepted jumps from x; returns the next free event counter."""
    d = ipar[I_D]
    alpha = fpar[F_ALPHA]
    eps = fpar[F_EPS]
    ialpha = -1.0 / alpha
    y = np.empty(d)
    z = np.empty(d)
    ctr = ctr0
    k = 0
    while k < n:
        _, u1, u2, u3 = uniforms4(k0, k1, stream, np.uint64(path), np.uint64(3 * ctr))
        r = eps * u1 ** ialpha
        _direction(k0, k1, stream, np.uint64(path), ctr, u2, d, z)
        for i in range(d):
            y[i] = x[i] + r * z[i]
        ctr += 1
        if u3 < _accept_prob(fpar, ipar, d, x, y, r):
            for i in range(d):
                out[k, i] = r * z[i]
            k += 1
    return ctr


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``obs_times`` are the times at which positions are recorded; ``t_max``
    censors every path.  ``stream`` separates independent experiments that
    share a seed.
    """

    kernel: KernelSpec
    dom: DomainSpec
    t_max: float
    eps_cut: float
    seed: int = 0
    path_budget: int = 10**5
    small_jumps: str = "discard"
    obs_times: tuple = ()
    stream: int = 0
    scale: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "obs_times", tuple(sorted(float(t) for t in self.obs_times)))
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self):
        out = []
        if self.kernel.d != self.dom.d:
            out.append(f"kernel dimension {self.kernel.d} differs from domain dimension {self.dom.d}")
        if not 0.0 < self.eps_cut < 1.0:
            out.append(f"eps_cut must lie in (0, 1), got {self.eps_cut}")
        if self.scale is not None and self.eps_cut > 0.1 * self.scale * (1 + 1e-12):
            out.append(f"eps_cut = {self.eps_cut} exceeds 0.1 x the spatial scale {self.scale}")
        if not self.t_max > 0:
            out.append("t_max must be positive")
        if self.path_budget < 1:
            out.append("path_budget must be >= 1")
        if self.small_jumps not in SMALL_JUMP_MODES:
            out.append(f"small_jumps must be one of {SMALL_JUMP_MODES}")
        if any(t <= 0 or t > self.t_max for t in self.obs_times):
            out.append("observation times must lie in (0, t_max]")
        if len(self.obs_times) > 64:
            out.append("at most 64 observation times")
        if self.kernel.d > 3:
            out.append("the simulator supports d <= 3")
        return out

    @property
    def rate_bound(self):
        k = self.kernel
        return k.kappa.upper * sphere_area(k.d) * self.eps_cut ** (-k.alpha) / k.alpha

    @property
    def small_jump_variance(self):
        """Per-coordinate variance rate of the jumps below eps_cut, at kappa = 1."""
        k = self.kernel
        return sphere_area(k.d) * self.eps_cut ** (2.0 - k.alpha) / ((2.0 - k.alpha) * k.d)

    def with_(self, **changes):
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SimConfig(**data)

    def pack(self):
        k = self.kernel
        fpar = np.zeros(11)
        fpar[F_ALPHA] = k.alpha
        fpar[F_EPS] = self.eps_cut
        fpar[F_LAMBAR] = self.rate_bound
        fpar[F_KMAX] = k.kappa.upper
        fpar[F_BETA] = 0.0 if k.beta_is_inf else k.beta
        fpar[F_GAMMA] = k.gamma1
        fpar[F_K0] = k.kappa.kappa0
        fpar[F_KEPS] = k.kappa.eps
        fpar[F_KOMEGA] = k.kappa.omega
        fpar[F_TMAX] = self.t_max
        fpar[F_SIGCOEF] = self.small_jump_variance
        kind, fp, rp = self.dom.pack()
        ipar = np.zeros(6, dtype=np.int64)
        ipar[I_D] = k.d
        ipar[I_KIND] = kind
        ipar[I_SMALL] = SMALL_JUMP_MODES.index(self.small_jumps)
        ipar[I_BETAINF] = 1 if k.beta_is_inf else 0
        return fpar, ipar, fp, rp

    def keys(self):
        return split_seed(self.seed)


@dataclass
class Trajectory:
    """Event list of one path: accepted jumps, then an exit or censoring record."""

    path_id: int
    times: np.ndarray
    positions: np.ndarray
    kinds: np.ndarray
    status: str
    exit_time: float = math.inf
    exit_position: Optional[np.ndarray] = None
    pre_exit_position: Optional[np.ndarray] = None
    final_position: Optional[np.ndarray] = None

    KIND_NAMES = {0: "jump", 1: "exit", 2: "censored"}

    @property
    def events(self):
        return [(float(t), x.copy()) for t, x in zip(self.times, self.positions)]

    @property
    def exited(self):
        return self.status == "exited"


# ---------------------------------------------------------------------------
# single paths


def _start(cfg, start):
    x = np.atleast_1d(np.asarray(start, dtype=float))
    if x.shape != (cfg.kernel.d,):
        raise DomainError(f"start must have shape ({cfg.kernel.d},)")
    kind, fp, rp = cfg.dom.pack()
    if not nb_contains(kind, cfg.kernel.d, fp, rp, x):
        raise ContractError(f"start point {x} is not in the domain")
    return x


def _empty_aux(d):
    return np.zeros(1), np.array([0.0, 1.0, 2.0]), np.zeros(2 * d), np.zeros(1), np.zeros(1, dtype=np.int64)


def simulate_path(cfg, start, rng_stream=0, max_events=1 << 16):
    """One path with its event list; ``rng_stream`` is the path index within the seed."""
    x0 = _start(cfg, start)
    fpar, ipar, fp, rp = cfg.pack()
    k0, k1 = cfg.keys()
    d = cfg.kernel.d
    obs_t = np.asarray(cfg.obs_times, dtype=float)
    wtab, wbox, hbox, hloc, touched = _empty_aux(d)
    while True:
        rec_t = np.empty(max_events)
        rec_x = np.empty((max_events, d))
        rec_k = np.empty(max_events, dtype=np.int8)
        obs = np.empty((len(obs_t), d))
        ex, pre, fin = np.full(d, np.nan), np.full(d, np.nan), np.empty(d)
        et, nj, _, nrec, _ = _path_core(int(rng_stream), k0, k1, np.uint64(cfg.stream), fpar, ipar, fp, rp,
                                        x0, obs_t, wtab, wbox, hbox, hloc, touched,
                                        obs, ex, pre, fin, rec_t, rec_x, rec_k)
        if nrec <= max_events:
            break
        max_events = 2 * nrec
    exited = math.isfinite(et)
    return Trajectory(
        path_id=int(rng_stream),
        times=rec_t[:nrec].copy(),
        positions=rec_x[:nrec].copy(),
        kinds=rec_k[:nrec].copy(),
        status="exited" if exited else "alive_at_t_max",
        exit_time=et,
        exit_position=ex if exited else None,
        pre_exit_position=pre if exited else None,
        final_position=fin,
    )


def simulate_meyer_pair(cfg, start, rng_stream=0, max_events=1 << 16):
    """Coupled (X, Y): X has the untempered kernel, Y thins X's jumps by 1/psi1."""
    if cfg.kernel.beta == 0.0:
        raise ContractError("the Meyer pair needs beta > 0")
    x0 = _start(cfg, start)
    fpar, ipar, fp, rp = cfg.pack()
    k0, k1 = cfg.keys()
    d = cfg.kernel.d
    obs_t = np.asarray(cfg.obs_times, dtype=float)
    while True:
        rec_t = np.empty(max_events)
        rec_x = np.empty((max_events, d))
        rec_k = np.empty(max_events, dtype=np.int8)
        obsX = np.empty((len(obs_t), d))
        obsY = np.empty((len(obs_t), d))
        exits = np.empty(2)
        counts = np.zeros(2, dtype=np.int64)
        nrec = _pair_core(int(rng_stream), k0, k1, np.uint64(cfg.stream), fpar, ipar, fp, rp, x0, obs_t,
                          np.array([np.inf, np.inf]), obsX, obsY, exits, counts, rec_t, rec_x, rec_k)
        if nrec <= max_events:
            break
        max_events = 2 * nrec
    out = []
    for which, et in ((0, exits[0]), (1, exits[1])):
        sel = (rec_k[:nrec] // 10) == which
        times = rec_t[:nrec][sel]
        pos = rec_x[:nrec][sel]
        kinds = rec_k[:nrec][sel] % 10
        exited = math.isfinite(et)
        final = pos[-1].copy() if len(pos) else x0.copy()
        if not exited:
            times = np.append(times, cfg.t_max)
            pos = np.vstack([pos, final]) if len(pos) else final[None, :]
            kinds = np.append(kinds, 2).astype(np.int8)
        pre = pos[-2].copy() if exited and len(pos) > 1 else (x0.copy() if exited else None)
        out.append(Trajectory(
            path_id=int(rng_stream), times=times, positions=pos, kinds=kinds,
            status="exited" if exited else "alive_at_t_max", exit_time=et,
            exit_position=final if exited else None, pre_exit_position=pre, final_position=final,
        ))
    return out[0], out[1]


@dataclass
class RngState:
    seed: int
    stream: int = 0
    path: int = 0
    counter: int = 0


def sample_jump(kernel, x, eps_cut, rng_state):
    """One accepted displacement z ~ J(x, x + z) 1{|z| > eps}; returns (z, advanced state)."""
    z, st = sample_jumps(kernel, x, eps_cut, 1, rng_state)
    return z[0], st


def sample_jumps(kernel, x, eps_cut, n, rng_state):
    if eps_cut <= 0:
        raise DomainError("eps_cut must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cfg = SimConfig(kernel, DomainSpec.full_space(kernel.d), 1.0, min(eps_cut, 0.999), rng_state.seed)
    fpar, ipar, _, _ = cfg.pack()
    fpar[F_EPS] = eps_cut
    k0, k1 = split_seed(rng_state.seed)
    out = np.empty((n, kernel.d))
    ctr = _sample_jumps(n, k0, k1, np.uint64(rng_state.stream), rng_state.path, rng_state.counter,
                        fpar, ipar, x, out)
    return out, RngState(rng_state.seed, rng_state.stream, rng_state.path, int(ctr))


def jump_rate(kernel, x, eps_cut):
    """lambda_eps(x) = int_{|z| > eps} J(x, x + z) dz by radial quadrature."""
    if eps_cut <= 0:
        raise DomainError("eps_cut must be positive")
    if kernel.beta_is_inf:
        if eps_cut >= 1.0:
            return 0.0
        return kappa_radial_integral(kernel, x, lambda r: 1.0, eps_cut, 1.0, what="jump_rate")
    return kappa_radial_integral(kernel, x, lambda r: 1.0 / float(psi1(kernel, r)), eps_cut, what="jump_rate")


def radial_cdf(kernel, eps_cut):
    """CDF of accepted jump radii, F(r) = int_eps^r s**(-1-alpha)/psi1(s) ds / total (constant kappa).

    Beyond r = 1 the tempered part is integrated panel by panel between the
    sorted evaluation points with Gauss-Legendre rules, so a whole sample is
    evaluated in one pass.
    """
    from scipy import integrate

    a = kernel.alpha
    untempered = kernel.beta == 0.0
    finite_range = kernel.beta_is_inf

    def dens(s):
        return np.power(s, -1.0 - a) / psi1(kernel, s)

    head = (eps_cut ** (-a) - 1.0) / a  # mass on (eps, 1]
    if untempered:
        total = eps_cut ** (-a) / a
    elif finite_range:
        total = head
    else:
        total = head + integrate.quad(dens, 1.0, math.inf, epsabs=1e-13, epsrel=1e-12)[0]
    g, w = np.polynomial.legendre.leggauss(8)

    def F(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        near = (r > eps_cut) & (r <= 1.0) if not untempered else r > eps_cut
        out[near] = (eps_cut ** (-a) - r[near] ** (-a)) / a / total
        far = r > 1.0
        if untempered:
            pass
        elif finite_range:
            out[far] = 1.0
        elif far.any():
            order = np.argsort(r[far])
            v = r[far][order]
            lo = np.concatenate([[1.0], v[:-1]])
            mid, half = 0.5 * (v + lo), 0.5 * (v - lo)
            seg = half * (dens(mid[:, None] + half[:, None] * g) @ w)
            vals = np.empty_like(v)
            vals[order] = (head + np.cumsum(seg)) / total
            out[far] = vals
        return np.minimum(out, 1.0)

    return F


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class Ensemble:
    """Per-path outputs of a batch, in path order."""

    cfg: SimConfig
    start: np.ndarray
    exit_time: np.ndarray
    exit_pos: np.ndarray
    pre_exit_pos: np.ndarray
    final_pos: np.ndarray
    obs_pos: np.ndarray
    n_jumps: np.ndarray
    w_integral: Optional[np.ndarray] = None
    hist_sum: Optional[np.ndarray] = None
    hist_sumsq: Optional[np.ndarray] = None
    hist: Optional[HistSpec] = None

    @property
    def n_paths(self):
        return len(self.exit_time)

    def alive_at(self, t):
        return self.exit_time > t


@dataclass(frozen=True)
class WTable:
    """Tabulated function on the box [lo, hi]^d (d <= 2) with n nodes per axis."""

    values: np.ndarray
    lo: float
    hi: float
    n: int


@dataclass(frozen=True)
class HistSpec:
    """Occupation-time histogram over the box prod_i [lo_i, hi_i] with nb bins per axis.

    ``lo`` and ``hi`` are scalars (a cube) or one value per axis.
    """

    lo: object
    hi: object
    nb: int

    def bounds(self, d):
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (d,))
        return lo, hi

    @property
    def width(self):
        return (np.asarray(self.hi, dtype=float) - np.asarray(self.lo, dtype=float)) / self.nb

    def bin_volume(self, d):
        lo, hi = self.bounds(d)
        return float(np.prod((hi - lo) / self.nb))

    def centers(self, axis=0):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        a = lo[axis if lo.size > 1 else 0]
        b = hi[axis if hi.size > 1 else 0]
        return a + (np.arange(self.nb) + 0.5) * (b - a) / self.nb


def _chunks(n, chunk):
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]


def run_ensemble(cfg, start, n_paths=None, workers=1, chunk=CHUNK, wtable=None, hist=None):
    """Simulate ``n_paths`` paths from ``start``; output is identical for every ``workers``."""
    n = int(n_paths if n_paths is not None else cfg.path_budget)
    x0 = _start(cfg, start)
    d = cfg.kernel.d
    fpar, ipar, fp, rp = cfg.pack()
    k0, k1 = cfg.keys()
    stream = np.uint64(cfg.stream)
    obs_t = np.asarray(cfg.obs_times, dtype=float)
    if wtable is not None:
        if d > 2:
            raise ContractError("W tables are supported for d <= 2")
        ipar[I_HASW] = 1
        wtab = np.ascontiguousarray(wtable.values, dtype=float).ravel()
        wbox = np.array([wtable.lo, wtable.hi, float(wtable.n)])
    else:
        wtab, wbox = np.zeros(1), np.array([0.0, 1.0, 2.0])
    nbins = 0
    if hist is not None:
        ipar[I_HISTNB] = hist.nb
        nbins = hist.nb ** d
        lo, hi = hist.bounds(d)
        if np.any(hi <= lo) or hist.nb < 1:
            raise ContractError("histogram box must have hi > lo and nb >= 1")
        hbox = np.column_stack([lo, hi]).ravel()
    else:
        hbox = np.zeros(2 * d)

    exit_t = np.empty(n)
    exit_x = np.full((n, d), np.nan)
    pre_x = np.full((n, d), np.nan)
    final_x = np.empty((n, d))
    obs = np.empty((n, len(obs_t), d))
    nj = np.empty(n, dtype=np.int64)
    wint = np.zeros(n)
    parts = _chunks(n, chunk)
    hs = [np.zeros(nbins) for _ in parts]
    hq = [np.zeros(nbins) for _ in parts]

    def job(i):
        a, b = parts[i]
        _run_chunk(a, b, k0, k1, stream, fpar, ipar, fp, rp, x0, obs_t, wtab, wbox, hbox,
                   obs[a:b], exit_t[a:b], exit_x[a:b], pre_x[a:b], final_x[a:b], nj[a:b], wint[a:b],
                   hs[i], hq[i])

    if workers <= 1:
        for i in range(len(parts)):
            job(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(len(parts))))
    hist_sum = hist_sq = None
    if hist is not None:
        # fixed chunk order keeps the floating point reduction worker-independent
        hist_sum = np.zeros(nbins)
        hist_sq = np.zeros(nbins)
        for a, b in zip(hs, hq):
            hist_sum += a
            hist_sq += b
    return Ensemble(cfg, x0, exit_t, exit_x, pre_x, final_x, obs, nj,
                    wint if wtable is not None else None, hist_sum, hist_sq,
                    hist)


@dataclass
class PairEnsemble:
    cfg: SimConfig
    start: np.ndarray
    obs_X: np.ndarray
    obs_Y: np.ndarray
    exit_X: np.ndarray
    exit_Y: np.ndarray
    band_counts: np.ndarray


def run_meyer_ensemble(cfg, start, n_paths=None, workers=1, chunk=CHUNK, band=(np.inf, np.inf)):
    if cfg.kernel.beta == 0.0:
        raise ContractError("the Meyer pair needs beta > 0")
    n = int(n_paths if n_paths is not None else cfg.path_budget)
    x0 = _start(cfg, start)
    d = cfg.kernel.d
    fpar, ipar, fp, rp = cfg.pack()
    k0, k1 = cfg.keys()
    stream = np.uint64(cfg.stream)
    obs_t = np.asarray(cfg.obs_times, dtype=float)
    obsX = np.empty((n, len(obs_t), d))
    obsY = np.empty((n, len(obs_t), d))
    exits = np.empty((n, 2))
    counts = np.zeros((n, 2), dtype=np.int64)
    bnd = np.asarray(band, dtype=float)
    parts = _chunks(n, chunk)

    def job(i):
        a, b = parts[i]
        _run_pair_chunk(a, b, k0, k1, stream, fpar, ipar, fp, rp, x0, obs_t, bnd,
                        obsX[a:b], obsY[a:b], exits[a:b], counts[a:b])

    if workers <= 1:
        for i in range(len(parts)):
            job(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(len(parts))))
    return PairEnsemble(cfg, x0, obsX, obsY, exits[:, 0].copy(), exits[:, 1].copy(), counts.sum(axis=0))


def write_trajectories_csv(path, trajectories):
    """One row per event: path_id, time, x coordinates, event_kind."""
    trajectories = list(trajectories)
    d = trajectories[0].positions.shape[1] if trajectories else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "time"] + [f"x{i}" for i in range(d)] + ["event_kind"])
        for tr in trajectories:
            for t, x, k in zip(tr.times, tr.positions, tr.kinds):
                w.writerow([tr.path_id, repr(float(t))] + [repr(float(v)) for v in x]
                           + [Trajectory.KIND_NAMES[int(k)]])
