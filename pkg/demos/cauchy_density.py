"""Transition density of the Cauchy process, estimated by simulation.

In d = 1 with alpha = 1 and the standard normalization, the untempered
kernel generates the Cauchy process, whose density p(t, 0, y) = t / (pi (t^2 + y^2))
is known in closed form.  We simulate the compound Poisson approximation
(jumps smaller than eps are dropped), histogram the positions at time t and
compare with the exact density averaged over each bin.

Run:  python3 demos/cauchy_density.py
"""

import numpy as np

from skl import DomainSpec, KernelSpec, SimConfig
from skl.estimator import estimate_density

T = 1.0
BIN = 0.1

kernel = KernelSpec.standard_stable(1, 1.0)
cfg = SimConfig(kernel, DomainSpec.full_space(1), t_max=T, eps_cut=0.01, seed=7, path_budget=200_000)


def exact_bin_average(y, h=BIN, t=T):
    # integral of the Cauchy density over [y - h/2, y + h/2], divided by h
    return (np.arctan((y + h / 2) / t) - np.arctan((y - h / 2) / t)) / (np.pi * h)


print(f"{'y':>5} {'estimate':>10} {'+/- SE':>8} {'exact':>9} {'z':>6}")
for y in (0.0, 0.5, 1.0, 2.0, 4.0):
    rep = estimate_density(cfg, T, 0.0, y, bin_width=BIN)
    ref = exact_bin_average(y)
    print(f"{y:5.1f} {rep.value:10.5f} {rep.std_error:8.5f} {ref:9.5f} {(rep.value - ref) / rep.std_error:6.2f}")
