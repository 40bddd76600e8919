"""Mean exit time from the unit interval against the closed-form value.

For the symmetric alpha-stable process started at the center of the unit
ball, E tau = Gamma(d/2) / (2^alpha Gamma(1 + alpha/2) Gamma((d + alpha)/2)).
We estimate it for three stability indices and watch the small-jump cutoff
eps shrink.

Run:  python3 demos/exit_times.py
"""

from skl import DomainSpec, KernelSpec, SimConfig
from skl.estimator import estimate_mean_exit_time
from skl.oracles import getoor_mean_exit_time

U = DomainSpec.interval(-1.0, 1.0)

for alpha in (0.5, 1.0, 1.5):
    exact = getoor_mean_exit_time(1, alpha)
    print(f"alpha = {alpha}: exact {exact:.5f}")
    for eps in (0.04, 0.02, 0.01):
        cfg = SimConfig(KernelSpec.standard_stable(1, alpha), U, t_max=50.0, eps_cut=eps, seed=3,
                        path_budget=50_000, small_jumps="gaussian")
        rep = estimate_mean_exit_time(cfg, U, 0.0)
        print(f"   eps = {eps:<5} E tau = {rep.value:.5f} +/- {rep.std_error:.5f}")
