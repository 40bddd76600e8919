"""Meyer's construction: tempering the large jumps costs at most a factor e^{tJ}.

X is the untempered stable-like process.  Y is driven by the same randomness
but rejects each jump of size r > 1 with probability 1 - 1/psi1(r), so Y is
the tempered process.  The killed densities then satisfy
p_Y(t, x, y) <= e^{t sup J} p_X(t, x, y), where J is the intensity of the
rejected jumps.  We check this on the interval (-1, 1).

Run:  python3 demos/meyer_coupling.py
"""

from skl import DomainSpec, KernelSpec, SimConfig
from skl.estimator import meyer_domination

kernel = KernelSpec.standard_stable(1, 1.0, beta=1.0)
cfg = SimConfig(kernel, DomainSpec.interval(-1.0, 1.0), t_max=0.5, eps_cut=0.01, seed=11,
                path_budget=200_000)

rows, Jsup = meyer_domination(cfg, 0.5, 0.0, [0.0, 0.3, -0.5, 0.7, 0.9], bin_width=0.1)
print(f"sup J = {Jsup:.4f}, factor e^(t J) = {rows[0].factor:.4f}")
for row in rows:
    ok = "ok" if row.p_Y <= row.factor * row.p_X + 3 * row.diff_se else "VIOLATED"
    print(f"   y = {row.y[0]:+.1f}   p_Y = {row.p_Y:.4f}   e^(tJ) p_X = {row.factor * row.p_X:.4f}   {ok}")
