"""The fractional Laplacian of the boundary barrier near a flat boundary.

The barrier h_{Q,r} vanishes outside D and behaves like delta^{alpha/2}
inside.  Its fractional Laplacian stays bounded as x approaches the boundary
point Q, which is what makes it useful as a supersolution.  This script
evaluates it by principal-value quadrature along the inward normal.

Run:  python3 demos/barrier.py
"""

from skl import DomainSpec
from skl.barrier import BarrierSpec, boundary_sequence, frac_laplacian_barrier

dom = DomainSpec.half_space(2)
for alpha in (0.5, 1.0, 1.5):
    b = BarrierSpec(dom, Q=(0.0, 0.0), r=dom.R_char, alpha=alpha)
    print(f"alpha = {alpha}")
    for _, delta, x in boundary_sequence(b, n=8):
        res = frac_laplacian_barrier(b, x)
        print(f"   delta = {delta:.2e}   value = {res.value:+.5f}   (quad. error {res.abserr:.1e})")
