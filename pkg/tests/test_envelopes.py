import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from skl.envelopes import (
    EnvelopeParams, boundary_factor, dirichlet_lower, dirichlet_upper, green_envelope, green_shape, h_bound,
    whole_space_envelope,
)
from skl.errors import ContractError, DomainError
from skl.geometry import DomainSpec
from skl.kernels import KernelSpec
from skl.oracles import bgr_green, cauchy_density

P = EnvelopeParams()
betas = st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, math.inf])


def k(beta=0.0, d=1, alpha=1.0, gamma=1.0):
    return KernelSpec.stable_like(d, alpha, beta, gamma)


class TestH:
    @pytest.mark.parametrize("beta", [0.0, 1.0, 2.0, math.inf])
    def test_on_diagonal(self, beta):
        assert h_bound(P, beta, 0.3, 0.0, 1, 1.0) == pytest.approx(0.3 ** -1)

    def test_finite_range_branch(self):
        p = EnvelopeParams(a=1.0, T=1.0)
        assert h_bound(p, math.inf, 0.25, 2.0, 1, 1.0) == pytest.approx(1 / 64)

    def test_super_exponential_branch(self):
        assert h_bound(P, 2.0, 0.1, 1.0, 1, 1.0) == pytest.approx(0.1 * math.exp(-1), rel=1e-12)
        assert h_bound(P, 2.0, 0.1, 1.0, 1, 1.0) == pytest.approx(0.03679, abs=1e-5)

    def test_log_branch_selected(self):
        # at t close to T the log term is below r**beta
        p = EnvelopeParams(a=1.0, T=1.0)
        r, t = 3.0, 0.9
        expect = t * math.exp(-r * math.log(r / t) ** 0.5)
        assert h_bound(p, 2.0, t, r, 1, 1.0) == pytest.approx(expect)

    def test_time_outside_horizon(self):
        with pytest.raises(DomainError):
            h_bound(P, 0.0, 1.5, 1.0, 1, 1.0)
        with pytest.raises(DomainError):
            h_bound(P, 0.0, 0.0, 1.0, 1, 1.0)

    @given(betas, st.floats(0.01, 1.0), st.floats(0.3, 1.9), st.integers(1, 3))
    def test_non_increasing_in_r(self, beta, t, alpha, d):
        r = np.linspace(0, 6, 400)
        v = h_bound(P, beta, t, r, d, alpha)
        assert np.all(v[1:] <= v[:-1] * (1 + 1e-12))

    @given(st.floats(0.3, 1.9), st.floats(0.01, 0.5), st.floats(0.0, 5.0), st.floats(0.1, 2.0))
    def test_stable_scaling(self, alpha, t, r, lam):
        assume(lam * t <= 1.0)
        p = EnvelopeParams(gamma=1.0)
        lhs = h_bound(p, 0.0, lam * t, lam ** (1 / alpha) * r, 1, alpha)
        assert lhs == pytest.approx(lam ** (-1 / alpha) * h_bound(p, 0.0, t, r, 1, alpha), rel=1e-10)

    @given(st.floats(1.1, 4.0), st.floats(0.01, 1.0))
    def test_junction_finite(self, beta, t):
        lo = h_bound(P, beta, t, 1 - 1e-9, 1, 1.0)
        hi = h_bound(P, beta, t, 1.0, 1, 1.0)
        F = max(lo / hi, hi / lo)
        assert math.isfinite(F) and F >= 1


class TestBoundaryFactor:
    def test_values(self):
        assert boundary_factor(1.0, 4.0, 1.0) == 0.5
        assert boundary_factor(1.0, 0.01, 1.0) == 1.0
        assert boundary_factor(1.0, 1.0, 0.0) == 0.0

    @given(st.floats(0.1, 1.9), st.floats(1e-3, 10), st.floats(0, 5), st.floats(0, 5))
    def test_monotone(self, alpha, t, d1, d2):
        lo, hi = sorted((d1, d2))
        a, b = boundary_factor(alpha, t, lo), boundary_factor(alpha, t, hi)
        assert 0 <= a <= b <= 1
        assert boundary_factor(alpha, 2 * t, hi) <= b


class TestWholeSpace:
    def test_stable_form(self):
        env = whole_space_envelope(k(0.0), P)
        t, r = 0.5, 2.0
        assert env.lower(t, r) == env.upper(t, r) == pytest.approx(min(1 / t, t / r ** 2))

    def test_cauchy_between_envelopes(self):
        env = whole_space_envelope(k(0.0), P)
        env.c_lower, env.c_upper = 1 / (2 * math.pi), 2 / math.pi
        for t in (0.1, 1.0):
            for r in (0.0, 0.5, 1.0, 5.0):
                p = cauchy_density(t, r)
                assert env.lower(t, r) <= p <= env.upper(t, r)


class TestDirichlet:
    dom = DomainSpec.interval(0.0, 1.0)

    def test_upper_interior_value(self):
        s = k(0.0)
        v = dirichlet_upper(s, P, 0.01, [0.5], [0.5], self.dom, c=1.0)
        assert v == pytest.approx(100.0)

    def test_vanishes_on_boundary(self):
        s = k(0.0)
        assert dirichlet_upper(s, P, 0.1, [1e-300], [0.5], self.dom) < 1e-100
        assert dirichlet_lower(s, P, 0.1, [1e-300], [0.5], self.dom) < 1e-100

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 1.0))
    def test_upper_symmetric(self, x, y, t):
        s = k(1.0)
        assert dirichlet_upper(s, P, t, [x], [y], self.dom) == pytest.approx(
            dirichlet_upper(s, P, t, [y], [x], self.dom), rel=1e-14)

    def test_point_outside(self):
        with pytest.raises(DomainError):
            dirichlet_upper(k(), P, 0.1, [1.5], [0.5], self.dom)

    def test_finite_range_same_component_value(self):
        dom = DomainSpec.interval(0.0, 3.0)
        s = k(math.inf)
        p = EnvelopeParams(a=1.0, T=1.0)
        x, y, t = 0.5, 2.5, 0.5
        psi = boundary_factor(1.0, t, 0.5) * boundary_factor(1.0, t, 0.5)
        v = dirichlet_lower(s, p, t, [x], [y], dom)
        assert v == pytest.approx(psi * 0.2 ** 2.5, rel=1e-12)
        assert 0.2 ** 2.5 == pytest.approx(0.01789, abs=1e-5)

    def test_far_branch_needs_comparability(self):
        dom = DomainSpec.interval(0.0, 3.0)
        with pytest.raises(ContractError):
            dirichlet_lower(k(math.inf), P, 0.5, [0.5], [2.5], dom, comparable_path=False)

    def test_finite_range_across_components_not_covered(self):
        dom = DomainSpec.interval_union([(0, 1), (1.5, 3)])
        with pytest.raises(ContractError):
            dirichlet_lower(k(math.inf), P, 0.5, [0.5], [2.5], dom)

    def test_cross_component_branch(self):
        dom = DomainSpec.interval_union([(0, 1), (1.5, 3)])
        s = k(1.5)
        x, y, t = 0.5, 2.0, 0.5
        psi = boundary_factor(1.0, t, 0.5) * boundary_factor(1.0, t, 0.5)
        v = dirichlet_lower(s, P, t, [x], [y], dom)
        assert v == pytest.approx(psi * t * 1.5 ** -2 * math.exp(-(1.25 * 1.5) ** 1.5))

    def test_stable_shapes_share_decay(self):
        dom = DomainSpec.interval(0.0, 100.0)
        s = k(0.0)
        ratios = [dirichlet_upper(s, P, 0.5, [50.0], [50.0 + r], dom) / dirichlet_lower(s, P, 0.5, [50.0], [50.0 + r], dom)
                  for r in (5.0, 10.0, 20.0, 40.0)]
        assert np.ptp(np.log(ratios)) < 1e-9


class TestGreen:
    def test_near_diagonal_log(self):
        dom = DomainSpec.interval(0.0, 1.0)
        lo, up = green_envelope(k(0.0), dom, [0.5], [0.5 + 1e-9])
        # (delta(x) delta(y))**(alpha/2) = 0.5
        assert lo == up == pytest.approx(math.log1p(0.5 / 1e-9), rel=1e-6)

    def test_vanishes_at_boundary(self):
        dom = DomainSpec.interval(0.0, 1.0)
        assert green_shape(k(0.0), dom, [1e-12], [0.5]) < 1e-5

    def test_unbounded_rejected(self):
        with pytest.raises(ContractError):
            green_shape(k(0.0), DomainSpec.half_space(1), [1.0], [2.0])

    def test_other_regimes(self):
        dom = DomainSpec.ball([0.0, 0.0], 1.0)
        s = k(0.0, d=2, alpha=1.0)
        r = math.hypot(0.3, 0.1)
        assert green_shape(s, dom, [0.3, 0.0], [0.0, 0.1]) == pytest.approx(r ** -1 * min(1, (0.7 * 0.9) ** 0.5 / r))
        dom1 = DomainSpec.interval(0.0, 1.0)
        s = k(0.0, alpha=1.5)
        assert green_shape(s, dom1, [0.2], [0.6]) == pytest.approx(min((0.2 * 0.4) ** 0.25, (0.2 * 0.4) ** 0.75 / 0.4))

    def test_bgr_sandwich_on_grid(self):
        dom = DomainSpec.interval(0.0, 1.0)
        s = k(0.0)
        pts = np.linspace(0.05, 0.95, 10)
        ratios = []
        for x in pts:
            for y in pts:
                if x != y:
                    # G on (0, 1) is G on (-1, 1) at the rescaled points when d = alpha
                    ratios.append(bgr_green(1, 1.0, 2 * x - 1, 2 * y - 1) / green_shape(s, dom, [x], [y]))
        assert max(ratios) / min(ratios) <= 20
