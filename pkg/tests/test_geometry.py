import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skl.errors import ConfigError, ContractError, DomainError
from skl.geometry import (
    DomainSpec, boundary_cone_indicator, contains, dist_to_boundary, fat_point, graph_dphi, graph_phi,
    nearest_boundary_point, same_component,
)

SINE = DomainSpec.graph([(0.1, 1.0, 0.0)])
BALL = DomainSpec.ball([0.0, 0.0], 1.0)
HALF = DomainSpec.half_space(2)
ONE = DomainSpec.interval(0.0, 1.0)
UNION = DomainSpec.interval_union([(0.0, 1.0), (2.0, 5.0)])
EXT = DomainSpec.exterior_ball([0.0, 0.0], 1.0)

coord = st.floats(-3, 3)


def _brute_graph_distance(x, n=10**6):
    s = np.linspace(x[0] - 1.0, x[0] + 1.0, n)
    return np.min(np.hypot(s - x[0], 0.1 * np.sin(s) - x[1]))


class TestContains:
    def test_half_space(self):
        assert contains(HALF, [0.3, 0.1]) and not contains(HALF, [0.3, 0.0])

    def test_open_ball(self):
        assert not contains(BALL, [1.0, 0.0]) and contains(BALL, [0.0, 0.999])

    def test_graph(self):
        assert contains(SINE, [0.0, 0.05])
        assert not contains(SINE, [math.pi / 2, 0.05])

    def test_exterior(self):
        assert contains(EXT, [2.0, 0.0]) and not contains(EXT, [0.5, 0.0])

    def test_vectorized(self):
        out = contains(UNION, np.array([[0.5], [1.5], [3.0]]))
        assert list(out) == [True, False, True]


class TestDistance:
    def test_exact_shapes(self):
        assert dist_to_boundary(BALL, [0.0, 0.0]) == 1.0
        assert dist_to_boundary(DomainSpec.half_space(1), [0.3]) == pytest.approx(0.3)
        assert dist_to_boundary(UNION, [4.0]) == pytest.approx(1.0)
        assert dist_to_boundary(EXT, [0.0, 3.0]) == pytest.approx(2.0)

    def test_graph_against_grid_search(self):
        x = [0.0, 0.5]
        assert dist_to_boundary(SINE, x) == pytest.approx(_brute_graph_distance(x), abs=1e-6)

    @given(coord, st.floats(0.01, 2.0))
    def test_graph_random(self, a, h):
        x = [a, 0.1 * math.sin(a) + h]
        assert dist_to_boundary(SINE, x) == pytest.approx(_brute_graph_distance(x, 200001), abs=1e-5)

    def test_outside(self):
        with pytest.raises(DomainError):
            dist_to_boundary(BALL, [2.0, 0.0])

    @pytest.mark.parametrize("dom", [BALL, HALF, SINE, EXT])
    @given(st.lists(coord, min_size=4, max_size=4))
    def test_lipschitz(self, dom, c):
        x, y = np.array(c[:2]), np.array(c[2:])
        if not (contains(dom, x) and contains(dom, y)):
            return
        assert abs(dist_to_boundary(dom, x) - dist_to_boundary(dom, y)) <= np.linalg.norm(x - y) + 1e-9


class TestNearest:
    def test_ball(self):
        assert np.allclose(nearest_boundary_point(BALL, [0.5, 0.0]), [1.0, 0.0])

    def test_interval(self):
        assert np.allclose(nearest_boundary_point(ONE, [0.7]), [1.0])

    def test_tie_broken_low(self):
        assert np.allclose(nearest_boundary_point(ONE, [0.5]), [0.0])

    @pytest.mark.parametrize("dom", [BALL, HALF, SINE, EXT, UNION])
    @given(st.lists(coord, min_size=2, max_size=2))
    def test_consistency(self, dom, c):
        x = np.array(c[: dom.d])
        if not contains(dom, x):
            return
        z = nearest_boundary_point(dom, x)
        assert np.linalg.norm(z - x) == pytest.approx(dist_to_boundary(dom, x), abs=1e-8)


class TestFat:
    def test_half_space(self):
        assert np.allclose(fat_point(HALF, [0.3, 0.0], 1.0), [0.3, 0.5])

    def test_ball_centre(self):
        assert np.allclose(fat_point(BALL, [0.0, 0.0], 0.7), [0.0, 0.0])

    @pytest.mark.parametrize("dom", [BALL, HALF, EXT, SINE, UNION])
    def test_witness_random(self, dom):
        rng = np.random.default_rng(3)
        R1 = min(dom.kappa_fat[0], 2.0)
        done = 0
        while done < 100:
            x = rng.uniform(-2, 2, dom.d)
            if not contains(dom, x):
                continue
            fat_point(dom, x, rng.uniform(0.01, 1.0) * R1, n_check=200, seed=done)
            done += 1

    def test_wrong_radius(self):
        with pytest.raises(ContractError):
            fat_point(BALL, [0.0, 0.0], 2.0)


class TestCone:
    def test_half_space_members(self):
        x = [0.0, 0.001]
        cone = boundary_cone_indicator(HALF, x, 4.0, 0.2)
        assert cone([0.0, 0.1])
        assert not cone([0.0, 0.2 / 8])
        assert not cone([0.09, 0.1])

    def test_preconditions(self):
        with pytest.raises(ContractError):
            boundary_cone_indicator(HALF, [0.0, 0.1], 4.0, 0.2)
        with pytest.raises(ContractError):
            boundary_cone_indicator(HALF, [0.0, 0.001], 3.0, 0.2)

    def test_ball_against_rotation(self):
        dom = DomainSpec.ball([0.0, 0.0], 4.0)
        x = np.array([0.0, 3.999])
        lam, r = 4.0, 0.25
        cone = boundary_cone_indicator(dom, x, lam, r)
        rng = np.random.default_rng(0)
        y = np.array([0.0, 4.0]) + rng.uniform(-0.3, 0.3, (1000, 2))
        # frame at z = (0, 4) with inward normal (0, -1): y~ = y_1, y_d = 4 - y_2
        yt, yd = np.abs(y[:, 0]), 4.0 - y[:, 1]
        rad = np.hypot(yt, yd)
        expect = (2 * dom.Lambda * yt < yd) & (rad > r / lam) & (rad < r)
        assert np.array_equal(cone(y), expect)


class TestSpecValidation:
    def test_graph_certificate(self):
        s = np.linspace(-10, 10, 2001)
        fp = SINE.pack()[1]
        g = np.array([graph_dphi(fp, v) for v in s])
        assert np.max(np.abs(g)) <= SINE.Lambda
        i, j = np.random.default_rng(1).integers(0, len(s), (2, 500))
        ok = i != j
        hold = np.abs(g[i] - g[j])[ok] <= SINE.Lambda * np.abs(s[i] - s[j])[ok] ** SINE.eta + 1e-12
        assert hold.all()
        assert graph_phi(fp, 0.0) == 0.0

    def test_overlapping_intervals(self):
        with pytest.raises(ConfigError):
            DomainSpec.interval_union([(0, 1), (0.5, 2)])

    def test_d1_convention(self):
        assert UNION.R_char == pytest.approx(0.5) and UNION.Lambda == 1.0

    @pytest.mark.parametrize("dom", [BALL, HALF, SINE, EXT, UNION])
    def test_json_round_trip(self, dom):
        assert DomainSpec.from_json(dom.to_json()) == dom

    def test_components(self):
        assert same_component(UNION, [0.5], [0.7]) and not same_component(UNION, [0.5], [3.0])
