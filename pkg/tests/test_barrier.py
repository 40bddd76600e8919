import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from skl.barrier import BarrierSpec, boundary_sequence, frac_laplacian_barrier, frac_laplacian_normalizer
from skl.errors import ContractError, DomainError
from skl.geometry import DomainSpec


def test_normalizer_values():
    assert frac_laplacian_normalizer(1, 1.0) == pytest.approx(0.31831, abs=1e-5)
    assert frac_laplacian_normalizer(2, 1.0) == pytest.approx(0.15915, abs=1e-5)
    assert frac_laplacian_normalizer(1, 1e-6) < 1e-5
    with pytest.raises(DomainError):
        frac_laplacian_normalizer(1, 2.0)


def test_untruncated_half_line_is_harmonic():
    b = BarrierSpec(DomainSpec.half_space(1), (0.0,), math.inf, 1.0)
    assert abs(frac_laplacian_barrier(b, [0.5]).value) < 1e-3


def test_lateral_invariance():
    b = BarrierSpec(DomainSpec.half_space(2, R_char=1.0), (0.0, 0.0), 0.5, 1.0)
    b2 = BarrierSpec(DomainSpec.half_space(2, R_char=1.0), (0.7, 0.0), 0.5, 1.0)
    v1 = frac_laplacian_barrier(b, [0.0, 0.05]).value
    v2 = frac_laplacian_barrier(b2, [0.7, 0.05]).value
    assert v1 == pytest.approx(v2, rel=1e-8)


def test_bounded_near_boundary():
    b = BarrierSpec(DomainSpec.half_space(1, R_char=1.0), (0.0,), 0.5, 1.0)
    pts = boundary_sequence(b, n=10, base=0.125)
    vals = np.array([abs(frac_laplacian_barrier(b, x).value) for _, _, x in pts])
    assert np.all(np.isfinite(vals))
    rho, p = stats.spearmanr(np.arange(10), vals)
    assert not (rho > 0 and p / 2 < 0.05)


@given(st.floats(0.02, 0.1))
def test_pv_converges(delta):
    b = BarrierSpec(DomainSpec.half_space(1, R_char=1.0), (0.0,), 0.5, 1.0)
    x = [delta]
    e = 1e-2 * delta
    v1 = frac_laplacian_barrier(b, x, eps_pv=e).value
    v2 = frac_laplacian_barrier(b, x, eps_pv=e / 2).value
    assert abs(v1 - v2) < 1e-4


def test_ball_and_graph_supported():
    for dom, Q, x in [(DomainSpec.ball([0.0, 0.0], 2.0), (2.0, 0.0), [1.95, 0.0]),
                      (DomainSpec.graph([(0.1, 1.0, 0.0)]), (0.0, 0.0), [0.0, 0.05])]:
        res = frac_laplacian_barrier(BarrierSpec(dom, Q, 0.5, 1.0), x)
        assert math.isfinite(res.value) and res.abserr < 1e-3


def test_contracts():
    with pytest.raises(ContractError):
        BarrierSpec(DomainSpec.half_space(1), (0.1,), 0.5, 1.0)
    with pytest.raises(ContractError):
        BarrierSpec(DomainSpec.interval(0, 1), (0.0,), 0.5, 1.0)
    b = BarrierSpec(DomainSpec.half_space(1, R_char=1.0), (0.0,), 0.5, 1.0)
    with pytest.raises(ContractError):
        frac_laplacian_barrier(b, [0.6])
