import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from skl.errors import ConfigError, ContractError
from skl.estimator import removal_frequency
from skl.geometry import DomainSpec, contains
from skl.kernels import KappaModel, KernelSpec, psi1
from skl.simulator import (
    HistSpec, RngState, SimConfig, jump_rate, radial_cdf, run_ensemble, run_meyer_ensemble, sample_jumps,
    simulate_meyer_pair, simulate_path, write_trajectories_csv,
)


def k(beta=0.0, d=1, alpha=1.0, **kw):
    return KernelSpec.stable_like(d, alpha, beta, **kw)


def cfg(kernel=None, dom=None, **kw):
    kernel = kernel or k()
    dom = dom or DomainSpec.interval(-1.0, 1.0)
    kw.setdefault("t_max", 1.0)
    kw.setdefault("eps_cut", 0.05)
    return SimConfig(kernel, dom, **kw)


class TestJumpRate:
    def test_closed_forms(self):
        assert jump_rate(k(0.0), [0.0], 0.1) == pytest.approx(20.0, rel=1e-10)
        assert jump_rate(k(math.inf), [0.0], 0.1) == pytest.approx(18.0, rel=1e-10)

    @given(st.floats(0.2, 1.9), st.floats(1e-3, 0.4))
    def test_doubling_eps(self, alpha, eps):
        s = k(0.0, alpha=alpha)
        assert jump_rate(s, [0.0], 2 * eps) == pytest.approx(2 ** -alpha * jump_rate(s, [0.0], eps), rel=1e-8)

    @given(st.sampled_from([0.0, 1.0, 2.0, math.inf]), st.floats(1e-3, 0.5))
    def test_below_clock(self, beta, eps):
        s = k(beta, d=2)
        c = SimConfig(s, DomainSpec.full_space(2), 1.0, eps)
        assert jump_rate(s, [0.0, 0.0], eps) <= c.rate_bound * (1 + 1e-10)

    def test_constant_kappa_is_translation_free(self):
        s = k(1.0)
        assert jump_rate(s, [0.0], 0.1) == pytest.approx(jump_rate(s, [5.0], 0.1), rel=1e-12)


class TestSampleJump:
    def test_finite_range(self):
        z, _ = sample_jumps(k(math.inf), [0.0], 0.05, 20000, RngState(3))
        assert np.abs(z).max() <= 1.0

    def test_untempered_pareto(self):
        z, _ = sample_jumps(k(0.0), [0.0], 0.05, 20000, RngState(4))
        r = np.abs(z[:, 0])
        assert r.min() > 0.05
        assert stats.kstest(r, lambda v: 1 - (0.05 / v)).pvalue > 1e-3

    def test_state_advances(self):
        z1, st1 = sample_jumps(k(), [0.0], 0.1, 5, RngState(1))
        z2, _ = sample_jumps(k(), [0.0], 0.1, 5, st1)
        z3, _ = sample_jumps(k(), [0.0], 0.1, 5, RngState(1))
        assert np.array_equal(z1, z3) and not np.array_equal(z1, z2)

    @pytest.mark.parametrize("beta", [0.0, 1.0, 2.0, math.inf])
    def test_radial_law(self, beta):
        z, _ = sample_jumps(k(beta), [0.0], 0.05, 50000, RngState(9))
        F = radial_cdf(k(beta), 0.05)
        r = np.sort(np.abs(z[:, 0]))
        emp = np.arange(1, len(r) + 1) / len(r)
        ks = max(np.max(emp - F(r)), np.max(F(r) - emp + 1.0 / len(r)))
        assert ks < 1.63 / math.sqrt(len(r))

    def test_symmetric_direction_2d(self):
        z, _ = sample_jumps(k(1.0, d=2), [0.0, 0.0], 0.05, 40000, RngState(2))
        ang = np.arctan2(z[:, 1], z[:, 0])
        assert stats.kstest(ang, stats.uniform(-math.pi, 2 * math.pi).cdf).pvalue > 1e-3


class TestPaths:
    def test_full_space_never_exits(self):
        c = cfg(dom=DomainSpec.full_space(1))
        tr = simulate_path(c, [0.0], 5)
        assert tr.status == "alive_at_t_max" and tr.final_position is not None

    def test_start_outside(self):
        with pytest.raises(ContractError):
            simulate_path(cfg(), [2.0])

    @given(st.integers(0, 10**6))
    def test_trajectory_invariants(self, idx):
        c = cfg(dom=DomainSpec.interval(-1.0, 1.0))
        tr = simulate_path(c, [0.0], idx)
        t = tr.times
        assert np.all(np.diff(t) > 0) and (len(t) == 0 or (t[0] > 0 and t[-1] <= c.t_max))
        jumps = tr.positions[tr.kinds == 0]
        assert np.all(contains(c.dom, jumps)) if len(jumps) else True
        if tr.exited:
            assert not contains(c.dom, tr.exit_position)
            assert contains(c.dom, tr.pre_exit_position)
            assert tr.exit_time == t[-1]

    def test_reproducible_by_index(self):
        c = cfg(seed=11)
        a, b = simulate_path(c, [0.2], 42), simulate_path(c, [0.2], 42)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.positions, b.positions)

    def test_path_matches_ensemble(self):
        c = cfg(seed=5)
        ens = run_ensemble(c, [0.0], 300)
        tr = simulate_path(c, [0.0], 123)
        assert ens.exit_time[123] == tr.exit_time

    def test_csv_dump(self, tmp_path):
        c = cfg()
        p = tmp_path / "traj.csv"
        write_trajectories_csv(p, [simulate_path(c, [0.0], i) for i in range(3)])
        head = p.read_text().splitlines()[0]
        assert head == "path_id,time,x0,event_kind"

    def test_config_invariants(self):
        with pytest.raises(ConfigError):
            cfg(eps_cut=1.5)
        with pytest.raises(ConfigError):
            cfg(eps_cut=0.05, scale=0.1)


class TestEnsemble:
    def test_worker_count_is_invisible(self):
        c = cfg(seed=3, obs_times=(0.5,))
        h = HistSpec(-1.0, 1.0, 20)
        a = run_ensemble(c, [0.0], 10000, workers=1, hist=h)
        b = run_ensemble(c, [0.0], 10000, workers=4, hist=h)
        for name in ("exit_time", "exit_pos", "final_pos", "obs_pos", "n_jumps", "hist_sum", "hist_sumsq"):
            assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)

    def test_full_space_is_conservative(self):
        c = cfg(dom=DomainSpec.full_space(1))
        assert np.all(np.isinf(run_ensemble(c, [0.0], 2000).exit_time))

    def test_variable_kappa_runs(self):
        s = KernelSpec(d=2, alpha=1.0, beta=1.0, L3=2.0, L4=2.0, kappa=KappaModel(1.0, 0.3, 2.0))
        c = cfg(s, DomainSpec.ball([0.0, 0.0], 1.0))
        ens = run_ensemble(c, [0.0, 0.0], 2000)
        assert np.isfinite(ens.exit_time).mean() > 0.9

    def test_domain_monotonicity(self):
        small = cfg(dom=DomainSpec.interval(-0.5, 0.5), seed=8)
        big = small.with_(dom=DomainSpec.interval(-1.0, 1.0))
        a = run_ensemble(small, [0.0], 5000).exit_time
        b = run_ensemble(big, [0.0], 5000).exit_time
        # shared streams: every path leaves the smaller set first
        assert np.all(a <= b)


class TestMeyer:
    def test_finite_range_pair(self):
        c = cfg(k(math.inf), DomainSpec.full_space(1), t_max=2.0, eps_cut=0.05)
        for i in range(20):
            X, Y = simulate_meyer_pair(c, [0.0], i)
            dx = np.abs(np.diff(np.vstack([[0.0], X.positions[X.kinds == 0]]), axis=0))
            dy = np.abs(np.diff(np.vstack([[0.0], Y.positions[Y.kinds == 0]]), axis=0))
            assert np.all(dy <= 1.0)
            small = X.times[X.kinds == 0][dx[:, 0] <= 1.0]
            # every small jump of X is a jump of Y at the same time
            assert set(small).issubset(set(Y.times[Y.kinds == 0]))
            if dx.size and dx.max() > 1.0:
                assert len(X.times) > len(Y.times)

    def test_removal_frequency(self):
        s = k(1.0)
        c = cfg(s, DomainSpec.full_space(1), t_max=1.0, eps_cut=0.05)
        p, se, n = removal_frequency(c, [0.0], (1.5, 1.6), n_paths=200000)
        assert n > 1000
        assert abs(p - (1 - 1 / psi1(s, 1.55))) < 3 * se
        # band average under the untempered radial law r**-2
        num = integrate.quad(lambda r: r ** -2 * (1 - 1 / psi1(s, r)), 1.5, 1.6)[0]
        den = integrate.quad(lambda r: r ** -2, 1.5, 1.6)[0]
        assert abs(p - num / den) < 3 * se

    def test_untempered_rejected(self):
        with pytest.raises(ContractError):
            simulate_meyer_pair(cfg(), [0.0])
        with pytest.raises(ContractError):
            run_meyer_ensemble(cfg(), [0.0], 10)
