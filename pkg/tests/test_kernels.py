import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from skl.errors import ConfigError, DomainError
from skl.kernels import (
    KappaModel, KernelSpec, fractional_laplacian_constant, j_small, jump_kernel, meyer_rate, psi1,
    relativistic_psi,
)

alphas = st.floats(0.1, 1.9)
betas = st.one_of(st.floats(0.0, 3.0), st.just(math.inf))


def spec(**kw):
    kw.setdefault("d", 1)
    kw.setdefault("alpha", 1.0)
    return KernelSpec.stable_like(**kw)


def perturbed(d=2, alpha=1.0, beta=1.0):
    return KernelSpec(d=d, alpha=alpha, beta=beta, L3=2.0, L4=2.0, rho=1.0,
                      kappa=KappaModel(1.0, 0.3, 2.0))


class TestPsi1:
    def test_one_below_unit_radius(self):
        assert psi1(spec(beta=2.0), 0.5) == 1.0

    def test_beta_zero_is_flat(self):
        assert psi1(spec(beta=0.0), 7.3) == 1.0

    def test_beta_one_value(self):
        assert psi1(spec(beta=1.0, gamma=1.0), 2.0) == pytest.approx(math.e, rel=1e-14)

    def test_beta_inf(self):
        s = spec(beta=math.inf)
        assert psi1(s, 1.0) == 1.0
        assert psi1(s, 1.0001) == math.inf

    def test_negative_radius(self):
        with pytest.raises(DomainError):
            psi1(spec(), -0.1)

    @given(st.floats(0.0, 3.0), st.floats(0.1, 3.0))
    def test_envelope_on_log_grid(self, beta, gamma):
        s = spec(beta=beta, gamma=gamma)
        r = np.logspace(-3, 1, 200)
        v = psi1(s, r)
        assert np.all(v[r <= 1] == 1.0)
        far = r > 1
        with np.errstate(over="ignore"):
            env = np.exp(gamma * r[far] ** beta)
        assert np.all(s.L1 * env <= v[far] * (1 + 1e-12))
        assert np.all(v[far] <= s.L2 * env * (1 + 1e-12))
        assert np.all(v[1:] >= v[:-1])


class TestJSmall:
    def test_below_one(self):
        assert j_small(spec(d=1, alpha=1.0), 0.5) == pytest.approx(4.0)

    def test_finite_range(self):
        assert j_small(spec(beta=math.inf), 1.5) == 0.0

    def test_tempered_value(self):
        s = spec(d=2, alpha=1.5, beta=1.0, gamma=2.0)
        assert j_small(s, 2.0) == pytest.approx(2 ** -3.5 * math.exp(-2.0), rel=1e-13)
        assert j_small(s, 2.0) == pytest.approx(0.0119620, abs=5e-7)

    def test_nonpositive_radius(self):
        with pytest.raises(DomainError):
            j_small(spec(), 0.0)

    @given(alphas, st.floats(0.0, 3.0), st.floats(0.05, 2.0))
    def test_doubling(self, alpha, beta, r0):
        s = spec(alpha=alpha, beta=beta)
        r = np.linspace(r0 / 200, r0, 200)
        ratio = j_small(s, r) / j_small(s, 2 * r)
        bound = s.L2 / s.L1 * math.exp(s.gamma2 * (2 * r0) ** beta) * 2 ** (1 + alpha)
        assert np.all(np.isfinite(ratio))
        assert ratio.max() <= bound * (1 + 1e-9)

    def test_doubling_finite_range(self):
        s = spec(beta=math.inf)
        r = np.linspace(1e-3, 0.25, 100)
        assert np.all(j_small(s, r) / j_small(s, 2 * r) == pytest.approx(4.0))


class TestJumpKernel:
    def test_constant_kappa(self):
        s = spec(beta=1.0)
        assert jump_kernel(s, [0.1], [0.7]) == pytest.approx(j_small(s, 0.6))

    def test_diagonal(self):
        with pytest.raises(DomainError):
            jump_kernel(spec(), [0.2], [0.2])

    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
    def test_symmetry_and_bounds(self, c):
        s = perturbed()
        x, y = np.array(c[:2]), np.array(c[2:])
        r = np.linalg.norm(x - y)
        if r < 1e-6:
            return
        a, b = jump_kernel(s, x, y), jump_kernel(s, y, x)
        assert a == b
        j = j_small(s, r)
        assert j / s.L3 * (1 - 1e-12) <= a <= s.L3 * j * (1 + 1e-12)

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0, 2 * math.pi))
    def test_hoelder_condition(self, c, th):
        s = perturbed()
        x = np.array(c)
        y = x + 0.3 * np.array([math.cos(th), math.sin(th)])
        dev = abs(jump_kernel(s, x, y) / j_small(s, 0.3) - float(s.kappa(x, x)))
        assert dev <= s.L4 * 0.3 ** s.rho + 1e-12


class TestSpec:
    def test_json_round_trip_inf(self):
        s = spec(beta=math.inf)
        text = s.to_json()
        assert '"inf"' in text
        assert KernelSpec.from_json(text) == s

    @given(alphas, betas, st.floats(0.2, 3.0))
    def test_json_round_trip(self, alpha, beta, gamma):
        s = spec(alpha=alpha, beta=beta, gamma=gamma)
        assert KernelSpec.from_json(s.to_json()) == s

    def test_rho_must_exceed_half_alpha(self):
        with pytest.raises(ConfigError):
            KernelSpec(d=1, alpha=1.0, rho=0.5)

    def test_every_problem_is_listed(self):
        with pytest.raises(ConfigError) as exc:
            KernelSpec(d=1, alpha=2.5, L3=0.5, rho=0.1)
        assert len(exc.value.problems) >= 3

    def test_kappa_outside_bounds(self):
        with pytest.raises(ConfigError):
            KernelSpec(d=1, alpha=1.0, L3=1.1, kappa=KappaModel(1.0, 0.3, 0.1))


class TestNormalizer:
    def test_values(self):
        assert fractional_laplacian_constant(1, 1.0) == pytest.approx(1 / math.pi)
        assert fractional_laplacian_constant(2, 1.0) == pytest.approx(1 / (2 * math.pi))

    def test_small_alpha(self):
        assert fractional_laplacian_constant(1, 1e-8) < 1e-7


class TestRelativistic:
    def test_origin(self):
        s = spec(mass=1.0)
        assert relativistic_psi(s, 0.0) == pytest.approx(4.0, rel=1e-10)

    def test_two_schemes_agree(self):
        s = spec(mass=1.0)
        # second scheme: s = 4u on the original axis, split at the peak
        f = lambda u: 4.0 * math.exp(-u - 1.0 / (4.0 * u))
        ref = integrate.quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13)[0] + \
            integrate.quad(f, 1, math.inf, epsabs=1e-13, epsrel=1e-13)[0]
        assert relativistic_psi(s, 1.0) == pytest.approx(ref, rel=1e-8)
        # closed form: 2 (r/2)^... Bessel K: int s^{a-1} e^{-s/4-r^2/s} = 2 (2r)^a K_a(r)
        assert ref == pytest.approx(2 * 2.0 * special.kv(1, 1.0), rel=1e-10)

    def test_monotone_and_bracketed(self):
        s = spec(d=1, alpha=1.0, mass=1.0)
        r = np.linspace(1, 50, 50)
        v = np.array([relativistic_psi(s, x) for x in r])
        assert np.all(np.diff(v) < 0)
        ratio = v / (np.exp(-r) * (1 + r ** 0.5))
        assert 0.1 < ratio.min() and ratio.max() < 10

    def test_needs_mass(self):
        with pytest.raises(DomainError):
            relativistic_psi(spec(), 1.0)


class TestMeyerRate:
    def test_finite_range(self):
        assert meyer_rate(spec(beta=math.inf), [0.0]) == pytest.approx(2.0, rel=1e-10)

    def test_beta_one_against_series(self):
        # 2 int_1^inf r^-2 (1 - e^{-(r-1)}) dr = 2 (1 - e E_2(1)) with E_2 the exponential integral
        ref = 2.0 * (1.0 - math.e * special.expn(2, 1.0))
        assert meyer_rate(spec(beta=1.0), [0.0]) == pytest.approx(ref, rel=1e-9)

    def test_translation_invariant(self):
        s = spec(beta=2.0)
        assert meyer_rate(s, [0.0]) == pytest.approx(meyer_rate(s, [3.7]), rel=1e-12)

    def test_bounded_by_stable_tail(self):
        s = spec(d=2, alpha=1.2, beta=1.5)
        assert meyer_rate(s, [0, 0]) <= s.L3 * 2 * math.pi / 1.2

    def test_beta_zero_rejected(self):
        with pytest.raises(DomainError):
            meyer_rate(spec(beta=0.0), [0.0])

    def test_perturbed_matches_fourier_quadrature(self):
        s = KernelSpec(d=1, alpha=1.0, beta=math.inf, L3=2.0, L4=2.0, kappa=KappaModel(1.0, 0.3, 2.0))
        x = 0.4
        # kappa(x, x+z) = 1 + 0.3 sin(4x + 2z); the odd part cancels between z and -z
        c = integrate.quad(lambda r: r ** -2.0, 1, math.inf, weight="cos", wvar=2.0)[0]
        ref = 2.0 * (1.0 + 0.3 * math.sin(4 * x) * c)
        assert meyer_rate(s, [x]) == pytest.approx(ref, rel=1e-8)
