import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsat.mnsum import (
    ConsistencyError,
    DivergenceError,
    MultinomialSpec,
    PreconditionError,
    SingularityError,
    SizeError,
    direct_sum,
    f_and_grad,
    f_grad,
    f_value,
    fixed_point_damped,
    fixed_point_small_c,
    log_direct_sum,
    principal_root,
    rephase,
    scaling_exponent,
    scaling_exponent_forms,
    small_c_exponent,
    spec_from_json,
    spec_to_json,
)
from qsat.toy import toy_exponent, toy_fixed_point


def random_spec(rng, q=1, s_count=3, a_count=2, c_scale=0.1):
    # moderate complex weights: positive magnitudes with phases in (-1, 1)
    b = rng.dirichlet(np.ones(s_count)) * np.exp(1j * rng.uniform(-1, 1, s_count))
    b = b / b.sum()
    A = rng.uniform(-1, 1, (a_count, s_count)) + 1j * rng.uniform(-1, 1, (a_count, s_count))
    c = c_scale * (rng.uniform(-1, 1, a_count) + 1j * rng.uniform(-1, 1, a_count))
    return MultinomialSpec(q, b, c, A)


@st.composite
def specs(draw, max_c=0.1):
    seed = draw(st.integers(0, 2**32 - 1))
    q = draw(st.integers(1, 2))
    s_count = draw(st.integers(2, 4))
    a_count = draw(st.integers(1, 3))
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, q, s_count, a_count, max_c)
    z = rng.uniform(-1, 1, a_count) + 1j * rng.uniform(-1, 1, a_count)
    z = z / max(1.0, np.abs(z).max())
    return spec, z


def mp_f_value(spec, z, dps=40):
    """Independent evaluation of F in extended precision."""
    with mpmath.workdps(dps):
        roots = [mpmath.root(-mpmath.mpc(c), spec.power) for c in spec.c]
        total = mpmath.mpc(0)
        for s in range(spec.s_count):
            expo = mpmath.fsum(
                mpmath.mpc(spec.A[a, s]) * roots[a] * mpmath.mpc(z[a]) for a in range(spec.a_count)
            )
            total += mpmath.mpc(spec.b[s]) * mpmath.exp(expo)
        return complex(mpmath.log(total))


class TestSpec:
    def test_rejects_unnormalized_b(self):
        with pytest.raises(ValueError):
            MultinomialSpec(1, [0.5, 0.6], [0.1], [[1, 0]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            MultinomialSpec(1, [0.5, 0.5], [0.1, 0.2], [[1, 0]])

    def test_rejects_bad_q(self):
        with pytest.raises(ValueError):
            MultinomialSpec(0, [1.0], [0.1], [[1]])

    def test_json_round_trip(self, rng):
        spec = random_spec(rng, q=2)
        back = spec_from_json(spec_to_json(spec))
        assert back.q == spec.q
        np.testing.assert_array_equal(back.b, spec.b)
        np.testing.assert_array_equal(back.c, spec.c)
        np.testing.assert_array_equal(back.matrix(), spec.matrix())

    def test_principal_root_branch(self):
        # negative reals (including a -0.0 imaginary part) take arg pi, not -pi
        r = principal_root(np.array([complex(-1.0, -0.0)]), 2)[0]
        assert abs(r - 1j) < 1e-15
        r = principal_root(np.array([-16.0]), 4)[0]
        assert abs(r - 2 * cmath.exp(1j * math.pi / 4)) < 1e-14


class TestDirectSum:
    def test_zero_couplings_give_one(self, rng):
        spec = random_spec(rng, c_scale=0.0)
        assert abs(direct_sum(spec, 7) - 1) < 1e-12

    def test_single_composition(self):
        c0 = 0.3 - 0.2j
        spec = MultinomialSpec(1, [1.0], [c0], [[1.0]])
        for n in (1, 5, 20):
            assert abs(direct_sum(spec, n) - cmath.exp(n * c0)) < 1e-12 * abs(cmath.exp(n * c0))

    def test_binomial_loop_oracle(self):
        spec = MultinomialSpec(1, [0.5, 0.5], [0.1], [[1, 0]])
        n = 50
        oracle = math.fsum(math.comb(n, n0) * 0.5**n * math.exp(n * 0.1 * (n0 / n) ** 2) for n0 in range(n + 1))
        assert abs(direct_sum(spec, n) - oracle) < 1e-13 * oracle

    def test_three_part_loop_oracle(self, rng):
        spec = random_spec(rng, q=2, s_count=3, a_count=2)
        n = 9
        total = 0j
        for n0 in range(n + 1):
            for n1 in range(n - n0 + 1):
                counts = np.array([n0, n1, n - n0 - n1])
                mult = math.factorial(n) / math.prod(math.factorial(int(x)) for x in counts)
                lin = spec.A @ counts / n
                total += mult * np.prod(spec.b**counts) * cmath.exp(n * np.sum(spec.c * lin**4))
        assert abs(direct_sum(spec, n) - total) < 1e-12 * abs(total)

    def test_n_zero(self, rng):
        assert direct_sum(random_spec(rng), 0) == 1

    def test_large_n_no_overflow(self):
        spec = MultinomialSpec(1, [0.5, 0.5], [5.0], [[1, 0]])
        value = log_direct_sum(spec, 400)
        assert np.isfinite(value.real)

    def test_size_guard(self):
        spec = MultinomialSpec(1, np.full(8, 1 / 8), [0.1], [np.ones(8)])
        with pytest.raises(SizeError):
            direct_sum(spec, 200)


class TestF:
    def test_f_at_zero(self, rng):
        for _ in range(20):
            assert abs(f_value(random_spec(rng), np.zeros(2))) <= 1e-12

    def test_single_term(self):
        a, c0 = 0.7 - 0.4j, -0.3 + 0.2j
        spec = MultinomialSpec(2, [1.0], [c0], [[a]])
        z = np.array([0.3 + 0.1j])
        expected = a * principal_root(np.array([-c0]), 4)[0] * z[0]
        assert abs(f_value(spec, z) - expected) < 1e-15

    def test_extended_precision_oracle(self, rng):
        for _ in range(10):
            spec = random_spec(rng, q=int(rng.integers(1, 3)))
            z = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
            assert abs(f_value(spec, z) - mp_f_value(spec, z)) < 1e-10

    def test_grad_at_zero(self, rng):
        spec = random_spec(rng, q=2)
        expected = spec.roots() * (spec.A @ spec.b)
        np.testing.assert_allclose(f_grad(spec, np.zeros(2)), expected, rtol=0, atol=1e-15)

    def test_zero_c_zero_grad(self, rng):
        spec = random_spec(rng, c_scale=0.0)
        assert np.all(f_grad(spec, np.array([0.3, -0.2j])) == 0)

    def test_f_and_grad_consistent(self, rng):
        spec = random_spec(rng)
        z = np.array([0.1 + 0.2j, -0.3j])
        fv, g = f_and_grad(spec, z)
        assert fv == f_value(spec, z)
        np.testing.assert_array_equal(g, f_grad(spec, z))

    def test_singularity(self):
        spec = MultinomialSpec(1, [2.0, -1.0], [-1.0], [[0.0, 1.0]])
        # 2 - exp(z) vanishes at z = log 2
        with pytest.raises(SingularityError):
            f_value(spec, np.array([math.log(2.0)]))


@given(specs())
def test_grad_matches_finite_differences(case):
    spec, z = case
    h = 1e-6
    g = f_grad(spec, z)
    for a in range(spec.a_count):
        e = np.zeros(spec.a_count, dtype=complex)
        e[a] = h
        fd = (f_value(spec, z + e) - f_value(spec, z - e)) / (2 * h)
        assert abs(fd - g[a]) <= 1e-6 * max(abs(g[a]), 1e-3)


@given(specs(max_c=0.02))
def test_fixed_point_residual(case):
    spec, _ = case
    fp = fixed_point_small_c(spec)
    if not fp.converged:
        fp = fixed_point_damped(spec, n_iter=5000)
    assert fp.converged
    proposal = spec.power * (-f_grad(spec, fp.z)) ** (spec.power - 1)
    err = np.abs(fp.z - proposal) / np.maximum(np.abs(fp.z), 1e-300)
    assert err.max() <= fp.eps
    first, second = scaling_exponent_forms(spec, fp)
    assert abs(first - second) <= 1e-9 * max(abs(first), abs(second), 1e-300)


class TestFixedPoint:
    def test_zero_c(self, rng):
        fp = fixed_point_small_c(random_spec(rng, c_scale=0.0))
        assert fp.converged and fp.iterations <= 1
        assert np.all(fp.z == 0)

    def test_power_law_in_c(self, rng):
        for q in (1, 2):
            spec = random_spec(rng, q=q, c_scale=0.05)
            sizes = [np.abs(fixed_point_small_c(spec.scaled(2.0**-j)).z).max() for j in range(4)]
            expected = 2 ** (1 - 2.0**-q)
            for big, small in zip(sizes, sizes[1:]):
                assert abs(big / small - expected) < 0.05 * expected

    def test_damped_rho_zero_matches_undamped(self, rng):
        spec = random_spec(rng, q=2)
        a = fixed_point_small_c(spec)
        b = fixed_point_damped(spec, rho=0.0, z_init=np.zeros(spec.a_count))
        np.testing.assert_array_equal(a.z, b.z)
        assert a.iterations == b.iterations

    def test_damped_zero_c_from_any_start(self, rng):
        spec = random_spec(rng, c_scale=0.0)
        fp = fixed_point_damped(spec, z_init=[3 + 1j, -2j], rho=0.5, eps=1e-12)
        assert fp.converged
        assert np.abs(fp.z).max() < 1e-10

    def test_damping_rescues_oscillation(self):
        spec = MultinomialSpec(1, [0.5, 0.5], [-4.0], [[1, 0]])
        undamped = fixed_point_small_c(spec)
        assert not undamped.converged
        damped = fixed_point_damped(spec, rho=0.5)
        assert damped.converged and damped.residual < 1e-10
        proposal = 2 * (-f_grad(spec, damped.z))
        assert np.abs(damped.z - proposal).max() <= 1e-10 * np.abs(damped.z).max()

    def test_divergence_carries_last_iterate(self):
        # starting on the zero of 2 - exp(z) leaves no finite proposal
        spec = MultinomialSpec(1, [2.0, -1.0], [-1.0], [[0.0, 1.0]])
        with pytest.raises(DivergenceError) as info:
            fixed_point_damped(spec, z_init=[math.log(2.0)])
        assert info.value.iterations == 0
        np.testing.assert_array_equal(info.value.last_finite, [math.log(2.0)])

    def test_invalid_arguments(self, rng):
        spec = random_spec(rng)
        with pytest.raises(ValueError):
            fixed_point_damped(spec, n_iter=0)
        with pytest.raises(ValueError):
            fixed_point_damped(spec, rho=1.0)

    def test_toy_equivalent_spec(self):
        # one layer of the Hamming-weight-squared toy as a two-part binomial sum
        beta, gt = 0.7, 0.3
        b0 = cmath.exp(0.5j * beta) * math.cos(beta / 2)
        b1 = -1j * cmath.exp(0.5j * beta) * math.sin(beta / 2)
        spec = MultinomialSpec(1, [b0, b1], [-0.5j * gt], [[0, 1]])
        fp = fixed_point_small_c(spec)
        theta = toy_fixed_point(beta, gt)
        # both fixed points describe the same linear form in the exponent
        w = spec.roots()[0]
        a = cmath.sqrt(-0.5j * gt)
        assert abs(w * fp.z[0] - a * theta) < 1e-9
        # Gaussian critical point y* = 2 i dF(z*); the toy variable is its mirror image
        y = 2j * f_grad(spec, fp.z)[0]
        assert abs(y + theta) < 1e-9
        exponent = scaling_exponent(spec, fp) - math.log(2) / 2
        assert abs(exponent - toy_exponent(beta, gt)) < 1e-9


class TestExponent:
    def test_zero_c(self, rng):
        spec = random_spec(rng, c_scale=0.0)
        assert abs(scaling_exponent(spec, fixed_point_small_c(spec))) < 1e-15

    def test_requires_convergence(self, rng):
        spec = random_spec(rng)
        fp = fixed_point_small_c(spec, n_iter=1, eps=1e-300)
        with pytest.raises(PreconditionError):
            scaling_exponent(spec, fp)

    def test_matches_extrapolated_direct_sum(self):
        spec = MultinomialSpec(1, [0.6, 0.4], [0.08 - 0.05j], [[1.0, -0.5]])
        exponent = scaling_exponent(spec, fixed_point_small_c(spec))
        ns = np.array([100, 200, 400])
        rates = np.array([log_direct_sum(spec, n) / n for n in ns])
        # rate(n) = e + a/n + b/n^2: Richardson on the three sizes
        coef = np.polyfit(1.0 / ns, rates.real, 2)
        assert abs(coef[-1] - exponent.real) < 1e-3

    def test_small_c_identities(self, rng):
        spec = MultinomialSpec(2, [0.2, 0.5, 0.3], [0.4 - 0.1j], [[1.0, 1.0, 1.0]])
        assert abs(small_c_exponent(spec) - (0.4 - 0.1j)) < 1e-15
        for _ in range(10):
            spec = random_spec(rng, q=int(rng.integers(1, 3)))
            via_grad = -np.sum(f_grad(spec, np.zeros(spec.a_count)) ** spec.power)
            assert abs(small_c_exponent(spec) - via_grad) < 1e-12

    def test_small_c_order(self):
        spec = MultinomialSpec(1, [0.6, 0.4], [0.05 + 0.02j], [[1.0, -0.5]])
        gaps = []
        for j in range(4):
            s = spec.scaled(2.0**-j)
            gaps.append(abs(scaling_exponent(s, fixed_point_small_c(s)) - small_c_exponent(s)))
        ratios = [a / b for a, b in zip(gaps, gaps[1:])]
        assert all(3.5 <= r <= 4.5 for r in ratios), ratios

    def test_consistency_error(self, rng):
        spec = random_spec(rng)
        fp = fixed_point_small_c(spec)

        def bad(z):
            fv, g = f_and_grad(spec, z)
            return fv, 1.01 * g

        with pytest.raises(ConsistencyError):
            scaling_exponent(spec, fp, bad)


def coupling_angles(spec):
    return np.angle(spec.roots() * (spec.matrix() @ spec.b))


class TestRephase:
    def test_edge_ray_example(self):
        # q=2: root of -c is 1, A = e^{i pi/4}, so the coupling sits on the edge ray pi/4
        spec = MultinomialSpec(2, [1.0], [-1.0], [[cmath.exp(0.25j * math.pi)]])
        out = rephase(spec)
        assert out.a_count == 2
        np.testing.assert_allclose(sorted(coupling_angles(out)), [-3 * math.pi / 16, 3 * math.pi / 16], atol=1e-14)

    def test_output_inside_open_sector(self, rng):
        for _ in range(50):
            spec = random_spec(rng, q=int(rng.integers(1, 4)), c_scale=2.0)
            out = rephase(spec)
            assert np.all(np.abs(coupling_angles(out)) < math.pi / spec.power)

    def test_preserves_exponent_when_already_inside(self):
        spec = MultinomialSpec(1, [0.6, 0.4], [0.05 + 0.02j], [[1.0, -0.5]])
        assert np.all(np.abs(coupling_angles(spec)) < math.pi / 2)
        e0 = scaling_exponent(spec, fixed_point_small_c(spec))
        out = rephase(spec)
        e1 = scaling_exponent(out, fixed_point_small_c(out))
        assert abs(e0 - e1) < 1e-9

    def test_zero_row_passed_through(self):
        spec = MultinomialSpec(1, [0.5, 0.5], [0.0, 0.1], [[1, 0], [0, 1]])
        out = rephase(spec)
        assert out.a_count == 3
        np.testing.assert_array_equal(out.matrix()[0], spec.A[0])


@given(specs(max_c=1.0))
def test_rephase_preserves_direct_sum(case):
    spec, _ = case
    out = rephase(spec)
    for n in range(1, 7):
        a, b = direct_sum(spec, n), direct_sum(out, n)
        assert abs(a - b) <= 1e-10 * max(abs(a), 1e-300)
