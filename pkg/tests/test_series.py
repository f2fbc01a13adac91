import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fprw.errors import NonzeroInnerConstant, NotInvertible, ZeroConstantTerm
from fprw.series import (
    PowerSeries,
    series_compose,
    series_derivative,
    series_mul,
    series_reciprocal,
    series_reversion,
    solve_implicit_green,
)


def geometric(order):
    return PowerSeries(np.ones(order + 1))


def z1_green(order):
    """Green series of the symmetric nearest-neighbour walk on Z: sum C(2n,n) 4^-n z^2n."""
    c = np.zeros(order + 1)
    for n in range(order // 2 + 1):
        c[2 * n] = math.comb(2 * n, n) * 0.25**n
    return PowerSeries(c)


def first_return_probs_z(nmax):
    """First-return probabilities on Z by a positions DP that never touches 0."""
    # mass[x] = P[walk at x, 0 not yet revisited], x != 0
    span = nmax + 2
    mass = {1: 0.5, -1: 0.5}
    out = np.zeros(nmax + 1)
    for n in range(2, nmax + 1):
        nxt = {}
        for x, p in mass.items():
            for y in (x - 1, x + 1):
                if abs(y) <= span:
                    nxt[y] = nxt.get(y, 0.0) + 0.5 * p
        out[n] = nxt.pop(0, 0.0)
        mass = nxt
    return out


class TestMul:
    def test_difference_of_squares(self):
        a = PowerSeries([1.0, 1.0, 0.0])
        b = PowerSeries([1.0, -1.0, 0.0])
        assert np.allclose(series_mul(a, b).coeffs, [1.0, 0.0, -1.0])

    def test_identity_element(self):
        rng = np.random.default_rng(0)
        a = PowerSeries(rng.normal(size=9))
        assert np.array_equal(series_mul(a, PowerSeries.one(8)).coeffs, a.coeffs)

    def test_z1_green_square_double_sum(self):
        # [z^{2n}] G^2 = sum_k C(2k,k) C(2n-2k,n-k) 4^-n, checked term by term
        g = z1_green(40)
        sq = series_mul(g, g)
        for n in range(21):
            expect = sum(
                math.comb(2 * k, k) * math.comb(2 * (n - k), n - k) for k in range(n + 1)
            ) * 0.25**n
            assert sq[2 * n] == pytest.approx(expect, rel=1e-13)
            if n >= 1:
                assert sq[2 * n - 1] == 0.0

    def test_truncates_to_min_order(self):
        a = PowerSeries(np.ones(10))
        b = PowerSeries(np.ones(4))
        assert series_mul(a, b).order == 3


class TestReciprocal:
    def test_geometric(self):
        r = series_reciprocal(PowerSeries([1.0, -1.0] + [0.0] * 8))
        assert np.allclose(r.coeffs, np.ones(10))

    def test_involution(self):
        rng = np.random.default_rng(1)
        a = PowerSeries(np.concatenate([[2.0], rng.normal(size=12)]))
        back = series_reciprocal(series_reciprocal(a))
        assert np.allclose(back.coeffs, a.coeffs, atol=1e-12)

    def test_zero_constant_term_rejected(self):
        with pytest.raises(ZeroConstantTerm):
            series_reciprocal(PowerSeries([0.0, 1.0]))

    def test_first_returns_on_z(self):
        # U = 1 - 1/G must list the first-return probabilities of the Z walk
        order = 30
        g = z1_green(order)
        u = 1.0 - series_reciprocal(g)
        dp = first_return_probs_z(order)
        assert np.allclose(u.coeffs, dp, atol=1e-13)
        # Catalan closed form as a second check
        for n in range(1, order // 2 + 1):
            cat = math.comb(2 * n - 2, n - 1) // n
            assert u[2 * n] == pytest.approx(2 * cat * 0.25**n, rel=1e-12)


class TestCompose:
    def test_identity_both_ways(self):
        z = PowerSeries.identity(12)
        assert np.allclose(series_compose(z, z).coeffs, z.coeffs)

    def test_geometric_of_square(self):
        inner = PowerSeries([0.0, 0.0, 1.0] + [0.0] * 6)
        out = series_compose(geometric(8), inner)
        assert np.allclose(out.coeffs, [1, 0, 1, 0, 1, 0, 1, 0, 1])

    def test_nonzero_inner_rejected(self):
        with pytest.raises(NonzeroInnerConstant):
            series_compose(geometric(3), PowerSeries([1.0, 1.0, 0.0, 0.0]))

    def test_against_horner(self):
        rng = np.random.default_rng(2)
        outer = PowerSeries(rng.normal(size=33))
        inner_c = rng.normal(size=33) * 0.5
        inner_c[0] = 0.0
        inner = PowerSeries(inner_c)
        got = series_compose(outer, inner)
        acc = PowerSeries.zero(32)
        for c in outer.coeffs[::-1]:
            acc = series_mul(acc, inner) + c
        assert np.allclose(got.coeffs, acc.coeffs, atol=1e-10)


class TestReversion:
    def test_identity(self):
        z = PowerSeries.identity(8)
        assert np.allclose(series_reversion(z).coeffs, z.coeffs)

    def test_moebius_pair(self):
        order = 16
        w = PowerSeries(np.concatenate([[0.0], np.ones(order)]))  # z/(1-z)
        v = series_reversion(w)
        expect = np.concatenate([[0.0], [(-1.0) ** (n - 1) for n in range(1, order + 1)]])
        assert np.allclose(v.coeffs, expect, atol=1e-12)

    def test_catalan(self):
        order = 20
        w = PowerSeries([0.0, 1.0, -1.0] + [0.0] * (order - 2))
        v = series_reversion(w)
        for n in range(1, order + 1):
            cat = math.comb(2 * (n - 1), n - 1) / n
            assert v[n] == pytest.approx(cat, rel=1e-11)

    def test_z1_walk_self_inverse(self):
        order = 64
        w = z1_green(order).shift()  # z*G(z)
        v = series_reversion(w)
        back = series_compose(w, v)
        assert np.allclose(back.coeffs, PowerSeries.identity(order).coeffs, atol=1e-12)
        # closed form: w = z/sqrt(1-z^2) inverts to t/sqrt(1+t^2)
        exact = np.zeros(order + 1)
        for n in range((order - 1) // 2 + 1):
            exact[2 * n + 1] = (-1.0) ** n * math.comb(2 * n, n) * 0.25**n
        assert np.allclose(v.coeffs, exact, atol=1e-13)
        # v o w is the ill-conditioned direction at this order: w^k coefficient
        # sums cancel heavily, so only a conditioning-scaled tolerance holds
        forth = series_compose(v, w)
        assert np.allclose(forth.coeffs, PowerSeries.identity(order).coeffs, atol=1e-6)

    def test_zero_linear_rejected(self):
        with pytest.raises(NotInvertible):
            series_reversion(PowerSeries([0.0, 0.0, 1.0]))
        with pytest.raises(NotInvertible):
            series_reversion(PowerSeries([1.0, 1.0]))


def words_2x2_convolution(alpha, nmax):
    """Return probabilities on (Z/2Z)*(Z/2Z) by direct word enumeration."""
    probs = {(): 1.0}
    out = np.zeros(nmax + 1)
    out[0] = 1.0
    for n in range(1, nmax + 1):
        nxt = {}
        for word, p in probs.items():
            for letter, a in ((0, alpha), (1, 1.0 - alpha)):
                if word and word[-1] == letter:
                    new = word[:-1]
                else:
                    new = word + (letter,)
                nxt[new] = nxt.get(new, 0.0) + p * a
        out[n] = nxt.get((), 0.0)
        probs = nxt
    return out


class TestImplicitGreen:
    def test_constant_phi(self):
        g = solve_implicit_green(PowerSeries.one(10), 10)
        assert np.allclose(g.coeffs, PowerSeries.one(10).coeffs)

    def test_fixed_point_residual(self):
        rng = np.random.default_rng(3)
        c = np.abs(rng.normal(size=17)) * 0.3
        c[0] = 1.0
        phi = PowerSeries(c)
        g = solve_implicit_green(phi, 16)
        res = g - series_compose(phi, g.shift())
        assert np.max(np.abs(res.coeffs)) < 1e-12

    def test_nonnegative_probability_coeffs(self):
        phi = PowerSeries([1.0, 0.3, 0.2, 0.1] + [0.0] * 12)
        g = solve_implicit_green(phi, 15)
        assert g[0] == 1.0
        assert np.all(g.coeffs >= -1e-15)

    def test_z2_star_z2_matches_word_convolution(self):
        order = 14
        gi = PowerSeries([1.0 if k % 2 == 0 else 0.0 for k in range(order + 1)])  # 1/(1-z^2)
        w = gi.shift()
        phi_i = series_compose(gi, series_reversion(w))
        phi = phi_i.scale_arg(0.5) * 2.0 - 1.0
        g = solve_implicit_green(phi, order)
        brute = words_2x2_convolution(0.5, order)
        assert np.allclose(g.coeffs, brute, atol=1e-12)


coeff_lists = st.lists(
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False), min_size=1, max_size=12
)


class TestRingAxioms:
    @settings(max_examples=60, deadline=None)
    @given(coeff_lists, coeff_lists, coeff_lists)
    def test_associativity_distributivity(self, a, b, c):
        n = min(len(a), len(b), len(c)) - 1
        A, B, C = (PowerSeries(x).truncate(n) for x in (a, b, c))
        left = series_mul(series_mul(A, B), C)
        right = series_mul(A, series_mul(B, C))
        assert np.allclose(left.coeffs, right.coeffs, atol=1e-12)
        dist_l = series_mul(A, B + C)
        dist_r = series_mul(A, B) + series_mul(A, C)
        assert np.allclose(dist_l.coeffs, dist_r.coeffs, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(coeff_lists)
    def test_reversion_two_sided(self, tail):
        w = PowerSeries([0.0, 1.0] + [0.5 * t for t in tail])
        v = series_reversion(w)
        n = w.order
        ident = PowerSeries.identity(n).coeffs
        assert np.allclose(series_compose(w, v).coeffs, ident, atol=1e-9)
        assert np.allclose(series_compose(v, w).coeffs, ident, atol=1e-9)


def test_derivative():
    d = series_derivative(PowerSeries([5.0, 1.0, 2.0, 3.0]))
    assert np.allclose(d.coeffs, [1.0, 4.0, 9.0])
