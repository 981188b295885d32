import numpy as np
import pytest

import oracles
from kowgyro import critical as crit
from kowgyro.dynamics import bracket_oracle, field_complex, integrate
from kowgyro.errors import DegenerateDenominator, SamplingFailure, SingularDelta
from kowgyro.phase import ComplexState, Params, complexify, integrals, orbit_residuals, random_state, realify
from kowgyro.special import equilibria, pendulum_state
from kowgyro.verify import rank1_states


@pytest.fixture(scope="module")
def points():
    """20 N and 20 O points at the default parameters."""
    params = Params(1.0, 0.6, 0.7)
    rng = np.random.default_rng(7)
    return params, {w: [crit.sample_stratum(w, params, rng) for _ in range(20)] for w in ("N", "O")}


def cfun(fn, params, index=None):
    def f(y):
        v = fn(complexify(y), params)
        return v if index is None else v[index]

    return f


def directional(fn, c, v, eps=1e-3):
    """Five-point derivative of a holomorphic function of the chart along ``v``."""
    c, v = np.array(c), np.array(v)
    at = lambda t: fn(ComplexState(*(c + t * v)))  # noqa: E731
    return (-at(2 * eps) + 8 * at(eps) - 8 * at(-eps) + at(-2 * eps)) / (12 * eps)


class TestPolynomials:
    def test_double_coded(self, params, rng):
        for _ in range(10):
            c = complexify(rng.normal(size=9))
            ref_F = oracles.F_polys(c, params.lam)
            ref_R = oracles.R_polys(c, params.lam)
            assert np.abs(np.array(crit.F_polys(c, params)) - ref_F).max() < 1e-12 * (1 + np.abs(ref_F).max())
            assert np.abs(np.array(crit.R_polys(c, params)) - ref_R).max() < 1e-12 * (1 + np.abs(ref_R).max())

    @pytest.mark.parametrize("which,closure", [("N", crit.close_N), ("O", crit.close_O)])
    def test_closures_match_symbolic_solve(self, params, rng, which, closure):
        for _ in range(10):
            part = crit.PartialState.of(complexify(rng.normal(size=9)))
            c = closure(part, params)
            ref = oracles.closure(which, part, params.lam)
            assert np.abs(np.array([c.y1, c.y2]) - ref).max() < 1e-10 * (1 + np.abs(ref).max())

    def test_closed_points_solve(self, params, rng):
        part = crit.PartialState.of(complexify(rng.normal(size=9)))
        assert crit.residual_N(crit.close_N(part, params), params).max() < 1e-10
        assert crit.residual_O(crit.close_O(part, params), params).max() < 1e-10

    def test_partial_integrals_match(self, points):
        params, pts = points
        for c in pts["N"]:
            assert abs(crit.S_N(c, params) - oracles.S_N(c, params.lam)) < 1e-12 * abs(crit.S_N(c, params))
        for c in pts["O"]:
            assert abs(crit.S_O(c, params) - oracles.S_O(c, params.lam)) < 1e-12 * abs(crit.S_O(c, params))

    def test_U_zero_on_O(self, points):
        params, pts = points
        for c in pts["O"]:
            assert abs(crit.U1(c, params)) < 1e-9
            assert abs(crit.U2(c, params)) < 1e-8


class TestFamilyL:
    def test_pendulum_and_equilibria(self, params, rng):
        for s in equilibria(params):
            assert np.all(crit.residual_L(complexify(s)) == 0)
        for sign in (1, -1):
            c = complexify(pendulum_state("P3", rng.uniform(-3, 3), 1.3, sign, params))
            assert np.all(crit.residual_L(c) == 0)

    def test_random_moduli(self, params, rng):
        c = complexify(random_state(params, rng))
        assert np.array_equal(crit.residual_L(c), np.abs([c.w1, c.w2, c.z1, c.z2]))
        assert crit.residual_L(c).min() > 0

    def test_differentials(self, params, rng):
        # dK vanishes and 4 dG + (x1 x2 - y1 y2) dH = 0 along the six fields
        for _ in range(10):
            c = crit.sample_stratum("L", params, rng)
            m = crit.momentum_matrix(c, params)
            assert np.abs(m[:, 1]).max() < 1e-10
            assert np.abs(4 * m[:, 0] + (c.x1 * c.x2 - c.y1 * c.y2) * m[:, 2]).max() < 1e-10


class TestFamiliesNO:
    @pytest.mark.parametrize("which", ["N", "O"])
    def test_on_orbit_and_real(self, points, which):
        params, pts = points
        for c in pts[which]:
            assert np.abs(orbit_residuals(c, params)).max() < 1e-10
            realify(c)
            assert max(crit.stratum_residual(c, params, which).values) < 1e-10

    def test_rank1_points_in_both(self):
        params = Params(1.0, 0.6, 0.7)
        for _, _, c in rank1_states(params):
            assert crit.residual_N(c, params).max() < 1e-8
            assert crit.residual_O(c, params).max() < 1e-8

    def test_random_points_outside(self, params, rng):
        for _ in range(5):
            c = complexify(random_state(params, rng))
            assert crit.residual_N(c, params).max() > 1e-6
            assert crit.residual_O(c, params).max() > 1e-6

    @pytest.mark.parametrize("which", ["N", "O"])
    def test_invariant_along_flow(self, points, which):
        params, pts = points
        S = crit.S_N if which == "N" else crit.S_O
        for c in pts[which][:3]:
            tr = integrate(realify(c), params, 10.0)
            s0 = S(c, params)
            for y in tr.states[:: max(1, len(tr) // 200)]:
                cy = complexify(y)
                assert max(crit.stratum_residual(cy, params, which).values) < 1e-7
                assert abs(S(cy, params) - s0) < 1e-8 * max(1, abs(s0))

    def test_derivative_of_S_on_O(self, points):
        params, pts = points
        for c in pts["O"][:5]:
            v = field_complex(c, params)
            assert abs(directional(lambda z: crit.S_O(z, params), c, v)) < 1e-10 * max(1, abs(crit.S_O(c, params)))

    def test_U1_derivative_matches_U2(self, params, rng):
        # off the family: U2 is w1 w2 times the derivative of U1
        c = complexify(random_state(params, rng))
        d = directional(lambda z: crit.U1(z, params), c, field_complex(c, params))
        assert crit.U2(c, params) == pytest.approx(c.w1 * c.w2 * d, rel=1e-9)

    def test_lambda_zero(self, params0, rng):
        c = complexify(random_state(params0, rng))
        with pytest.raises(ValueError):
            crit.residual_N(c, params0)
        with pytest.raises(ValueError):
            crit.close_N(crit.PartialState.of(c), params0)

    def test_degenerate_denominators(self, params, rng):
        c = complexify(random_state(params, rng))
        part = crit.PartialState.of(c)._replace(w1=0j)
        with pytest.raises(DegenerateDenominator):
            crit.close_O(part, params)
        part = crit.PartialState.of(c)._replace(w1=0j, w3=0j)
        with pytest.raises(DegenerateDenominator):
            crit.close_N(part, params)

    def test_unknown_stratum(self, params, rng):
        with pytest.raises(ValueError):
            crit.stratum_residual(complexify(random_state(params, rng)), params, "Q")


class TestLagrange:
    def test_solve_and_closed_form(self, points):
        params, pts = points
        for which in ("N", "O"):
            for c in pts[which]:
                S, T = crit.lagrange_ST(c, params)
                assert crit.lagrange_residual(c, params, S, T).max() < 1e-11 * max(1, abs(S), abs(T))
                Sc, Tc = crit.lagrange_ST_closed(c, params)
                assert abs(S - Sc) < 1e-9 * max(1, abs(S)) and abs(T - Tc) < 1e-9 * max(1, abs(T))

    def test_S_values(self, points):
        params, pts = points
        for c in pts["N"]:
            S, T = crit.lagrange_ST(c, params)
            assert abs(S - crit.S_N(c, params)) < 1e-10 * max(1, abs(S))
            assert abs(T - 2 * params.lam**2 * S) < 1e-9 * max(1, abs(T))
        for c in pts["O"]:
            S, T = crit.lagrange_ST(c, params)
            assert abs(S - crit.S_O(c, params)) < 1e-10 * max(1, abs(S))
            assert abs(T - crit.T_O(c, S)) < 1e-9 * max(1, abs(T))

    def test_multiplier_relation(self, points):
        # 2 dG + S dK + (T - p^2) dH vanishes along the six fields
        params, pts = points
        for c in pts["O"][:5] + pts["N"][:5]:
            S, T = crit.lagrange_ST(c, params)
            m = crit.momentum_matrix(c, params)
            combo = 2 * m[:, 0] + S * m[:, 1] + (T - params.p2) * m[:, 2]
            assert np.abs(combo).max() < 1e-9 * max(1, np.abs(m).max())

    def test_singular_delta(self, params):
        c = ComplexState(0, 0, 0.3, 0.4, 0.4, 1.6, 1.6, 0, 0)
        with pytest.raises(SingularDelta):
            crit.lagrange_ST(c, params)
        with pytest.raises(SingularDelta):
            crit.lagrange_ST_closed(c, params)


class TestBrackets:
    def test_U_bracket(self, points):
        params, pts = points
        for c in pts["O"][:5]:
            y = realify(c)
            num = bracket_oracle(cfun(crit.U1, params), cfun(crit.U2, params), y, params)
            closed = -1j * crit.bracket_U_closed(crit.S_O(c, params).real, integrals(y, params).h, params)
            assert abs(num - closed) < 1e-6 * abs(closed)

    def test_F_bracket(self, points):
        params, pts = points
        for c in pts["N"][:5]:
            y = realify(c)
            num = bracket_oracle(cfun(crit.F_polys, params, 0), cfun(crit.F_polys, params, 1), y, params)
            h, s = integrals(y, params).h, crit.S_N(c, params).real
            closed = crit.bracket_F_closed(c, params, h, s)
            assert min(abs(num - 1j * closed), abs(num + 1j * closed)) < 1e-6 * abs(closed)
            assert abs(num**2 + crit.bracket_F_closed_sq(c, params, h, s)) < 1e-6 * abs(num) ** 2

    def test_F_bracket_defaults(self, points):
        params, pts = points
        c = pts["N"][0]
        h, s = integrals(realify(c), params).h, crit.S_N(c, params).real
        assert crit.bracket_F_closed(c, params) == pytest.approx(crit.bracket_F_closed(c, params, h, s), rel=1e-10)

    def test_factor_zeros(self, params):
        s_cusp = (params.r2**2 / (8 * params.lam**2)) ** (1 / 3)
        assert abs(crit.bracket_F_factor(s_cusp, 1.0, params)) < 1e-12
        # 2 s^2 - (2h + lam^2) s + p^2 = 0 at s = 1 when 2h + lam^2 = 2 + p^2
        h = (2 + params.p2 - params.lam**2) / 2
        assert abs(crit.bracket_F_factor(1.0, h, params)) < 1e-7


class TestRank:
    def test_tangent_fields_match(self, params, rng):
        c = complexify(rng.normal(size=9))
        assert np.array_equal(crit.tangent_fields(c), oracles.tangent_fields(c))

    def test_fields_tangent_to_orbit(self, params, rng):
        # the orbit constraints are annihilated by the six fields
        c = complexify(random_state(params, rng))
        X = crit.tangent_fields(c)
        for row in X:
            d = directional(lambda z: np.array(orbit_residuals(z, params)), c, row)
            assert np.abs(d).max() < 1e-10

    def test_strata_ranks(self, points, params, rng):
        p, pts = points
        for which in ("N", "O"):
            for c in pts[which]:
                rep = crit.rank_report(c, p)
                assert rep.rank == 2 and rep.gap > 1e3
        for _ in range(20):
            assert crit.momentum_rank(complexify(random_state(params, rng)), params) == 3

    def test_report_infinite_gap(self, params):
        rep = crit.rank_report(complexify(equilibria(params)[0]), params)
        assert rep.rank == 0 and rep.gap == float("inf")


class TestSampling:
    def test_reproducible(self, params):
        a = crit.sample_stratum("N", params, np.random.default_rng(3))
        b = crit.sample_stratum("N", params, np.random.default_rng(3))
        assert a == b

    def test_budget(self, params):
        with pytest.raises(SamplingFailure):
            crit.sample_stratum("O", params, np.random.default_rng(0), max_tries=0)

    def test_L_points(self, params, rng):
        c = crit.sample_stratum("L", params, rng)
        assert np.all(crit.residual_L(c) == 0)


class TestSurfaces:
    def test_images_on_surfaces(self, points):
        params, pts = points
        for which, branch, S in (("N", "gamma1", crit.S_N), ("O", "gamma2", crit.S_O)):
            for c in pts[which]:
                tri = integrals(realify(c), params)
                g, k, _, _ = oracles.gamma(branch, S(c, params).real, tri.h, params.a, params.b, params.lam)
                assert abs(tri.g - g) < 1e-8 * (1 + abs(g)) and abs(tri.k - k) < 1e-8 * (1 + abs(k))

    def test_near_zero_momentum_ratios(self):
        # on O the two projections of M are in the same ratio to M1, M2
        params = Params(1.0, 0.6, 1e-4)
        rng = np.random.default_rng(11)
        for _ in range(5):
            c = crit.sample_stratum("O", params, rng)
            y = realify(c).as_vector()
            M = np.array([2 * y[0], 2 * y[1], y[2] + params.lam])
            r1, r2 = M @ y[3:6] / M[0], M @ y[6:9] / M[1]
            assert r1 == pytest.approx(r2, rel=1e-7)
            assert r1 == pytest.approx(-crit.S_O(c, params).real, rel=1e-7)
