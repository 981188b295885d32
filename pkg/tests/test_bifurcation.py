import numpy as np
import pytest

import oracles
from kowgyro import bifurcation as bif
from kowgyro import critical as crit
from kowgyro.errors import GridTooCoarse, SZero
from kowgyro.lax import spectral_coeffs
from kowgyro.phase import Params, integrals, realify
from kowgyro.special import equilibria

SAMPLE = Params(1.0, 0.5, 0.1)


@pytest.fixture(scope="module")
def sample_slice():
    return bif.sigma_h(2.0, SAMPLE)


class TestLines:
    def test_zero_shifted_energy(self, params):
        g, k = bif.gamma_lines(params.lam**2 / 2, params)["gamma_plus"]
        assert g == 0 and k == (params.a + params.b) ** 2

    def test_equilibria_on_lines(self, params):
        for s in equilibria(params):
            tri = integrals(s, params)
            pts = bif.gamma_lines(tri.h, params).values()
            assert min(abs(tri.g - g) + abs(tri.k - k) for g, k in pts) < 1e-12

    def test_rigid_body(self, params0):
        ab = params0.a * params0.b
        lines = bif.gamma_lines(1.3, params0)
        assert lines["gamma_plus"] == pytest.approx((-ab * 1.3, (params0.a + params0.b) ** 2), rel=1e-15)
        assert lines["gamma_minus"] == pytest.approx((ab * 1.3, (params0.a - params0.b) ** 2), rel=1e-15)


class TestCurves:
    @pytest.mark.parametrize("branch", bif.CURVES)
    def test_double_coded(self, params, branch):
        s = np.concatenate([-np.geomspace(0.05, 20, 30), np.geomspace(0.05, 20, 30)])
        ours = bif.curve(branch, s, 1.4, params)
        ref = oracles.gamma(branch, s, 1.4, params.a, params.b, params.lam)
        for x, y in zip(ours, ref):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("branch", bif.CURVES)
    def test_derivatives(self, params, branch):
        s = np.array([-3.0, -0.4, 0.3, 2.5])
        eps = 1e-5
        _, _, dg, dk = bif.curve(branch, s, 0.8, params)
        gp, kp, _, _ = bif.curve(branch, s + eps, 0.8, params)
        gm, km, _, _ = bif.curve(branch, s - eps, 0.8, params)
        assert np.allclose(dg, (gp - gm) / (2 * eps), rtol=1e-7)
        assert np.allclose(dk, (kp - km) / (2 * eps), rtol=1e-7)

    def test_second_derivatives(self, params):
        for branch in bif.CURVES:
            s, eps = 0.7, 1e-5
            ddg, ddk = bif._second_derivs(branch, s, 0.8, params)
            _, _, gp, kp = bif.curve(branch, s + eps, 0.8, params)
            _, _, gm, km = bif.curve(branch, s - eps, 0.8, params)
            assert ddg == pytest.approx((gp - gm) / (2 * eps), rel=1e-7)
            assert ddk == pytest.approx((kp - km) / (2 * eps), rel=1e-7)

    def test_zero_momentum_parabola(self, params0):
        s = np.concatenate([-np.geomspace(1e-2, 20, 50), np.geomspace(1e-2, 20, 50)])
        r4, p2 = params0.r2**2, params0.p2
        for h in (-1.0, 0.5, 3.0):
            g, k, _, _ = bif.gamma1(s, h, params0)
            assert np.allclose(k, r4 / (4 * s**2), rtol=1e-15)
            assert np.allclose(g, 0.5 * p2 * h - r4 / (4 * s), rtol=1e-14)
            lhs, rhs = (p2 * h - 2 * g) ** 2, r4 * k
            assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1, rhs))

    def test_large_s_growth(self, params):
        s = np.array([1e4, 1e6])
        _, k, _, _ = bif.gamma1(s, 1.0, params)
        assert np.allclose(k / (4 * params.lam**2 * s), 1, rtol=1e-4)

    def test_shift_invariance(self):
        # (h, lam) -> (h + d, sqrt(lam^2 + 2d)) with dyadic data is exact
        pa, pb = Params(1.0, 0.5, 0.5), Params(1.0, 0.5, 1.0)
        s = np.concatenate([-np.arange(1, 33) / 4, np.arange(1, 33) / 4])
        for x, y in zip(bif.gamma2(s, 2.0, pa), bif.gamma2(s, 2.375, pb)):
            assert np.array_equal(x, y)
        assert bif.gamma_lines(2.0, pa) == bif.gamma_lines(2.375, pb)

    def test_s_zero(self, params):
        for branch in bif.CURVES:
            with pytest.raises(SZero):
                bif.curve(branch, np.array([1.0, 0.0]), 1.0, params)
        with pytest.raises(ValueError):
            bif.curve("gamma3", 1.0, 1.0, params)

    def test_sheets_touch_without_gyrostat(self, params0):
        # on Gamma_2 the parabola condition of Gamma_1 factors as
        # (s^2 - a^2)(s^2 - b^2)(2 s^2 - 2 h s + p^2)^2 / s^2
        a, b, p2, r4 = params0.a, params0.b, params0.p2, params0.r2**2
        h = 4.0
        s = np.concatenate([-np.geomspace(0.05, 10, 40), np.geomspace(0.05, 10, 40)])
        g, k, dg, dk = bif.gamma2(s, h, params0)
        phi = (p2 * h - 2 * g) ** 2 - r4 * k
        fac = (s**2 - a**2) * (s**2 - b**2) * (2 * s**2 - 2 * h * s + p2) ** 2 / s**2
        assert np.allclose(phi, fac, rtol=1e-10, atol=1e-10)
        # at a double root the curve is tangent to the parabola
        for st in np.roots([2.0, -2 * h, p2]).real:
            g, k, dg, dk = bif.gamma2(st, h, params0)
            grad = np.array([-4 * (p2 * h - 2 * g), -r4])
            assert abs((p2 * h - 2 * g) ** 2 - r4 * k) < 1e-12
            assert abs(grad @ [dg, dk]) < 1e-10 * np.linalg.norm(grad) * np.hypot(dg, dk)

    def test_N_and_O_images(self, params):
        rng = np.random.default_rng(5)
        for which, branch, S in (("N", "gamma1", crit.S_N), ("O", "gamma2", crit.S_O)):
            for _ in range(5):
                c = crit.sample_stratum(which, params, rng)
                tri = integrals(realify(c), params)
                g, k, _, _ = bif.curve(branch, S(c, params).real, tri.h, params)
                assert abs(g - tri.g) + abs(k - tri.k) < 1e-8 * (1 + abs(g) + abs(k))


class TestSpectralDegeneracy:
    def test_gamma1_zero_root(self, params):
        s = np.concatenate([-np.geomspace(0.1, 10, 20), np.geomspace(0.1, 10, 20)])
        c0, _ = bif.spectral_degeneracy("gamma1", s, 1.2, params)
        assert np.abs(c0).max() < 1e-8

    def test_gamma2_double_root(self, params):
        s = np.concatenate([-np.geomspace(0.1, 10, 20), np.geomspace(0.1, 10, 20)])
        c0, disc = bif.spectral_degeneracy("gamma2", s, 1.2, params)
        assert np.all(np.abs(disc) < 1e-8 * np.maximum(1, np.abs(c0)))

    def test_generic_point_not_degenerate(self, params):
        c2, c0 = spectral_coeffs(1.0, 0.3, 2.0, 1.2, params)
        assert abs(c0) > 1e-3 and abs(c2 * c2 - 4 * c0) > 1e-3


class TestSlice:
    def test_cusp_count_fixture(self, sample_slice):
        cusps = [p for p in sample_slice.singular if p.kind == "cusp"]
        assert len(cusps) == 3
        assert sample_slice.kinds() == {"cusp": 3, "intersection": 14, "double_point": 2, "s_zero_asymptote": 4}

    def test_cusps_match_polynomial_roots(self, sample_slice):
        for branch in bif.CURVES:
            found = sorted(p.parameters["s"] for p in sample_slice.singular if p.kind == "cusp" and p.parameters["branch"] == branch)
            exact = bif.cusp_parameters_exact(branch, 2.0, SAMPLE)
            assert np.allclose(found, exact, rtol=1e-10)

    def test_no_gamma1_cusp_without_gyrostat(self):
        p = Params(1.0, 0.5, 0.0)
        sl = bif.sigma_h(2.0, p, rank1_check=False)
        assert not [q for q in sl.singular if q.kind == "cusp" and q.parameters["branch"] == "gamma1"]
        assert bif.rank1_images(2.0, p) == []

    def test_crossings_solve(self, sample_slice):
        for p in sample_slice.singular:
            if p.kind == "intersection" and p.parameters["branches"] == ["gamma1", "gamma2"]:
                s1, s2 = p.parameters["s"]
                g1, k1, _, _ = bif.gamma1(s1, 2.0, SAMPLE)
                g2, k2, _, _ = bif.gamma2(s2, 2.0, SAMPLE)
                assert abs(g1 - g2) + abs(k1 - k2) < 1e-9 * (1 + abs(g1) + abs(k1))
            if p.kind == "double_point":
                sa, sb = p.parameters["s"]
                assert sa < sb
                A = bif.curve(p.parameters["branch"], sa, 2.0, SAMPLE)[:2]
                B = bif.curve(p.parameters["branch"], sb, 2.0, SAMPLE)[:2]
                assert np.allclose(A, B, atol=1e-9)

    def test_rank1_images_are_intersections(self, sample_slice):
        assert len(sample_slice.rank1) == 10
        assert all(sample_slice.rank1_matched)

    def test_line_points(self, sample_slice):
        for p in sample_slice.singular:
            if p.kind == "intersection" and p.parameters["branches"][0].startswith("gamma_"):
                line, branch = p.parameters["branches"]
                if line in ("gamma_plus", "gamma_minus"):
                    g, k, _, _ = bif.curve(branch, p.parameters["s"][0], 2.0, SAMPLE)
                    assert np.allclose((g, k), bif.gamma_lines(2.0, SAMPLE)[line], atol=1e-9)

    def test_samples(self, sample_slice):
        samples = sample_slice.samples
        assert {d.branch for d in samples} == set(bif.BRANCHES)
        assert all(d.s != 0 for d in samples)
        ht = bif.shifted_energy(2.0, SAMPLE)
        assert [d.s for d in samples if d.branch.startswith("gamma_")] == [ht, ht]

    def test_asymptotes(self, sample_slice):
        notes = [p for p in sample_slice.singular if p.kind == "s_zero_asymptote"]
        assert len(notes) == 4
        for p in notes:
            assert abs(p.parameters["s"]) == bif.GridSpec().s_min
            # k ~ coef g^2 as s -> 0; the correction is O(s)
            s = np.sign(p.parameters["s"]) * 1e-7
            g, k, _, _ = bif.curve(p.parameters["branch"], s, 2.0, SAMPLE)
            assert k / g**2 == pytest.approx(p.parameters["k_over_g2"], rel=1e-5)

    def test_grid_too_coarse(self):
        spec = bif.GridSpec(n=6, jump_tol=1e-6, max_refine=1)
        with pytest.raises(GridTooCoarse):
            bif.sample_curves(2.0, SAMPLE, spec)

    def test_refinement_bounds_jumps(self):
        spec = bif.GridSpec(n=50)
        for p in bif.sample_curves(2.0, SAMPLE, spec):
            jump = np.hypot(np.diff(p.g), np.diff(p.k))
            scale = 1 + np.minimum(np.hypot(p.g[:-1], p.k[:-1]), np.hypot(p.g[1:], p.k[1:]))
            assert np.all(jump <= spec.jump_tol * scale)
            assert np.all(np.diff(p.s) > 0)
