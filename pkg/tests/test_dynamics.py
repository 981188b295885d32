import numpy as np
import pytest
from scipy.integrate import solve_ivp

import oracles
from kowgyro.dynamics import (
    bracket_oracle,
    dopri,
    field_complex,
    field_real,
    integrate,
    momentum,
    project_to_orbit,
)
from kowgyro.errors import StepFailure
from kowgyro.phase import PhaseState, casimir_residuals, complexify, integrals_vec, random_state
from kowgyro.special import equilibria, pendulum_state


class TestFields:
    def test_equilibria_fixed(self, params):
        for s in equilibria(params):
            assert np.all(field_real(s, params) == 0)
            assert all(v == 0 for v in field_complex(complexify(s), params))

    @pytest.mark.parametrize("sign", [1, -1])
    def test_pendulum_slot(self, params, sign):
        for phi in np.linspace(-3, 3, 7):
            f = field_real(pendulum_state("P3", phi, 0.8, sign, params), params)
            assert f[2] == pytest.approx(-(params.a + sign * params.b) * np.sin(phi), abs=1e-15)

    def test_matches_oracle(self, params, rng):
        for _ in range(20):
            y = rng.normal(size=9)
            ref = oracles.field_real(y, params.a, params.b, params.lam)
            assert np.abs(field_real(y, params) - ref).max() < 1e-14

    def test_complex_is_pushforward(self, params, rng):
        # complexify is linear, so its differential is itself
        for _ in range(20):
            y = rng.normal(size=9)
            lhs = 1j * np.array(field_complex(complexify(y), params))
            rhs = np.array(complexify(field_real(y, params)))
            assert np.abs(lhs - rhs).max() < 1e-12


class TestIntegrator:
    def test_order_on_oscillator(self):
        f = lambda y: np.array([y[1], -y[0]])  # noqa: E731
        for tol in (1e-8, 1e-12):
            t, ys = dopri(f, [1.0, 0.0], 10.0, tol=tol)
            assert t[-1] == 10.0 and np.all(np.diff(t) > 0)
            assert abs(ys[-1, 0] - np.cos(10.0)) < 200 * tol

    def test_step_budget(self, params, rng):
        with pytest.raises(StepFailure):
            integrate(random_state(params, rng), params, 10.0, max_steps=5)

    def test_step_underflow(self):
        with pytest.raises(StepFailure):
            dopri(lambda y: y**2, [1.0], 2.0, tol=1e-10)

    def test_equilibrium_constant(self, params):
        tr = integrate(equilibria(params)[1], params, 5.0)
        assert np.all(tr.states == tr.states[0])
        assert tr.drift[0].tolist() == [0, 0, 0]

    def test_conservation(self, params, rng):
        for _ in range(3):
            tr = integrate(random_state(params, rng), params, 100.0, tol=1e-12)
            assert np.all(np.diff(tr.times) > 0)
            assert np.all(tr.drift[0] == 0)
            assert tr.max_drift.max() < 1e-9
            assert tr.max_casimir < 1e-9

    def test_projection(self, params, rng):
        tr = integrate(random_state(params, rng), params, 20.0, tol=1e-10, project=True)
        assert tr.max_casimir < 1e-14
        y = random_state(params, rng).as_vector() + 1e-3 * rng.normal(size=9)
        p = project_to_orbit(y, params)
        assert np.abs(casimir_residuals(PhaseState.from_vector(p), params)).max() < 1e-14
        assert np.abs(p - y).max() < 1e-2

    def test_p1_family_stays(self, params0):
        s0 = pendulum_state("P1", 0.4, 1.1, 1, params0)
        tr = integrate(s0, params0, 20.0)
        assert np.abs(tr.states[:, 1:3]).max() < 1e-12
        assert np.abs(tr.states[:, 3:6] - [params0.a, 0, 0]).max() < 1e-12
        assert np.abs(tr.states[:, 6]).max() < 1e-12

    @pytest.mark.parametrize("sign", [1, -1])
    def test_p3_against_scalar_pendulum(self, params, sign):
        w = params.a + sign * params.b
        phi0, rate0 = 0.3, 1.2
        tr = integrate(pendulum_state("P3", phi0, rate0, sign, params), params, 10.0, tol=1e-13)
        ref = solve_ivp(
            lambda t, y: [y[1], -w * np.sin(y[0])], (0, 10.0), [phi0, rate0],
            method="DOP853", rtol=1e-13, atol=1e-13, t_eval=tr.times,
        )  # fmt: skip
        phi, rate = ref.y
        assert np.abs(tr.states[:, 2] - rate).max() < 1e-9
        expected = np.array([pendulum_state("P3", p, r, sign, params).as_vector() for p, r in zip(phi, rate)])
        assert np.abs(tr.states - expected).max() < 1e-9


class TestBracket:
    def test_structure_constants(self, params, rng):
        y = random_state(params, rng).as_vector()
        M = momentum(y, params)
        M1 = lambda v: momentum(v, params)[0]  # noqa: E731
        M2 = lambda v: momentum(v, params)[1]  # noqa: E731
        assert bracket_oracle(M1, M2, y, params) == pytest.approx(M[2], abs=1e-8)
        assert bracket_oracle(lambda v: v[3], lambda v: v[7], y, params) == pytest.approx(0, abs=1e-12)

    def test_involutive(self, params, rng):
        def comp(i):
            return lambda v: integrals_vec(v, params)[i]

        for _ in range(10):
            y = random_state(params, rng).as_vector()
            for i, j in ((2, 1), (2, 0), (1, 0)):
                assert abs(bracket_oracle(comp(i), comp(j), y, params)) < 1e-7

    def test_casimirs_central(self, params, rng):
        y = random_state(params, rng).as_vector()
        cas = lambda v: v[3:6] @ v[6:9]  # noqa: E731
        for k in range(9):
            assert abs(bracket_oracle(cas, lambda v, k=k: v[k], y, params)) < 1e-8

    def test_matches_tensor_oracle(self, params, rng):
        f = lambda v: v[0] * v[4] + v[2] ** 2 * v[8]  # noqa: E731
        g = lambda v: np.sin(v[1]) + v[5] * v[6]  # noqa: E731
        for _ in range(5):
            y = rng.normal(size=9)
            assert bracket_oracle(f, g, y, params) == pytest.approx(oracles.bracket(f, g, y, params.lam), abs=1e-8)

    def test_generates_flow(self, params, rng):
        # with this sign convention dx/dt = {H, x}
        y = random_state(params, rng).as_vector()
        H = lambda v: integrals_vec(v, params)[2]  # noqa: E731
        f = field_real(y, params)
        got = [bracket_oracle(H, lambda v, i=i: v[i], y, params) for i in range(9)]
        assert np.abs(np.array(got) - f).max() < 1e-7
