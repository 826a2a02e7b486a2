"""Transport/diffusion/reaction step contracts for the n and c equations."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoflow.errors import CflViolationError
from chemoflow.grid import (GridSpec, ScalarField, State, VectorField,
                            curl_stream_2d, integrate)
from chemoflow.regularization import ModelParams
from chemoflow.scalar_step import StepControls, cfl_dt, step_c, step_n


def make_state(grid, n, c=None, u=None, eps=0.01):
    return State(0.0, ScalarField(grid, n),
                 c if c is not None else ScalarField.full(grid, 1.0),
                 u if u is not None else VectorField.zeros(grid),
                 ScalarField.zeros(grid), eps)


@pytest.fixture
def grid16():
    return GridSpec((16, 16), (1.0, 1.0))


def rk4_logistic(n0, kappa, mu, T, steps=20000):
    """Reference ODE integration of n' = kappa n - mu n^2."""
    f = lambda n: kappa * n - mu * n * n
    n, dt = n0, T / steps
    for _ in range(steps):
        k1 = f(n)
        k2 = f(n + 0.5 * dt * k1)
        k3 = f(n + 0.5 * dt * k2)
        k4 = f(n + dt * k3)
        n += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return n


class TestStepN:
    def test_constant_state_is_fixed_point(self, grid16):
        # all fluxes vanish, kappa = mu = 0: bitwise constant
        p = ModelParams(chi=1.0, kappa=0.0, mu=0.0, m=2.0)
        st0 = make_state(grid16, np.full(grid16.cells, 0.8))
        out = step_n(st0, p, StepControls(dt=0.01))
        assert np.all(out.values == 0.8)

    def test_logistic_single_step_value(self, grid16):
        p = ModelParams(chi=0.0, kappa=1.0, mu=1.0, m=1.0)
        st0 = make_state(grid16, np.full(grid16.cells, 0.5))
        out = step_n(st0, p, StepControls(dt=0.1, dt_max=0.2))
        expected = 0.5 * 1.1 / 1.05
        assert np.allclose(out.values, expected, rtol=1e-14)

    def test_logistic_trajectory_matches_rk4_oracle(self, grid16):
        p = ModelParams(chi=0.0, kappa=1.0, mu=1.0, m=1.0)
        dt, T = 0.01, 1.0
        st0 = make_state(grid16, np.full(grid16.cells, 0.5))
        state = st0
        for _ in range(round(T / dt)):
            out = step_n(state, p, StepControls(dt=dt))
            state = State(state.t + dt, out, state.c, state.u, state.P,
                          state.eps)
        exact = rk4_logistic(0.5, 1.0, 1.0, T)
        # first-order split: O(dt) error against the ODE oracle, which
        # matches the closed-form sigmoid 1/(1+e^-t)
        assert abs(float(state.n.values[0, 0]) - exact) < 0.5 * dt
        assert exact == pytest.approx(1.0 / (1.0 + math.exp(-T)), abs=1e-10)

    def test_logistic_converges_to_carrying_capacity(self, grid16):
        p = ModelParams(chi=0.0, kappa=1.0, mu=1.0, m=1.0)
        state = make_state(grid16, np.full(grid16.cells, 0.5))
        dt = 0.05
        for _ in range(400):
            out = step_n(state, p, StepControls(dt=dt, dt_max=0.2))
            state = State(state.t + dt, out, state.c, state.u, state.P,
                          state.eps)
        assert float(state.n.values[0, 0]) == pytest.approx(1.0, abs=1e-3)

    def test_mass_conserved_by_transport(self, grid16):
        # kappa = mu = 0, chemotaxis and advection on: flux form conserves
        p = ModelParams(chi=1.0, kappa=0.0, mu=0.0, m=2.0)
        rng = np.random.default_rng(2)
        n = 0.5 + 0.3 * rng.random(grid16.cells)
        c = ScalarField.from_function(
            grid16, lambda x, y: 1.0 + 0.2 * np.cos(np.pi * x) * np.cos(np.pi * y))
        u = curl_stream_2d(grid16, lambda x, y: 0.05 * np.sin(np.pi * x) ** 2
                           * np.sin(np.pi * y) ** 2)
        st0 = make_state(grid16, n, c=c, u=u)
        dt = 0.5 * cfl_dt(st0, p)
        out = step_n(st0, p, StepControls(dt=dt))
        assert abs(integrate(out) - integrate(st0.n)) < 1e-13

    def test_mass_identity_with_logistic(self, grid16):
        # transport off: mass change equals the Patankar-split integral
        p = ModelParams(chi=0.0, kappa=0.7, mu=1.3, m=1.0)
        rng = np.random.default_rng(3)
        n = 0.2 + rng.random(grid16.cells)
        st0 = make_state(grid16, n)
        dt = 0.05
        out = step_n(st0, p, StepControls(dt=dt, dt_max=0.2))
        # diffusion conserves; nhat equals the post-diffusion field whose
        # integral equals integrate(n)
        nhat_integral = integrate(st0.n)
        predicted = dt * integrate(ScalarField(
            grid16, (p.kappa - p.mu * _nhat(st0, p, dt)) * _nhat(st0, p, dt)
            / (1 + dt * p.mu * _nhat(st0, p, dt))))
        assert integrate(out) - nhat_integral == pytest.approx(
            predicted, abs=1e-12)

    def test_nonnegativity_random_fields(self, grid16):
        p = ModelParams(chi=1.0, kappa=0.5, mu=1.0, m=0.5, eps=0.05)
        rng = np.random.default_rng(4)
        for trial in range(5):
            n = rng.random(grid16.cells) * 2.0
            c = ScalarField(grid16, rng.random(grid16.cells))
            st0 = make_state(grid16, n, c=c, eps=0.05)
            dt = 0.8 * cfl_dt(st0, p)
            out = step_n(st0, p, StepControls(dt=dt))
            assert np.all(out.values >= 0.0)

    def test_strictly_positive_stays_positive(self, grid16):
        p = ModelParams(chi=1.0, kappa=0.5, mu=1.0, m=2.0)
        rng = np.random.default_rng(5)
        st0 = make_state(grid16, 0.1 + rng.random(grid16.cells))
        dt = 0.5 * cfl_dt(st0, p)
        out = step_n(st0, p, StepControls(dt=dt))
        assert out.values.min() > 0.0

    def test_m1_output_bit_identical_across_eps(self, grid16):
        # for m = 1 the eps shift is invisible when chi = 0 and u = 0
        rng = np.random.default_rng(6)
        n = 0.3 + rng.random(grid16.cells)
        outs = []
        for eps in (0.5, 0.01, 1e-4):
            p = ModelParams(chi=0.0, kappa=0.5, mu=1.0, m=1.0, eps=eps)
            st0 = make_state(grid16, n.copy(), eps=eps)
            outs.append(step_n(st0, p, StepControls(dt=0.02)).values)
        assert np.array_equal(outs[0], outs[1])
        assert np.array_equal(outs[1], outs[2])

    def test_cfl_violation_raises(self, grid16):
        p = ModelParams(chi=1.0)
        c = ScalarField.from_function(grid16,
                                      lambda x, y: 1.0 + 0.5 * np.cos(np.pi * x))
        st0 = make_state(grid16, np.full(grid16.cells, 0.5), c=c)
        big = 10.0 * cfl_dt(st0, p)
        with pytest.raises(CflViolationError):
            step_n(st0, p, StepControls(dt=big, dt_max=100.0))
        # bypass flag skips the check
        step_n(st0, p, StepControls(dt=big, dt_max=100.0, enforce_cfl=False))


def _nhat(state, p, dt):
    """Post-transport field for the mass-identity test (transport off)."""
    from chemoflow.linsolve import (diffusion_flux_divergence,
                                    solve_scalar_diffusion)
    from chemoflow.scalar_step import _face_diffusivity

    Df = _face_diffusivity(state.n, p)
    x, _ = solve_scalar_diffusion(state.n.values, state.grid, Df, dt,
                                  1e-10, 20000, x0=state.n.values)
    return state.n.values + dt * diffusion_flux_divergence(x, state.grid, Df)


class TestStepC:
    def test_no_sink_no_flux_fixed_point(self, grid16):
        p = ModelParams(chi=0.0, kappa=0.0, mu=0.0)
        st0 = make_state(grid16, np.zeros(grid16.cells),
                         c=ScalarField.full(grid16, 1.0))
        out = step_c(st0, p, StepControls(dt=0.05, dt_max=0.2))
        assert np.all(out.values == 1.0)

    def test_sink_value(self, grid16):
        p = ModelParams(chi=0.0, kappa=0.0, mu=0.0, eps=1.0)
        st0 = make_state(grid16, np.ones(grid16.cells),
                         c=ScalarField.full(grid16, 1.0), eps=1.0)
        out = step_c(st0, p, StepControls(dt=0.1, dt_max=0.2))
        expected = 1.0 / (1.0 + 0.1 * math.log(2.0))
        assert np.allclose(out.values, expected, rtol=1e-14)

    def test_max_principle_random(self, grid16):
        p = ModelParams(chi=0.0, kappa=0.5, mu=1.0)
        rng = np.random.default_rng(8)
        u = curl_stream_2d(grid16, lambda x, y: 0.1 * np.sin(np.pi * x) ** 2
                           * np.sin(np.pi * y) ** 2)
        for _ in range(5):
            c = ScalarField(grid16, rng.random(grid16.cells))
            st0 = make_state(grid16, rng.random(grid16.cells), c=c, u=u)
            dt = 0.8 * cfl_dt(st0, p)
            out = step_c(st0, p, StepControls(dt=dt, lin_tol=1e-11))
            assert out.values.max() <= c.values.max() + 1e-10
            assert out.values.min() >= 0.0


class TestCflDt:
    def test_quiescent_returns_dt_max(self, grid16):
        p = ModelParams(chi=1.0, kappa=0.0, mu=0.0)
        st0 = make_state(grid16, np.full(grid16.cells, 0.5))
        assert cfl_dt(st0, p, dt_max=0.07) == 0.07

    def test_doubling_velocity_halves_bound(self, grid16):
        p = ModelParams(chi=0.0, kappa=0.0, mu=0.0)

        def bound(amp):
            u = curl_stream_2d(grid16, lambda x, y: amp * np.sin(np.pi * x) ** 2
                               * np.sin(np.pi * y) ** 2)
            st0 = make_state(grid16, np.full(grid16.cells, 0.5), u=u)
            return cfl_dt(st0, p, dt_max=1e9)

        assert bound(0.2) / bound(0.4) == pytest.approx(2.0, rel=1e-10)

    @given(amp=st.floats(min_value=0.0, max_value=10.0))
    @settings(max_examples=20, deadline=None)
    def test_never_exceeds_cap(self, amp):
        grid = GridSpec((8, 8), (1.0, 1.0))
        p = ModelParams(chi=1.0)
        u = curl_stream_2d(grid, lambda x, y: amp * np.sin(np.pi * x) ** 2
                           * np.sin(np.pi * y) ** 2)
        st0 = make_state(grid, np.full(grid.cells, 0.5), u=u)
        dt = cfl_dt(st0, p, dt_max=0.05)
        assert 0.0 < dt <= 0.05
