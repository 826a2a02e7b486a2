"""Acceptance suite: every criterion at its stated tolerance.

All expected values are either exact identities, closed-form oracle
evaluations, or bounds proved for the continuous system and checked here in
their discrete form.  Shared runs are session-scoped fixtures so each
scenario is computed once.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from chemoflow.diagnostics import (chain_rule_pair, check_c_monotone,
                                   check_energy_boundedness,
                                   check_gradc_budget, check_mass_bound)
from chemoflow.grid import (GridSpec, ScalarField, State, VectorField,
                            curl_stream_2d, divergence, integrate)
from chemoflow.harness import (barenblatt_test, default_scenario, eps_sweep,
                               heat_mode_test, refinement_study, run)
from chemoflow.regularization import (ModelParams, consumption_f, sensitivity,
                                      yosida_smooth)
from chemoflow.scalar_step import StepControls
from chemoflow.flow_step import step_u

from conftest import record_criterion
from test_regularization import _dense_yosida, _l2, small_divfree  # noqa: F401

M_VALUES = (0.5, 1.0, 2.0)
MASS_TOL = 1e-2
CMAX_TOL = 1e-8
BUDGET_TOL = 5e-2
DIV_TOL = 1e-8


@pytest.fixture(scope="session")
def m_runs():
    """Default scenario (64^2, chi=1, kappa=0.5, mu=1, eps=0.01, T=2) per m,
    with a record for every step."""
    out = {}
    for m in M_VALUES:
        t0 = time.perf_counter()
        res = run(default_scenario(m=m, cells=(64, 64), T=2.0, sample_dt=0.0))
        out[m] = (res, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def sweep_report():
    scen = default_scenario(m=2.0, cells=(64, 64), T=2.0, sample_dt=0.05)
    return eps_sweep(scen, [1e-1, 1e-2, 1e-3, 1e-4])


@pytest.fixture(scope="session")
def conservation_run():
    """kappa = mu = chi = 0, frozen fluid over a vortex: pure transport."""
    scen = default_scenario(m=2.0, cells=(64, 64), T=1.0, eps=0.01,
                            chi=0.0, kappa=0.0, mu=0.0,
                            sample_dt=0.25, u_preset="vortex", u_amp=0.05)
    scen = replace(scen, params=replace(scen.params, fluid_variant="frozen"),
                   dt_fixed=0.001)
    return run(scen, keep_trajectory=True)


@pytest.fixture(scope="session")
def refinement_out():
    base = default_scenario(m=2.0, cells=(32, 32), T=0.25, eps=1e-8,
                            sample_dt=0.0, u_preset="vortex", u_amp=0.05)
    t0 = time.perf_counter()
    out = refinement_study(base, cell_counts=(32, 64, 128), dt_coef=0.15)
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_criterion_1_mass_bound(m_runs):
    ok = True
    details = []
    for m, (res, elapsed) in m_runs.items():
        verdict = check_mass_bound(res.history, res.scenario.params,
                                   res.scenario.grid.domain_volume,
                                   tol=MASS_TOL)
        assert verdict.passed, f"m={m}: {verdict}"
        assert elapsed <= 60.0, f"m={m} run took {elapsed:.1f}s"
        ok = ok and verdict.passed
        details.append(f"m={m}: mass<= {verdict.observed:.3f}/{verdict.bound:.3f} "
                       f"{elapsed:.1f}s")
    record_criterion(1, "mass bound on default scenario, m in {0.5,1,2}",
                     ok, "; ".join(details))


def test_criterion_2_conservation(conservation_run):
    res = conservation_run
    assert res.steps == 1000
    m0 = res.history[0].mass
    drift = max(abs(rec.mass - m0) for rec in res.history) / m0
    record_criterion(2, "mass conservation control (1000 steps)",
                     drift <= 1e-12, f"relative drift {drift:.3e}")
    assert drift <= 1e-12


def test_criterion_3_max_principle(m_runs, conservation_run):
    worst_step = 0.0
    worst_budget = 0.0
    histories = [res.history for res, _ in m_runs.values()]
    histories.append(conservation_run.history)
    for hist in histories:
        mono = check_c_monotone(hist, tol=CMAX_TOL)
        assert mono.passed, str(mono)
        worst_step = max(worst_step, mono.observed / hist[0].cmax)
        c0_l2 = 1.0  # uniform oxygen preset: c0 = 1 on the unit square
        budget = check_gradc_budget(hist, c0_l2, tol=BUDGET_TOL)
        assert budget.passed, str(budget)
        worst_budget = max(worst_budget, budget.observed / budget.bound)
    record_criterion(3, "c max principle and gradient budget", True,
                     f"worst step growth {worst_step:.2e}, "
                     f"budget use {100 * worst_budget:.1f}%")


def test_criterion_4_energy_ladder(sweep_report):
    # chain-rule consistency of the dissipation integrand
    grid = GridSpec((64, 64), (1.0, 1.0))
    rng = np.random.default_rng(12)
    mesh = grid.center_mesh()
    worst = 0.0
    for m in M_VALUES:
        for trial in range(3):
            field = np.full(grid.cells, 1.0)
            for _ in range(2):
                kx, ky = rng.integers(1, 3, size=2)
                field += 0.05 * np.cos(kx * np.pi * mesh[0]) \
                    * np.cos(ky * np.pi * mesh[1]) * rng.uniform(0.5, 1.0)
            chain, direct = chain_rule_pair(ScalarField(grid, field), m, 0.01)
            rel = abs(direct - chain) / abs(chain)
            worst = max(worst, rel)
            assert rel <= 1e-6, f"m={m}: chain-rule relative gap {rel:.2e}"

    # sup_t F_eps finite and varying < 2x across eps in {1e-1,1e-2,1e-3}
    histories = [h for eps, h in zip(sweep_report.values,
                                     sweep_report.histories)
                 if eps >= 1e-3]
    verdict = check_energy_boundedness(histories, factor=2.0)
    assert verdict.passed, str(verdict)
    sups = [max(r.energy_F for r in h) for h in histories]
    record_criterion(4, "energy ladder: chain rule + sup F across eps", True,
                     f"chain gap {worst:.2e}; sup F {min(sups):.4f}..{max(sups):.4f}")


def test_criterion_5_eps_cauchy(sweep_report):
    ratios = sweep_report.cauchy_ratios
    assert len(ratios) == 2
    assert all(r < 1.0 for r in ratios), ratios

    # decoupled control: m = 1, chi = 0, fluid off -> eps invisible to n
    scen = default_scenario(m=1.0, cells=(64, 64), T=0.5, chi=0.0,
                            sample_dt=0.05)
    scen = replace(scen, params=replace(scen.params, fluid_variant="frozen"))
    control = eps_sweep(scen, [1e-1, 1e-2, 1e-3, 1e-4])
    off_diag = control.pairwise_dist[np.triu_indices(4, 1)]
    assert np.all(off_diag <= 1e-13), off_diag
    record_criterion(5, "eps-Cauchy convergence + decoupled control", True,
                     f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}; "
                     f"control max dist {off_diag.max():.1e}")


def test_criterion_6_barenblatt():
    t0 = time.perf_counter()
    rels = []
    for cells in (64, 128, 256):
        res = barenblatt_test(2.0, (cells, cells), 1.0, 1.5)
        rels.append(res["relative"])
    elapsed = time.perf_counter() - t0
    assert rels[1] < 0.03, f"128^2 relative L1 error {rels[1]:.4f}"
    assert rels[0] > rels[1] > rels[2], rels
    assert elapsed <= 120.0, f"barenblatt total {elapsed:.1f}s"
    record_criterion(6, "Barenblatt oracle m=2 (64/128/256)", True,
                     "rel " + "/".join(f"{r:.2e}" for r in rels)
                     + f", {elapsed:.0f}s")


def test_criterion_7_heat_mode():
    err = heat_mode_test((64, 64), t1=0.1, a=0.5, dt=5e-4)
    err_half = heat_mode_test((64, 64), t1=0.1, a=0.5, dt=2.5e-4)
    ratio = err / err_half
    assert err < 1e-3, f"heat mode error {err:.2e}"
    assert 1.8 <= ratio <= 2.2, f"dt-halving ratio {ratio:.2f}"
    record_criterion(7, "heat-mode oracle + first-order dt", True,
                     f"err {err:.2e}, ratio {ratio:.2f}")


def test_criterion_8_incompressibility(m_runs, sweep_report):
    worst = 0.0
    for res, _ in m_runs.values():
        worst = max(worst, max(rec.div_u_max for rec in res.history))
    for hist in sweep_report.histories:
        worst = max(worst, max(rec.div_u_max for rec in hist))
    assert worst <= DIV_TOL, f"max divergence {worst:.2e}"

    # gradient body force with constant n leaves u at rest
    grid = GridSpec((64, 64), (1.0, 1.0))
    p = ModelParams(grad_phi=(0.4, -0.5))
    st = State(0.0, ScalarField.full(grid, 0.7), ScalarField.full(grid, 1.0),
               VectorField.zeros(grid), ScalarField.zeros(grid), 0.01)
    u, _ = step_u(st, p, StepControls(dt=0.04, pressure_solver="dct"))
    umax = max(float(np.max(np.abs(c))) for c in u.components)
    assert umax <= DIV_TOL
    record_criterion(8, "incompressibility after every projection", True,
                     f"max |div u| {worst:.1e}; gradient-force |u| {umax:.1e}")


def test_criterion_9_regularizer_units(small_divfree):
    s = np.linspace(0.0, 50.0, 100)
    for k in range(1, 7):
        eps = 10.0 ** (-k)
        f = consumption_f(s, eps)
        assert np.all(f <= s) and np.all(f >= 0.0)
        fp = 1.0 / (1.0 + eps * s)
        assert np.all((fp > 0.0) & (fp <= 1.0))
        sv = sensitivity(s, eps)
        assert np.all(sv <= np.minimum(s, 1.0 / eps) + 1e-12)

    grid, u = small_divfree
    v = yosida_smooth(u, 0.05, tol=1e-13)
    assert _l2(v, grid) <= _l2(u, grid) * (1 + 1e-10)
    ref = _dense_yosida(u, 0.05, grid)
    gap = max(float(np.max(np.abs(v.components[a] - ref.components[a])))
              for a in range(2))
    assert gap <= 1e-10
    record_criterion(9, "regularizer unit properties + Yosida oracle", True,
                     f"dense-oracle gap {gap:.1e}")


def test_criterion_10_weak_residual(refinement_out):
    # steady-state control
    grid = GridSpec((32, 32), (1.0, 1.0))
    from chemoflow.weakform import TestFunctionSpec, weak_residual
    p = ModelParams(chi=1.0, kappa=0.5, mu=1.0, m=2.0, eps=0.01)
    traj = [State(0.01 * k, ScalarField.full(grid, 0.5),
                  ScalarField.zeros(grid), VectorField.zeros(grid),
                  ScalarField.zeros(grid), 0.01) for k in range(26)]
    steady = weak_residual(traj, p, TestFunctionSpec(t_support=0.2))
    assert max(steady.values()) <= 1e-10, steady

    res = refinement_out["residuals"]
    orders = refinement_out["orders"]
    for key in ("n", "c", "u"):
        vals = res[key]
        assert vals[0] > vals[1] > vals[2], (key, vals)
        assert min(orders[key]) >= 0.8, (key, orders[key])
    record_criterion(10, "weak-form residuals: steady control + refinement",
                     True,
                     f"steady {max(steady.values()):.1e}; min order "
                     f"{min(min(o) for o in orders.values()):.2f}; "
                     f"{refinement_out['elapsed']:.0f}s")
