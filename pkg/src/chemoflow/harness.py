"""Run orchestration: scenarios, the time loop, eps/m sweeps, refinement
studies, and the closed-form oracles (Barenblatt, discrete heat mode).
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import (FLOOR_DEFAULT, check_c_monotone, check_gradc_budget,
                          check_mass_bound, compute_record)
from .errors import InputDomainError, RunAbortedError, SetupError
from .flow_step import step_u
from .grid import (GridSpec, InitialData, ScalarField, State, VectorField,
                   curl_stream_2d, divergence, integrate)
from .regularization import ModelParams
from .scalar_step import StepControls, cfl_dt, step_c, step_n
from .weakform import TestFunctionSpec, weak_residual

__all__ = ["Scenario", "RunResult", "SweepReport", "build_initial", "run",
           "eps_sweep", "m_sweep", "barenblatt_profile", "barenblatt_test",
           "heat_mode_test", "refinement_study", "default_scenario"]

_SNAP = 1e-12


@dataclass
class Scenario:
    """Everything needed to reproduce one run bit-for-bit."""

    grid: GridSpec
    params: ModelParams
    T: float
    sample_dt: float = 0.0          # 0: record every step
    n_preset: str = "gaussian"      # or "uniform", "barenblatt"
    c_preset: str = "uniform"
    u_preset: str = "zero"          # or "vortex"
    n_base: float = 0.1
    n_amp: float = 0.9
    n_sigma: float = 0.12
    c_level: float = 1.0
    u_amp: float = 0.0
    perturb: float = 0.0
    seed: int = 0
    cfl_target: float = 0.8
    dt_max: float = 0.05
    dt_fixed: float = 0.0           # >0: use this dt (still CFL-checked)
    lin_tol: float = 1e-10
    max_iters: int = 20000
    K: float = 1.0
    floor: float = FLOOR_DEFAULT
    pressure_solver: str = "dct"    # the verified accelerator; "cg" baseline
    enforce_cfl: bool = True        # False only for negative-control studies
    diffusivity_mean: str = "arithmetic"   # "harmonic" for degenerate runs

    def __post_init__(self):
        if self.T <= 0:
            raise InputDomainError("T must be > 0")

    def controls(self, dt):
        return StepControls(dt=dt, cfl_target=self.cfl_target,
                            lin_tol=self.lin_tol, max_iters=self.max_iters,
                            dt_max=self.dt_max,
                            pressure_solver=self.pressure_solver,
                            enforce_cfl=self.enforce_cfl,
                            diffusivity_mean=self.diffusivity_mean)


@dataclass
class RunResult:
    scenario: Scenario
    history: list
    final_state: State
    trajectory: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    error: str = ""
    steps: int = 0
    wall_time: float = 0.0

    @property
    def completed(self):
        return not self.error


@dataclass
class SweepReport:
    """Pairwise space-time L2 distances along a parameter sweep."""

    axis: str
    values: list
    pairwise_dist: np.ndarray        # distances of n trajectories
    pairwise_dist_pow: np.ndarray    # distances of (n+eps)^(m/2) trajectories
    cauchy_ratios: list
    summaries: list                  # per-run dict of record maxima
    errors: list
    histories: list = field(default_factory=list)   # per-run record rows

    def __post_init__(self):
        d = self.pairwise_dist
        assert d.shape[0] == d.shape[1]


def _perturbation(grid, rng, amplitude, modes=3):
    """Smooth seeded perturbation from low Neumann-compatible cosine modes."""
    if amplitude == 0.0:
        return np.zeros(grid.cells)
    mesh = grid.center_mesh()
    out = np.zeros(grid.cells)
    for _ in range(modes):
        term = np.ones(grid.cells)
        for a in range(grid.dim):
            k = int(rng.integers(1, 4))
            term = term * np.cos(k * math.pi * mesh[a] / grid.lengths[a])
        out += float(rng.uniform(-1.0, 1.0)) * term
    peak = float(np.max(np.abs(out)))
    return (amplitude / peak) * out if peak > 0 else out


def build_initial(scenario):
    """Materialize the preset initial data; positivity is structural."""
    grid = scenario.grid
    rng = np.random.default_rng(scenario.seed)
    mesh = grid.center_mesh()

    if scenario.n_preset == "gaussian":
        center = [0.5 * L for L in grid.lengths]
        sigma = scenario.n_sigma * min(grid.lengths)
        r2 = sum((mesh[a] - center[a]) ** 2 for a in range(grid.dim))
        n0 = scenario.n_base + scenario.n_amp * np.exp(-0.5 * r2 / sigma ** 2)
    elif scenario.n_preset == "uniform":
        n0 = np.full(grid.cells, scenario.n_base)
    else:
        raise InputDomainError(f"unknown n preset {scenario.n_preset!r}")
    n0 = n0 + _perturbation(grid, rng, scenario.perturb * scenario.n_base / 2)

    if scenario.c_preset == "uniform":
        c0 = np.full(grid.cells, scenario.c_level)
    else:
        raise InputDomainError(f"unknown c preset {scenario.c_preset!r}")

    if scenario.u_preset == "zero" or scenario.u_amp == 0.0:
        u0 = VectorField.zeros(grid)
    elif scenario.u_preset == "vortex":
        if grid.dim != 2:
            raise InputDomainError("vortex preset is 2-D")
        Lx, Ly = grid.lengths
        amp = scenario.u_amp

        def stream(x, y):
            return amp * np.sin(math.pi * x / Lx) ** 2 * np.sin(math.pi * y / Ly) ** 2

        u0 = curl_stream_2d(grid, stream)
    else:
        raise InputDomainError(f"unknown u preset {scenario.u_preset!r}")

    data = InitialData(ScalarField(grid, n0), ScalarField(grid, c0), u0)
    return State(0.0, data.n0, data.c0, data.u0, ScalarField.zeros(grid),
                 scenario.params.eps)


def advance(state, p, sc, log=None):
    """One step of the (step_n, step_c, step_u) triple from a common state."""
    n_new = step_n(state, p, sc, log=log)
    c_new = step_c(state, p, sc, log=log)
    u_new, P_new = step_u(state, p, sc, log=log)
    return State(state.t + sc.dt, n_new, c_new, u_new, P_new, state.eps)


def run(scenario, outdir=None, keep_trajectory=False, writer=None,
        state=None, on_sample=None):
    """Advance a scenario to its final time with adaptive dt.

    dt = cfl_target * cfl_dt, clipped so sample times and T are hit exactly;
    one FunctionalRecord per sample (every step when sample_dt == 0).  Any
    step failure writes a checkpoint into ``outdir`` (when given) and raises
    RunAbortedError carrying the partial result.  ``writer`` receives each
    record as it is produced (CSV streaming); ``on_sample`` receives the
    sampled state (snapshot hooks); ``state`` allows restarting from a
    checkpoint.
    """
    import time as _time

    p = scenario.params
    t_start = _time.perf_counter()
    if state is None:
        state = build_initial(scenario)
    history = []
    trajectory = []
    result = RunResult(scenario, history, state, trajectory)

    def record(st):
        rec = compute_record(st, p, K=scenario.K, floor=scenario.floor)
        history.append(rec)
        if writer is not None:
            writer(rec)
        if on_sample is not None:
            on_sample(st)
        if keep_trajectory:
            trajectory.append(st.copy())

    if state.t == 0.0:
        record(state)
    steps = 0
    try:
        while state.t < scenario.T - _SNAP:
            if scenario.dt_fixed > 0:
                dt = scenario.dt_fixed
            else:
                dt = scenario.cfl_target * cfl_dt(state, p,
                                                  dt_max=scenario.dt_max)
            dt = min(dt, scenario.T - state.t)
            if scenario.sample_dt > 0:
                k = math.floor(state.t / scenario.sample_dt + _SNAP) + 1
                next_sample = k * scenario.sample_dt
                dt = min(dt, next_sample - state.t)
            state = advance(state, p, scenario.controls(dt))
            steps += 1
            at_sample = (scenario.sample_dt <= 0
                         or abs(state.t / scenario.sample_dt
                                - round(state.t / scenario.sample_dt)) < 1e-9
                         or state.t >= scenario.T - _SNAP)
            if at_sample:
                record(state)
    except Exception as exc:  # checkpoint the partial run, then propagate
        result.final_state = state
        result.steps = steps
        result.error = f"{type(exc).__name__}: {exc}"
        result.wall_time = _time.perf_counter() - t_start
        ckpt = None
        if outdir is not None:
            from .io_formats import write_checkpoint
            os.makedirs(outdir, exist_ok=True)
            ckpt = os.path.join(outdir, f"abort_t{state.t:.6f}.chk")
            write_checkpoint(state, ckpt)
        raise RunAbortedError(result.error, result=result,
                              checkpoint_path=ckpt) from exc

    result.final_state = state
    result.steps = steps
    result.wall_time = _time.perf_counter() - t_start
    result.monitors = standard_monitors(result)
    return result


def standard_monitors(result, tol_mass=1e-2, tol_c=1e-8, tol_budget=5e-2):
    """The per-run monitor battery every completed run must pass."""
    hist = result.history
    p = result.scenario.params
    c0_l2 = None
    # budget needs integral of c0^2; reconstruct from the uniform preset
    c0_l2 = (result.scenario.c_level ** 2
             * result.scenario.grid.domain_volume)
    return [
        check_mass_bound(hist, p, result.scenario.grid.domain_volume,
                         tol=tol_mass),
        check_c_monotone(hist, tol=tol_c),
        check_gradc_budget(hist, c0_l2, tol=tol_budget),
    ]


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _trajectory_samples(scenario):
    res = run(scenario, keep_trajectory=True)
    ts = np.array([st.t for st in res.trajectory])
    fields = np.stack([st.n.values for st in res.trajectory])
    summary = _summary(res.history)
    return ts, fields, summary, res


def _summary(history):
    keys = ["mass", "cmax", "energy_F", "nmax", "div_u_max"]
    return {k: max(getattr(r, k) for r in history) for k in keys}


def _spacetime_l2(ts, fa, fb, cell_volume):
    """L2(Omega x (0,T)) distance of two sampled trajectories."""
    sq = np.sum((fa - fb) ** 2, axis=tuple(range(1, fa.ndim))) * cell_volume
    w = np.zeros_like(ts)
    w[1:] += 0.5 * np.diff(ts)
    w[:-1] += 0.5 * np.diff(ts)
    return math.sqrt(float(np.sum(w * sq)))


def _pairwise_sweep(scenario, axis, values, make_scenario):
    runs = []
    errors = []
    histories = []
    for v in values:
        sc = make_scenario(v)
        try:
            ts, n_traj, summary, res = _trajectory_samples(sc)
            runs.append((v, ts, n_traj, summary, sc.params))
            histories.append(res.history)
            errors.append("")
        except RunAbortedError as exc:
            runs.append(None)
            histories.append([])
            errors.append(str(exc))
    J = len(values)
    dist_n = np.zeros((J, J))
    dist_pow = np.zeros((J, J))
    vol = scenario.grid.cell_volume
    for i in range(J):
        for j in range(i + 1, J):
            if runs[i] is None or runs[j] is None:
                dist_n[i, j] = dist_n[j, i] = math.nan
                dist_pow[i, j] = dist_pow[j, i] = math.nan
                continue
            _, ts_i, ni, _, pi = runs[i]
            _, ts_j, nj, _, pj = runs[j]
            if len(ts_i) != len(ts_j) or not np.allclose(ts_i, ts_j,
                                                         atol=1e-9, rtol=0):
                raise SetupError("sweep runs sampled at different times; "
                                 "set sample_dt > 0")
            d = _spacetime_l2(ts_i, ni, nj, vol)
            dist_n[i, j] = dist_n[j, i] = d
            pow_i = np.power(ni + pi.eps, 0.5 * pi.m)
            pow_j = np.power(nj + pj.eps, 0.5 * pj.m)
            dp = _spacetime_l2(ts_i, pow_i, pow_j, vol)
            dist_pow[i, j] = dist_pow[j, i] = dp
    seq = [dist_n[k, k + 1] for k in range(J - 1)]
    ratios = [seq[k + 1] / seq[k] if seq[k] > 0 else math.inf
              for k in range(len(seq) - 1)]
    summaries = [r[3] if r is not None else {} for r in runs]
    return SweepReport(axis, list(values), dist_n, dist_pow, ratios,
                       summaries, errors, histories)


def eps_sweep(scenario, eps_list):
    """Run the scenario across a decreasing eps sequence.

    Successive-distance ratios below 1 are the empirical Cauchy trend that
    stands in for convergence of the regularized trajectories.
    """
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InputDomainError("eps_list must be strictly decreasing")
    if scenario.sample_dt <= 0:
        raise InputDomainError("eps_sweep needs sample_dt > 0 for alignment")

    def make(eps):
        return replace(scenario, params=replace(scenario.params, eps=eps))

    return _pairwise_sweep(scenario, "eps", list(eps_list), make)


def m_sweep(scenario, m_list):
    if scenario.sample_dt <= 0:
        raise InputDomainError("m_sweep needs sample_dt > 0 for alignment")

    def make(m):
        return replace(scenario, params=replace(scenario.params, m=m))

    return _pairwise_sweep(scenario, "m", list(m_list), make)


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

def barenblatt_profile(mesh, center, t, m, mass, dim):
    """Source solution of n_t = Lap(n^m), mass-normalized.

    n(x,t) = t^-alpha (C - k |x|^2 t^(-2 beta))_+^(1/(m-1)) with
    alpha = d/(d(m-1)+2), beta = alpha/d, k = alpha(m-1)/(2dm); C is fixed
    from the requested mass by the closed-form radial integral.
    """
    if m <= 1:
        raise InputDomainError("Barenblatt profile needs m > 1")
    d = dim
    alpha = d / (d * (m - 1.0) + 2.0)
    beta = alpha / d
    k = alpha * (m - 1.0) / (2.0 * d * m)
    q = 1.0 / (m - 1.0)
    if d == 2:
        # mass = pi * C^(q+1) / (k (q+1))
        C = (mass * k * (q + 1.0) / math.pi) ** (1.0 / (q + 1.0))
    elif d == 3:
        # mass = 2 pi C^(q+3/2) k^(-3/2) B(3/2, q+1)
        B = math.gamma(1.5) * math.gamma(q + 1.0) / math.gamma(q + 2.5)
        C = (mass * k ** 1.5 / (2.0 * math.pi * B)) ** (1.0 / (q + 1.5))
    else:
        raise InputDomainError("Barenblatt profile: dim must be 2 or 3")
    r2 = sum((mesh[a] - center[a]) ** 2 for a in range(d))
    core = C - k * r2 * t ** (-2.0 * beta)
    out = t ** (-alpha) * np.power(np.maximum(core, 0.0), q)
    radius = math.sqrt(C / k) * t ** beta
    return out, radius


def barenblatt_test(m, grid, t0=1.0, t1=1.5, dt_coef=0.1, eps=1e-8,
                    lin_tol=1e-11, lengths=None):
    """L1 error of the pure degenerate-diffusion step against the exact
    self-similar solution; chi = kappa = mu = 0, fluid frozen at rest.

    dt = dt_coef * h refines time with space, so the combined first-order
    error decreases strictly along a grid sequence.
    """
    if m <= 1:
        raise InputDomainError("barenblatt_test needs m > 1")
    if isinstance(grid, GridSpec):
        gs = grid
    else:
        cells = tuple(grid)
        L = lengths if lengths is not None else tuple(5.0 for _ in cells)
        gs = GridSpec(cells, L)
    mesh = gs.center_mesh()
    center = [0.5 * L for L in gs.lengths]

    profile0, r0 = barenblatt_profile(mesh, center, t0, m, 1.0, gs.dim)
    _, r1 = barenblatt_profile(mesh, center, t1, m, 1.0, gs.dim)
    margin = min(gs.lengths) / 2.0
    if r1 >= margin:
        raise SetupError(
            f"Barenblatt support radius {r1:.3f} reaches the boundary "
            f"(half-width {margin:.3f}) before t1")

    p = ModelParams(chi=0.0, kappa=0.0, mu=0.0, m=m, eps=eps,
                    grad_phi=tuple(0.0 for _ in range(gs.dim)),
                    fluid_variant="frozen")

    state = State(t0, ScalarField(gs, profile0),
                  ScalarField.full(gs, 1.0), VectorField.zeros(gs),
                  ScalarField.zeros(gs), eps)
    mass_h = integrate(state.n)
    if t1 <= t0 + _SNAP:
        # interpolation only: the oracle is the sampled profile itself
        return {"l1_error": 0.0, "mass": mass_h, "relative": 0.0,
                "final_state": state, "cells": gs.cells}

    h = min(gs.spacing)
    dt = dt_coef * h
    t = t0
    while t < t1 - _SNAP:
        step = min(dt, t1 - t)
        sc = StepControls(dt=step, lin_tol=lin_tol, dt_max=max(step, 0.05))
        n_new = step_n(state, p, sc)
        state = State(t + step, n_new, state.c, state.u, state.P, eps)
        t = state.t

    oracle, _ = barenblatt_profile(mesh, center, t1, m, mass_h, gs.dim)
    err = float(np.sum(np.abs(state.n.values - oracle))) * gs.cell_volume
    return {"l1_error": err, "mass": mass_h, "relative": err / mass_h,
            "final_state": state, "cells": gs.cells}


def heat_mode_test(grid, t1=0.1, a=0.5, dt=5e-4, lin_tol=1e-12):
    """Single-cosine-mode decay under m = 1 diffusion vs the discrete
    eigenvalue rate exp(-lambda_h t); returns the max-norm error.

    The mode cos(pi x/Lx) cos(pi y/Ly) is an exact eigenvector of the
    Neumann Laplacian, so the error is pure time discretization, O(dt).
    """
    if isinstance(grid, GridSpec):
        gs = grid
    else:
        gs = GridSpec(tuple(grid), tuple(1.0 for _ in grid))
    mesh = gs.center_mesh()
    mode = np.ones(gs.cells)
    lam = 0.0
    for ax in range(gs.dim):
        h = gs.spacing[ax]
        mode *= np.cos(math.pi * mesh[ax] / gs.lengths[ax])
        lam += 2.0 / h ** 2 * (1.0 - math.cos(math.pi * h / gs.lengths[ax]))
    n0 = 1.0 + a * mode

    p = ModelParams(chi=0.0, kappa=0.0, mu=0.0, m=1.0, eps=1e-8,
                    grad_phi=tuple(0.0 for _ in range(gs.dim)),
                    fluid_variant="frozen")
    state = State(0.0, ScalarField(gs, n0), ScalarField.full(gs, 1.0),
                  VectorField.zeros(gs), ScalarField.zeros(gs), 1e-8)
    t = 0.0
    while t < t1 - _SNAP:
        step = min(dt, t1 - t)
        sc = StepControls(dt=step, lin_tol=lin_tol, dt_max=max(step, 0.05))
        state = State(t + step, step_n(state, p, sc), state.c, state.u,
                      state.P, state.eps)
        t = state.t
    exact = 1.0 + a * math.exp(-lam * t1) * mode
    return float(np.max(np.abs(state.n.values - exact)))


# ---------------------------------------------------------------------------
# refinement study for the weak-form residuals
# ---------------------------------------------------------------------------

def refinement_study(base_scenario, cell_counts=(32, 64, 128), dt_coef=0.15,
                     test_fns=None):
    """Run the same scenario on a grid sequence with dt proportional to h and
    report the weak-form residuals and their empirical orders.
    """
    residuals = {"n": [], "c": [], "u": []}
    for nc in cell_counts:
        cells = tuple(nc for _ in base_scenario.grid.cells)
        grid = GridSpec(cells, base_scenario.grid.lengths)
        h = min(grid.spacing)
        scen = replace(base_scenario, grid=grid, sample_dt=0.0,
                       dt_fixed=dt_coef * h)
        res = run(scen, keep_trajectory=True)
        fns = test_fns or TestFunctionSpec(t_support=0.8 * scen.T)
        r = weak_residual(res.trajectory, scen.params, fns)
        for key in residuals:
            residuals[key].append(r[key])
    orders = {}
    for key, vals in residuals.items():
        ratio_orders = [math.log2(vals[k] / vals[k + 1])
                        if vals[k + 1] > 0 else math.inf
                        for k in range(len(vals) - 1)]
        orders[key] = ratio_orders
    return {"cells": list(cell_counts), "residuals": residuals,
            "orders": orders}


def default_scenario(m=2.0, cells=(64, 64), T=2.0, eps=0.01, chi=1.0,
                     kappa=0.5, mu=1.0, sample_dt=0.0, **kw):
    """The acceptance-suite configuration: gaussian n0, uniform c0, rest u0."""
    grid = GridSpec(cells, tuple(1.0 for _ in cells))
    params = ModelParams(chi=chi, kappa=kappa, mu=mu, m=m, eps=eps,
                         grad_phi=tuple([0.0] * (len(cells) - 1) + [-0.5]))
    return Scenario(grid=grid, params=params, T=T, sample_dt=sample_dt, **kw)
