"""One time step of the cell-density and oxygen equations.

Splitting per step (first order):

* n: explicit donor-cell advection by u and explicit upwind chemotaxis flux
  (both in conservative flux form, so transport changes mass only through
  floating-point roundoff), then implicit diffusion with the face
  diffusivity frozen at the old n, then the positivity-preserving logistic
  split  n+ = nhat (1 + dt kappa) / (1 + dt mu nhat).
* c: explicit upwind advection in advective form (exact discrete max
  principle regardless of the tiny divergence residual of u), implicit unit
  diffusion, then the implicit multiplicative sink 1/(1 + dt f_eps(n)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import CflViolationError, InputDomainError
from .grid import ScalarField, avg_to_faces, gradient
from .linsolve import diffusion_flux_divergence, solve_scalar_diffusion
from .regularization import consumption_f, diffusivity, sensitivity

__all__ = ["StepControls", "step_n", "step_c", "cfl_dt"]

DT_MAX_DEFAULT = 0.05
DT_MIN_CAP = 1e-12
REACT_FRACTION = 0.5


@dataclass
class StepControls:
    """Time-step size and solver knobs shared by the three sub-steps."""

    dt: float
    cfl_target: float = 0.8
    lin_tol: float = 1e-10
    max_iters: int = 20000
    dt_max: float = DT_MAX_DEFAULT
    enforce_cfl: bool = True
    diffusivity_mean: str = "arithmetic"   # or "harmonic"
    pressure_solver: str = "cg"            # or "dct" (same residual contract)

    def __post_init__(self):
        if self.dt <= 0:
            raise InputDomainError("dt must be > 0")
        if not (0.0 < self.cfl_target < 1.0):
            raise InputDomainError("cfl_target must lie in (0, 1)")
        if self.lin_tol <= 0:
            raise InputDomainError("lin_tol must be > 0")
        if self.diffusivity_mean not in ("arithmetic", "harmonic"):
            raise InputDomainError("diffusivity_mean: arithmetic or harmonic")


def _upwind_flux(face_speed, values, grid, axis):
    """Conservative donor-cell flux on axis faces; boundary faces carry 0."""
    dim = grid.dim
    flux = np.zeros(grid.face_shape(axis))
    lo = [slice(None)] * dim
    hi = [slice(None)] * dim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    interior = [slice(None)] * dim
    interior[axis] = slice(1, -1)
    w = face_speed[tuple(interior)]
    flux[tuple(interior)] = (np.maximum(w, 0.0) * values[tuple(lo)]
                             + np.minimum(w, 0.0) * values[tuple(hi)])
    return flux


def _flux_divergence(fluxes, grid):
    out = np.zeros(grid.cells)
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out += (fluxes[a][tuple(hi)] - fluxes[a][tuple(lo)]) / h
    return out


def _advective_upwind(values, u, grid):
    """(u . grad) values at cells, donor form with face velocities.

    Writes the update as a convex combination under the CFL bound, so the
    cell max cannot increase even when div u carries a solver residual.
    """
    dim = grid.dim
    out = np.zeros(grid.cells)
    for a in range(dim):
        h = grid.spacing[a]
        comp = u.components[a]
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[a] = slice(None, -1)   # left/lower face of each cell
        hi[a] = slice(1, None)    # right/upper face
        w_lo = comp[tuple(lo)]
        w_hi = comp[tuple(hi)]
        dminus = np.zeros(grid.cells)
        dplus = np.zeros(grid.cells)
        cm = [slice(None)] * dim
        cp = [slice(None)] * dim
        cm[a] = slice(1, None)
        cp[a] = slice(None, -1)
        dminus[tuple(cm)] = (values[tuple(cm)] - values[tuple(cp)]) / h
        dplus[tuple(cp)] = dminus[tuple(cm)]
        out += np.maximum(w_lo, 0.0) * dminus + np.minimum(w_hi, 0.0) * dplus
    return out


def _face_diffusivity(n, p, mean="arithmetic"):
    """Frozen face diffusivity from cell n: average n to faces, then evaluate.

    Negative roundoff in n is floored at 0 before the power law so the
    coefficient stays defined; this does not touch n itself.
    """
    grid = n.grid
    out = []
    for a in range(grid.dim):
        if mean == "arithmetic":
            nf = avg_to_faces(n.values, grid, a)
        else:
            # harmonic mean of the shifted values, for strongly degenerate runs
            shift = p.eps if p.diffusion_variant == "degenerate" else 1.0
            s = np.maximum(n.values, 0.0) + shift
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            interior = [slice(None)] * grid.dim
            interior[a] = slice(1, -1)
            nf = avg_to_faces(n.values, grid, a)
            hm = 2.0 / (1.0 / s[tuple(lo)] + 1.0 / s[tuple(hi)])
            nf[tuple(interior)] = hm - shift
        out.append(diffusivity(np.maximum(nf, 0.0), p))
    return out


def _chemo_face_speed(state, p):
    """chi * grad(c) per axis on faces: the drift the chemotaxis flux upwinds."""
    gc = gradient(state.c)
    return [p.chi * gc.components[a] for a in range(state.grid.dim)]


def _check_cfl(state, p, sc):
    if not sc.enforce_cfl:
        return
    bound = sc.cfl_target * cfl_dt(state, p, dt_max=sc.dt_max)
    if sc.dt > bound * (1.0 + 1e-12):
        raise CflViolationError(
            f"dt={sc.dt:.3e} exceeds cfl_target*cfl_dt={bound:.3e}")


def step_n(state, p, sc, log=None):
    """Advance the cell density by one step of size sc.dt; returns the new n.

    Guarantees: the result is nonnegative (nonnegative inputs, donor-cell
    CFL, M-matrix diffusion solve, Patankar logistic split); transport is in
    flux form, so mass changes only through the logistic term.
    """
    if np.any(state.n.values < 0):
        raise InputDomainError("step_n expects n >= 0")
    _check_cfl(state, p, sc)
    grid = state.grid
    dt = sc.dt
    n = state.n.values

    fluxes = [_upwind_flux(state.u.components[a], n, grid, a)
              for a in range(grid.dim)]
    if p.chi > 0:
        chem = _chemo_face_speed(state, p)
        sens = sensitivity(np.maximum(n, 0.0), p.eps)
        for a in range(grid.dim):
            fluxes[a] += _upwind_flux(chem[a], sens, grid, a)
    nhat = n - dt * _flux_divergence(fluxes, grid)

    Df = _face_diffusivity(state.n, p, mean=sc.diffusivity_mean)
    x, info = solve_scalar_diffusion(nhat, grid, Df, dt, sc.lin_tol,
                                     sc.max_iters, x0=nhat, context="n-diffusion")
    # flux-form update: mass identical to nhat independent of solver residual
    nplus = nhat + dt * diffusion_flux_divergence(x, grid, Df)

    if p.kappa != 0.0 or p.mu != 0.0:
        nplus = nplus * (1.0 + dt * p.kappa) / (1.0 + dt * p.mu * nplus)

    negatives = int(np.sum(nplus < 0.0))
    if negatives:
        nplus = np.maximum(nplus, 0.0)
    if log is not None:
        log["n_diffusion_iters"] = info["iterations"]
        log["n_clipped_cells"] = negatives
    return ScalarField(grid, nplus)


def step_c(state, p, sc, log=None):
    """Advance the oxygen field; discrete max principle up to lin_tol."""
    if np.any(state.c.values < 0):
        raise InputDomainError("step_c expects c >= 0")
    _check_cfl(state, p, sc)
    grid = state.grid
    dt = sc.dt

    chat = state.c.values - dt * _advective_upwind(state.c.values, state.u, grid)

    ones = [np.ones(grid.face_shape(a)) for a in range(grid.dim)]
    x, info = solve_scalar_diffusion(chat, grid, ones, dt, sc.lin_tol,
                                     sc.max_iters, x0=chat, context="c-diffusion")

    sink = consumption_f(np.maximum(state.n.values, 0.0), p.eps)
    cplus = x / (1.0 + dt * sink)

    negatives = int(np.sum(cplus < 0.0))
    if negatives:
        cplus = np.maximum(cplus, 0.0)
    if log is not None:
        log["c_diffusion_iters"] = info["iterations"]
        log["c_clipped_cells"] = negatives
    return ScalarField(grid, cplus)


def cfl_dt(state, p, dt_max=DT_MAX_DEFAULT, react_fraction=REACT_FRACTION):
    """Largest stable dt for the explicit transport terms, capped.

    Per cell: 1 / sum_axis (|u_face| + chi |grad c|_face / (1 + eps n)) / h,
    the donor-cell positivity bound for advection plus chemotaxis (the
    factor 1/(1+eps n) is sensitivity(n)/n).  A logistic-rate cap
    react_fraction/(kappa + mu max n) keeps the reaction resolved; dt_max
    bounds the result away from infinity, DT_MIN_CAP away from zero.
    """
    grid = state.grid
    n = state.n.values
    speed_sum = np.zeros(grid.cells)
    chem = _chemo_face_speed(state, p) if p.chi > 0 else None
    for a in range(grid.dim):
        h = grid.spacing[a]
        comp = np.abs(state.u.components[a])
        if chem is not None:
            comp = comp + np.abs(chem[a]) / (1.0 + p.eps * avg_to_faces(
                np.maximum(n, 0.0), grid, a))
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        speed_sum += (comp[tuple(lo)] + comp[tuple(hi)]) / h
    dt_adv = 1.0 / max(float(speed_sum.max()), 1e-300)

    rate = p.kappa + p.mu * float(np.max(n, initial=0.0))
    dt_react = react_fraction / rate if rate > 0 else np.inf

    return float(min(max(min(dt_adv, dt_react, dt_max), DT_MIN_CAP), dt_max))
