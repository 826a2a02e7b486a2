"""Chorin projection step for the velocity equation with Yosida-smoothed
convection and buoyancy n grad(Phi).

Step layout: smooth the advecting velocity (navier_stokes only), build the
explicit convection + force terms, solve the implicit viscous Helmholtz
system per component, then project onto the discrete divergence-free space
through a pressure Poisson solve with mean-zero gauge.  The projection is
exact MAC algebra, so max|div u+| = dt * (Poisson residual).
"""

import numpy as np

from .grid import (ScalarField, VectorField, avg_faces_to_cells, avg_to_faces,
                   divergence, gradient)
from .linsolve import poisson_solve, solve_component_helmholtz
from .regularization import yosida_smooth

__all__ = ["step_u", "poisson_solve"]


def _advecting_speed_on(grid, w, comp_axis, along_axis):
    """Transport velocity component ``along_axis`` sampled on comp_axis-faces."""
    if along_axis == comp_axis:
        return w.components[comp_axis]
    cellavg = avg_faces_to_cells(w.components[along_axis], grid, along_axis)
    return avg_to_faces(cellavg, grid, comp_axis)


def _convection(u, w, grid, bc="no_slip"):
    """(w . grad) u per component, donor-cell upwind on the face grids."""
    out = []
    for a in range(grid.dim):
        V = u.components[a]
        adv = np.zeros_like(V)
        for b in range(grid.dim):
            h = grid.spacing[b]
            wb = _advecting_speed_on(grid, w, a, b)
            dminus = np.zeros_like(V)
            dplus = np.zeros_like(V)
            cm = [slice(None)] * grid.dim
            cp = [slice(None)] * grid.dim
            cm[b] = slice(1, None)
            cp[b] = slice(None, -1)
            dminus[tuple(cm)] = (V[tuple(cm)] - V[tuple(cp)]) / h
            dplus[tuple(cp)] = dminus[tuple(cm)]
            if b != a:
                # wall half a cell outside: ghost is -V (no_slip) or +V (free_slip)
                first = [slice(None)] * grid.dim
                first[b] = 0
                last = [slice(None)] * grid.dim
                last[b] = -1
                if bc == "no_slip":
                    dminus[tuple(first)] = 2.0 * V[tuple(first)] / h
                    dplus[tuple(last)] = -2.0 * V[tuple(last)] / h
            adv += np.maximum(wb, 0.0) * dminus + np.minimum(wb, 0.0) * dplus
        out.append(adv)
    return out


def _body_force(n, p, grid):
    """Buoyancy n * grad(Phi) on the faces of each component."""
    out = []
    for a in range(grid.dim):
        nf = avg_to_faces(n.values, grid, a)
        out.append(nf * p.grad_phi_on_faces(grid, a))
    return out


def step_u(state, p, sc, log=None):
    """One projection step; returns (new u, new P).

    fluid_variant: navier_stokes smooths the advecting velocity with the
    Yosida resolvent at the state's eps; stokes drops convection; frozen
    returns the state's u and P unchanged.
    """
    if p.fluid_variant == "frozen":
        return state.u.copy(), state.P.copy()

    grid = state.grid
    dt = sc.dt
    u = state.u

    rhs_comps = [u.components[a].copy() for a in range(grid.dim)]
    if p.fluid_variant == "navier_stokes":
        w = yosida_smooth(u, p.eps, tol=sc.lin_tol,
                          max_iters=sc.max_iters, bc=p.fluid_bc, log=log,
                          method=sc.pressure_solver)
        conv = _convection(u, w, grid, bc=p.fluid_bc)
        for a in range(grid.dim):
            rhs_comps[a] -= dt * conv[a]

    star = []
    for a in range(grid.dim):
        x, info = solve_component_helmholtz(
            rhs_comps[a], grid, a, dt * p.viscosity, sc.lin_tol, sc.max_iters,
            bc=p.fluid_bc, x0=u.components[a], context=f"viscous component {a}")
        if log is not None:
            log[f"viscous_iters_{a}"] = info["iterations"]
        star.append(x)
    # force enters after the viscous solve: a gradient force (constant n,
    # constant grad Phi) then stays an exact discrete gradient and the
    # projection removes it completely
    force = _body_force(state.n, p, grid)
    for a in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[a] = slice(1, -1)
        star[a][tuple(sl)] += dt * force[a][tuple(sl)]
    ustar = VectorField(grid, tuple(star))

    div_star = divergence(ustar)
    div_star.values /= dt
    # residual tol/dt in the Poisson solve gives max|div u+| <= lin_tol
    phi = poisson_solve(div_star, bc="neumann_mean_zero",
                        tol=min(sc.lin_tol, sc.lin_tol / dt),
                        max_iters=sc.max_iters,
                        x0=state.P.values, log=log,
                        method=sc.pressure_solver)
    gphi = gradient(phi)
    unew = VectorField(grid, tuple(ustar.components[a] - dt * gphi.components[a]
                                   for a in range(grid.dim)))
    unew.zero_boundary_normals()
    return unew, phi
