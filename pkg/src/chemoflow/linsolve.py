"""Conjugate-gradient solves for the SPD systems in the scheme.

Three operator families share the same Krylov loop:

* scalar implicit diffusion  (I - dt div(D grad .)), Neumann closure;
* velocity Helmholtz         (I - coef * Laplacian_Dirichlet) per component;
* pressure Poisson           -Laplacian_Neumann, mean-zero gauge.

Convergence is declared on the max norm of the raw residual, matching the
solver contracts.  The loops are plain numpy with fixed reduction order,
so repeated solves are bit-identical.
"""

import numpy as np

from .errors import InputDomainError, NumericalFailureError
from .grid import ScalarField, VectorField, divergence, gradient

__all__ = ["cg", "solve_scalar_diffusion", "solve_component_helmholtz",
           "poisson_solve"]


def cg(apply_A, b, x0=None, tol=1e-10, max_iters=20000, diag=None,
       deflate_mean=False, context=""):
    """Preconditioned CG on flat numpy arrays; returns (x, info).

    ``diag`` is the operator diagonal for Jacobi preconditioning.  With
    ``deflate_mean`` the iteration is restricted to the mean-zero subspace
    (singular Neumann Laplacian).  Raises NumericalFailureError with the
    residual history if the max-norm residual is still above ``tol`` after
    ``max_iters`` iterations.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)

    def project(v):
        if deflate_mean:
            v = v - v.mean()
        return v

    x = project(x)
    b = project(b)
    r = project(b - apply_A(x))
    inv_diag = None if diag is None else 1.0 / diag
    z = r if inv_diag is None else project(r * inv_diag)
    p = z.copy()
    rz = float(np.vdot(r, z))
    history = [float(np.max(np.abs(r)))]
    if history[-1] <= tol:
        return x, {"iterations": 0, "residual": history[-1], "history": history}

    for it in range(1, max_iters + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0.0:
            raise NumericalFailureError(
                f"CG breakdown (p^T A p = {pAp:.3e}) in {context or 'solve'}",
                residual_history=history)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        r = project(r)
        res = float(np.max(np.abs(r)))
        history.append(res)
        if res <= tol:
            return project(x), {"iterations": it, "residual": res,
                                "history": history}
        z = r if inv_diag is None else project(r * inv_diag)
        rz_new = float(np.vdot(r, z))
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    raise NumericalFailureError(
        f"CG did not reach tol={tol:.3e} within {max_iters} iterations "
        f"in {context or 'solve'} (last residual {history[-1]:.3e})",
        residual_history=history)


# ---------------------------------------------------------------------------
# scalar implicit diffusion
# ---------------------------------------------------------------------------

def diffusion_flux_divergence(values, grid, face_diffusivity):
    """div(D grad values) with Neumann closure, D given per face."""
    out = np.zeros(grid.cells)
    for a in range(grid.dim):
        h = grid.spacing[a]
        flux = np.zeros(grid.face_shape(a))
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        flux[tuple(interior)] = (face_diffusivity[a][tuple(interior)]
                                 * (values[tuple(hi)] - values[tuple(lo)]) / h)
        out += (flux[tuple(hi)] - flux[tuple(lo)]) / h
    return out


def _diffusion_diagonal(grid, face_diffusivity, dt):
    diag = np.ones(grid.cells)
    for a in range(grid.dim):
        h2 = grid.spacing[a] ** 2
        D = face_diffusivity[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        Dint = np.zeros(grid.face_shape(a))
        Dint[tuple(interior)] = D[tuple(interior)]
        diag += dt * (Dint[tuple(hi)] + Dint[tuple(lo)]) / h2
    return diag


def solve_scalar_diffusion(rhs, grid, face_diffusivity, dt, tol, max_iters,
                           x0=None, context="diffusion"):
    """Solve (I - dt div(D grad .)) x = rhs; returns (x, info)."""

    def apply_A(flat):
        v = flat.reshape(grid.cells)
        return (v - dt * diffusion_flux_divergence(v, grid, face_diffusivity)).ravel()

    diag = _diffusion_diagonal(grid, face_diffusivity, dt).ravel()
    x, info = cg(apply_A, rhs.ravel(),
                 x0=None if x0 is None else x0.ravel(),
                 tol=tol, max_iters=max_iters, diag=diag, context=context)
    return x.reshape(grid.cells), info


# ---------------------------------------------------------------------------
# velocity Helmholtz
# ---------------------------------------------------------------------------

def solve_component_helmholtz(rhs, grid, axis, coef, tol, max_iters,
                              bc="no_slip", x0=None, context="helmholtz"):
    """Solve (I - coef * Lap_wall) x = rhs for one MAC component.

    Boundary faces are pinned to zero on entry and exit (no-penetration);
    the operator acts on interior faces only.
    """
    from .grid import _component_laplacian

    def pin(arr):
        sl = [slice(None)] * grid.dim
        sl[axis] = 0
        arr[tuple(sl)] = 0.0
        sl[axis] = -1
        arr[tuple(sl)] = 0.0
        return arr

    shape = grid.face_shape(axis)
    b = pin(np.array(rhs, dtype=np.float64).reshape(shape))

    def apply_A(flat):
        v = flat.reshape(shape)
        out = v - coef * _component_laplacian(v, grid, axis, bc=bc)
        return pin(out).ravel()

    diag = np.ones(shape)
    for bax in range(grid.dim):
        add = 2.0 * coef / grid.spacing[bax] ** 2
        if bax != axis and bc == "no_slip":
            sl = [slice(None)] * grid.dim
            sl[bax] = slice(1, -1)
            diag_b = np.full(shape[bax], 3.0 * coef / grid.spacing[bax] ** 2)
            diag_b[1:-1] = add
            shape_b = [1] * grid.dim
            shape_b[bax] = shape[bax]
            diag += diag_b.reshape(shape_b)
        else:
            diag += add
    x0v = None if x0 is None else pin(np.array(x0).reshape(shape)).ravel()
    x, info = cg(apply_A, b.ravel(), x0=x0v, tol=tol, max_iters=max_iters,
                 diag=diag.ravel(), context=context)
    return pin(x.reshape(shape)), info


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------

def poisson_solve(rhs, bc="neumann_mean_zero", tol=1e-10, max_iters=20000,
                  x0=None, log=None, method="cg"):
    """Solve Laplacian(phi) = rhs to ||Lap phi - rhs||_inf <= tol.

    ``bc`` selects the closure: "neumann_mean_zero" (ghost reflection,
    solution returned mean-zero, right-hand side mean-corrected and the
    correction flagged in ``log``) or "dirichlet" (ghost antireflection
    about zero).  Returns a ScalarField.

    ``method`` picks the baseline CG solver or the "dct" accelerator
    (cosine-transform diagonalization of the Neumann Laplacian, same
    contract: the residual is measured and polished by CG if above tol).
    """
    grid = rhs.grid
    b = -rhs.values.ravel()          # solve the SPD system -Lap phi = -rhs

    if bc == "neumann_mean_zero" and method == "dct":
        x = _dct_neumann_solve(rhs.values, grid)
        field0 = ScalarField(grid, x)
        resid = laplacian_residual(field0, rhs.values - rhs.values.mean())
        if log is not None:
            mean = float(rhs.values.mean())
            if abs(mean) > tol:
                log.setdefault("flags", []).append(
                    f"poisson rhs mean {mean:.3e} removed (incompatible source)")
            log["poisson_iterations"] = 0
            log["poisson_residual"] = resid
        if resid <= tol:
            return field0
        # fall through to CG with the transform solution as the start
        x0 = x

    if bc == "neumann_mean_zero":
        mean = float(b.mean())
        if log is not None and abs(mean) > tol:
            log.setdefault("flags", []).append(
                f"poisson rhs mean {-mean:.3e} removed (incompatible source)")

        def apply_A(flat):
            f = ScalarField(grid, flat.reshape(grid.cells))
            return -divergence(gradient(f)).values.ravel()

        diag = np.zeros(grid.cells)
        for a in range(grid.dim):
            h2 = grid.spacing[a] ** 2
            d = np.full(grid.cells[a], 2.0 / h2)
            d[0] = d[-1] = 1.0 / h2
            shape_a = [1] * grid.dim
            shape_a[a] = grid.cells[a]
            diag += d.reshape(shape_a)
        x, info = cg(apply_A, b, x0=None if x0 is None else x0.ravel(),
                     tol=tol, max_iters=max_iters, diag=diag.ravel(),
                     deflate_mean=True, context="poisson-neumann")
    elif bc == "dirichlet":
        def apply_A(flat):
            v = flat.reshape(grid.cells)
            out = np.zeros_like(v)
            for a in range(grid.dim):
                h2 = grid.spacing[a] ** 2
                mid = [slice(None)] * grid.dim
                lo = [slice(None)] * grid.dim
                hi = [slice(None)] * grid.dim
                mid[a] = slice(1, -1)
                lo[a] = slice(None, -2)
                hi[a] = slice(2, None)
                second = np.empty_like(v)
                second[tuple(mid)] = (v[tuple(lo)] - 2.0 * v[tuple(mid)]
                                      + v[tuple(hi)]) / h2
                first = [slice(None)] * grid.dim
                first[a] = 0
                nxt = [slice(None)] * grid.dim
                nxt[a] = 1
                second[tuple(first)] = (v[tuple(nxt)] - 3.0 * v[tuple(first)]) / h2
                last = [slice(None)] * grid.dim
                last[a] = -1
                prev = [slice(None)] * grid.dim
                prev[a] = -2
                second[tuple(last)] = (v[tuple(prev)] - 3.0 * v[tuple(last)]) / h2
                out += second
            return -out.ravel()

        diag = np.zeros(grid.cells)
        for a in range(grid.dim):
            h2 = grid.spacing[a] ** 2
            d = np.full(grid.cells[a], 2.0 / h2)
            d[0] = d[-1] = 3.0 / h2
            shape_a = [1] * grid.dim
            shape_a[a] = grid.cells[a]
            diag += d.reshape(shape_a)
        x, info = cg(apply_A, b, x0=None if x0 is None else x0.ravel(),
                     tol=tol, max_iters=max_iters, diag=diag.ravel(),
                     context="poisson-dirichlet")
    else:
        raise InputDomainError(f"unknown Poisson bc {bc!r}")

    if log is not None:
        log["poisson_iterations"] = info["iterations"]
        log["poisson_residual"] = info["residual"]
    return ScalarField(grid, x.reshape(grid.cells))


def laplacian_residual(phi, rhs_values):
    """max-norm of Lap(phi) - rhs for the Neumann closure."""
    from .grid import laplacian_neumann
    return float(np.max(np.abs(laplacian_neumann(phi).values - rhs_values)))


def _dct_neumann_solve(rhs_values, grid):
    """Direct Neumann-Poisson solve by DCT-II diagonalization.

    The cell-centered reflected-ghost Laplacian has eigenvectors
    cos(k pi (i+1/2)/N) with eigenvalues -(4/h^2) sin^2(k pi / 2N); the
    zero mode is dropped, which is exactly the mean-zero gauge.
    """
    from scipy.fft import dctn, idctn

    coef = dctn(rhs_values, type=2, norm="ortho")
    lam = np.zeros(grid.cells)
    for a in range(grid.dim):
        N = grid.cells[a]
        h = grid.spacing[a]
        k = np.arange(N)
        lam_a = -(4.0 / h ** 2) * np.sin(0.5 * np.pi * k / N) ** 2
        shape = [1] * grid.dim
        shape[a] = N
        lam = lam + lam_a.reshape(shape)
    zero = tuple(0 for _ in range(grid.dim))
    lam[zero] = 1.0
    coef = coef / lam
    coef[zero] = 0.0
    x = idctn(coef, type=2, norm="ortho")
    return x - x.mean()
