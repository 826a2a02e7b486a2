"""Residuals of the three weak-solution integral identities along a discrete
trajectory.

Each identity is evaluated against separable test functions phi(x,t) =
w(x) g(t): products of axis cosines for the scalar identities (so no
boundary terms appear under the Neumann closure) and the curl of a
sin^2-product stream function for the velocity identity (solenoidal to
machine precision, vanishing at the walls).  The envelope g is a polynomial
bump supported on [0, t_support] with t_support below the trajectory's final
time.

Space integrals use the midpoint rule with gradients evaluated on faces
against the analytic gradient of the test function.  Time integrals treat
the sampled space-products as piecewise linear and integrate them against
the polynomial envelope exactly (per-interval Gauss rule, intervals split at
t_support), so a steady trajectory telescopes to a machine-zero residual.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError
from .grid import (VectorField, avg_faces_to_cells, avg_to_faces, curl_stream_2d,
                   curl_potential_3d, divergence)

__all__ = ["PolyBump", "CosineTest", "StreamTest", "TestFunctionSpec",
           "weak_residual", "default_test_functions"]

# 4-point Gauss-Legendre on [0,1]: exact through degree 7, enough for the
# degree-6 envelope times a linear interpolant.
_GAUSS_X = np.array([0.5 - 0.5 * math.sqrt((3 + 2 * math.sqrt(6 / 5)) / 7),
                     0.5 - 0.5 * math.sqrt((3 - 2 * math.sqrt(6 / 5)) / 7),
                     0.5 + 0.5 * math.sqrt((3 - 2 * math.sqrt(6 / 5)) / 7),
                     0.5 + 0.5 * math.sqrt((3 + 2 * math.sqrt(6 / 5)) / 7)])
_GAUSS_W = np.array([(18 - math.sqrt(30)) / 72, (18 + math.sqrt(30)) / 72,
                     (18 + math.sqrt(30)) / 72, (18 - math.sqrt(30)) / 72])


@dataclass(frozen=True)
class PolyBump:
    """Envelope g(t) = (1 - (t/t_support)^2)^3 on [0, t_support], else 0."""

    t_support: float

    def __call__(self, t):
        s = np.asarray(t) / self.t_support
        val = (1.0 - s * s) ** 3
        return np.where(s < 1.0, val, 0.0)

    def deriv(self, t):
        s = np.asarray(t) / self.t_support
        val = -6.0 * s * (1.0 - s * s) ** 2 / self.t_support
        return np.where(s < 1.0, val, 0.0)


@dataclass(frozen=True)
class CosineTest:
    """w(x) = prod_a cos(k_a pi x_a / L_a); Neumann-compatible."""

    wavenumbers: tuple

    def values(self, grid, face_axis=None):
        """Sample w at cell centers, or at the faces normal to ``face_axis``."""
        coords = [grid.nodes(a) if a == face_axis else grid.centers(a)
                  for a in range(grid.dim)]
        mesh = np.meshgrid(*coords, indexing="ij")
        out = np.ones(mesh[0].shape)
        for a, k in enumerate(self.wavenumbers):
            out *= np.cos(k * math.pi * mesh[a] / grid.lengths[a])
        return out

    def grad_on_faces(self, grid, axis):
        """Analytic d w / d x_axis at the axis-normal face centers."""
        coords = [grid.nodes(a) if a == axis else grid.centers(a)
                  for a in range(grid.dim)]
        mesh = np.meshgrid(*coords, indexing="ij")
        out = np.ones(mesh[0].shape)
        for a, k in enumerate(self.wavenumbers):
            ka = k * math.pi / grid.lengths[a]
            out *= (-ka * np.sin(ka * mesh[a])) if a == axis else np.cos(ka * mesh[a])
        return out


def _axis_sin_sq(k, L):
    a = k * math.pi / L

    def f(u):
        return np.sin(a * u) ** 2

    def d1(u):
        return a * np.sin(2.0 * a * u)

    def d2(u):
        return 2.0 * a * a * np.cos(2.0 * a * u)

    def d3(u):
        return -4.0 * a ** 3 * np.sin(2.0 * a * u)

    return f, d1, d2, d3


@dataclass(frozen=True)
class StreamTest:
    """2-D solenoidal test field from S = amp sin^2(i pi x/Lx) sin^2(j pi y/Ly).

    psi = (dS/dy, -dS/dx) vanishes on the boundary together with its normal
    derivative; the discrete field is built by node differencing, giving a
    machine-zero MAC divergence.
    """

    amp: float = 1.0
    i: int = 1
    j: int = 1

    def discrete(self, grid):
        if grid.dim != 2:
            raise InputDomainError("StreamTest is 2-D")
        fx, _, _, _ = _axis_sin_sq(self.i, grid.lengths[0])
        fy, _, _, _ = _axis_sin_sq(self.j, grid.lengths[1])
        return curl_stream_2d(grid, lambda x, y: self.amp * fx(x) * fy(y))

    def _axes(self, grid):
        return (_axis_sin_sq(self.i, grid.lengths[0]),
                _axis_sin_sq(self.j, grid.lengths[1]))

    def psi_at_centers(self, grid):
        (fx, dx1, _, _), (fy, dy1, _, _) = self._axes(grid)
        X, Y = grid.center_mesh()
        return [self.amp * fx(X) * dy1(Y), -self.amp * dx1(X) * fy(Y)]

    def grad_psi_at_centers(self, grid):
        """Entries d psi_j / d x_i as a dim x dim nested list."""
        (fx, dx1, dx2, _), (fy, dy1, dy2, _) = self._axes(grid)
        X, Y = grid.center_mesh()
        dpsi = [[None, None], [None, None]]
        dpsi[0][0] = self.amp * dx1(X) * dy1(Y)        # d psi_x / dx
        dpsi[1][0] = self.amp * fx(X) * dy2(Y)         # d psi_x / dy
        dpsi[0][1] = -self.amp * dx2(X) * fy(Y)        # d psi_y / dx
        dpsi[1][1] = -self.amp * dx1(X) * dy1(Y)       # d psi_y / dy
        return dpsi

    def laplacian_on_faces(self, grid):
        """Analytic (Lap psi)_a at the a-normal face centers."""
        (fx, dx1, dx2, dx3), (fy, dy1, dy2, dy3) = self._axes(grid)
        out = []
        xf, yc = grid.nodes(0), grid.centers(1)
        X, Y = np.meshgrid(xf, yc, indexing="ij")
        out.append(self.amp * (dx2(X) * dy1(Y) + fx(X) * dy3(Y)))
        xc, yf = grid.centers(0), grid.nodes(1)
        X, Y = np.meshgrid(xc, yf, indexing="ij")
        out.append(-self.amp * (dx3(X) * fy(Y) + dx1(X) * dy2(Y)))
        return out


@dataclass
class TestFunctionSpec:
    """Test-function battery for :func:`weak_residual`."""

    __test__ = False        # keep pytest from collecting this dataclass

    t_support: float
    scalar_tests: tuple = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 1))
    vector_tests: tuple = (StreamTest(1.0, 1, 1), StreamTest(0.7, 1, 2))
    psi_overrides: tuple = ()
    div_tol: float = 1e-10

    def envelope(self):
        return PolyBump(self.t_support)


def _time_integral(ts, F, G, t_support):
    """Integral of lin-interp(F)(t) * G(t) dt, exact for polynomial G.

    Intervals are cut at t_support, beyond which G vanishes identically.
    """
    total = 0.0
    for k in range(len(ts) - 1):
        a, b = ts[k], ts[k + 1]
        if a >= t_support:
            break
        bb = min(b, t_support)
        nodes = a + (bb - a) * _GAUSS_X
        lam = (nodes - a) / (b - a)
        Fv = F[k] * (1.0 - lam) + F[k + 1] * lam
        total += (bb - a) * float(np.sum(_GAUSS_W * Fv * G(nodes)))
    return total


def _face_products(grid, cell_values, face_weight_by_axis):
    """sum_a sum_faces cellavg(values) * weight_a(face) * vol."""
    total = 0.0
    vol = grid.cell_volume
    for a in range(grid.dim):
        nf = avg_to_faces(cell_values, grid, a)
        total += float(np.sum(nf * face_weight_by_axis[a])) * vol
    return total


def _face_gradient_products(grid, cell_values, face_weight_by_axis):
    """sum_a sum_interior_faces (d values / h) * weight_a(face) * vol."""
    total = 0.0
    vol = grid.cell_volume
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        d = (cell_values[tuple(hi)] - cell_values[tuple(lo)]) / h
        total += float(np.sum(d * face_weight_by_axis[a][tuple(interior)])) * vol
    return total


def weak_residual(trajectory, p, test_fns):
    """Max |LHS - RHS| of the three weak identities over the test battery.

    Returns a dict with keys "n", "c", "u".  The diffusion term uses
    (n+eps)^m, the discrete counterpart of n^m along the regularized
    trajectory.  Explicit ``psi_overrides`` are validated for discrete
    solenoidality and rejected with InputDomainError if max|div psi| exceeds
    ``test_fns.div_tol``.
    """
    if len(trajectory) < 2:
        raise InputDomainError("trajectory must contain at least two states")
    grid = trajectory[0].grid
    if test_fns.t_support >= trajectory[-1].t:
        raise InputDomainError("test functions must vanish before the final time")
    for k, psi in enumerate(test_fns.psi_overrides):
        worst = float(np.max(np.abs(divergence(psi).values)))
        if worst > test_fns.div_tol:
            raise InputDomainError(
                f"psi override {k} is not solenoidal: max|div| = {worst:.3e}")

    g = test_fns.envelope()
    ts = np.array([st.t for st in trajectory])
    eps = trajectory[0].eps
    vol = grid.cell_volume
    K = len(trajectory)

    res_n = 0.0
    res_c = 0.0
    for wave in test_fns.scalar_tests:
        w = CosineTest(tuple(wave))
        w_c = w.values(grid)
        gw = [w.grad_on_faces(grid, a) for a in range(grid.dim)]

        A1 = np.empty(K); C1 = np.empty(K); D1 = np.empty(K)
        E1 = np.empty(K); F1 = np.empty(K)
        A2 = np.empty(K); C2 = np.empty(K); D2 = np.empty(K); E2 = np.empty(K)
        for k, st in enumerate(trajectory):
            n = st.n.values
            c = st.c.values
            A1[k] = float(np.sum(n * w_c)) * vol
            A2[k] = float(np.sum(c * w_c)) * vol
            uw_n = [st.u.components[a] * gw[a] for a in range(grid.dim)]
            C1[k] = _face_products(grid, n, uw_n)
            C2[k] = _face_products(grid, c, uw_n)
            D1[k] = _face_gradient_products(grid, np.power(n + eps, p.m), gw)
            D2[k] = _face_gradient_products(grid, c, gw)
            if p.chi != 0.0:
                gc_w = _face_gradient_weighted(grid, c, n, gw)
                E1[k] = p.chi * gc_w
            else:
                E1[k] = 0.0
            F1[k] = float(np.sum((p.kappa * n - p.mu * n * n) * w_c)) * vol
            E2[k] = float(np.sum(n * c * w_c)) * vol

        n0 = trajectory[0].n.values
        c0 = trajectory[0].c.values
        B1 = float(np.sum(n0 * w_c)) * vol
        B2 = float(np.sum(c0 * w_c)) * vol

        lhs1 = (-_time_integral(ts, A1, g.deriv, test_fns.t_support)
                - B1 * float(g(0.0))
                - _time_integral(ts, C1, g, test_fns.t_support))
        rhs1 = (-_time_integral(ts, D1, g, test_fns.t_support)
                + _time_integral(ts, E1, g, test_fns.t_support)
                + _time_integral(ts, F1, g, test_fns.t_support))
        res_n = max(res_n, abs(lhs1 - rhs1))

        lhs2 = (-_time_integral(ts, A2, g.deriv, test_fns.t_support)
                - B2 * float(g(0.0))
                - _time_integral(ts, C2, g, test_fns.t_support))
        rhs2 = (-_time_integral(ts, D2, g, test_fns.t_support)
                - _time_integral(ts, E2, g, test_fns.t_support))
        res_c = max(res_c, abs(lhs2 - rhs2))

    res_u = 0.0
    for psi in test_fns.vector_tests:
        psi_disc = psi.discrete(grid)
        psi_cen = psi.psi_at_centers(grid)
        dpsi = psi.grad_psi_at_centers(grid)
        lap_psi = psi.laplacian_on_faces(grid)

        A3 = np.empty(K); C3 = np.empty(K); D3 = np.empty(K); G3 = np.empty(K)
        for k, st in enumerate(trajectory):
            u = st.u
            A3[k] = float(sum(np.sum(u.components[a] * psi_disc.components[a])
                              for a in range(grid.dim))) * vol
            ucen = [avg_faces_to_cells(u.components[a], grid, a)
                    for a in range(grid.dim)]
            conv = np.zeros(grid.cells)
            for i in range(grid.dim):
                for j in range(grid.dim):
                    conv += ucen[i] * ucen[j] * dpsi[i][j]
            C3[k] = float(np.sum(conv)) * vol
            # -int grad u : grad psi == +int u . Lap psi (psi vanishes at walls)
            D3[k] = float(sum(np.sum(u.components[a] * lap_psi[a])
                              for a in range(grid.dim))) * vol
            nf_sum = 0.0
            for a in range(grid.dim):
                nf = avg_to_faces(st.n.values, grid, a)
                nf_sum += float(np.sum(
                    nf * psi_disc.components[a]
                    * p.grad_phi_on_faces(grid, a))) * vol
            G3[k] = nf_sum

        u0 = trajectory[0].u
        B3 = float(sum(np.sum(u0.components[a] * psi_disc.components[a])
                       for a in range(grid.dim))) * vol

        lhs3 = (-_time_integral(ts, A3, g.deriv, test_fns.t_support)
                - B3 * float(g(0.0))
                - _time_integral(ts, C3, g, test_fns.t_support))
        rhs3 = (_time_integral(ts, D3, g, test_fns.t_support)
                + _time_integral(ts, G3, g, test_fns.t_support))
        res_u = max(res_u, abs(lhs3 - rhs3))

    return {"n": res_n, "c": res_c, "u": res_u}


def _face_gradient_weighted(grid, c, n, face_weights):
    """sum_a sum_faces nbar * (dc/h) * weight_a * vol (chemotaxis term)."""
    total = 0.0
    vol = grid.cell_volume
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        dc = (c[tuple(hi)] - c[tuple(lo)]) / h
        nbar = 0.5 * (n[tuple(hi)] + n[tuple(lo)])
        total += float(np.sum(nbar * dc
                              * face_weights[a][tuple(interior)])) * vol
    return total


def default_test_functions(T, grid=None):
    """Battery used by the refinement study: t_support = 0.8 T."""
    return TestFunctionSpec(t_support=0.8 * T)
