"""Uniform MAC grids, fields, and the discrete differential operators.

Layout conventions (dimension-agnostic, dim = 2 or 3):

* scalars (n, c, P) live at cell centers, array shape == ``grid.cells``;
* the a-th velocity component lives on the faces normal to axis a, so its
  array has one extra entry along that axis (``cells[a] + 1``); entries at
  index 0 and -1 along the axis sit exactly on the boundary;
* boundary conditions: homogeneous Neumann for scalars (zero normal
  difference at boundary faces), u = 0 on the boundary for velocity.

All reductions use numpy's fixed pairwise summation, so identical inputs
give bit-identical results.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError

__all__ = [
    "GridSpec", "ScalarField", "VectorField", "State", "InitialData",
    "integrate", "gradient", "divergence",
    "laplacian_neumann", "laplacian_dirichlet",
    "avg_to_faces", "avg_faces_to_cells", "cell_gradient",
    "curl_stream_2d", "curl_potential_3d",
]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular box partitioned into uniform cells."""

    cells: tuple
    lengths: tuple

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        lengths = tuple(float(l) for l in self.lengths)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)
        if len(cells) not in (2, 3):
            raise InputDomainError(f"dim must be 2 or 3, got {len(cells)}")
        if len(lengths) != len(cells):
            raise InputDomainError("cells and lengths must have equal length")
        if any(c < 4 for c in cells):
            raise InputDomainError(f"need at least 4 cells per axis, got {cells}")
        if any(l <= 0 for l in lengths):
            raise InputDomainError(f"lengths must be positive, got {lengths}")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(l / c for l, c in zip(self.lengths, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def domain_volume(self):
        return float(np.prod(self.lengths))

    def centers(self, axis):
        """1-D array of cell-center coordinates along ``axis``."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def nodes(self, axis):
        """1-D array of face/node coordinates along ``axis`` (0 .. L)."""
        return np.arange(self.cells[axis] + 1) * self.spacing[axis]

    def center_mesh(self):
        """Cell-center coordinate arrays, broadcastable to ``cells``."""
        return np.meshgrid(*(self.centers(a) for a in range(self.dim)),
                           indexing="ij")

    def face_shape(self, axis):
        return tuple(c + 1 if a == axis else c
                     for a, c in enumerate(self.cells))


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.cells:
            raise InputDomainError(
                f"scalar values shape {self.values.shape} != cells {self.grid.cells}")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.cells))

    @classmethod
    def full(cls, grid, value):
        return cls(grid, np.full(grid.cells, float(value)))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.asarray(fn(*grid.center_mesh()), dtype=np.float64))

    def copy(self):
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """MAC-staggered vector field; ``components[a]`` lives on a-normal faces."""

    grid: GridSpec
    components: tuple

    def __post_init__(self):
        comps = []
        for a, comp in enumerate(self.components):
            arr = np.asarray(comp, dtype=np.float64)
            want = self.grid.face_shape(a)
            if arr.shape != want:
                raise InputDomainError(
                    f"component {a} shape {arr.shape} != face shape {want}")
            comps.append(arr)
        self.components = tuple(comps)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, tuple(np.zeros(grid.face_shape(a))
                               for a in range(grid.dim)))

    def copy(self):
        return VectorField(self.grid, tuple(c.copy() for c in self.components))

    def boundary_normal_max(self):
        """Largest |normal component| on the boundary (0 for admissible u)."""
        worst = 0.0
        for a, comp in enumerate(self.components):
            lo = np.max(np.abs(np.take(comp, 0, axis=a)))
            hi = np.max(np.abs(np.take(comp, -1, axis=a)))
            worst = max(worst, float(lo), float(hi))
        return worst

    def zero_boundary_normals(self):
        for a, comp in enumerate(self.components):
            sl = [slice(None)] * self.grid.dim
            sl[a] = 0
            comp[tuple(sl)] = 0.0
            sl[a] = -1
            comp[tuple(sl)] = 0.0


@dataclass
class State:
    """Solution snapshot (t, n, c, u, P) of the regularized system."""

    t: float
    n: ScalarField
    c: ScalarField
    u: VectorField
    P: ScalarField
    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise InputDomainError(f"eps must lie in (0, 1], got {self.eps}")

    @property
    def grid(self):
        return self.n.grid

    def copy(self):
        return State(self.t, self.n.copy(), self.c.copy(), self.u.copy(),
                     self.P.copy(), self.eps)


@dataclass
class InitialData:
    """Strictly positive n0, c0 and a discretely divergence-free u0."""

    n0: ScalarField
    c0: ScalarField
    u0: VectorField
    div_tol: float = 1e-10

    def __post_init__(self):
        if float(self.n0.values.min()) <= 0.0:
            raise InputDomainError("n0 must be strictly positive")
        if float(self.c0.values.min()) <= 0.0:
            raise InputDomainError("c0 must be strictly positive")
        worst = float(np.max(np.abs(divergence(self.u0).values)))
        if worst > self.div_tol:
            raise InputDomainError(
                f"u0 is not discretely divergence-free: max|div| = {worst:.3e}")


# ---------------------------------------------------------------------------
# quadrature and first-order operators
# ---------------------------------------------------------------------------

def integrate(f):
    """Midpoint-rule integral of a cell-centered field over the box."""
    return float(np.sum(f.values)) * f.grid.cell_volume


def gradient(f):
    """Face-centered gradient with homogeneous-Neumann boundary closure.

    Interior face value is the two-cell difference over h; boundary faces
    carry the zero normal difference mandated by the Neumann condition.
    """
    grid = f.grid
    v = f.values
    comps = []
    for a in range(grid.dim):
        h = grid.spacing[a]
        out = np.zeros(grid.face_shape(a))
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        out[tuple(interior)] = (v[tuple(hi)] - v[tuple(lo)]) / h
        comps.append(out)
    return VectorField(grid, tuple(comps))


def divergence(v):
    """Cell-centered MAC divergence; exact adjoint of :func:`gradient`."""
    grid = v.grid
    out = np.zeros(grid.cells)
    for a in range(grid.dim):
        h = grid.spacing[a]
        comp = v.components[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out += (comp[tuple(hi)] - comp[tuple(lo)]) / h
    return ScalarField(grid, out)


def avg_to_faces(values, grid, axis):
    """Arithmetic average of cell values onto axis-normal faces.

    Boundary faces take the adjacent cell value (used only where the flux
    is already zero, e.g. diffusivities multiplying a zero gradient).
    """
    out = np.empty(grid.face_shape(axis))
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    interior = [slice(None)] * grid.dim
    interior[axis] = slice(1, -1)
    out[tuple(interior)] = 0.5 * (values[tuple(lo)] + values[tuple(hi)])
    first = [slice(None)] * grid.dim
    first[axis] = 0
    out[tuple(first)] = values[tuple(first)]
    last = [slice(None)] * grid.dim
    last[axis] = -1
    end = [slice(None)] * grid.dim
    end[axis] = grid.cells[axis] - 1
    out[tuple(last)] = values[tuple(end)]
    return out


def avg_faces_to_cells(facevals, grid, axis):
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (facevals[tuple(lo)] + facevals[tuple(hi)])


def cell_gradient(f):
    """Gradient components collocated at cell centers (face values averaged)."""
    g = gradient(f)
    return [avg_faces_to_cells(g.components[a], f.grid, a)
            for a in range(f.grid.dim)]


# ---------------------------------------------------------------------------
# Laplacians
# ---------------------------------------------------------------------------

def laplacian_neumann(f):
    """5/7-point Laplacian with ghost reflection (homogeneous Neumann).

    Implemented as div(grad(.)) so that the discrete divergence theorem
    holds to machine precision: integrate(laplacian_neumann(f)) == 0.
    """
    return divergence(gradient(f))


def _component_laplacian(comp, grid, axis, bc="no_slip"):
    """Laplacian of one MAC velocity component.

    Along the normal axis the component has nodes on the wall (value pinned
    to 0 for no-penetration); along tangential axes the wall lies half a
    cell outside and the ghost is the antireflection -v (no_slip) or the
    reflection +v (free_slip).  Output boundary faces are zero.
    """
    dim = grid.dim
    out = np.zeros_like(comp)
    for b in range(dim):
        h2 = grid.spacing[b] ** 2
        if b == axis:
            mid = [slice(None)] * dim
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            mid[b] = slice(1, -1)
            lo[b] = slice(None, -2)
            hi[b] = slice(2, None)
            out[tuple(mid)] += (comp[tuple(lo)] - 2.0 * comp[tuple(mid)]
                                + comp[tuple(hi)]) / h2
        else:
            second = np.empty_like(comp)
            mid = [slice(None)] * dim
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            mid[b] = slice(1, -1)
            lo[b] = slice(None, -2)
            hi[b] = slice(2, None)
            second[tuple(mid)] = (comp[tuple(lo)] - 2.0 * comp[tuple(mid)]
                                  + comp[tuple(hi)]) / h2
            gsign = -1.0 if bc == "no_slip" else 1.0
            first = [slice(None)] * dim
            first[b] = 0
            nxt = [slice(None)] * dim
            nxt[b] = 1
            second[tuple(first)] = (comp[tuple(nxt)]
                                    - (2.0 - gsign) * comp[tuple(first)]) / h2
            last = [slice(None)] * dim
            last[b] = -1
            prev = [slice(None)] * dim
            prev[b] = -2
            second[tuple(last)] = (comp[tuple(prev)]
                                   - (2.0 - gsign) * comp[tuple(last)]) / h2
            out += second
    # pinned boundary faces stay untouched by the implicit solves
    bsl = [slice(None)] * dim
    bsl[axis] = 0
    out[tuple(bsl)] = 0.0
    bsl[axis] = -1
    out[tuple(bsl)] = 0.0
    return out


def laplacian_dirichlet(v, bc="no_slip"):
    """Componentwise Laplacian of a MAC vector field with wall values 0."""
    comps = tuple(_component_laplacian(v.components[a], v.grid, a, bc=bc)
                  for a in range(v.grid.dim))
    return VectorField(v.grid, comps)


# ---------------------------------------------------------------------------
# exactly divergence-free constructions
# ---------------------------------------------------------------------------

def curl_stream_2d(grid, stream_fn):
    """Discrete curl of a node-sampled stream function (2D).

    u_x = dS/dy, u_y = -dS/dx evaluated from node differences, which makes
    the MAC divergence vanish identically.  A stream function vanishing on
    the boundary nodes gives zero boundary normal components.
    """
    if grid.dim != 2:
        raise InputDomainError("curl_stream_2d needs a 2-D grid")
    xn, yn = np.meshgrid(grid.nodes(0), grid.nodes(1), indexing="ij")
    s = np.asarray(stream_fn(xn, yn), dtype=np.float64)
    hx, hy = grid.spacing
    ux = (s[:, 1:] - s[:, :-1]) / hy      # on x-faces: nodes differ in y
    uy = -(s[1:, :] - s[:-1, :]) / hx     # on y-faces: nodes differ in x
    return VectorField(grid, (ux, uy))


def curl_potential_3d(grid, potential_fns):
    """Discrete curl of a node/edge-sampled vector potential (3D).

    Each component of A is sampled on the edges parallel to it; the face
    circulation then yields a machine-divergence-free MAC field.
    """
    if grid.dim != 3:
        raise InputDomainError("curl_potential_3d needs a 3-D grid")
    h = grid.spacing

    def edge_samples(axis):
        coords = [grid.centers(a) if a == axis else grid.nodes(a)
                  for a in range(3)]
        mesh = np.meshgrid(*coords, indexing="ij")
        return np.asarray(potential_fns[axis](*mesh), dtype=np.float64)

    A = [edge_samples(a) for a in range(3)]

    def ddiff(arr, axis):
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[axis] = slice(1, None)
        sl_lo[axis] = slice(None, -1)
        return (arr[tuple(sl_hi)] - arr[tuple(sl_lo)]) / h[axis]

    comps = []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        comps.append(ddiff(A[c], b) - ddiff(A[b], c))
    return VectorField(grid, tuple(comps))
