"""The epsilon-family of coefficient functions and the Yosida velocity smoother.

These are the four regularizations that turn the degenerate/singular system
into a uniformly parabolic one: the shifted diffusivity m(s+eps)^(m-1), the
saturated chemotactic sensitivity s/(1+eps*s), the softened consumption rate
(1/eps)*log(1+eps*s), and the resolvent smoothing of the advecting velocity.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError
from .grid import ScalarField, VectorField, divergence, gradient
from .linsolve import poisson_solve, solve_component_helmholtz

__all__ = ["ModelParams", "diffusivity", "sensitivity", "consumption_f",
           "yosida_smooth"]

DIFFUSION_VARIANTS = ("degenerate", "nondegenerate")
FLUID_VARIANTS = ("navier_stokes", "stokes", "frozen")
FLUID_BCS = ("no_slip", "free_slip")


@dataclass
class ModelParams:
    """Physical and regularization parameters of one run."""

    chi: float = 1.0
    kappa: float = 0.5
    mu: float = 1.0
    m: float = 2.0
    eps: float = 0.01
    grad_phi: tuple = (0.0, -0.5)
    diffusion_variant: str = "degenerate"
    fluid_variant: str = "navier_stokes"
    fluid_bc: str = "no_slip"
    viscosity: float = 1.0

    def __post_init__(self):
        if self.chi < 0 or self.kappa < 0:
            raise InputDomainError("chi and kappa must be >= 0")
        # mu = 0 is admitted only for conservation/oracle control runs;
        # configuration-level validation enforces the standing mu > 0.
        if self.mu < 0:
            raise InputDomainError("mu must be >= 0")
        if self.m <= 0:
            raise InputDomainError("m must be > 0")
        if not (0.0 < self.eps <= 1.0):
            raise InputDomainError("eps must lie in (0, 1]")
        if self.diffusion_variant not in DIFFUSION_VARIANTS:
            raise InputDomainError(
                f"diffusion_variant must be one of {DIFFUSION_VARIANTS}")
        if self.fluid_variant not in FLUID_VARIANTS:
            raise InputDomainError(
                f"fluid_variant must be one of {FLUID_VARIANTS}")
        if self.fluid_bc not in FLUID_BCS:
            raise InputDomainError(f"fluid_bc must be one of {FLUID_BCS}")
        if self.viscosity <= 0:
            raise InputDomainError("viscosity must be > 0")
        if not isinstance(self.grad_phi, VectorField):
            self.grad_phi = tuple(float(g) for g in self.grad_phi)

    def grad_phi_on_faces(self, grid, axis):
        """Axis component of grad(Phi) sampled on axis-normal faces."""
        if isinstance(self.grad_phi, VectorField):
            return self.grad_phi.components[axis]
        return np.full(grid.face_shape(axis), self.grad_phi[axis])


def _check_nonnegative(s, what):
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise InputDomainError(f"{what} expects s >= 0")
    return s


def diffusivity(s, p):
    """Diffusion coefficient m*(s+eps)^(m-1), or m*(s+1)^(m-1) nondegenerate.

    Finite and positive on s >= 0 for every m > 0: the eps (resp. unit)
    shift caps the fast-diffusion blow-up at s = 0.
    """
    s = _check_nonnegative(s, "diffusivity")
    shift = p.eps if p.diffusion_variant == "degenerate" else 1.0
    out = p.m * np.power(s + shift, p.m - 1.0)
    return float(out) if np.isscalar(s) or out.ndim == 0 else out


def sensitivity(s, eps):
    """Saturated chemotactic sensitivity s/(1+eps*s) in [0, 1/eps)."""
    s = _check_nonnegative(s, "sensitivity")
    out = s / (1.0 + eps * s)
    return float(out) if out.ndim == 0 else out


def consumption_f(s, eps):
    """Softened consumption rate f_eps(s) = (1/eps) log(1+eps*s).

    Satisfies 0 <= f_eps(s) <= s with derivative 1/(1+eps*s) in (0, 1].
    """
    if eps <= 0:
        raise InputDomainError("consumption_f expects eps > 0")
    s = _check_nonnegative(s, "consumption_f")
    out = np.log1p(eps * s) / eps
    return float(out) if out.ndim == 0 else out


def yosida_smooth(u, eps, tol=1e-12, max_iters=20000, bc="no_slip", log=None,
                  method="cg"):
    """Approximate resolvent (I + eps*A)^(-1) u of the Stokes operator.

    Realized as a wall-Dirichlet Helmholtz solve (I - eps*Lap) per component
    followed by a discrete Leray projection, so the output is divergence-free
    to ``tol`` and L2-non-expansive up to ``tol``.  eps = 0 returns the input
    unchanged.
    """
    if eps < 0:
        raise InputDomainError("yosida_smooth expects eps >= 0")
    if eps == 0.0:
        return u.copy()
    grid = u.grid
    comps = []
    for a in range(grid.dim):
        x, info = solve_component_helmholtz(
            u.components[a], grid, a, eps, tol, max_iters, bc=bc,
            x0=u.components[a], context=f"yosida component {a}")
        if log is not None:
            log[f"yosida_helmholtz_iters_{a}"] = info["iterations"]
        comps.append(x)
    v = VectorField(grid, tuple(comps))
    phi = poisson_solve(divergence(v), bc="neumann_mean_zero", tol=tol,
                        max_iters=max_iters, log=log, method=method)
    gphi = gradient(phi)
    out = VectorField(grid, tuple(v.components[a] - gphi.components[a]
                                  for a in range(grid.dim)))
    out.zero_boundary_normals()
    return out
