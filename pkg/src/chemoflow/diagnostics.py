"""Functionals of the estimate ladder, evaluated on solution snapshots,
plus the monitors that check their discrete bounds along a run.

Quadrature conventions: midpoint rule in space; |grad c|-type integrands use
face differences averaged to cell centers; the derived-power integrands
(|grad (n+eps)^q|^2-type) use the face chain-rule form
q^2 (nbar+eps)^(2q-2) (dn/h)^2 with nbar the face average, which makes the
algebraic identities of the ladder hold exactly as computed.  Denominators
and logarithms floor their argument at ``floor`` (activations are counted in
``record.floor_hits``); s*log(s) evaluates to 0 at s = 0.
"""

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .grid import (ScalarField, avg_faces_to_cells, avg_to_faces,
                   cell_gradient, divergence, integrate)

__all__ = ["FunctionalRecord", "MonitorVerdict", "compute_record",
           "chain_rule_pair", "check_mass_bound", "check_c_monotone",
           "check_gradc_budget", "check_energy_boundedness",
           "cumulative_sums", "CSV_COLUMNS"]

FLOOR_DEFAULT = 1e-12


@dataclass
class FunctionalRecord:
    """One time-stamped row of every monitored functional."""

    t: float
    mass: float            # integral of n
    l2n: float             # integral of n^2
    cmax: float            # sup |c|
    grad_c_l2: float       # integral of |grad c|^2
    ent_n: float           # integral of n log n
    fisher_c: float        # integral of |grad c|^2 / c
    kin_u: float           # integral of |u|^2
    energy_F: float        # ent_n + (chi/2) fisher_c + K chi kin_u
    diss_nlog: float       # integral of n^2 log n
    diss_grad_m1: float    # integral of |grad (n+eps)^((m+1)/2)|^2 / (n+floor)
    diss_grad_m1_eps: float  # same with denominator n+eps
    hess_logc: float       # integral of c |D^2 log c|^2
    quart_c: float         # integral of |grad c|^4 / c^3
    grad_u_l2: float       # integral of |grad u|^2
    grad_m_half: float     # integral of |grad (n+eps)^(m/2)|^2
    pow_m: float           # integral of (n+eps)^m
    pow_m1: float          # integral of (n+eps)^(m-1)
    grad_2m3: float        # integral of (n+eps)^(2m-3) |grad n|^2
    grad_2m4: float        # integral of (n+eps)^(2m-4) |grad n|^2
    grad_nm_43: float      # integral of |grad (n+eps)^m|^(4/3)
    div_u_max: float       # sup |div u|
    nmax: float            # sup n
    K_const: float
    floor_hits: int = 0    # not part of the CSV schema

    def as_row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]


CSV_COLUMNS = [f.name for f in dataclass_fields(FunctionalRecord)
               if f.name != "floor_hits"]


@dataclass
class MonitorVerdict:
    name: str
    passed: bool
    observed: float
    bound: float
    tolerance: float

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {status} (observed {self.observed:.6e}, "
                f"bound {self.bound:.6e}, tol {self.tolerance:g})")


def _xlogx(values, floor):
    safe = np.log(np.maximum(values, floor))
    return np.where(values > 0.0, values * safe, 0.0)


def _face_sq_sums(n, grid, weight_fns):
    """Sum over faces of weight(nbar) * (dn/h)^2 * cellvol, one per weight.

    Boundary faces contribute zero (Neumann: zero normal difference).
    """
    totals = [0.0] * len(weight_fns)
    vol = grid.cell_volume
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        dn = (n[tuple(hi)] - n[tuple(lo)]) / h
        nbar = 0.5 * (n[tuple(hi)] + n[tuple(lo)])
        dn2 = dn * dn
        for k, wfn in enumerate(weight_fns):
            totals[k] += float(np.sum(wfn(nbar) * dn2)) * vol
    return totals


def compute_record(state, p, K=1.0, floor=FLOOR_DEFAULT):
    """Evaluate every monitored functional on one snapshot."""
    if floor <= 0:
        raise ValueError("floor must be > 0")
    grid = state.grid
    n = state.n.values
    c = state.c.values
    eps = state.eps
    m = p.m
    vol = grid.cell_volume

    hits = int(np.sum(n < floor)) + int(np.sum(c < floor))

    mass = integrate(state.n)
    l2n = float(np.sum(n * n)) * vol
    cmax = float(np.max(np.abs(c)))
    nmax = float(np.max(n))

    gc = cell_gradient(state.c)
    gc2 = sum(g * g for g in gc)
    c_safe = np.maximum(c, floor)
    grad_c_l2 = float(np.sum(gc2)) * vol
    fisher_c = float(np.sum(gc2 / c_safe)) * vol
    quart_c = float(np.sum(gc2 * gc2 / c_safe ** 3)) * vol

    ent_n = float(np.sum(_xlogx(n, floor))) * vol
    diss_nlog = float(np.sum(n * _xlogx(n, floor))) * vol

    kin_u = _kinetic_energy(state.u)
    energy_F = ent_n + 0.5 * p.chi * fisher_c + K * p.chi * kin_u

    q1 = 0.5 * (m + 1.0)
    qh = 0.5 * m
    (diss_grad_m1, diss_grad_m1_eps, grad_m_half,
     grad_2m3, grad_2m4) = _face_sq_sums(n, grid, [
         lambda s: q1 * q1 * np.power(s + eps, m - 1.0) / (np.maximum(s, 0.0) + floor),
         lambda s: q1 * q1 * np.power(s + eps, m - 2.0),
         lambda s: qh * qh * np.power(s + eps, m - 2.0),
         lambda s: np.power(s + eps, 2.0 * m - 3.0),
         lambda s: np.power(s + eps, 2.0 * m - 4.0),
     ])

    # |grad (n+eps)^m|^(4/3) with the gradient collocated at cell centers
    gm = []
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        face = np.zeros(grid.face_shape(a))
        interior = [slice(None)] * grid.dim
        interior[a] = slice(1, -1)
        nbar = 0.5 * (n[tuple(hi)] + n[tuple(lo)])
        face[tuple(interior)] = (m * np.power(nbar + eps, m - 1.0)
                                 * (n[tuple(hi)] - n[tuple(lo)]) / h)
        gm.append(avg_faces_to_cells(face, grid, a))
    gm2 = sum(g * g for g in gm)
    grad_nm_43 = float(np.sum(np.power(gm2, 2.0 / 3.0))) * vol

    hess_logc = _hessian_log_integral(state.c, floor)
    grad_u_l2 = _grad_u_squared(state.u, bc=p.fluid_bc)
    div_u_max = float(np.max(np.abs(divergence(state.u).values)))

    pow_m = float(np.sum(np.power(n + eps, m))) * vol
    pow_m1 = float(np.sum(np.power(n + eps, m - 1.0))) * vol

    return FunctionalRecord(
        t=state.t, mass=mass, l2n=l2n, cmax=cmax, grad_c_l2=grad_c_l2,
        ent_n=ent_n, fisher_c=fisher_c, kin_u=kin_u, energy_F=energy_F,
        diss_nlog=diss_nlog, diss_grad_m1=diss_grad_m1,
        diss_grad_m1_eps=diss_grad_m1_eps, hess_logc=hess_logc,
        quart_c=quart_c, grad_u_l2=grad_u_l2, grad_m_half=grad_m_half,
        pow_m=pow_m, pow_m1=pow_m1, grad_2m3=grad_2m3, grad_2m4=grad_2m4,
        grad_nm_43=grad_nm_43, div_u_max=div_u_max, nmax=nmax,
        K_const=K, floor_hits=hits)


def _kinetic_energy(u):
    """Face-native integral of |u|^2 (the norm the solves contract in)."""
    vol = u.grid.cell_volume
    return float(sum(np.sum(comp * comp) for comp in u.components)) * vol


def _grad_u_squared(u, bc="no_slip"):
    """Integral of |grad u|^2 from face-native differences.

    Tangential wall differences use the ghost matching the velocity BC:
    antireflection for no_slip, reflection (zero difference) for free_slip.
    """
    grid = u.grid
    vol = grid.cell_volume
    total = 0.0
    for a in range(grid.dim):
        V = u.components[a]
        for b in range(grid.dim):
            h = grid.spacing[b]
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[b] = slice(None, -1)
            hi[b] = slice(1, None)
            d = (V[tuple(hi)] - V[tuple(lo)]) / h
            total += float(np.sum(d * d)) * vol
            if b != a and bc == "no_slip":
                first = [slice(None)] * grid.dim
                first[b] = 0
                last = [slice(None)] * grid.dim
                last[b] = -1
                dw = 2.0 * V[tuple(first)] / h
                total += float(np.sum(dw * dw)) * vol * 0.5
                dw = 2.0 * V[tuple(last)] / h
                total += float(np.sum(dw * dw)) * vol * 0.5
    return total


def _hessian_log_integral(c, floor):
    """integral of c |D^2 log c|^2, nested central differences, reflection ghosts."""
    grid = c.grid
    L = np.log(np.maximum(c.values, floor))
    dim = grid.dim

    def central(arr, a):
        h = grid.spacing[a]
        padded = np.concatenate([np.take(arr, [0], axis=a), arr,
                                 np.take(arr, [-1], axis=a)], axis=a)
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[a] = slice(None, -2)
        hi[a] = slice(2, None)
        return (padded[tuple(hi)] - padded[tuple(lo)]) / (2.0 * h)

    def second(arr, a):
        h2 = grid.spacing[a] ** 2
        padded = np.concatenate([np.take(arr, [0], axis=a), arr,
                                 np.take(arr, [-1], axis=a)], axis=a)
        lo = [slice(None)] * dim
        mid = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[a] = slice(None, -2)
        mid[a] = slice(1, -1)
        hi[a] = slice(2, None)
        return (padded[tuple(lo)] - 2.0 * padded[tuple(mid)]
                + padded[tuple(hi)]) / h2

    hess2 = np.zeros(grid.cells)
    for a in range(dim):
        for b in range(dim):
            d2 = second(L, a) if a == b else central(central(L, a), b)
            hess2 += d2 * d2
    return float(np.sum(c.values * hess2)) * grid.cell_volume


def chain_rule_pair(n, m, eps, floor=FLOOR_DEFAULT):
    """diss_grad_m1 computed two ways: chain-rule form vs direct differencing.

    Chain rule: ((m+1)/2)^2 (nbar+eps)^(m-1) (dn/h)^2 / (nbar+floor) per face.
    Direct: (d[(n+eps)^((m+1)/2)]/h)^2 / (nbar+floor) per face.
    The two agree exactly for m = 1 and to the interpolation error of the
    power law otherwise.
    """
    grid = n.grid
    v = n.values
    q = 0.5 * (m + 1.0)
    g = np.power(v + eps, q)
    vol = grid.cell_volume
    chain = 0.0
    direct = 0.0
    for a in range(grid.dim):
        h = grid.spacing[a]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        dn = (v[tuple(hi)] - v[tuple(lo)]) / h
        dg = (g[tuple(hi)] - g[tuple(lo)]) / h
        nbar = 0.5 * (v[tuple(hi)] + v[tuple(lo)])
        denom = np.maximum(nbar, 0.0) + floor
        chain += float(np.sum(q * q * np.power(nbar + eps, m - 1.0)
                              * dn * dn / denom)) * vol
        direct += float(np.sum(dg * dg / denom)) * vol
    return chain, direct


# ---------------------------------------------------------------------------
# monitors over record histories
# ---------------------------------------------------------------------------

def check_mass_bound(history, p, domain_volume, tol=1e-2):
    """Logistic comparison bound: mass(t) <= max(mass(0), kappa|O|/mu)(1+tol).

    With mu = 0 (conservation controls) the comparison degenerates: the
    bound is mass(0) when kappa = 0 and no finite bound exists otherwise.
    """
    if not history:
        raise ValueError("empty history")
    if p.mu > 0:
        bound = max(history[0].mass, p.kappa * domain_volume / p.mu)
    else:
        bound = history[0].mass if p.kappa == 0 else float("inf")
    observed = max(rec.mass for rec in history)
    return MonitorVerdict("mass_bound", observed <= bound * (1.0 + tol),
                          observed, bound, tol)


def check_c_monotone(history, tol=1e-8):
    """cmax may not grow by more than tol * cmax(0) across any step."""
    if not history:
        raise ValueError("empty history")
    c0 = history[0].cmax
    allow = tol * c0
    worst = 0.0
    for prev, cur in zip(history, history[1:]):
        worst = max(worst, cur.cmax - prev.cmax)
    return MonitorVerdict("c_monotone", worst <= allow, worst, allow, tol)


def check_gradc_budget(history, c0_l2, tol=5e-2):
    """Dissipation budget: sum dt * grad_c_l2 <= (1/2) integral c0^2 (1+tol)."""
    if not history:
        raise ValueError("empty history")
    total = _trapezoid(history, "grad_c_l2")
    bound = 0.5 * c0_l2
    return MonitorVerdict("gradc_budget", total <= bound * (1.0 + tol),
                          total, bound, tol)


def _trapezoid(history, name):
    total = 0.0
    for prev, cur in zip(history, history[1:]):
        dt = cur.t - prev.t
        total += 0.5 * dt * (getattr(prev, name) + getattr(cur, name))
    return total


def cumulative_sums(history, names):
    """Trapezoidal time integrals of selected record fields."""
    return {name: _trapezoid(history, name) for name in names}


def check_energy_boundedness(histories, tol=0.0, factor=2.0):
    """Across an eps sweep: sup_t F_eps finite for every run and its spread
    below ``factor`` (measured as max-min over factor-normalized scale).

    Also requires the time-cumulative dissipation integrals to be finite.
    """
    if len(histories) < 2:
        raise ValueError("need at least two eps values")
    sups = []
    for hist in histories:
        vals = [rec.energy_F for rec in hist]
        if not all(np.isfinite(v) for v in vals):
            return MonitorVerdict("energy_bounded", False, float("inf"),
                                  factor, tol)
        sums = cumulative_sums(hist, ["diss_nlog", "diss_grad_m1",
                                      "hess_logc", "quart_c", "grad_u_l2"])
        if not all(np.isfinite(v) for v in sums.values()):
            return MonitorVerdict("energy_bounded", False, float("inf"),
                                  factor, tol)
        sups.append(max(vals))
    # spread relative to the smallest magnitude: equals max/min - 1 when all
    # sups are positive, and stays meaningful for negative energies
    spread = max(sups) - min(sups)
    scale = min(abs(s) for s in sups)
    observed = spread / scale if scale > 0 else (0.0 if spread == 0 else
                                                 float("inf"))
    return MonitorVerdict("energy_bounded",
                          observed <= (factor - 1.0) * (1.0 + tol),
                          observed, factor - 1.0, tol)
