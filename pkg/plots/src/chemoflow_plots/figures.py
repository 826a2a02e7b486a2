"""Figure rendering: functional time series, sweep Cauchy plots,
refinement-order plots, and field heatmaps.

Styles are fixed so reruns on the same library versions produce identical
bytes; inputs are never modified.
"""

import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schema import (SchemaError, read_history_csv, read_params,
                     read_refine_csv, read_snapshot, read_sweep_csv)

__all__ = ["FigureSpec", "render"]

KINDS = ("timeseries", "sweep", "refinement", "heatmap")

plt.rcParams.update({
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "chemoflow",
})


@dataclass
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    params_path: str = ""     # params.toml for the mass-bound overlay
    fields: tuple = ("n", "c", "P", "u_x", "u_y")
    title: str = ""
    logy: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")
        self.inputs = tuple(self.inputs)
        for path in self.inputs:
            if not os.path.exists(path):
                raise SchemaError(f"input file not found: {path}")


def render(spec):
    """Render one figure according to its spec; returns the output path."""
    draw = {
        "timeseries": _timeseries,
        "sweep": _sweep,
        "refinement": _refinement,
        "heatmap": _heatmap,
    }[spec.kind]
    fig = draw(spec)
    fig.savefig(spec.output, metadata=_stable_metadata(spec.output))
    plt.close(fig)
    return spec.output


def _stable_metadata(path):
    # strip creation dates so reruns are byte-identical
    if path.endswith(".png"):
        return {"Software": "chemoflow-plot"}
    if path.endswith(".svg"):
        return {"Date": None}
    return None


def _mass_bound(params, mass0):
    kappa = params.get("kappa")
    mu = params.get("mu")
    lengths = params.get("lengths")
    if kappa is None or mu is None or not mu or lengths is None:
        return None
    volume = float(np.prod(lengths))
    return max(mass0, kappa * volume / mu)


def _timeseries(spec):
    data = read_history_csv(spec.inputs[0])
    t = data["t"]
    fig, axes = plt.subplots(5, 1, figsize=(7.0, 11.0), sharex=True)

    ax = axes[0]
    ax.plot(t, data["mass"], color="tab:blue", label="mass")
    if spec.params_path:
        params = read_params(spec.params_path)
        bound = _mass_bound(params, data["mass"][0] if len(t) else 0.0)
        if bound is not None:
            ax.axhline(bound, color="tab:red", ls="--", lw=1.0,
                       label="mass bound")
    ax.set_ylabel("mass")
    ax.legend(loc="best")

    axes[1].plot(t, data["cmax"], color="tab:green")
    axes[1].set_ylabel("max c")

    axes[2].plot(t, data["energy_F"], color="tab:purple")
    axes[2].set_ylabel("energy F")

    for name, color in (("diss_grad_m1", "tab:orange"),
                        ("hess_logc", "tab:brown"),
                        ("grad_u_l2", "tab:gray"),
                        ("quart_c", "tab:cyan")):
        axes[3].plot(t, data[name], color=color, label=name, lw=1.0)
    if spec.logy and len(t):
        positive = [data[k] for k in ("diss_grad_m1", "hess_logc",
                                      "grad_u_l2", "quart_c")]
        if any(np.any(p > 0) for p in positive):
            axes[3].set_yscale("log")
    axes[3].legend(loc="best", fontsize=7)
    axes[3].set_ylabel("dissipation")

    axes[4].plot(t, data["nmax"], color="tab:blue", label="max n")
    axes[4].plot(t, data["div_u_max"], color="tab:red", label="max |div u|")
    if len(t) and np.any(data["nmax"] > 0):
        axes[4].set_yscale("log")
    axes[4].legend(loc="best", fontsize=7)
    axes[4].set_ylabel("sup norms")
    axes[4].set_xlabel("t")

    fig.suptitle(spec.title or os.path.basename(spec.inputs[0]))
    fig.tight_layout()
    return fig


def _sweep(spec):
    axis, values, matrix, ratios = read_sweep_csv(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    adjacent = [matrix[k, k + 1] for k in range(len(values) - 1)]
    pair_x = values[:-1]
    if adjacent and all(v > 0 for v in pair_x) and any(d > 0 for d in adjacent):
        floor = min(d for d in adjacent if d > 0) * 1e-3
        ax.loglog(pair_x, [max(d, floor) for d in adjacent], "o-",
                  color="tab:blue")
    else:
        ax.plot(pair_x, adjacent, "o-", color="tab:blue")
    for k, r in enumerate(ratios):
        ax.annotate(f"ratio {r:.3f}", (pair_x[k + 1], adjacent[k + 1]),
                    textcoords="offset points", xytext=(6, 6), fontsize=8)
    ax.set_xlabel(axis)
    ax.set_ylabel("L2(space-time) distance to next run")
    ax.set_title(spec.title or f"{axis}-sweep Cauchy distances")
    fig.tight_layout()
    return fig


def _refinement(spec):
    cells, errors, orders = read_refine_csv(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for name, vals in errors.items():
        ax.loglog(cells, vals, "o-", label=name)
        if name in orders and orders[name]:
            ax.annotate(f"order {orders[name][-1]:.2f}",
                        (cells[-1], vals[-1]), textcoords="offset points",
                        xytext=(6, -10), fontsize=8)
    if len(cells) >= 2:
        ref = errors[next(iter(errors))][0]
        guide = [ref * cells[0] / c for c in cells]
        ax.loglog(cells, guide, "k--", lw=0.8, label="first order")
    ax.set_xlabel("cells per axis")
    ax.set_ylabel("residual / error")
    ax.set_title(spec.title or "refinement study")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _heatmap(spec):
    fields, meta = read_snapshot(spec.inputs[0])
    names = [f for f in spec.fields if f in fields]
    if not names:
        raise SchemaError(
            f"{spec.inputs[0]}: none of the requested fields "
            f"{spec.fields} present (found {sorted(fields)})")
    ncol = min(3, len(names))
    nrow = (len(names) + ncol - 1) // ncol
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.6 * ncol, 3.2 * nrow),
                             squeeze=False)
    origin = meta.get("origin", [0.0, 0.0])
    spacing = meta.get("spacing", [1.0, 1.0])
    for k, name in enumerate(names):
        ax = axes[k // ncol][k % ncol]
        arr = fields[name]
        nx, ny = arr.shape
        extent = (origin[0] - spacing[0] / 2,
                  origin[0] + (nx - 0.5) * spacing[0],
                  origin[1] - spacing[1] / 2,
                  origin[1] + (ny - 0.5) * spacing[1])
        im = ax.imshow(arr.T, origin="lower", extent=extent, cmap="viridis",
                       aspect="equal")
        ax.set_title(name, fontsize=9)
        ax.grid(False)
        fig.colorbar(im, ax=ax, shrink=0.85)
    for k in range(len(names), nrow * ncol):
        axes[k // ncol][k % ncol].axis("off")
    t = meta.get("t")
    fig.suptitle(spec.title or (f"t = {t:g}" if t is not None else ""))
    fig.tight_layout()
    return fig
