"""Readers for the documented chemoflow on-disk formats.

This package deliberately re-parses the published schemas instead of
importing the solver: the CSV history, the sweep report CSV, the refinement
CSV, the flat params.toml echo, and the legacy-ASCII volume snapshot.
"""

import numpy as np

__all__ = ["SchemaError", "HISTORY_COLUMNS", "read_history_csv",
           "read_sweep_csv", "read_refine_csv", "read_params",
           "read_snapshot"]

HISTORY_COLUMNS = [
    "t", "mass", "l2n", "cmax", "grad_c_l2", "ent_n", "fisher_c", "kin_u",
    "energy_F", "diss_nlog", "diss_grad_m1", "diss_grad_m1_eps", "hess_logc",
    "quart_c", "grad_u_l2", "grad_m_half", "pow_m", "pow_m1", "grad_2m3",
    "grad_2m4", "grad_nm_43", "div_u_max", "nmax", "K_const",
]


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def read_history_csv(path):
    """History CSV -> dict of column name to 1-D array.

    The header must match the documented column list exactly; the error
    names the first offending column.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        got = header.split(",")
        if got != HISTORY_COLUMNS:
            for k, want in enumerate(HISTORY_COLUMNS):
                if k >= len(got):
                    raise SchemaError(
                        f"{path}: missing column {k + 1} ({want!r})")
                if got[k] != want:
                    raise SchemaError(
                        f"{path}: column {k + 1} is {got[k]!r}, "
                        f"expected {want!r}")
            raise SchemaError(
                f"{path}: {len(got) - len(HISTORY_COLUMNS)} unexpected "
                f"trailing column(s), first is {got[len(HISTORY_COLUMNS)]!r}")
        rows = []
        for line in fh:
            if line.strip():
                rows.append([float(tok) for tok in line.split(",")])
    data = np.array(rows) if rows else np.empty((0, len(HISTORY_COLUMNS)))
    if rows and data.shape[1] != len(HISTORY_COLUMNS):
        raise SchemaError(f"{path}: row width {data.shape[1]} != "
                          f"{len(HISTORY_COLUMNS)}")
    return {name: data[:, k] for k, name in enumerate(HISTORY_COLUMNS)}


def read_sweep_csv(path):
    """Sweep CSV -> (axis, values, distance matrix, cauchy ratios)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise SchemaError(f"{path}: missing sweep comment header")
    axis = lines[0].split("axis=")[-1] if "axis=" in lines[0] else "?"
    if not lines[1].startswith("value,"):
        raise SchemaError(f"{path}: expected 'value' header row, "
                          f"got {lines[1].split(',')[0]!r}")
    values = [float(tok) for tok in lines[1].split(",")[1:]]
    n = len(values)
    matrix = np.zeros((n, n))
    for i in range(n):
        parts = lines[2 + i].split(",")
        matrix[i] = [float(tok) for tok in parts[1:]]
    ratios = []
    for line in lines[2 + n:]:
        if line.startswith("cauchy_ratios"):
            ratios = [float(tok) for tok in line.split(",")[1:] if tok]
    return axis, values, matrix, ratios


def read_refine_csv(path):
    """Refinement CSV -> (cells, {series: errors}, {series: orders}).

    First column must be 'cells'; remaining columns are error series;
    trailing 'orders_*' rows carry the empirical orders.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "cells":
        raise SchemaError(f"{path}: column 1 is {header[0]!r}, "
                          "expected 'cells'")
    series = header[1:]
    cells = []
    errors = {name: [] for name in series}
    orders = {}
    for line in lines[1:]:
        parts = line.split(",")
        if parts[0].startswith("orders_"):
            orders[parts[0][len("orders_"):]] = [float(t) for t in parts[1:]]
            continue
        cells.append(int(float(parts[0])))
        for name, tok in zip(series, parts[1:]):
            errors[name].append(float(tok))
    return cells, errors, orders


def read_params(path):
    """Flat key = value document -> dict (numbers, lists, strings)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if raw.startswith("["):
                out[key] = [float(tok) for tok in
                            raw.strip("[]").split(",") if tok.strip()]
            elif raw.startswith('"'):
                out[key] = raw.strip('"')
            else:
                try:
                    out[key] = float(raw)
                except ValueError:
                    out[key] = raw
    return out


def read_snapshot(path):
    """Legacy-ASCII structured-points snapshot -> (fields, meta)."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise SchemaError(f"{path}: not a legacy volume snapshot")
    meta = {}
    for part in tokens[1].split():
        if part.startswith("t="):
            meta["t"] = float(part[2:])
        if part.startswith("eps="):
            meta["eps"] = float(part[4:])
    dims = None
    fields = {}
    i = 0
    while i < len(tokens):
        line = tokens[i]
        if line.startswith("DIMENSIONS"):
            dims = [int(v) for v in line.split()[1:]]
        elif line.startswith("ORIGIN"):
            meta["origin"] = [float(v) for v in line.split()[1:]]
        elif line.startswith("SPACING"):
            meta["spacing"] = [float(v) for v in line.split()[1:]]
        elif line.startswith("SCALARS"):
            if dims is None:
                raise SchemaError(f"{path}: SCALARS before DIMENSIONS")
            name = line.split()[1]
            i += 2
            count = int(np.prod([d for d in dims if d > 0]))
            vals = []
            while len(vals) < count:
                vals.extend(float(v) for v in tokens[i].split())
                i += 1
            shape = [d for d in dims if d > 1]
            fields[name] = np.array(vals).reshape(shape, order="F")
            continue
        i += 1
    meta["dims"] = dims
    return fields, meta
