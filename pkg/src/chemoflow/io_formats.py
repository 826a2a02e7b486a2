"""On-disk formats: functional-history CSV, legacy-ASCII volume snapshots,
and face-resolved checkpoints.

All floating-point output uses 17 significant digits, which round-trips
IEEE doubles exactly; the snapshot and checkpoint readers therefore
reproduce fields bit-for-bit.
"""

import os

import numpy as np

from .diagnostics import CSV_COLUMNS, FunctionalRecord
from .grid import GridSpec, ScalarField, State, VectorField, avg_faces_to_cells

__all__ = ["csv_header", "format_csv_row", "write_csv_row", "read_history",
           "write_snapshot", "read_snapshot", "write_checkpoint",
           "read_checkpoint", "CsvWriter"]

_FMT = "%.17g"


def csv_header():
    return ",".join(CSV_COLUMNS)


def format_csv_row(record):
    return ",".join(_FMT % v for v in record.as_row())


class CsvWriter:
    """Streams history rows; writes the header when creating the file."""

    def __init__(self, path, append=False):
        self.path = path
        mode = "a" if append and os.path.exists(path) else "w"
        self._fh = open(path, mode, encoding="utf-8")
        if mode == "w":
            self._fh.write(csv_header() + "\n")

    def __call__(self, record):
        self._fh.write(format_csv_row(record) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv_row(record, path):
    """Append one row, creating the file (with header) if needed."""
    new = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(csv_header() + "\n")
        fh.write(format_csv_row(record) + "\n")


def read_history(path):
    """Parse a history CSV back into FunctionalRecord rows."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != csv_header():
            raise ValueError(
                f"{path}: unexpected CSV schema; expected {csv_header()!r}")
        out = []
        for line in fh:
            if not line.strip():
                continue
            vals = [float(tok) for tok in line.split(",")]
            out.append(FunctionalRecord(**dict(zip(CSV_COLUMNS, vals))))
    return out


# ---------------------------------------------------------------------------
# legacy-ASCII structured-points snapshots (collocated, plot-friendly)
# ---------------------------------------------------------------------------

def _cell_avg_velocity(state):
    grid = state.grid
    return [avg_faces_to_cells(state.u.components[a], grid, a)
            for a in range(grid.dim)]


def write_snapshot(state, path):
    """One scalar dataset per field; velocity cell-averaged to centers.

    Legacy VTK structured-points layout with the x index varying fastest.
    """
    grid = state.grid
    dim = grid.dim
    dims = list(grid.cells) + [1] * (3 - dim)
    spacing = list(grid.spacing) + [1.0] * (3 - dim)
    origin = [0.5 * h for h in grid.spacing] + [0.0] * (3 - dim)
    count = int(np.prod(grid.cells))

    fields = {"n": state.n.values, "c": state.c.values, "P": state.P.values}
    for a, comp in enumerate(_cell_avg_velocity(state)):
        fields[f"u_{'xyz'[a]}"] = comp

    lines = [
        "# vtk DataFile Version 3.0",
        f"chemoflow snapshot t={_FMT % state.t} eps={_FMT % state.eps}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % tuple(dims),
        "ORIGIN " + " ".join(_FMT % v for v in origin),
        "SPACING " + " ".join(_FMT % v for v in spacing),
        f"POINT_DATA {count}",
    ]
    for name, values in fields.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        flat = np.asarray(values).ravel(order="F")
        for k in range(0, flat.size, 6):
            lines.append(" ".join(_FMT % v for v in flat[k:k + 6]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Read a snapshot back; returns (fields dict, meta dict)."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    meta = {}
    title = tokens[1].split()
    for part in title:
        if part.startswith("t="):
            meta["t"] = float(part[2:])
        if part.startswith("eps="):
            meta["eps"] = float(part[4:])
    dims = None
    i = 0
    fields = {}
    while i < len(tokens):
        line = tokens[i]
        if line.startswith("DIMENSIONS"):
            dims = [int(v) for v in line.split()[1:]]
        elif line.startswith("SPACING"):
            meta["spacing"] = [float(v) for v in line.split()[1:]]
        elif line.startswith("ORIGIN"):
            meta["origin"] = [float(v) for v in line.split()[1:]]
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            i += 2  # skip LOOKUP_TABLE
            vals = []
            count = int(np.prod([d for d in dims if d > 0]))
            while len(vals) < count:
                vals.extend(float(v) for v in tokens[i].split())
                i += 1
            shape = [d for d in dims if d > 1]
            fields[name] = np.array(vals).reshape(shape, order="F")
            continue
        i += 1
    meta["dims"] = dims
    return fields, meta


# ---------------------------------------------------------------------------
# checkpoints (face-resolved, restart-exact)
# ---------------------------------------------------------------------------

def _write_array(fh, name, arr):
    flat = np.asarray(arr).ravel()
    fh.write(f"ARRAY {name} {flat.size}\n")
    for k in range(0, flat.size, 6):
        fh.write(" ".join(_FMT % v for v in flat[k:k + 6]) + "\n")


def write_checkpoint(state, path):
    grid = state.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("CHEMOFLOW-CHECKPOINT 1\n")
        fh.write("cells " + " ".join(str(c) for c in grid.cells) + "\n")
        fh.write("lengths " + " ".join(_FMT % l for l in grid.lengths) + "\n")
        fh.write(f"t {_FMT % state.t}\n")
        fh.write(f"eps {_FMT % state.eps}\n")
        _write_array(fh, "n", state.n.values)
        _write_array(fh, "c", state.c.values)
        _write_array(fh, "P", state.P.values)
        for a in range(grid.dim):
            _write_array(fh, f"u{a}", state.u.components[a])


def read_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines[0].strip() != "CHEMOFLOW-CHECKPOINT 1":
        raise ValueError(f"{path}: not a chemoflow checkpoint")
    cells = tuple(int(v) for v in lines[1].split()[1:])
    lengths = tuple(float(v) for v in lines[2].split()[1:])
    t = float(lines[3].split()[1])
    eps = float(lines[4].split()[1])
    grid = GridSpec(cells, lengths)

    arrays = {}
    i = 5
    while i < len(lines):
        line = lines[i]
        if not line.startswith("ARRAY"):
            i += 1
            continue
        _, name, size = line.split()
        size = int(size)
        vals = []
        i += 1
        while len(vals) < size:
            vals.extend(float(v) for v in lines[i].split())
            i += 1
        arrays[name] = np.array(vals)
    u = VectorField(grid, tuple(
        arrays[f"u{a}"].reshape(grid.face_shape(a)) for a in range(grid.dim)))
    return State(t, ScalarField(grid, arrays["n"].reshape(cells)),
                 ScalarField(grid, arrays["c"].reshape(cells)), u,
                 ScalarField(grid, arrays["P"].reshape(cells)), eps)
