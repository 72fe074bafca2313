"""Binary field dumps, CSV tables and JSON manifests.

Scalar-field dump layout (little endian):

    magic  b"EWF1"
    d      uint32
    N_i    uint32 per dimension
    L      float64
    data   N^d float64 values, row-major

Pair-grid (two-point) snapshots use magic b"EWP1" with the same header fields
followed by N^{2d} values on grid x grid.  CSV cells are written with Python
float repr (shortest round-trip), so reruns with identical seeds produce
byte-identical files.
"""

import json
import struct

import numpy as np

from .grid import ScalarField, TorusGrid

MAGIC_FIELD = b"EWF1"
MAGIC_PAIR = b"EWP1"


def write_field(path, field):
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC_FIELD)
        fh.write(struct.pack("<I", g.d))
        for _ in range(g.d):
            fh.write(struct.pack("<I", g.N))
        fh.write(struct.pack("<d", g.L))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_FIELD:
            raise ValueError(f"bad magic {magic!r}")
        (d,) = struct.unpack("<I", fh.read(4))
        dims = [struct.unpack("<I", fh.read(4))[0] for _ in range(d)]
        (L,) = struct.unpack("<d", fh.read(8))
        if len(set(dims)) != 1:
            raise ValueError("anisotropic grids are not supported")
        grid = TorusGrid(d, L, dims[0])
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(grid.shape)
        return ScalarField(grid, np.array(data))


def write_pair_snapshot(path, grid, values):
    with open(path, "wb") as fh:
        fh.write(MAGIC_PAIR)
        fh.write(struct.pack("<I", grid.d))
        for _ in range(grid.d):
            fh.write(struct.pack("<I", grid.N))
        fh.write(struct.pack("<d", grid.L))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_pair_snapshot(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_PAIR:
            raise ValueError(f"bad magic {magic!r}")
        (d,) = struct.unpack("<I", fh.read(4))
        dims = [struct.unpack("<I", fh.read(4))[0] for _ in range(d)]
        (L,) = struct.unpack("<d", fh.read(8))
        grid = TorusGrid(d, L, dims[0])
        n_total = dims[0] ** (2 * d)
        data = np.frombuffer(fh.read(), dtype="<f8")[:n_total]
        return grid, np.array(data).reshape(grid.shape * 2)


def write_trajectory(dirpath, traj, prefix="field"):
    """Dump trajectory snapshots plus a JSON manifest (times, seeds, diagnostics)."""
    import os

    os.makedirs(dirpath, exist_ok=True)
    names = []
    for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
        name = f"{prefix}_{i:05d}.ewf"
        write_field(os.path.join(dirpath, name), f)
        names.append(name)
    write_json(os.path.join(dirpath, "manifest.json"), {
        "times": list(traj.times),
        "files": names,
        "diagnostics": {k: np.asarray(v).tolist() for k, v in traj.diagnostics.items()},
        "meta": traj.meta,
    })


def write_positions_csv(path, records):
    """Particle position dump: rows (t, particle id, coordinates...).

    `records` is an iterable of (t, positions) with positions shaped (P, d).
    """
    d = None
    rows = []
    for t, pos in records:
        pos = np.asarray(pos)
        d = pos.shape[1] if d is None else d
        for pid in range(pos.shape[0]):
            rows.append((t, pid) + tuple(pos[pid]))
    cols = ["t", "particle"] + [f"x{a}" for a in range(d or 1)]
    write_csv(path, cols, rows)


def read_trajectory(dirpath):
    import json as _json
    import os

    with open(os.path.join(dirpath, "manifest.json"), encoding="utf-8") as fh:
        manifest = _json.load(fh)
    fields = [read_field(os.path.join(dirpath, name)) for name in manifest["files"]]
    return manifest["times"], fields, manifest


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows):
    """Deterministic CSV: fixed column order, repr-formatted floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")
