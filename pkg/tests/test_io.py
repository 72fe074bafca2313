import numpy as np
import pytest

from ewfluct.grid import ScalarField, TorusGrid, bump_field
from ewfluct.io import (
    read_field,
    read_pair_snapshot,
    write_csv,
    write_field,
    write_pair_snapshot,
)


def test_field_roundtrip(tmp_path):
    g = TorusGrid(1, 16.0, 64)
    f = bump_field(g, width=2.0)
    path = tmp_path / "field.ewf"
    write_field(path, f)
    back = read_field(path)
    assert back.grid.key == g.key
    assert np.array_equal(back.values, f.values)


def test_field_roundtrip_2d(tmp_path):
    g = TorusGrid(2, 4.0, 16)
    rng = np.random.default_rng(1)
    f = ScalarField(g, rng.standard_normal(g.shape))
    path = tmp_path / "field2.ewf"
    write_field(path, f)
    back = read_field(path)
    assert np.array_equal(back.values, f.values)


def test_field_header(tmp_path):
    g = TorusGrid(1, 16.0, 64)
    path = tmp_path / "field.ewf"
    write_field(path, bump_field(g))
    raw = path.read_bytes()
    assert raw[:4] == b"EWF1"
    assert len(raw) == 4 + 4 + 4 + 8 + 64 * 8


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ewf"
    path.write_bytes(b"NOPE" + b"\0" * 32)
    with pytest.raises(ValueError):
        read_field(path)


def test_pair_snapshot_roundtrip(tmp_path):
    g = TorusGrid(1, 8.0, 32)
    vals = np.random.default_rng(2).standard_normal((32, 32))
    path = tmp_path / "pair.ewp"
    write_pair_snapshot(path, g, vals)
    g2, back = read_pair_snapshot(path)
    assert g2.key == g.key
    assert np.array_equal(back, vals)
    assert path.read_bytes()[:4] == b"EWP1"


def test_trajectory_roundtrip(tmp_path):
    from ewfluct import CovarianceSpec
    from ewfluct.io import read_trajectory, write_trajectory
    from ewfluct.rng import ReplicaStreams
    from ewfluct.spde import run

    spec = CovarianceSpec(kind="compressible", d=1, amp=1.0, R=1.0)
    g = TorusGrid(1, 16.0, 128)
    traj = run(spec, bump_field(g, width=1.0), 0.02, 1e-3,
               ReplicaStreams(3, 0), [0.01, 0.02], kappa=0.5)
    write_trajectory(tmp_path / "traj", traj)
    times, fields, manifest = read_trajectory(tmp_path / "traj")
    assert times == [0.01, 0.02]
    assert np.array_equal(fields[1].values, traj.fields[1].values)
    assert manifest["meta"]["replica"] == 0


def test_positions_csv(tmp_path):
    from ewfluct.io import write_positions_csv

    path = tmp_path / "pos.csv"
    recs = [(0.0, np.array([[1.0], [2.0]])), (0.5, np.array([[1.5], [2.5]]))]
    write_positions_csv(path, recs)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,particle,x0"
    assert lines[1] == "0.0,0,1.0"
    assert lines[-1] == "0.5,1,2.5"


def test_csv_deterministic(tmp_path):
    cols = ["a", "b"]
    rows = [(1, 0.1), (2, 1.0 / 3.0)]
    p1 = tmp_path / "x.csv"
    p2 = tmp_path / "y.csv"
    write_csv(p1, cols, rows)
    write_csv(p2, cols, rows)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.splitlines()[0] == "a,b"
    assert "0.3333333333333333" in text
