import csv
import json

import numpy as np
import pytest

from pinchsmooth import fixtures
from pinchsmooth.approximation import PiecewiseAffineMap
from pinchsmooth.cli import main
from pinchsmooth.files import InputError, dump_map, dump_mesh, load_map, load_mesh


@pytest.fixture
def square_files(tmp_path):
    cx = fixtures.square4()
    f = PiecewiseAffineMap.from_vertex_images(cx, fixtures.vertex_images("shear2d", cx))
    dump_mesh(cx, tmp_path / "mesh.json")
    dump_map(f, tmp_path / "map.json")
    return tmp_path / "mesh.json", tmp_path / "map.json"


def read_table(path):
    rows = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(rows))


def test_round_trip(square_files):
    mesh, fmap = square_files
    cx = load_mesh(mesh)
    f = load_map(fmap, cx)
    np.testing.assert_array_equal(cx.vertices, fixtures.square4().vertices)
    np.testing.assert_allclose(f.matrices[0], [[1.0, 0.5], [0.0, 1.0]], atol=1e-15)


@pytest.mark.parametrize("doc,msg", [
    ({"dimension": 2, "vertices": [[0, 0]]}, "needs the fields"),
    ({"dimension": 2, "vertices": [[0, 0, 0]], "simplices": []}, "2-tuples"),
    ({"dimension": 2, "vertices": [[0, 0], [1, 0], [0, 1]], "simplices": [[0, 1]]}, "3-tuples"),
])
def test_bad_meshes(tmp_path, doc, msg):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(InputError, match=msg):
        load_mesh(p)


def test_validate_exit_codes(square_files, tmp_path, capsys):
    mesh, fmap = square_files
    assert main(["validate", "--mesh", str(mesh), "--map", str(fmap)]) == 0
    assert main(["validate", "--mesh", "builtin:square-overlap", "--builtin", "identity"]) == 1
    assert "interior-overlap (0, 1)" in capsys.readouterr().out
    short = tmp_path / "short.json"
    short.write_text(json.dumps(json.loads(fmap.read_text())[:3]))
    assert main(["validate", "--mesh", str(mesh), "--map", str(short)]) == 2
    assert "3 pieces for 4 simplices" in capsys.readouterr().err
    assert main(["validate", "--mesh", str(tmp_path / "missing.json"), "--builtin", "identity"]) == 2
    assert main(["validate", "--mesh", str(mesh)]) == 2
    assert main(["validate"]) == 2
    assert main(["frobnicate"]) == 2


def test_smooth_identity_gives_xi(tmp_path):
    assert main(["smooth", "--mesh", "builtin:square", "--builtin", "identity", "--delta", "0.05",
                 "--grid", "11", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "samples.csv")
    assert rows
    for r in rows:
        for i in range(2):
            assert float(r[f"ftilde{i}"]) == pytest.approx(float(r[f"xi{i}"]), abs=1e-15)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["delta"] == 0.05 and meta["clamped"] is False
    assert (tmp_path / "report.csv").read_text().startswith("# config_hash=")


def test_smooth_clamps(tmp_path, capsys):
    assert main(["smooth", "--mesh", "builtin:square", "--builtin", "shear2d", "--delta", "5",
                 "--grid", "5", "--out", str(tmp_path)]) == 0
    assert "warning: delta clamped" in capsys.readouterr().err
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["clamped"] is True and 0.9 < meta["delta"] < 0.95


def test_smooth_eps_mode(tmp_path):
    assert main(["smooth", "--mesh", "builtin:square", "--builtin", "shear2d", "--eps", "0.01", "--p", "2",
                 "--grid", "5", "--out", str(tmp_path)]) == 0
    row = read_table(tmp_path / "report.csv")[0]
    assert float(row["w1p_error"]) <= 0.01


def test_verify_positive_control(tmp_path):
    args = ["verify", "--mesh", "builtin:square", "--builtin", "shear2d", "--delta", "0.05", "--check", "c1"]
    assert main(args + ["--target", "pa", "--out", str(tmp_path / "a")]) == 1
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert "FAIL c1" in (tmp_path / "a" / "certificates.txt").read_text()


def test_verify_is_deterministic(tmp_path):
    args = ["verify", "--mesh", "builtin:square", "--builtin", "shear2d", "--delta", "0.05",
            "--checks", "normal,preservation,order,negative", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "certificates.json").read_bytes()
    assert a == (tmp_path / "b" / "certificates.json").read_bytes()
    assert b"negative_control" in a


def test_verify_rejects_unknown_check(tmp_path):
    assert main(["verify", "--mesh", "builtin:square", "--builtin", "identity", "--checks", "bogus",
                 "--out", str(tmp_path)]) == 2


def test_sweep_rows(tmp_path):
    assert main(["sweep", "--mesh", "builtin:square", "--builtin", "shear2d", "--delta", "0.1,0.05",
                 "--p", "1,2", "--out", str(tmp_path)]) == 0
    lines = [ln for ln in (tmp_path / "sweep.csv").read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "delta,p,linf,w1p_error,support_fraction,sup_jacobian"
    rates = [ln for ln in lines if ln.startswith("rate,")]
    assert len(rates) == 3
    assert main(["sweep", "--mesh", "builtin:square", "--builtin", "shear2d", "--delta", "0.05",
                 "--out", str(tmp_path / "one")]) == 0
    assert "rate," not in (tmp_path / "one" / "sweep.csv").read_text()
