import numpy as np
import pytest

from stadloc.eigensolver import BoundaryFunction, SpectrumWindow
from stadloc.errors import InputError
from stadloc.husimi import HusimiGrid
from stadloc.io import (read_bndf, read_csv, read_husg, read_json, read_levels, sha256, write_bndf, write_csv,
                        write_husg, write_json, write_levels)


def test_bndf_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    funcs = [BoundaryFunction(k=50.0 + i, s=np.sort(rng.random(30 + i)), u=rng.normal(size=30 + i), epsilon=0.2)
             for i in range(3)]
    p = write_bndf(tmp_path / "f.bndf", funcs)
    back = read_bndf(p, epsilon=0.2)
    assert len(back) == 3
    for a, b in zip(funcs, back):
        assert a.k == b.k and np.array_equal(a.s, b.s) and np.array_equal(a.u, b.u)


def test_bndf_rejects_garbage(tmp_path):
    p = tmp_path / "x.bndf"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(InputError):
        read_bndf(p)
    funcs = [BoundaryFunction(k=50.0, s=np.linspace(0.1, 1, 5), u=np.ones(5), epsilon=0.2)]
    q = write_bndf(tmp_path / "y.bndf", funcs)
    q.write_bytes(q.read_bytes() + b"\0")
    with pytest.raises(InputError):
        read_bndf(q)


def test_husg_round_trip(tmp_path):
    v = np.random.default_rng(1).random((7, 5))
    g = HusimiGrid(0.3, 120.5, v / v.sum())
    back = read_husg(write_husg(tmp_path / "g.husg", g))
    assert back.epsilon == 0.3 and back.k == 120.5 and np.array_equal(back.values, g.values)


def test_levels_round_trip(tmp_path):
    w = SpectrumWindow(0.1, 10.0, 12.0, np.array([10.5, 11.0, 11.75]), "bim", window_ids=np.array([0, 0, 1]))
    back = read_levels(write_levels(tmp_path / "l.csv", w), 0.1, 10.0, 12.0)
    assert np.array_equal(back.levels, w.levels) and back.method == "bim"
    assert list(back.window_ids) == [0, 0, 1]


def test_csv_full_precision(tmp_path):
    x = 0.1 + 0.2
    p = write_csv(tmp_path / "a.csv", ["x"], [(x,)])
    assert float(read_csv(p)[0]["x"]) == x


def test_json_numpy_and_hash(tmp_path):
    p = write_json(tmp_path / "a.json", {"v": np.arange(3), "f": np.float64(1.5)})
    assert read_json(p) == {"v": [0, 1, 2], "f": 1.5}
    assert len(sha256(p)) == 64
