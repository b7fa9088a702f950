import json

import numpy as np
import pytest

from subgap import io as sio


def test_load_polynomial_both_layouts(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps([[1, 0], [0, 2]]))
    b.write_text(json.dumps({"coeffs": [[1, 0], [0, 2]]}))
    assert np.array_equal(sio.load_polynomial(a), [1, 2j])
    assert np.array_equal(sio.load_polynomial(b), [1, 2j])
    a.write_text(json.dumps([[1, "x"]]))
    with pytest.raises(sio.InputError):
        sio.load_polynomial(a)


def test_parse_amp():
    assert np.allclose(sio.parse_amp("1e2:1e4:5"), [1e2, 10**2.5, 1e3, 10**3.5, 1e4])
    for bad in ("1:2", "0:1:3", "a:b:c"):
        with pytest.raises(sio.InputError):
            sio.parse_amp(bad)


def test_parse_disc_checks_point():
    entry = {"point": [[1, 0], [0, 0]], "jet": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}
    disc = sio.parse_disc(entry, 2)
    assert disc[1].coeffs[1] == 1
    entry["point"] = [[2, 0], [0, 0]]
    with pytest.raises(sio.InputError, match="constant term"):
        sio.parse_disc(entry, 2)
    with pytest.raises(sio.InputError):
        sio.parse_disc({"jet": [[[1, 0]]]}, 2)


def test_disc_json_round_trip():
    entry = {"point": [[1.0, 0.0], [0.0, 0.5]], "jet": [[[1.0, 0.0], [2.0, 0.0]], [[0.0, 0.5], [0.0, -1.0]]]}
    assert sio.disc_to_json(sio.parse_disc(entry, 2)) == entry


def test_manifest_id_ignores_timing(tmp_path):
    f = tmp_path / "in.json"
    f.write_text("[]")
    a = sio.RunManifest("type", seed=3)
    a.add_input(f)
    b = sio.RunManifest("type", seed=3, started=0.0)
    b.add_input(f)
    assert a.manifest_id == b.manifest_id
    assert a.manifest_id != sio.RunManifest("type", seed=4).manifest_id
    done = a.finish()
    assert sio.validate_json("manifest", done) == []


def test_schema_validation_detects_problems():
    assert sio.validate_json("error", {"error": "X", "message": "m", "exit_code": True}) != []
    assert sio.validate_json("gap1d", {"d": 1, "slope": None, "manifest_id": "x"}) == []
    assert sio.validate_csv("contact", "t,max_contact_residual\n0.25,1e-3\n") == []
    assert sio.validate_csv("contact", "t\n0.25\n") != []


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        sio.dumps({"x": float("nan")})
