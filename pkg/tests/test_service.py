import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hsfuse.cube import load_cube, save_cube
from hsfuse.service import create_app
from hsfuse.simulate import make_test_cube


@pytest.fixture()
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


def write_truth(tmp_path, nv=8, nh=8, b=4, seed=1):
    truth = make_test_cube(nv, nh, b, "blocks", seed=seed)
    path = tmp_path / "truth.hsc"
    save_cube(truth, path)
    return truth, str(path)


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"


def test_simulate_endpoint(client, tmp_path):
    truth, tpath = write_truth(tmp_path)
    resp = client.post("/simulate", json={
        "truth": tpath, "out_dir": str(tmp_path / "out"),
        "r": 2, "sigma_v": 0.1, "sigma_g": 0.02, "seed": 5,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["nv"] == 8 and body["bands"] == 4 and body["guide_bands"] == 1
    v = load_cube(body["v_path"])
    assert (v.nv, v.nh, v.b) == (4, 4, 4)
    assert body["epsilon"] > 0


def test_simulate_missing_truth_is_400(client, tmp_path):
    resp = client.post("/simulate", json={
        "truth": str(tmp_path / "missing.hsc"), "out_dir": str(tmp_path),
    })
    assert resp.status_code == 400
    assert "not found" in resp.json()["detail"]


def test_simulate_preset_applies(client, tmp_path):
    truth, tpath = write_truth(tmp_path)
    out = str(tmp_path / "out")
    resp = client.post("/simulate", json={
        "truth": tpath, "out_dir": out, "preset": "pan-r2", "seed": 1,
    })
    assert resp.status_code == 200
    meta = open(resp.json()["meta_path"]).read()
    assert "sigma_v = 0.1" in meta
    assert "sigma_g = 0.02" in meta


def test_fuse_endpoint_end_to_end(client, tmp_path):
    truth, tpath = write_truth(tmp_path)
    out = str(tmp_path / "out")
    sim = client.post("/simulate", json={
        "truth": tpath, "out_dir": out, "r": 2,
        "sigma_v": 0.05, "sigma_g": 0.01, "seed": 2,
    }).json()
    resp = client.post("/fuse", json={
        "out_dir": out, "meta": sim["meta_path"], "r": 2,
        "omega": 0.01, "p": 2, "lam": 0.04, "rho": 1.0,
        "gamma": "auto", "max_iters": 3000, "rel_tol": 1e-4,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "converged"
    assert body["epsilon"] == pytest.approx(sim["epsilon"])
    ev = client.post("/evaluate", json={
        "estimate": body["u_path"], "truth": tpath, "r": 2,
    })
    assert ev.status_code == 200
    metrics = ev.json()
    assert metrics["psnr_db"] > 15.0
    assert 0.0 <= metrics["sam_deg"] <= 180.0


def test_fuse_unknown_preset_is_400(client):
    resp = client.post("/fuse", json={"preset": "zzz"})
    assert resp.status_code == 400


def test_fuse_validation_error_is_422(client):
    resp = client.post("/fuse", json={"max_iters": "not-a-number"})
    assert resp.status_code == 422


def test_evaluate_identity(client, tmp_path):
    truth, tpath = write_truth(tmp_path)
    resp = client.post("/evaluate", json={"estimate": tpath, "truth": tpath, "r": 2})
    assert resp.status_code == 200
    body = resp.json()
    assert body["psnr_db"] == math.inf or body["psnr_db"] > 1e6
    assert body["ergas"] == 0.0


def test_evaluate_malformed_cube_is_400(client, tmp_path):
    bad = tmp_path / "bad.hsc"
    bad.write_bytes(b"HSC1 2 2 1\n" + b"\x00" * 7)
    truth, tpath = write_truth(tmp_path)
    resp = client.post("/evaluate", json={"estimate": str(bad), "truth": tpath, "r": 2})
    assert resp.status_code == 400


def test_check_endpoint(client):
    resp = client.post("/check", json={})
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    assert body["failures"] == []
    assert len(body["checks"]) > 20


def test_check_perturbed(client):
    resp = client.post("/check", json={"perturb": "downsample"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is False
    assert any("downsample" in f for f in body["failures"])
