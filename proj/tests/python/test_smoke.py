import json
import math

import numpy as np
import pytest

import srb_lab


def test_eval_and_orbit():
    p = srb_lab.SkewMapParams.viana(16, 1.9, 0.0)
    assert srb_lab.eval(p, 0.25, 0.0) == (0.0, 1.9)
    pts, codes = srb_lab.orbit(srb_lab.SkewMapParams.viana(), 0.1, 0.2, 50, seed=3)
    assert pts.shape == (51, 2)
    assert len(codes) == 51


def test_validation_maps_to_value_error():
    with pytest.raises(ValueError):
        srb_lab.SkewMapParams.viana(16, 2.5, 0.01)
    with pytest.raises(ValueError):
        srb_lab.return_code(0.1, 0.0)


def test_return_codes():
    assert srb_lab.return_code(0.05, 0.01) == 1
    assert srb_lab.return_code(0.0, 0.01) == srb_lab.r_cap(0.01)


def test_doubling_density_is_uniform():
    dens, residual = srb_lab.invariant_density(srb_lab.SkewMapParams.doubling_product(), 8, 8, 16)
    assert dens.shape == (8, 8)
    assert residual < 1e-12
    assert np.allclose(dens, 1.0)


def test_lyapunov_doubling():
    s = srb_lab.lyapunov_vertical(srb_lab.SkewMapParams.doubling_product(), 5, 200, 1)
    assert s["median"] == pytest.approx(math.log(2.0))


def test_run_experiment(tmp_path):
    cfg = json.dumps({"variant": "test_doubling_product", "n_theta": 2, "n_x": 2, "subsamples": 16})
    r = srb_lab.run_experiment("ulam", cfg, str(tmp_path))
    assert r["exit_code"] == 0
    rows = (tmp_path / r["directory"].split("/")[-1] / "ulam.csv").read_text().splitlines()
    assert rows[0] == "row,col,weight" and len(rows) == 17

    bad = srb_lab.run_experiment("stability", json.dumps({"deltas": [0.01], "seed": 1}), str(tmp_path / "x"))
    assert bad["exit_code"] == 2
    assert not (tmp_path / "x").exists()
