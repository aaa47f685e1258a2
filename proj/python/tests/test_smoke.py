import json

import numpy as np
import pytest

import banditflow as bf


def test_fluid_identical_arms():
    s = bf.solve_fluid([0.0, 0.0], [1.0, 1.0], 1e4)
    assert s["n_star"] == pytest.approx([5000.0, 5000.0], rel=1e-12)
    assert s["lambda"].shape == (2, 2)


def test_clt_identical_arms():
    p = bf.predict_clt([0.0, 0.0], [1.0, 1.0], 1e5)
    assert p["labels"] == ["W_2", "Z_1", "Z_2"]
    np.testing.assert_allclose(p["cov"], [[2, -1, 1], [-1, 1, 0], [1, 0, 1]], atol=1e-12)
    k = bf.predict_clt([0.5, 0.2, 0.0], [1.0, 1.0, 1.0], 1e5, two_arm=False)
    assert k["cov"].shape == (6, 6)
    assert np.linalg.eigvalsh(k["cov"]).min() > -1e-10


def test_simulate_conserves_pulls_and_is_deterministic():
    a = bf.simulate([0.2, 0.0], [1.0, 1.0], 2000, 20, seed=3)
    b = bf.simulate([0.2, 0.0], [1.0, 1.0], 2000, 20, seed=3, parallel=2)
    assert (a["pulls"].sum(axis=1) == 2000).all()
    np.testing.assert_array_equal(a["pulls"], b["pulls"])
    np.testing.assert_array_equal(a["sample_means"], b["sample_means"])
    np.testing.assert_allclose(a["pseudo_regret"], 0.2 * a["pulls"][:, 1])


def test_stylized_bias_runs():
    e = bf.stylized_bias([1.0, 1.0], [0.5, 0.5], 10**6, 1000, seed=1)
    assert len(e["bias"]) == 2
    assert 0 < e["delta"] <= 0.5


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        bf.solve_fluid([0.0, 1.0], [1.0, 1.0], 1e4)
    code, out, err = bf.run_cli(["fluid", "--T", "1e4"])
    assert code == 0
    assert json.loads(out)["results"][0]["n_star"] == [5000.0, 5000.0]
    code, _, err = bf.run_cli(["fluid", "--T", "abc"])
    assert code == 2 and "T" in err
