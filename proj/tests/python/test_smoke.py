import json
import math

import numpy as np
import pytest

import cpgeo


def test_hamiltonian_matches_quadrature():
    xhat = (0.3, -0.7, 0.4)
    exact = cpgeo.hamiltonian(2.0, 0.5, 0.3, xhat)
    approx = cpgeo.hamiltonian_quadrature(2.0, 0.5, 0.3, xhat, L=40)
    assert exact > 0
    assert approx == pytest.approx(exact, rel=1e-2)


def test_config_round_trip_and_validation():
    c = cpgeo.Config()
    c.beta = 6.0
    d = cpgeo.Config.from_json(c.to_json())
    assert d.beta == 6.0
    assert d.h_x == pytest.approx(2 * math.pi / 72)
    with pytest.raises(ValueError):
        cpgeo.Config.from_json('{"betta": 1}')


def test_cost_shape_and_range():
    img = np.zeros((24, 32))
    img[10:14, :] = 1.0
    psi = cpgeo.cost(img)
    assert psi.shape == (24, 32, 72)
    assert psi.min() > 0 and psi.max() <= 1.0
    # along the bar the horizontal slice is cheapest
    assert np.argmin(psi[12, 16, :36]) == 0


def test_track_uturn_and_jaccard():
    case = cpgeo.synth_benchmark(2026, [0.0], ["uturn"])[0]
    assert case["image"].shape == (128, 128)
    r = cpgeo.track(case["image"], case["source"], case["target"], segmentation=case["segmentation"])
    path = r["path"]
    assert path.shape[1] == 5
    assert np.hypot(*(path[0, 1:3] - case["source"])) <= 2.0
    assert np.hypot(*(path[-1, 1:3] - case["target"])) <= 2.0
    assert cpgeo.jaccard(path[:, 1:3], case["truth"], 128, 128) >= 0.85
    doc = json.loads(r["json"])
    assert len(doc["samples"]) == path.shape[0]


def test_prior_and_solve():
    case = cpgeo.synth_benchmark(1, [0.0], ["near_touch"])[0]
    p = cpgeo.prior(case["segmentation"])
    assert p["centerlines"] >= 1
    assert not p["degenerate"]
    assert p["omega"].shape == (128, 128, 72)
    psi = cpgeo.cost(case["image"])
    s = cpgeo.solve(psi, p["omega"], 5.0, case["source"], case["target"])
    assert np.isfinite(s["value"])
    assert s["distance"].shape == psi.shape


def test_errors_map_to_python_exceptions():
    img = np.zeros((16, 16))
    with pytest.raises(ValueError):
        cpgeo.track(img, (-3, 2), (5, 5))
    with pytest.raises(ValueError):
        cpgeo.cost(np.zeros(5))


def test_noise_levels():
    v = cpgeo.noise_levels()
    assert len(v) == 16
    assert v[-1] == pytest.approx(0.15)
