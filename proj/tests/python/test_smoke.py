import json
import math

import numpy as np
import pytest

import activesense as a


def test_steering_vector_phases():
    v = a.steering_vector(4, 0.3)
    expected = np.exp(1j * np.pi * np.arange(4) * math.sin(0.3))
    assert np.allclose(v, expected, atol=1e-14)


def test_target_response_is_outer_product():
    geom = a.ArrayGeometry(3, 5)
    scene = a.SceneParams(np.array([0.2]), np.array([0.5 - 0.5j]))
    h = a.target_response(scene, geom)
    ar = a.steering_vector(5, 0.2)
    at = a.steering_vector(3, 0.2)
    assert h.shape == (5, 3)
    assert np.allclose(h, (0.5 - 0.5j) * np.outer(ar, at.conj()))


def test_posterior_update_and_bound():
    geom = a.ArrayGeometry(2, 4)
    post = a.init_posterior(a.AngleRange(-1.0, 1.0), 32)
    assert post.size == 32
    assert np.isclose(post.weights.sum(), 1.0)
    scene = a.SceneParams(np.array([0.4]), np.array([1.0 + 0j]))
    beams = a.BeamformerPair(np.ones((2, 1), complex), np.eye(4, 2, dtype=complex))
    y = a.simulate_measurement(scene, geom, beams, seed=3)
    post = a.assimilate(post, beams, geom, y)
    assert post.stages == 1
    assert np.isclose(post.weights.sum(), 1.0)
    j = a.prior_fim(post, geom) + a.data_fim(post, beams.v, a.rx_projector(beams.w), geom)
    assert j.shape == (3, 3)
    assert np.allclose(j, j.T)
    q = a.angle_weights(1)
    assert a.bcrb_value(q, j) == pytest.approx(np.linalg.inv(j)[0, 0], rel=1e-10)


def test_ky_fan_and_errors():
    assert a.ky_fan_value(np.diag([3.0, 2.0, 1.0]).astype(complex), 2) == pytest.approx(5.0)
    with pytest.raises(a.NonIdentifiable):
        a.bcrb_value(np.array([1.0]), np.zeros((1, 1)))


def test_run_strategy_is_deterministic():
    cfg = a.SensingConfig()
    cfg.n_tx, cfg.n_rx, cfg.m_tx, cfg.m_rx = 2, 4, 1, 2
    cfg.stages, cfg.grid_size, cfg.power = 3, 32, 10.0
    scene = a.SceneParams(np.array([-0.3]), np.array([1j]))
    r1 = a.run_strategy("proposed", scene, cfg, seed=5)
    r2 = a.run_strategy("proposed", scene, cfg, seed=5)
    assert len(r1.stages) == 3
    assert r1.estimate.angles[0] == r2.estimate.angles[0]
    v = r1.stages[-1].beams.v
    assert np.trace(v @ v.conj().T).real <= 10.0 * (1 + 1e-10)
    with pytest.raises(a.ConfigurationError):
        a.run_strategy("lstm", scene, cfg, seed=5)


def test_experiment_csv_roundtrip():
    spec = {
        "base": {"n_tx": 2, "n_rx": 3, "m_tx": 1, "m_rx": 2, "stages": 2, "grid_size": 16},
        "snr_grid": [0, 10],
        "trials": 2,
        "seed": 9,
        "strategies": ["proposed", "random"],
        "threads": 1,
    }
    report = a.run_experiment(json.dumps(spec))
    assert len(report.cells) == 4
    text = a.format_csv(report)
    assert text.startswith("strategy,snr_db,t_explore,trials,wmse_mean,wmse_stderr,failures\n")
    assert a.format_csv(a.parse_csv(text)) == text
    cell = report.find("random", 10.0, -1)
    assert cell is not None and cell.trials == 2
