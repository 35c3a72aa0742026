import json

import numpy as np
import pytest

import vvord


def three_node():
    feeder = vvord.build_radial_feeder([(0, 1, 0.01, 0.02), (1, 2, 0.01, 0.02), (1, 3, 0.01, 0.03)])
    return vvord.with_ders(feeder, [0, 1, 2], np.full(3, 0.5))


def test_version():
    assert vvord.__version__ == "0.1.0"


def test_prox_examples():
    assert vvord.prox_g(0.05, 1.0, 0.1, 0.5) == 0.0
    assert vvord.prox_g(0.3, 1.0, 0.1, 0.5) == pytest.approx(0.2)
    assert vvord.prox_g(0.7, 1.0, 0.1, 0.5) == 0.5
    ys = np.linspace(-2, 2, 401)
    diffs = [abs(vvord.prox_g(y, 0.7, 0.05, 0.4) - vvord.prox_g_relu_form(y, 0.7, 0.05, 0.4)) for y in ys]
    assert max(diffs) <= 1e-15
    assert vvord.prox_branch(0.7, 1.0, 0.1, 0.5) == "sat+"


def test_feeder_and_analysis():
    f = three_node()
    assert f.n_nodes == 3
    assert np.allclose(f.x, f.x.T)
    a = vvord.analyze_feeder(f, 1e-5)
    assert a["kappa"] > 1.0
    assert a["inc_stable_at_mu0"]
    assert vvord.spectral_norm(np.eye(3)) == pytest.approx(1.0)
    assert vvord.multiphase_step_bound(np.eye(2)) == pytest.approx(2.0)
    round_trip = vvord.feeder_from_json(f.to_json())
    assert np.array_equal(round_trip.x, f.x)


def test_simulation_matches_equilibrium():
    f = three_node()
    zt = vvord.preset_initialization(f, 1.0)
    v_tilde = np.array([1.04, 1.06, 1.05])
    mu = vvord.default_step_size(f)
    trace = vvord.simulate("inc", f, v_tilde, zt, mu=mu, tol=1e-12, max_steps=100000)
    assert trace.converged
    assert trace.q.shape == trace.v.shape
    eq = vvord.find_equilibrium(zt, mu, f, v_tilde)
    assert np.allclose(trace.q[-1], eq.q_star, atol=1e-9)
    assert np.allclose(eq.v_star, f.x @ eq.q_star + v_tilde, atol=1e-12)


def test_gradient_and_training():
    f = three_node()
    scenarios = vvord.generate_scenarios(f, 16, (0.0, 1.0), (0.0, 3.0), seed=4)
    assert scenarios.shape == (16, 3)
    baseline = vvord.baseline_objective(scenarios)
    assert baseline > 0
    zt0 = vvord.preset_initialization(f, 1.0)
    loss, grad = vvord.loss_and_grad(zt0, f, scenarios[:4], depth=30)
    assert np.isfinite(loss)
    assert grad.alpha_t.shape == (3,)
    params, history = vvord.train(f, scenarios, epochs=20, batch_size=4, lr=0.01, seed=1)
    assert len(history["epoch_objective"]) == 21
    assert min(history["epoch_objective"]) <= history["epoch_objective"][0]
    again, history2 = vvord.train(f, scenarios, epochs=20, batch_size=4, lr=0.01, seed=1)
    assert history["step_loss"] == history2["step_loss"]
    doc = json.loads(vvord.rules_to_json(params, f))
    assert [entry["node"] for entry in doc] == [0, 1, 2]
    parsed = vvord.rules_from_json(vvord.rules_to_json(params, f), f)
    assert np.array_equal(parsed.alpha_t, params.alpha_t)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        vvord.feeder_from_json("{")
    with pytest.raises(ValueError):
        vvord.symmetric_eig_extremes(np.array([[1.0, 0.9], [0.2, 1.0]]))


def test_cli_entry(tmp_path):
    f = three_node()
    path = tmp_path / "feeder.json"
    path.write_text(f.to_json())
    out = tmp_path / "analysis.json"
    assert vvord.run_cli(["analyze", "--feeder", str(path), "--out", str(out)]) == 0
    assert "mu0" in json.loads(out.read_text())
    assert vvord.run_cli(["analyze", "--feeder", str(tmp_path / "missing.json")]) == 1
