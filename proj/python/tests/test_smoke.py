import pathlib

import numpy as np
import pytest

import tdmpc

SCENARIOS = pathlib.Path(__file__).resolve().parents[2] / "scenarios"


@pytest.fixture(scope="module")
def formation():
    s = tdmpc.load_scenario(str(SCENARIOS / "formation3.json"))
    sh = tdmpc.shift_to_target(s)
    g = tdmpc.build_global_qp(sh.scenario)
    return s, sh, g


def test_load_and_validate(formation):
    s, _, g = formation
    assert s.num_agents == 3
    assert len(s.hash) == 16
    ok, _ = tdmpc.validate(s)
    assert ok
    assert g.coupling_rows == g.b.size


def test_ada_matches_oracle(formation):
    _, sh, g = formation
    x = sh.scenario.initial_state
    eps = 1e-3
    alpha = tdmpc.default_step(tdmpc.lipschitz_constant(g, eps))
    lam, mu = tdmpc.run_ada(np.zeros(g.coupling_rows), x, 3000, g, eps, alpha)
    ref = tdmpc.solve_centralized(g, x, eps)
    assert np.all(mu >= 0)
    assert np.linalg.norm(mu - ref["lambda"]) <= 1e-6 * max(1.0, np.linalg.norm(ref["lambda"]))
    assert tdmpc.dual_cost(mu, x, g, eps) >= tdmpc.dual_cost(ref["lambda"], x, g, eps) - 1e-9


def test_simulate_converges(formation):
    s, _, _ = formation
    tr = tdmpc.simulate(s, iters=5, steps=60)
    assert not tr["truncated"]
    assert len(tr["x"]) == 61
    assert np.linalg.norm(tr["x"][-1]) < 1e-3


def test_scenario_round_trip(formation):
    s, _, _ = formation
    again = tdmpc.scenario_from_dict(s.to_dict())
    assert np.allclose(again.initial_state, s.initial_state)


def test_condensation_self_test():
    s = tdmpc.load_scenario(str(SCENARIOS / "desk2.json"))
    rep = tdmpc.condensation_self_test(s, 10, 3)
    assert all(c["passed"] for c in rep["checks"])


def test_errors_are_typed():
    with pytest.raises(tdmpc.Error, match="DimensionError"):
        tdmpc.load_scenario(str(SCENARIOS.parent / "tests" / "cli" / "bad_dimensions.json"))
