import math

import pytest

from falsify_client.cartpole import cartpole_reference_callback

# pinned violating parameters from the toolkit's grid sweep
VIOLATING = {"x0.0": -0.5, "theta0.0": -0.1, "pole_mass.0": 0.5,
             "pole_half_length.0": 0.8125}
NOMINAL = {"x0.0": 0.0, "theta0.0": 0.05, "pole_mass.0": 0.1,
           "pole_half_length.0": 0.5}


def margin(signals):
    worst = math.inf
    for x, th in zip(signals["x"], signals["theta_deg"]):
        worst = min(worst, 2.4 - abs(x), 12.0 - abs(th))
    return worst


def test_equilibrium_all_zero():
    times, signals = cartpole_reference_callback(
        {"x0.0": 0.0, "theta0.0": 0.0, "pole_mass.0": 0.1,
         "pole_half_length.0": 0.5})
    assert len(times) == 501
    assert all(v == 0.0 for v in signals["x"])
    assert all(v == 0.0 for v in signals["theta_deg"])


def test_nominal_satisfies_thresholds():
    _, signals = cartpole_reference_callback(NOMINAL)
    assert margin(signals) > 0


def test_pinned_violating_parameters():
    _, signals = cartpole_reference_callback(VIOLATING)
    assert margin(signals) < 0


def test_agreement_with_primary_implementation():
    # cross-implementation check against the toolkit's simulator
    sims = pytest.importorskip("falsify_kit.sims")
    import numpy as np

    rng = np.random.default_rng(99)
    simulate = sims.make_simulator("cartpole", {})
    for _ in range(10):
        assignments = {
            "x0.0": float(rng.uniform(-0.5, 0.5)),
            "theta0.0": float(rng.uniform(-0.1, 0.1)),
            "pole_mass.0": float(rng.uniform(0.05, 0.5)),
            "pole_half_length.0": float(rng.uniform(0.25, 1.0)),
        }
        times, signals = cartpole_reference_callback(assignments)
        trace = simulate(assignments)
        assert np.allclose(times, trace.times, atol=1e-9, rtol=0)
        for name in ("x", "theta_deg"):
            assert np.allclose(signals[name], trace.signals[name],
                               atol=1e-9, rtol=0)
