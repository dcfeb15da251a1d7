"""Bundled in-process reference simulators.

Deterministic desk-scale systems so the whole pipeline is testable without
external software. Registered under "cartpole", "lanechange" and
"cartpole_gains"; each factory takes a params dict and returns a simulator
callable mapping point assignments to a Trace.
"""

import math

import numpy as np

from .errors import SimulatorError
from .kernels import cartpole_core, lanechange_core
from .mtl import Trace

GRAVITY = 9.8
CART_MASS = 1.0
CARTPOLE_DT = 0.02
CARTPOLE_STEPS = 500
STATE_CLAMP = 1e6

# Saturated linear state feedback u = -(kx*x + kxd*xdot + kth*theta +
# kthd*thetadot). Gains are continuous-time LQR for the nominal pole
# (mass 0.1 kg, half length 0.5 m); the 2.5 N force limit leaves heavy or
# long poles with large initial tilt unrecoverable.
DEFAULT_GAINS = (-3.162, -5.915, -49.507, -12.844)
FORCE_LIMIT = 2.5

# Hard environment corners for controller-gain synthesis:
# (x0, theta0, pole_mass, pole_half_length).
WORST_CASE_GRID = (
    (0.5, 0.1, 0.05, 0.25), (0.5, 0.1, 0.05, 1.0),
    (0.5, 0.1, 0.5, 0.25), (0.5, 0.1, 0.5, 1.0),
    (-0.5, -0.1, 0.05, 0.25), (-0.5, -0.1, 0.05, 1.0),
    (-0.5, -0.1, 0.5, 0.25), (-0.5, -0.1, 0.5, 1.0),
    (0.5, -0.1, 0.5, 1.0), (-0.5, 0.1, 0.5, 1.0),
)

LANE_START_GAP = 60.0
LANE_RATE_REF = 1.0  # s^-1; scales the dimensionless lateral gain
LANE_DT = 0.05


def _leaf(assignments, name, default):
    """Fetch a scalar leaf by struct-field convention (name.0) with a
    params/default fallback."""
    if f"{name}.0" in assignments:
        return float(assignments[f"{name}.0"])
    if name in assignments:
        return float(assignments[name])
    return float(default)


def cartpole_trace(x0, theta0, pole_mass, pole_half_length, gains=DEFAULT_GAINS,
                   u_max=FORCE_LIMIT, dt=CARTPOLE_DT, steps=CARTPOLE_STEPS,
                   cart_mass=CART_MASS):
    """Simulate one cart-pole episode; signals x (m) and theta_deg."""
    xs, ths = cartpole_core(x0, 0.0, theta0, 0.0, pole_mass, pole_half_length,
                            cart_mass, GRAVITY, gains[0], gains[1], gains[2],
                            gains[3], u_max, dt, int(steps), STATE_CLAMP)
    times = np.arange(int(steps) + 1) * dt
    return Trace(times, {"x": xs, "theta_deg": np.degrees(ths)})


def episode_margin(trace, x_limit=2.4, theta_limit_deg=12.0):
    """Worst-case margin of |x| <= x_limit and |theta_deg| <= theta_limit."""
    x = trace.signals["x"]
    th = trace.signals["theta_deg"]
    return float(min(np.min(x_limit - np.abs(x)),
                     np.min(theta_limit_deg - np.abs(th))))


def make_cartpole(params):
    params = dict(params or {})
    gains = tuple(params.get("gains", DEFAULT_GAINS))
    u_max = float(params.get("u_max", FORCE_LIMIT))
    dt = float(params.get("dt", CARTPOLE_DT))
    steps = int(params.get("steps", CARTPOLE_STEPS))

    def simulate(assignments):
        return cartpole_trace(
            _leaf(assignments, "x0", params.get("x0", 0.0)),
            _leaf(assignments, "theta0", params.get("theta0", 0.0)),
            _leaf(assignments, "pole_mass", params.get("pole_mass", 0.1)),
            _leaf(assignments, "pole_half_length", params.get("pole_half_length", 0.5)),
            gains=gains, u_max=u_max, dt=dt, steps=steps)

    return simulate


def make_cartpole_gains(params):
    """Gain-synthesis wrapper: one 'simulation' runs every environment in
    the worst-case grid under the sampled gains and reports the per-episode
    safety margin as a 'margin' signal (one sample per environment)."""
    params = dict(params or {})
    grid = tuple(tuple(float(v) for v in row)
                 for row in params.get("env_grid", WORST_CASE_GRID))
    u_max = float(params.get("u_max", FORCE_LIMIT))
    dt = float(params.get("dt", CARTPOLE_DT))
    steps = int(params.get("steps", CARTPOLE_STEPS))

    def simulate(assignments):
        gains = (_leaf(assignments, "kx", DEFAULT_GAINS[0]),
                 _leaf(assignments, "kxd", DEFAULT_GAINS[1]),
                 _leaf(assignments, "kth", DEFAULT_GAINS[2]),
                 _leaf(assignments, "kthd", DEFAULT_GAINS[3]))
        margins = []
        for x0, theta0, pole_mass, pole_half_length in grid:
            tr = cartpole_trace(x0, theta0, pole_mass, pole_half_length,
                                gains=gains, u_max=u_max, dt=dt, steps=steps)
            margins.append(episode_margin(tr))
        return Trace(np.arange(len(margins), dtype=float), {"margin": margins})

    return simulate


def lanechange_trace(ego_speed, reaction_distance, obstacle_offset, lateral_gain,
                     start_gap=LANE_START_GAP, dt=LANE_DT):
    """Simulate the lane-change scenario.

    The ego approaches a stopped obstacle start_gap metres ahead; when the
    longitudinal gap drops below reaction_distance it starts a first-order
    lateral shift of obstacle_offset metres at rate lateral_gain *
    LANE_RATE_REF. Signals: gap (Euclidean distance to the obstacle),
    lateral_offset, overshoot.
    """
    if ego_speed < 0:
        raise SimulatorError("ego_speed must be >= 0")
    if reaction_distance <= 0:
        raise SimulatorError("reaction_distance must be > 0")
    horizon = min(60.0, (start_gap + 40.0) / max(ego_speed, 0.5))
    steps = int(math.ceil(horizon / dt))
    gaps, lats, overs = lanechange_core(ego_speed, reaction_distance,
                                        obstacle_offset,
                                        lateral_gain * LANE_RATE_REF,
                                        start_gap, dt, steps)
    times = np.arange(steps + 1) * dt
    return Trace(times, {"gap": gaps, "lateral_offset": lats, "overshoot": overs})


def make_lanechange(params):
    params = dict(params or {})

    def simulate(assignments):
        return lanechange_trace(
            _leaf(assignments, "ego_speed", params.get("ego_speed", 20.0)),
            _leaf(assignments, "reaction_distance", params.get("reaction_distance", 15.0)),
            _leaf(assignments, "obstacle_offset", params.get("obstacle_offset", 3.0)),
            _leaf(assignments, "lateral_gain", params.get("lateral_gain", 1.0)))

    return simulate


REGISTRY = {
    "cartpole": make_cartpole,
    "cartpole_gains": make_cartpole_gains,
    "lanechange": make_lanechange,
}


def register_simulator(name, factory):
    """Add an in-process simulator factory (params dict -> sim callable)."""
    REGISTRY[name] = factory


def make_simulator(name, params=None):
    if name not in REGISTRY:
        raise SimulatorError(f"unknown in-process simulator {name!r}; "
                             f"known: {sorted(REGISTRY)}")
    return REGISTRY[name](params)
