"""Reference cart-pole episode callback.

Re-implements the toolkit's bundled cart-pole with identical constants and
arithmetic so cross-implementation traces agree sample for sample: Euler
integration of the classic pole-on-cart dynamics under a saturated linear
state-feedback force.
"""

import math

GRAVITY = 9.8
CART_MASS = 1.0
DT = 0.02
STEPS = 500
STATE_CLAMP = 1e6
GAINS = (-3.162, -5.915, -49.507, -12.844)
FORCE_LIMIT = 2.5

_DEFAULTS = {"x0": 0.0, "theta0": 0.0, "pole_mass": 0.1, "pole_half_length": 0.5}


def _clamp(v):
    if v > STATE_CLAMP:
        return STATE_CLAMP
    if v < -STATE_CLAMP:
        return -STATE_CLAMP
    return v


def _leaf(assignments, name):
    if f"{name}.0" in assignments:
        return float(assignments[f"{name}.0"])
    if name in assignments:
        return float(assignments[name])
    return _DEFAULTS[name]


def cartpole_reference_callback(assignments):
    """Episode callback for connect_and_serve: assignments -> (times, signals)."""
    x = _leaf(assignments, "x0")
    th = _leaf(assignments, "theta0")
    pole_mass = _leaf(assignments, "pole_mass")
    half_len = _leaf(assignments, "pole_half_length")
    xd = 0.0
    thd = 0.0
    kx, kxd, kth, kthd = GAINS
    total_mass = CART_MASS + pole_mass
    pml = pole_mass * half_len
    xs = [x]
    ths = [th]
    for _ in range(STEPS):
        u = -(kx * x + kxd * xd + kth * th + kthd * thd)
        if u > FORCE_LIMIT:
            u = FORCE_LIMIT
        elif u < -FORCE_LIMIT:
            u = -FORCE_LIMIT
        sin_th = math.sin(th)
        cos_th = math.cos(th)
        temp = (u + pml * thd * thd * sin_th) / total_mass
        th_acc = (GRAVITY * sin_th - cos_th * temp) / (
            half_len * (4.0 / 3.0 - pole_mass * cos_th * cos_th / total_mass))
        x_acc = temp - pml * th_acc * cos_th / total_mass
        x = _clamp(x + DT * xd)
        xd = _clamp(xd + DT * x_acc)
        th = _clamp(th + DT * thd)
        thd = _clamp(thd + DT * th_acc)
        xs.append(x)
        ths.append(th)
    times = [i * DT for i in range(STEPS + 1)]
    theta_deg = [math.degrees(v) for v in ths]
    return times, {"x": xs, "theta_deg": theta_deg}
