"""Hot numeric kernels.

Each kernel exists in two forms: the plain-Python original (suffix ``_py``)
and the dispatch name used by the rest of the package. By default the
dispatch name is the numba ``@njit``-compiled version; setting the
environment variable ``FALSIFY_KIT_NO_NUMBA=1`` before import selects the
un-jitted originals instead. Both paths execute the same statements in the
same order, so results are bit-identical.

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

import math
import os

import numpy as np

_flag = os.environ.get("FALSIFY_KIT_NO_NUMBA", "").strip().lower()
NUMBA_ENABLED = _flag not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _compile(fn):
        return _njit(cache=True)(fn)
else:
    def _compile(fn):
        return fn


def cartpole_core_py(x0, xd0, th0, thd0, pole_mass, half_len, cart_mass,
                     gravity, kx, kxd, kth, kthd, u_max, dt, steps, clamp):
    """Euler-integrated cart-pole under a saturated linear state-feedback force.

    Returns (x, theta) arrays of length steps+1, theta in radians.
    State components are clamped to +-clamp so traces stay finite even when
    the closed loop diverges.
    """
    xs = np.empty(steps + 1)
    ths = np.empty(steps + 1)
    x = x0
    xd = xd0
    th = th0
    thd = thd0
    xs[0] = x
    ths[0] = th
    total_mass = cart_mass + pole_mass
    pml = pole_mass * half_len
    for i in range(steps):
        u = -(kx * x + kxd * xd + kth * th + kthd * thd)
        if u > u_max:
            u = u_max
        elif u < -u_max:
            u = -u_max
        sin_th = math.sin(th)
        cos_th = math.cos(th)
        temp = (u + pml * thd * thd * sin_th) / total_mass
        th_acc = (gravity * sin_th - cos_th * temp) / (
            half_len * (4.0 / 3.0 - pole_mass * cos_th * cos_th / total_mass))
        x_acc = temp - pml * th_acc * cos_th / total_mass
        x = x + dt * xd
        xd = xd + dt * x_acc
        th = th + dt * thd
        thd = thd + dt * th_acc
        if x > clamp:
            x = clamp
        elif x < -clamp:
            x = -clamp
        if xd > clamp:
            xd = clamp
        elif xd < -clamp:
            xd = -clamp
        if th > clamp:
            th = clamp
        elif th < -clamp:
            th = -clamp
        if thd > clamp:
            thd = clamp
        elif thd < -clamp:
            thd = -clamp
        xs[i + 1] = x
        ths[i + 1] = th
    return xs, ths


def lanechange_core_py(speed, reaction_distance, lateral_target, lateral_rate,
                       start_gap, dt, steps):
    """Kinematic lane change toward a stopped obstacle.

    Longitudinal motion at constant speed; once the longitudinal gap drops
    below reaction_distance, a first-order lateral shift toward
    lateral_target starts. The discrete update is a convex combination for
    dt*lateral_rate <= 1, so the response is monotone in time and never
    exceeds the target. Returns (gap, lateral, overshoot) arrays of length
    steps+1; gap is the Euclidean ego-obstacle distance.
    """
    gaps = np.empty(steps + 1)
    lats = np.empty(steps + 1)
    overs = np.empty(steps + 1)
    s = 0.0
    y = 0.0
    triggered = False
    gaps[0] = math.sqrt(start_gap * start_gap)
    lats[0] = 0.0
    overs[0] = 0.0
    for i in range(steps):
        if start_gap - s < reaction_distance:
            triggered = True
        if triggered:
            y = y + dt * lateral_rate * (lateral_target - y)
        s = s + dt * speed
        dx = start_gap - s
        gaps[i + 1] = math.sqrt(dx * dx + y * y)
        lats[i + 1] = y
        over = y - lateral_target
        if over < 0.0:
            over = 0.0
        overs[i + 1] = over
    return gaps, lats, overs


def halton_block_py(start_index, count, bases):
    """Radical-inverse (Halton) block: rows = indices start_index..+count-1,
    one column per base. Values lie in [0, 1)."""
    nb = bases.shape[0]
    out = np.empty((count, nb))
    for j in range(count):
        idx = start_index + j
        for d in range(nb):
            b = bases[d]
            i = idx
            f = 1.0
            r = 0.0
            while i > 0:
                f = f / b
                r = r + f * (i % b)
                i = i // b
            out[j, d] = r
    return out


cartpole_core = _compile(cartpole_core_py)
lanechange_core = _compile(lanechange_core_py)
halton_block = _compile(halton_block_py)
