"""Desired-trajectory generation for the experiment harness.

Units are millimeters and seconds throughout (limits in mm/s, mm/s^2,
mm/s^3). Three kinds:

* ``sine-scan``      constant-frequency sine, frequency = speed / wavelength,
                     with a smooth ramp-in and an optional standoff offset
* ``square-loop``    back-and-forth jerk-limited strokes under explicit
                     velocity / acceleration / jerk limits
* ``custom-samples`` samples loaded from a file and resampled
"""

from __future__ import annotations

import numpy as np


class TrajectoryError(ValueError):
    """Raised for unknown kinds or infeasible kinematic parameters."""


def smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: value and first two derivatives vanish at 0 and 1."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def sine_scan(ts: float, duration: float, amplitude: float, speed: float,
              wavelength: float, offset: float = 0.0,
              ramp_time: float = 0.5) -> np.ndarray:
    """Sine at frequency speed/wavelength around a constant offset.

    The whole signal (offset included) is multiplied by a smooth ramp at both
    ends, so the trajectory leaves and re-enters rest with continuous
    derivatives (the receding horizon pads the end with a constant hold).
    """
    if speed <= 0 or wavelength <= 0:
        raise TrajectoryError("speed and wavelength must be positive")
    if amplitude < 0:
        raise TrajectoryError("amplitude must be nonnegative")
    if ramp_time < 0:
        raise TrajectoryError("ramp time must be nonnegative")
    freq = speed / wavelength
    t = np.arange(int(round(duration / ts))) * ts
    if ramp_time > 0:
        ramp = smoothstep(t / ramp_time) * smoothstep((duration - ts - t)
                                                      / ramp_time)
    else:
        ramp = np.ones_like(t)
    return ramp * (offset + amplitude * np.sin(2.0 * np.pi * freq * t))


def _scurve_phase_times(v_peak: float, a_lim: float, j_lim: float):
    """Jerk and constant-acceleration phase durations to reach v_peak."""
    if v_peak * j_lim <= a_lim ** 2:
        return np.sqrt(v_peak / j_lim), 0.0
    return a_lim / j_lim, v_peak / a_lim - a_lim / j_lim


def _scurve_peak_velocity(distance: float, v_lim: float, a_lim: float,
                          j_lim: float) -> float:
    """Highest velocity the move can reach without overshooting distance."""
    def accel_distance(vp: float) -> float:
        tj, ta = _scurve_phase_times(vp, a_lim, j_lim)
        return vp * (tj + 0.5 * ta)
    if 2.0 * accel_distance(v_lim) <= distance:
        return v_lim
    if v_lim * j_lim <= a_lim ** 2:
        # jerk-limited triangle: distance = 2 vp sqrt(vp / j)
        vp = (0.5 * distance * np.sqrt(j_lim)) ** (2.0 / 3.0)
        if vp * j_lim <= a_lim ** 2:
            return vp
    # acceleration-limited: distance = 2 vp (a/j + vp/a) / 2 ... solve quadratic
    vp = 0.5 * (-a_lim ** 2 / j_lim
                + np.sqrt(a_lim ** 4 / j_lim ** 2 + 4.0 * a_lim * distance))
    if vp * j_lim > a_lim ** 2:
        return min(vp, v_lim)
    return (0.5 * distance * np.sqrt(j_lim)) ** (2.0 / 3.0)


def scurve_move(distance: float, v_lim: float, a_lim: float, j_lim: float,
                ts: float) -> np.ndarray:
    """Jerk-limited point-to-point profile from rest to rest.

    Returns positions sampled at ts, starting at 0 and ending at
    ``distance`` (signed). Peak |velocity| <= v_lim, |acceleration| <= a_lim,
    |jerk| <= j_lim by construction.
    """
    if min(v_lim, a_lim, j_lim) <= 0:
        raise TrajectoryError("kinematic limits must all be positive")
    if distance == 0.0:
        return np.zeros(1)
    sign = 1.0 if distance > 0 else -1.0
    dist = abs(distance)
    vp = _scurve_peak_velocity(dist, v_lim, a_lim, j_lim)
    tj, ta = _scurve_phase_times(vp, a_lim, j_lim)
    tv = (dist - 2.0 * vp * (tj + 0.5 * ta)) / vp
    tv = max(tv, 0.0)
    segments = [(+j_lim, tj), (0.0, ta), (-j_lim, tj), (0.0, tv),
                (-j_lim, tj), (0.0, ta), (+j_lim, tj)]
    total = sum(d for _, d in segments)
    n = int(np.ceil(total / ts)) + 1
    t_grid = np.arange(n) * ts
    pos = np.zeros(n)
    p0 = v0 = a0 = 0.0
    t_start = 0.0
    for jerk, dur in segments:
        if dur <= 0.0:
            continue
        sel = (t_grid >= t_start) & (t_grid < t_start + dur)
        tau = t_grid[sel] - t_start
        pos[sel] = p0 + v0 * tau + 0.5 * a0 * tau ** 2 + jerk * tau ** 3 / 6.0
        p0 += v0 * dur + 0.5 * a0 * dur ** 2 + jerk * dur ** 3 / 6.0
        v0 += a0 * dur + 0.5 * jerk * dur ** 2
        a0 += jerk * dur
        t_start += dur
    pos[t_grid >= t_start] = p0
    return sign * pos


def square_loop(ts: float, duration: float, side: float, v_limit: float,
                a_limit: float, j_limit: float,
                dwell: float = 0.05) -> np.ndarray:
    """Back-and-forth strokes of length ``side`` under kinematic limits."""
    if side <= 0:
        raise TrajectoryError("stroke length must be positive")
    stroke = scurve_move(side, v_limit, a_limit, j_limit, ts)
    hold = np.zeros(max(int(round(dwell / ts)), 0))
    n_total = int(np.round(duration / ts))
    if stroke.size > n_total:
        raise TrajectoryError("duration too short for a single stroke")
    pieces: list[np.ndarray] = []
    level = 0.0
    direction = 1.0
    length = 0
    # only complete strokes; the remainder holds position so the trajectory
    # ends at rest
    while length + stroke.size <= n_total:
        move = level + direction * stroke
        pieces.append(move)
        length += move.size
        level = move[-1]
        direction = -direction
        if hold.size and length + hold.size <= n_total:
            pieces.append(level + hold)
            length += hold.size
    pieces.append(np.full(n_total - length, level))
    return np.concatenate(pieces)[:n_total]


def custom_samples(ts: float, duration: float, path: str,
                   source_ts: float | None = None) -> np.ndarray:
    """Load one sample per line and resample to the controller rate."""
    raw = np.loadtxt(path, ndmin=1, dtype=float)
    if raw.ndim > 1:
        raw = raw[:, 0]
    if raw.size < 2:
        raise TrajectoryError("custom trajectory needs at least two samples")
    src_ts = ts if source_ts is None else source_ts
    if src_ts <= 0:
        raise TrajectoryError("source sampling interval must be positive")
    t_src = np.arange(raw.size) * src_ts
    t_out = np.arange(int(round(duration / ts))) * ts
    return np.interp(t_out, t_src, raw)


def generate_trajectory(kind: str, params: dict, ts: float,
                        duration: float) -> np.ndarray:
    """Dispatch on trajectory kind; see the module docstring for units."""
    if ts <= 0 or duration <= 0:
        raise TrajectoryError("ts and duration must be positive")
    params = dict(params)
    try:
        if kind == "sine-scan":
            return sine_scan(ts, duration, **params)
        if kind == "square-loop":
            return square_loop(ts, duration, **params)
        if kind == "custom-samples":
            return custom_samples(ts, duration, **params)
    except TypeError as exc:
        raise TrajectoryError(f"bad parameters for {kind}: {exc}") from exc
    raise TrajectoryError(f"unknown trajectory kind {kind!r}")
