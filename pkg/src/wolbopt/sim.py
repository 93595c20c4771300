"""Trajectory integration, impulsive releases, basin entry, separatrix.

Continuous segments run through scipy's adaptive RK45 (Dormand-Prince
5(4) embedded pair) with dense output.  Impulsive releases are pure jumps
of the infected population between segments: the flow between release
instants is the uncontrolled model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .model import (
    State,
    absorbing_bound,
    equilibria,
    jacobian,
    make_rhs,
)
from .params import StrainParams

STABLE_EIG_TOL = 1e-12


@dataclass(frozen=True)
class SimOptions:
    """Integrator tolerances and sampling controls."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    t_end: float = 400.0
    dense_output_stride: float = 0.25

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dense_output_stride <= 0:
            raise ValueError("dense_output_stride must be positive")


@dataclass(frozen=True)
class Jump:
    time: float
    pre: tuple[float, float]
    post: tuple[float, float]


@dataclass
class Trajectory:
    """Sampled trajectory with explicit jump records.

    ``times`` are strictly increasing sample instants; jump instants
    appear once in ``times`` (post-jump state) and twice in CSV exports
    (pre and post rows).
    """

    times: np.ndarray
    states: np.ndarray  # shape (n, 2)
    jumps: list[Jump] = field(default_factory=list)
    u_applied: Optional[np.ndarray] = None

    @property
    def final_state(self) -> tuple[float, float]:
        return float(self.states[-1, 0]), float(self.states[-1, 1])


@dataclass(frozen=True)
class ImpulseSchedule:
    """Timed instantaneous releases.

    ``rule_tag`` records which construction produced the schedule
    (``daily``, ``aggregate``, ``excess``, ``ga``, or ``manual``).
    """

    entries: tuple[tuple[float, int], ...]
    period_m: int = 1
    rule_tag: str = "manual"

    def __post_init__(self) -> None:
        times = [t for t, _ in self.entries]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("release times must be strictly increasing")
        if any(size < 0 or size != int(size) for _, size in self.entries):
            raise ValueError("release sizes must be nonnegative integers")

    @property
    def total(self) -> int:
        return sum(size for _, size in self.entries)

    @property
    def num_releases(self) -> int:
        return len(self.entries)


ControlLike = Union[None, Callable[[float], float], tuple[np.ndarray, np.ndarray]]


def _control_function(control: ControlLike) -> Callable[[float], float]:
    if control is None:
        return lambda t: 0.0
    if callable(control):
        return control
    times, values = control
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)

    def interp(t: float) -> float:
        if t <= times[0]:
            return float(values[0]) if t == times[0] else 0.0
        if t >= times[-1]:
            return 0.0 if t > times[-1] else float(values[-1])
        return float(np.interp(t, times, values))

    return interp


class IntegrationError(RuntimeError):
    """Integrator failure or tolerance-violating negativity."""


def _solve_segment(
    params: StrainParams,
    state0: tuple[float, float],
    span: tuple[float, float],
    u_fn: Callable[[float], float],
    opts: SimOptions,
):
    rhs = make_rhs(params)

    def f(t, z):
        return rhs(z[0], z[1], u_fn(t))

    sol = solve_ivp(
        f,
        span,
        state0,
        method="RK45",
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=opts.max_step,
        dense_output=True,
    )
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol


def _clamp_nonnegative(states: np.ndarray, abs_tol: float) -> np.ndarray:
    low = states.min()
    if low < -abs_tol * 100.0:
        raise IntegrationError(
            f"negative excursion {low:.3e} exceeds tolerance; integrator misconfigured"
        )
    return np.clip(states, 0.0, None)


def _sample_times(t0: float, t1: float, stride: float) -> np.ndarray:
    n = max(1, int(math.ceil((t1 - t0) / stride)))
    return np.linspace(t0, t1, n + 1)


def integrate(
    params: StrainParams,
    s0: State,
    control: ControlLike,
    span: tuple[float, float],
    opts: SimOptions = SimOptions(),
) -> Trajectory:
    """Integrate the model under a continuous (or zero) control.

    ``control`` may be None (no releases), a callable rate, or a
    ``(times, values)`` grid sampled control with linear interpolation
    and zero extension outside the grid.
    """
    u_fn = _control_function(control)
    sol = _solve_segment(params, (s0.x, s0.y), span, u_fn, opts)
    ts = _sample_times(span[0], span[1], opts.dense_output_stride)
    states = _clamp_nonnegative(sol.sol(ts).T, opts.abs_tol)
    u_vals = np.array([u_fn(t) for t in ts])
    return Trajectory(times=ts, states=states, u_applied=u_vals)


def simulate_impulsive(
    params: StrainParams,
    s0: State,
    sched: ImpulseSchedule,
    opts: SimOptions = SimOptions(),
) -> Trajectory:
    """Integrate with zero control between releases and pure jumps at them.

    Each release instant adds the (integer) release size to the infected
    population exactly and records the pre/post states.
    """
    entries = [(t, size) for t, size in sched.entries if t <= opts.t_end]
    times_out: list[np.ndarray] = []
    states_out: list[np.ndarray] = []
    jumps: list[Jump] = []
    x, y = s0.x, s0.y
    t_cur = 0.0
    u_zero = lambda t: 0.0  # noqa: E731

    for t_rel, size in entries:
        if t_rel > t_cur:
            sol = _solve_segment(params, (x, y), (t_cur, t_rel), u_zero, opts)
            ts = _sample_times(t_cur, t_rel, opts.dense_output_stride)
            seg = _clamp_nonnegative(sol.sol(ts).T, opts.abs_tol)
            times_out.append(ts[:-1])
            states_out.append(seg[:-1])
            x, y = float(seg[-1, 0]), float(seg[-1, 1])
            t_cur = t_rel
        pre = (x, y)
        y += size
        jumps.append(Jump(time=t_rel, pre=pre, post=(x, y)))

    if opts.t_end > t_cur:
        sol = _solve_segment(params, (x, y), (t_cur, opts.t_end), u_zero, opts)
        ts = _sample_times(t_cur, opts.t_end, opts.dense_output_stride)
        seg = _clamp_nonnegative(sol.sol(ts).T, opts.abs_tol)
        times_out.append(ts)
        states_out.append(seg)
    else:
        times_out.append(np.array([t_cur]))
        states_out.append(np.array([[x, y]]))

    times = np.concatenate(times_out)
    states = np.vstack(states_out)
    return Trajectory(times=times, states=states, jumps=jumps)


def first_basin_entry(
    traj: Trajectory, target: tuple[float, float], resolution: float = 1e-6
) -> Optional[float]:
    """Earliest time at which x < x_u and y > y_u both hold strictly.

    Jump records are consulted so that entries caused by a release are
    timed at the release instant.  Between samples the entry time is
    located by bisection on linear interpolants down to ``resolution``
    days; returns None when the trajectory never enters.
    """
    x_u, y_u = target
    times, states = traj.times, traj.states
    inside = (states[:, 0] < x_u) & (states[:, 1] > y_u)
    jump_entries = [
        j.time
        for j in traj.jumps
        if j.post[0] < x_u and j.post[1] > y_u
    ]
    idx = np.nonzero(inside)[0]
    sample_entry = None
    if idx.size:
        i = int(idx[0])
        if i == 0:
            sample_entry = float(times[0])
        else:
            lo_t, hi_t = float(times[i - 1]), float(times[i])
            lo_s, hi_s = states[i - 1], states[i]
            while hi_t - lo_t > resolution:
                mid = 0.5 * (lo_t + hi_t)
                w = (mid - lo_t) / (hi_t - lo_t) if hi_t > lo_t else 0.0
                sx = lo_s[0] + w * (hi_s[0] - lo_s[0])
                sy = lo_s[1] + w * (hi_s[1] - lo_s[1])
                if sx < x_u and sy > y_u:
                    hi_t = mid
                else:
                    lo_t = mid
            sample_entry = hi_t
    candidates = [t for t in (sample_entry, *jump_entries) if t is not None]
    return min(candidates) if candidates else None


def separatrix(
    params: StrainParams,
    opts: SimOptions = SimOptions(),
    offset_scale: float = 1e-4,
    arc_stride: float = 10.0,
) -> np.ndarray:
    """Basin boundary: the stable manifold of the coexistence saddle.

    Traces the manifold backward in time from the saddle, displaced by a
    small multiple of its stable eigenvector in both directions, until
    the curve leaves 1.5x the absorbing box or the positive quadrant.
    The backward field is normalized to unit speed so the polyline is
    sampled uniformly in arc length (``arc_stride`` individuals between
    points) even where the flow is exponentially fast.  Points are
    ordered along the curve and pass through the saddle.
    """
    eq = equilibria(params)
    if eq.eu is None:
        raise ValueError("no coexistence saddle: separatrix undefined")
    saddle = np.array([eq.eu.state.x, eq.eu.state.y])
    jac = jacobian(params, eq.eu.state)
    eigvals, eigvecs = np.linalg.eig(jac)
    re = np.real(eigvals)
    stable_idx = int(np.argmin(re))
    if re[stable_idx] >= -STABLE_EIG_TOL or np.max(re) <= STABLE_EIG_TOL:
        raise ValueError("saddle eigen-structure degenerate; cannot trace separatrix")
    v = np.real(eigvecs[:, stable_idx])
    v = v / np.linalg.norm(v)
    bound = 1.5 * absorbing_bound(params)
    rhs = make_rhs(params)

    def backward_unit(s, z):
        dx, dy = rhs(z[0], z[1], 0.0)
        speed = math.hypot(dx, dy)
        if speed < 1e-14:
            return (0.0, 0.0)
        return (-dx / speed, -dy / speed)

    def leave(s, z):
        return min(z[0], z[1], bound - (z[0] + z[1]))

    leave.terminal = True
    leave.direction = -1.0

    branches = []
    scale = offset_scale * float(np.linalg.norm(saddle))
    s_max = 4.0 * bound
    for sign in (+1.0, -1.0):
        z0 = saddle + sign * scale * v
        sol = solve_ivp(
            backward_unit,
            (0.0, s_max),
            z0,
            method="RK45",
            rtol=opts.rel_tol,
            atol=opts.abs_tol,
            max_step=5.0 * arc_stride,
            dense_output=True,
            events=leave,
        )
        if not sol.success:
            raise IntegrationError(sol.message)
        s_stop = float(sol.t[-1])
        ss = _sample_times(0.0, s_stop, arc_stride)
        branches.append(np.clip(sol.sol(ss).T, 0.0, None))

    plus, minus = branches
    curve = np.vstack([minus[::-1], saddle, plus])
    return curve



def separatrix_height(curve: np.ndarray, x: float) -> float:
    """Interpolated y-value of the separatrix polyline at a given x.

    Uses the branch of the curve around the requested x; raises when the
    curve does not span it.
    """
    xs, ys = curve[:, 0], curve[:, 1]
    if not (xs.min() <= x <= xs.max()):
        raise ValueError(f"x={x} outside separatrix span [{xs.min()}, {xs.max()}]")
    hits = []
    for i in range(len(xs) - 1):
        x0, x1 = xs[i], xs[i + 1]
        if (x0 - x) * (x1 - x) <= 0.0 and x0 != x1:
            w = (x - x0) / (x1 - x0)
            hits.append(ys[i] + w * (ys[i + 1] - ys[i]))
    if not hits:
        raise ValueError(f"separatrix does not cross x={x}")
    return float(np.median(hits))


def phase_field(
    params: StrainParams,
    x_grid: Sequence[float],
    y_grid: Sequence[float],
) -> np.ndarray:
    """Uncontrolled vector field sampled on a grid, as rows (x, y, dx, dy)."""
    rhs = make_rhs(params)
    rows = []
    for x in x_grid:
        for y in y_grid:
            if x < 0 or y < 0:
                raise ValueError("grid must lie in the nonnegative quadrant")
            dx, dy = rhs(float(x), float(y), 0.0)
            rows.append((float(x), float(y), dx, dy))
    return np.array(rows)


def classify_endpoint(
    params: StrainParams,
    s0: State,
    opts: SimOptions = SimOptions(),
) -> str:
    """Run the uncontrolled flow and report which attractor wins.

    Returns ``"ex"`` or ``"es"`` by distance at t_end; used as the
    forward-integration oracle for basin membership.
    """
    eq = equilibria(params)
    traj = integrate(params, s0, None, (0.0, opts.t_end), opts)
    fx, fy = traj.final_state
    d_ex = math.hypot(fx - eq.ex.state.x, fy - eq.ex.state.y)
    if eq.es is None:
        return "ex"
    d_es = math.hypot(fx - eq.es.state.x, fy - eq.es.state.y)
    return "es" if d_es < d_ex else "ex"
