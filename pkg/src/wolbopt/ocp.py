"""Free-terminal-time optimal release problem via the Pontryagin conditions.

Objective: minimize integral of (P + u^2/2) dt subject to the release
model, x(0) = x_sharp, y(0) = 0, terminal condition x(T) = terminal_x,
0 <= u <= L, with T free.  The stationarity system couples the state pair
to two adjoints with lambda2(T) = 0 and the optimal control is the clamp
of lambda2 to [0, L]; the optimal horizon satisfies H(T) = 0.

Solver: forward-backward sweeps on a fixed horizon where the unknown
terminal multiplier mu = lambda1(T) enforces the terminal state.  Because
the adjoint system is linear in its terminal value, each sweep needs one
unit backward pass; the multiplier is then located by a forward-only
secant.  An outer safeguarded secant on T drives H(T) to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import State, equilibria, make_jacobian, make_rhs
from .params import StrainParams


class CapInfeasibleError(RuntimeError):
    """Terminal target unreachable under the release capacity."""


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted before residuals met tolerances."""


@dataclass(frozen=True)
class OCPConfig:
    """Solver configuration.

    ``terminal_x`` defaults to one individual below the saddle abscissa
    (the release stopping target); ``initial_x`` defaults to the wild-only
    equilibrium computed from the parameters.
    """

    cap_l: float
    weight_p: float = 1e6
    terminal_x: Optional[float] = None
    initial_x: Optional[float] = None
    grid_n: int = 2000
    tol_bc: float = 0.5
    tol_h: float = 200.0
    sweep_relaxation: float = 0.5
    max_outer_iterations: int = 100
    t_init: float = 20.0
    max_horizon: float = 400.0

    def __post_init__(self) -> None:
        if self.weight_p <= 0 or self.cap_l <= 0:
            raise ValueError("weight_p and cap_l must be positive")
        if not 0.0 < self.sweep_relaxation <= 1.0:
            raise ValueError("sweep_relaxation must lie in (0, 1]")
        if self.grid_n < 10:
            raise ValueError("grid_n too small")


@dataclass(frozen=True)
class ContinuousControl:
    """Optimal release rate sampled on a uniform grid over [0, t_star]."""

    times: np.ndarray
    values: np.ndarray
    t_star: float
    cap_l: float


@dataclass(frozen=True)
class OCPSolution:
    control: ContinuousControl
    states: np.ndarray     # (n+1, 2)
    adjoints: np.ndarray   # (n+1, 2)
    objective_j: float
    total_released: float
    residuals: dict[str, float]
    converged: bool
    mu: float
    hamiltonian_grid: np.ndarray

    @property
    def state_trajectory(self):
        """The optimal state path as a sim trajectory (with the control
        attached as the applied rate)."""
        from .sim import Trajectory

        return Trajectory(
            times=self.control.times.copy(),
            states=self.states.copy(),
            u_applied=self.control.values.copy(),
        )


def hamiltonian(
    params: StrainParams,
    s: State,
    adj: tuple[float, float],
    u: float,
    weight_p: float,
) -> float:
    """Pontryagin Hamiltonian: -P - u^2/2 + adjoints dotted with the flow."""
    fx, fy = make_rhs(params)(s.x, s.y, 0.0)
    l1, l2 = adj
    return -weight_p - 0.5 * u * u + l1 * fx + l2 * (fy + u)


def adjoint_rhs(
    params: StrainParams,
    s: State,
    adj: tuple[float, float],
) -> tuple[float, float]:
    """Adjoint velocities: minus the transposed Jacobian acting on lambda.

    The running cost carries no state dependence, so no inhomogeneous term
    appears.
    """
    if s.x < 0 or s.y < 0:
        raise ValueError("state must be nonnegative")
    j11, j12, j21, j22 = make_jacobian(params)(s.x, s.y)
    l1, l2 = adj
    return -(j11 * l1 + j21 * l2), -(j12 * l1 + j22 * l2)


def control_from_adjoint(lambda2: float, cap_l: float) -> float:
    """Optimal control characterization: clamp of lambda2 to [0, cap_l]."""
    return min(max(lambda2, 0.0), cap_l)


def objective(control: ContinuousControl, weight_p: float) -> float:
    """Composite trapezoidal quadrature of P + u^2/2 over [0, t_star]."""
    integrand = weight_p + 0.5 * control.values**2
    return float(np.trapezoid(integrand, control.times))


def _forward(rhs, x0: float, u: list[float], h: float) -> tuple[list[float], list[float]]:
    """Fixed-step RK4 with the control linearly interpolated inside steps."""
    n = len(u) - 1
    xs = [0.0] * (n + 1)
    ys = [0.0] * (n + 1)
    xs[0] = x = x0
    ys[0] = y = 0.0
    h2, h6 = 0.5 * h, h / 6.0
    for i in range(n):
        u0, u1 = u[i], u[i + 1]
        um = 0.5 * (u0 + u1)
        k1x, k1y = rhs(x, y, u0)
        k2x, k2y = rhs(x + h2 * k1x, y + h2 * k1y, um)
        k3x, k3y = rhs(x + h2 * k2x, y + h2 * k2y, um)
        k4x, k4y = rhs(x + h * k3x, y + h * k3y, u1)
        x += h6 * (k1x + 2.0 * (k2x + k3x) + k4x)
        y += h6 * (k1y + 2.0 * (k2y + k3y) + k4y)
        xs[i + 1], ys[i + 1] = x, y
    return xs, ys


def _backward_unit(jac, xs: list[float], ys: list[float], h: float) -> tuple[list[float], list[float]]:
    """RK4 for the adjoint system with unit terminal data (1, 0).

    The adjoint ODE is linear, so the solution for lambda1(T) = mu is mu
    times this profile.
    """
    n = len(xs) - 1
    p1 = [0.0] * (n + 1)
    p2 = [0.0] * (n + 1)
    p1[n] = a = 1.0
    b = 0.0
    h2, h6 = 0.5 * h, h / 6.0
    for i in range(n, 0, -1):
        x1, y1 = xs[i], ys[i]
        x0, y0 = xs[i - 1], ys[i - 1]
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        j11, j12, j21, j22 = jac(x1, y1)
        k1a = -(j11 * a + j21 * b)
        k1b = -(j12 * a + j22 * b)
        j11, j12, j21, j22 = jac(xm, ym)
        a2, b2 = a - h2 * k1a, b - h2 * k1b
        k2a = -(j11 * a2 + j21 * b2)
        k2b = -(j12 * a2 + j22 * b2)
        a3, b3 = a - h2 * k2a, b - h2 * k2b
        k3a = -(j11 * a3 + j21 * b3)
        k3b = -(j12 * a3 + j22 * b3)
        j11, j12, j21, j22 = jac(x0, y0)
        a4, b4 = a - h * k3a, b - h * k3b
        k4a = -(j11 * a4 + j21 * b4)
        k4b = -(j12 * a4 + j22 * b4)
        a -= h6 * (k1a + 2.0 * (k2a + k3a) + k4a)
        b -= h6 * (k1b + 2.0 * (k2b + k3b) + k4b)
        p1[i - 1], p2[i - 1] = a, b
    return p1, p2


class _Sweeper:
    """Inner machinery at fixed horizon: states, unit adjoints, multiplier."""

    def __init__(self, params: StrainParams, cfg: OCPConfig, x0: float, x_target: float):
        self.rhs = make_rhs(params)
        self.jac = make_jacobian(params)
        self.cfg = cfg
        self.x0 = x0
        self.x_target = x_target

    def _control(self, mu: float, phi2: list[float]) -> list[float]:
        cap = self.cfg.cap_l
        return [min(max(mu * v, 0.0), cap) for v in phi2]

    def _mu_secant(self, phi2: list[float], h: float, mu_guess: float, xtol: float):
        """Locate mu <= 0 with x(T) = x_target; forward passes only."""

        def resid(mu: float):
            u = self._control(mu, phi2)
            xs, ys = _forward(self.rhs, self.x0, u, h)
            return xs[-1] - self.x_target, u, xs, ys

        hi = 0.0
        r_hi, *_ = resid(hi)
        if r_hi <= 0.0:
            raise CapInfeasibleError(
                "terminal target is crossed with zero control; nothing to optimize"
            )
        lo = mu_guess if mu_guess < -1.0 else -1000.0
        r_lo, u, xs, ys = resid(lo)
        for _ in range(16):
            if r_lo <= 0.0:
                break
            hi, r_hi = lo, r_lo
            lo *= 8.0
            r_lo, u, xs, ys = resid(lo)
        else:
            raise CapInfeasibleError("terminal target unreachable under cap_l")
        a, ra, b, rb = lo, r_lo, hi, r_hi
        m, u_m, xs_m, ys_m = a, u, xs, ys
        for _ in range(80):
            m = b - rb * (b - a) / (rb - ra) if rb != ra else 0.5 * (a + b)
            if not a < m < b:
                m = 0.5 * (a + b)
            rm, u_m, xs_m, ys_m = resid(m)
            if abs(rm) < xtol:
                break
            if rm < 0.0:
                a, ra = m, rm
            else:
                b, rb = m, rm
        return m, u_m, xs_m, ys_m

    def converge(
        self,
        T: float,
        u: list[float],
        mu: float,
        max_sweeps: int = 120,
        du_tol_rel: float = 1e-4,
    ):
        n = self.cfg.grid_n
        h = T / n
        alpha = self.cfg.sweep_relaxation
        u = list(u)  # an infeasible horizon must not poison the caller's warm start
        du = math.inf
        # The multiplier tolerance sets the sweep noise floor; keep it a
        # fraction of the control tolerance being asked for.
        xtol = max(0.2 * du_tol_rel * self.cfg.cap_l, 1e-6)
        for sweep in range(max_sweeps):
            xs, ys = _forward(self.rhs, self.x0, u, h)
            phi1, phi2 = _backward_unit(self.jac, xs, ys, h)
            mu, u_star, xs, ys = self._mu_secant(phi2, h, mu, xtol)
            du = max(abs(a - b) for a, b in zip(u_star, u))
            if du < du_tol_rel * self.cfg.cap_l:
                u = u_star
                break
            for i in range(len(u)):
                u[i] += alpha * (u_star[i] - u[i])
        xs, ys = _forward(self.rhs, self.x0, u, h)
        phi1, phi2 = _backward_unit(self.jac, xs, ys, h)
        l1 = [mu * v for v in phi1]
        l2 = [mu * v for v in phi2]
        fx, fy = self.rhs(xs[-1], ys[-1], 0.0)
        u_T = min(max(l2[-1], 0.0), self.cfg.cap_l)
        h_T = -self.cfg.weight_p - 0.5 * u_T * u_T + l1[-1] * fx + l2[-1] * (fy + u_T)
        return dict(
            u=u, xs=xs, ys=ys, l1=l1, l2=l2, mu=mu, h=h,
            h_terminal=h_T, x_terminal=xs[-1], sweep_delta=du, sweeps=sweep + 1,
        )


def solve(params: StrainParams, cfg: OCPConfig) -> OCPSolution:
    """Solve the free-time problem; see module docstring for the contract.

    Raises:
        CapInfeasibleError: target unreachable at the capacity for every
            horizon tried (cap_l too small).
        NonConvergenceError: outer iteration budget exhausted with
            residuals above tolerances.
    """
    eq = equilibria(params)
    if eq.eu is None:
        raise ValueError("no coexistence equilibria; the release target is undefined")
    x_target = cfg.terminal_x if cfg.terminal_x is not None else eq.eu.state.x - 1.0
    x0 = cfg.initial_x if cfg.initial_x is not None else eq.ex.state.x
    if not 0.0 < x_target < x0:
        raise ValueError("terminal_x must lie strictly between 0 and the initial state")

    sweeper = _Sweeper(params, cfg, x0, x_target)
    n = cfg.grid_n
    u = [cfg.cap_l / 2.0] * (n + 1)
    mu = -1000.0
    evals = 0

    def H_at(T: float, tight: bool = False):
        nonlocal u, mu, evals
        evals += 1
        u_snap, mu_snap = list(u), mu
        kwargs = dict(max_sweeps=300, du_tol_rel=2e-5) if tight else {}
        try:
            out = sweeper.converge(T, u, mu, **kwargs)
        except CapInfeasibleError:
            u, mu = u_snap, mu_snap
            raise
        u, mu = out["u"], out["mu"]
        return out

    # Bracket H(T) = 0: H > 0 means the horizon is too short; an
    # infeasible horizon counts as "H > 0" without a value.
    lo_T = hi_T = None
    lo_out = hi_out = None
    T_cur = cfg.t_init
    last_infeasible = None
    while evals < cfg.max_outer_iterations:
        if T_cur > cfg.max_horizon:
            raise CapInfeasibleError(
                f"no optimal horizon up to {cfg.max_horizon} days; cap_l too small"
            )
        try:
            out = H_at(T_cur)
        except CapInfeasibleError as err:
            last_infeasible = err
            if hi_T is not None and hi_T - T_cur < 1e-9:
                raise
            lo_T, lo_out = T_cur, None
            T_cur = T_cur * 1.3 if hi_T is None else 0.5 * (T_cur + hi_T)
            continue
        if out["h_terminal"] > 0.0:
            lo_T, lo_out = T_cur, out
            T_cur = 0.5 * (T_cur + hi_T) if hi_T is not None else T_cur * 1.2
        else:
            hi_T, hi_out = T_cur, out
            if lo_T is not None:
                break
            T_cur *= 0.85
        if lo_T is not None and hi_T is not None:
            break
    if hi_T is None or lo_T is None:
        raise (last_infeasible or NonConvergenceError("failed to bracket the optimal horizon"))

    # Safeguarded secant on H(T) within [lo_T, hi_T], finishing with
    # tight inner tolerances once close (the Hamiltonian noise floor
    # tracks the sweep tolerance).
    best = None
    a, b = lo_T, hi_T
    ra = lo_out["h_terminal"] if lo_out is not None else None
    rb = hi_out["h_terminal"]
    T = b
    tight = False
    while evals < cfg.max_outer_iterations:
        if ra is not None and ra != rb:
            m = b - rb * (b - a) / (rb - ra)
        else:
            m = 0.5 * (a + b)
        if not a < m < b:
            m = 0.5 * (a + b)
        try:
            out = H_at(m, tight=tight)
        except CapInfeasibleError:
            a, ra = m, None
            continue
        r_m = out["h_terminal"]
        if tight:
            best, T = out, m
            if abs(r_m) <= 0.5 * cfg.tol_h:
                break
        if not tight and (abs(r_m) <= 2.0 * cfg.tol_h or b - a < 1e-4 * b):
            tight = True  # re-evaluate near the root at tight tolerance
        if r_m > 0.0:
            a, ra = m, r_m
        else:
            b, rb = m, r_m
        if b - a < 1e-9 * max(b, 1.0) and best is not None:
            break
    if best is None:
        best = H_at(0.5 * (a + b), tight=True)
        T = 0.5 * (a + b)

    out = best
    times = np.linspace(0.0, T, n + 1)
    values = np.array(out["u"])
    states = np.column_stack([out["xs"], out["ys"]])
    adjoints = np.column_stack([out["l1"], out["l2"]])
    control = ContinuousControl(times=times, values=values, t_star=T, cap_l=cfg.cap_l)

    p = cfg.weight_p
    fx, fy = np.empty(n + 1), np.empty(n + 1)
    rhs = make_rhs(params)
    for i in range(n + 1):
        fx[i], fy[i] = rhs(states[i, 0], states[i, 1], 0.0)
    h_grid = -p - 0.5 * values**2 + adjoints[:, 0] * fx + adjoints[:, 1] * (fy + values)

    clamp_gap = float(np.max(np.abs(values - np.clip(adjoints[:, 1], 0.0, cfg.cap_l))))
    residuals = {
        "boundary": abs(out["x_terminal"] - x_target),
        "hamiltonian": abs(out["h_terminal"]),
        "sweep": out["sweep_delta"],
        "clamp": clamp_gap,
    }
    converged = (
        residuals["boundary"] <= cfg.tol_bc
        and residuals["hamiltonian"] <= cfg.tol_h
        and residuals["clamp"] <= cfg.tol_bc
    )
    if not converged and evals >= cfg.max_outer_iterations:
        raise NonConvergenceError(
            f"outer iteration budget exhausted; residuals {residuals}"
        )
    return OCPSolution(
        control=control,
        states=states,
        adjoints=adjoints,
        objective_j=objective(control, p),
        total_released=float(np.trapezoid(values, times)),
        residuals=residuals,
        converged=converged,
        mu=out["mu"],
        hamiltonian_grid=h_grid,
    )
