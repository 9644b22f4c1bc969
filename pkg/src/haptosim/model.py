"""Time integration of the coupled cell/chemical/matrix system

    u_t = Lap u - chi div(u grad v) - xi div(u grad w)
    tau v_t = Lap v - v + u          (tau = 0: elliptic, tau = 1: parabolic)
    w_t = -v w + eta w (1 - w)

with no-flux boundary data.  One step advances v (elliptic solve or
backward Euler), then w by its exact solution formula driven by the
trapezoid-accumulated time integral of v, then u by IMEX: implicit
diffusion plus explicit first-order upwind taxis advection under a CFL
restriction.  The w formula makes 0 <= w <= max(1, sup w0) structural;
cell positivity and exact mass conservation of u are restored after the
linear solve at solver-error scale (clip + conservative rescale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domain import Field, FluxField, Grid, integrate
from .linsolve import helmholtz_solve, implicit_diffusion_solve, implicit_heat_solve

MODES = ("full", "chemotaxis_only", "haptotaxis_only")

# exponent clip keeping exp() finite; never binds at desk scale
_EXP_MAX = 700.0


class ModelError(ValueError):
    pass


class CFLError(RuntimeError):
    """Explicit advection would lose positivity even after dt backoff."""


@dataclass(frozen=True)
class Params:
    chi: float
    xi: float
    eta: float
    tau: int
    mode: str = "full"

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ModelError("; ".join(problems))

    def validate(self):
        problems = []
        if self.chi < 0:
            problems.append(f"chi must be >= 0, got {self.chi}")
        if self.xi < 0:
            problems.append(f"xi must be >= 0, got {self.xi}")
        if self.eta < 0:
            problems.append(f"eta must be >= 0, got {self.eta}")
        if self.tau not in (0, 1):
            problems.append(f"tau must be 0 or 1, got {self.tau}")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "haptotaxis_only" and self.chi != 0:
            problems.append(f"haptotaxis_only mode requires chi = 0, got {self.chi}")
        return problems


@dataclass(frozen=True)
class StepControl:
    dt_max: float
    dt_min: float = 1e-12
    cfl: float = 0.4
    solver_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ModelError(f"cfl must be in (0,1), got {self.cfl}")
        if not self.dt_min < self.dt_max:
            raise ModelError(f"need dt_min < dt_max, got {self.dt_min} >= {self.dt_max}")


@dataclass
class State:
    """Solution triple at time t plus the accumulated integrals that feed
    the exact w formula.

    v_accum holds I(x,t) = int_0^t v dr (trapezoid), w_decay holds
    exp(eta t - I), and w_denom_accum holds int_0^t exp(eta s - I(x,s)) ds.
    """

    t: float
    u: Field
    v: Field
    w: Field
    v_accum: Field
    w_denom_accum: Field
    w_decay: Field
    w0: Field
    k_cap: float
    target_mass: float

    @property
    def grid(self) -> Grid:
        return self.u.grid


def initial_state(u0: Field, w0: Field, params: Params, v0: Field | None = None,
                  solver_tol: float = 1e-10) -> State:
    grid = u0.grid
    if np.any(u0.values < 0):
        raise ModelError("u0 must be nonnegative")
    if integrate(u0) <= 0:
        raise ModelError("u0 must carry positive mass")
    if np.any(w0.values < 0):
        raise ModelError("w0 must be nonnegative")

    if params.mode == "chemotaxis_only":
        w0 = grid.zeros()

    if params.tau == 0:
        v, _ = helmholtz_solve(u0, tol=solver_tol)
        v.values[v.values < 0] = 0.0
    else:
        if v0 is None:
            raise ModelError("tau = 1 requires initial chemical field v0")
        if np.any(v0.values < 0):
            raise ModelError("v0 must be nonnegative")
        v = v0.copy()

    return State(
        t=0.0,
        u=u0.copy(),
        v=v,
        w=w0.copy(),
        v_accum=grid.zeros(),
        w_denom_accum=grid.zeros(),
        w_decay=grid.full(1.0),
        w0=w0.copy(),
        k_cap=max(1.0, float(w0.values.max())),
        target_mass=integrate(u0),
    )


def advective_flux(u: Field, potential_grad: FluxField) -> FluxField:
    """First-order upwind taxis flux u_donor * grad(potential) on faces.

    Boundary faces stay zero, so the explicit update conserves mass by
    telescoping; positivity holds under the CFL restriction.
    """
    g = u.grid
    out = FluxField(g)
    vx = potential_grad.fx[:, 1:-1]
    vy = potential_grad.fy[1:-1, :]
    out.fx[:, 1:-1] = np.where(vx > 0.0, u.values[:, :-1], u.values[:, 1:]) * vx
    out.fy[1:-1, :] = np.where(vy > 0.0, u.values[:-1, :], u.values[1:, :]) * vy
    return out


def w_exact_update(state: State, params: Params, dt: float, v_new: Field | None = None):
    """Advance the matrix field over [t, t+dt] by the closed-form solution

        w = w0 exp(-int_0^t (v - eta)) / (1 + eta w0 int_0^t exp(-int_0^s (v - eta)))

    with both time integrals extended by the trapezoid rule using the
    chemical field at the step endpoints.  Returns the new
    (w, v_accum, w_denom_accum, w_decay) tuple; the caller owns state
    replacement.  Output lies in [0, max(1, sup w0)].
    """
    if v_new is None:
        v_new = state.v
    eta = params.eta
    t_new = state.t + dt
    iv = state.v_accum.values + 0.5 * dt * (state.v.values + v_new.values)
    exponent = np.clip(eta * t_new - iv, -_EXP_MAX, _EXP_MAX)
    decay = np.exp(exponent)
    denom = state.w_denom_accum.values + 0.5 * dt * (state.w_decay.values + decay)
    w0v = state.w0.values
    w = w0v * decay / (1.0 + eta * w0v * denom)
    g = state.grid
    return Field(g, w), Field(g, iv), Field(g, denom), Field(g, decay)


def cfl_dt(state: State, params: Params, control: StepControl) -> float:
    """Largest admissible advective step from the current potentials."""
    p = params.chi * state.v.values + params.xi * state.w.values
    sx, sy = _kernels.max_face_speeds(p, state.grid.hx, state.grid.hy)
    speed = sx / state.grid.hx + sy / state.grid.hy
    if speed <= 0.0:
        return control.dt_max
    return min(control.dt_max, control.cfl / speed)


def step(state: State, params: Params, control: StepControl,
         dt_cap: float | None = None, dt_forced: float | None = None):
    """One operator-split step: v first, then w, then u with the freshest
    potentials.  Returns (new_state, dt_used).

    dt_forced bypasses the CFL choice (used by the lockstep comparison,
    which imposes the coupled run's schedule); a positivity failure is then
    an error instead of a retry."""
    grid = state.grid
    if dt_forced is not None:
        new_state = _substeps(state, params, control, dt_forced, grid)
        if new_state is None:
            raise CFLError(f"positivity lost at forced dt = {dt_forced}")
        return new_state, dt_forced

    dt = cfl_dt(state, params, control)
    if dt_cap is not None:
        dt = min(dt, dt_cap)
    dt = max(dt, 1e-300)

    for _ in range(6):
        new_state = _substeps(state, params, control, dt, grid)
        if new_state is not None:
            return new_state, dt
        dt *= 0.5
    raise CFLError(f"positivity lost at t = {state.t} even at dt = {dt}")


def _substeps(state: State, params: Params, control: StepControl, dt, grid):
    tol = control.solver_tol

    # (1) chemical field
    if params.tau == 0:
        v_new, _ = helmholtz_solve(state.u, tol=tol, x0=state.v)
    else:
        rhs = Field(grid, state.v.values + dt * state.u.values)
        v_new, _ = implicit_heat_solve(rhs, dt, tol=tol, x0=state.v)
    v_new.values[v_new.values < 0] = 0.0

    # (2)+(3) accumulators and exact matrix update
    w_new, iv, denom, decay = w_exact_update(state, params, dt, v_new)

    # (4) cell density: explicit upwind advection + implicit diffusion
    p = params.chi * v_new.values + params.xi * w_new.values
    adv = np.empty(grid.shape)
    _kernels.upwind_divergence(state.u.values, p, grid.hx, grid.hy, adv)
    rhs_u = state.u.values - dt * adv
    if rhs_u.min() < -1e-9 * max(state.u.values.max(), 1.0):
        return None  # CFL breach: caller retries with smaller dt
    u_new, _ = implicit_diffusion_solve(Field(grid, rhs_u), dt, tol=tol, x0=state.u)
    uv = u_new.values
    uv[uv < 0] = 0.0
    total = uv.sum() * grid.cell_area
    if total > 0:
        uv *= state.target_mass / total

    return State(
        t=state.t + dt,
        u=u_new,
        v=v_new,
        w=w_new,
        v_accum=iv,
        w_denom_accum=denom,
        w_decay=decay,
        w0=state.w0,
        k_cap=state.k_cap,
        target_mass=state.target_mass,
    )


@dataclass
class RunResult:
    state: State
    status: str  # "completed" | "blowup"
    reason: str | None
    steps: int


def run(state0: State, params: Params, control: StepControl, t_end: float,
        observers=(), detector=None) -> RunResult:
    """March to t_end, invoking observers after every step; stops early
    with status "blowup" when the detector fires or dt collapses below
    dt_min."""
    if t_end < state0.t:
        raise ModelError(f"t_end = {t_end} precedes state time {state0.t}")
    state = state0
    steps = 0
    for obs in observers:
        obs(state, 0.0)
    eps_t = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - eps_t:
        remaining = t_end - state.t
        state, dt_used = step(state, params, control, dt_cap=remaining)
        steps += 1
        for obs in observers:
            obs(state, dt_used)
        # a short landing step onto t_end is not a collapse
        if dt_used < control.dt_min and remaining > control.dt_min:
            return RunResult(state, "blowup", f"dt collapsed to {dt_used:.3e}", steps)
        if detector is not None:
            reason = detector(state, dt_used)
            if reason:
                return RunResult(state, "blowup", reason, steps)
    return RunResult(state, "completed", None, steps)
