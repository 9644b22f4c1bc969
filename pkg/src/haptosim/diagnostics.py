"""Trajectory functionals, rate fitting, bound checking and blow-up
detection.

The energy functional

    F(u,v,w) = int u ln u - chi int uv - xi int uw + chi/2 int (v^2 + |grad v|^2)

decomposes as F = F_ks - xi int uw, where F_ks is the Lyapunov functional
of the chemotaxis-only system.  Along exact solutions F obeys the balance

    F'(t) + tau chi int v_t^2 + int u |grad(ln u - chi v - xi w)|^2
        = xi int uvw + eta xi int uw(w-1),

whose discrete mismatch (dissipation_residual) is tracked as an accuracy
diagnostic of order O(dt + h^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import constants as _constants
from .domain import (
    Field,
    entropy_l1,
    grad_norm_linf,
    grad_sq_integral,
    integrate,
    norm_l1,
    norm_linf,
    pairing,
    xlogx,
)
from .initdata import BlowupFamilySpec, family_inf_v, translate_v
from .model import Params, State


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# energies

def ks_free_energy(u: Field, v: Field, chi: float) -> float:
    """Chemotaxis-only functional F_ks(u, v)."""
    return (
        xlogx(u)
        - chi * pairing(u, v)
        + 0.5 * chi * (pairing(v, v) + grad_sq_integral(v))
    )


def free_energy(u: Field, v: Field, w: Field, params: Params) -> float:
    """Full functional F = F_ks - xi int uw."""
    return ks_free_energy(u, v, params.chi) - params.xi * pairing(u, w)


def _entropy_dissipation(u: Field, v: Field, w: Field, params: Params) -> float:
    """int u |grad(ln u - chi v - xi w)|^2 via face-centered differences;
    faces touching a cell with u <= 0 contribute 0."""
    g = u.grid
    uv = u.values
    positive = uv > 0
    phi = np.zeros_like(uv)
    phi[positive] = np.log(uv[positive])
    phi -= params.chi * v.values + params.xi * w.values

    total = 0.0
    dx = (phi[:, 1:] - phi[:, :-1]) / g.hx
    ux = 0.5 * (uv[:, 1:] + uv[:, :-1])
    okx = positive[:, 1:] & positive[:, :-1]
    total += float(np.sum(np.where(okx, ux * dx * dx, 0.0)))
    dy = (phi[1:, :] - phi[:-1, :]) / g.hy
    uy = 0.5 * (uv[1:, :] + uv[:-1, :])
    oky = positive[1:, :] & positive[:-1, :]
    total += float(np.sum(np.where(oky, uy * dy * dy, 0.0)))
    return total * g.cell_area


def dissipation_residual(prev: State, next_: State, params: Params) -> float:
    """Absolute mismatch of the energy balance across one step, with all
    integrals evaluated at the midpoint state.  Expected O(dt + h^2)."""
    dt = next_.t - prev.t
    if not dt > 0:
        raise ValueError("states must be one step apart in time")
    g = prev.grid
    mid = lambda a, b: Field(g, 0.5 * (a.values + b.values))
    um, vm, wm = mid(prev.u, next_.u), mid(prev.v, next_.v), mid(prev.w, next_.w)

    df_dt = (
        free_energy(next_.u, next_.v, next_.w, params)
        - free_energy(prev.u, prev.v, prev.w, params)
    ) / dt
    vt = Field(g, (next_.v.values - prev.v.values) / dt)
    balance = (
        df_dt
        + params.tau * params.chi * pairing(vt, vt)
        + _entropy_dissipation(um, vm, wm, params)
        - params.xi * float(np.sum(um.values * vm.values * wm.values)) * g.cell_area
        - params.eta
        * params.xi
        * float(np.sum(um.values * wm.values * (wm.values - 1.0)))
        * g.cell_area
    )
    return abs(balance)


# ---------------------------------------------------------------------------
# decay-rate fitting

@dataclass(frozen=True)
class RateFit:
    rate: float
    r2: float
    window: tuple[float, float]
    samples: int


def fit_decay_rate(times, values, window) -> RateFit:
    """Least-squares slope of ln(value) against t inside the window,
    negated, with the coefficient of determination of the fit."""
    ta, tb = window
    if not ta < tb:
        raise ValueError(f"bad window {window}")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = (t >= ta) & (t <= tb)
    t, v = t[mask], v[mask]
    if t.size < 5:
        raise InsufficientDataError(
            f"only {t.size} samples in window [{ta}, {tb}]; need at least 5"
        )
    if np.any(v <= 0):
        raise ValueError("decay fitting needs strictly positive values")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(rate=-float(slope), r2=r2, window=(ta, tb), samples=int(t.size))


# ---------------------------------------------------------------------------
# per-trajectory records

CSV_HEADER = (
    "t,mass_u,l1_v,linf_u,linf_v,linf_w,linf_grad_w,l1_uv,l1_ulnu,"
    "F,F_ks,dissipation_residual,dt,blowup"
)


@dataclass
class DiagRecord:
    t: float
    mass_u: float
    l1_v: float
    linf_u: float
    linf_v: float
    linf_w: float
    linf_grad_w: float
    l1_uv: float
    l1_ulnu: float
    F: float
    F_ks: float
    dissipation_residual: float
    dt: float
    blowup: bool

    def csv_row(self) -> str:
        parts = []
        for f in dc_fields(self):
            val = getattr(self, f.name)
            parts.append(("1" if val else "0") if f.name == "blowup" else repr(float(val)))
        return ",".join(parts)


def measure(state: State, params: Params, dt_used: float, prev: State | None = None,
            blowup: bool = False) -> DiagRecord:
    resid = 0.0
    if prev is not None and state.t > prev.t:
        resid = dissipation_residual(prev, state, params)
    return DiagRecord(
        t=state.t,
        mass_u=integrate(state.u),
        l1_v=norm_l1(state.v),
        linf_u=norm_linf(state.u),
        linf_v=norm_linf(state.v),
        linf_w=norm_linf(state.w),
        linf_grad_w=grad_norm_linf(state.w),
        l1_uv=pairing(state.u, state.v),
        l1_ulnu=entropy_l1(state.u),
        F=free_energy(state.u, state.v, state.w, params),
        F_ks=ks_free_energy(state.u, state.v, params.chi),
        dissipation_residual=resid,
        dt=dt_used,
        blowup=blowup,
    )


class Recorder:
    """Observer that appends a DiagRecord whenever the trajectory crosses
    the next observation time (always records the initial state)."""

    def __init__(self, params: Params, every: float):
        if not every > 0:
            raise ValueError(f"observation interval must be positive, got {every}")
        self.params = params
        self.every = every
        self.records: list[DiagRecord] = []
        self._prev_state: State | None = None
        self._next_t = 0.0

    def __call__(self, state: State, dt_used: float):
        if state.t >= self._next_t - 1e-12 * max(1.0, state.t):
            self.records.append(
                measure(state, self.params, dt_used, prev=self._prev_state)
            )
            while self._next_t <= state.t + 1e-12 * max(1.0, state.t):
                self._next_t += self.every
        self._prev_state = state

    def mark_blowup(self, state: State, dt_used: float):
        """Append a final flagged record (after the detector fired)."""
        self.records.append(
            measure(state, self.params, dt_used, prev=self._prev_state, blowup=True)
        )

    def finalize(self, state: State, dt_used: float):
        if not self.records or self.records[-1].t < state.t:
            self.records.append(
                measure(state, self.params, dt_used, prev=self._prev_state)
            )

    def series(self, column: str):
        return (
            [r.t for r in self.records],
            [getattr(r, column) for r in self.records],
        )

    def write_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in self.records:
                fh.write(r.csv_row() + "\n")


# ---------------------------------------------------------------------------
# blow-up detection and the concentrating-family bound check

class BlowupDetector:
    """Fires when ||u||_inf exceeds `multiplier` times its initial value.
    (Time-step collapse below dt_min is flagged by the run loop itself.)"""

    def __init__(self, initial_linf_u: float, multiplier: float = 1e4):
        self.threshold = multiplier * initial_linf_u

    def __call__(self, state: State, dt_used: float):
        peak = norm_linf(state.u)
        if peak > self.threshold:
            return f"linf_u = {peak:.6g} exceeded threshold {self.threshold:.6g}"
        return None


class FamilyTracker:
    """Observer recording the translated-field pairings needed by the
    supercritical bound check: int U (V)^+, plus running suprema."""

    def __init__(self, spec: BlowupFamilySpec, grid):
        self.spec = spec
        self.inf_v = family_inf_v(grid, spec)
        self.grid = grid
        self.times: list[float] = []
        self.uv_pos: list[float] = []
        self.sup_uv_pos = 0.0
        self.sup_linf_u = 0.0
        self.sup_linf_v = 0.0
        self.sup_l1_uv = 0.0

    def __call__(self, state: State, dt_used: float):
        shifted = translate_v(state.v, state.t, self.grid, self.spec, self.inf_v)
        vpos = np.maximum(shifted.values, 0.0)
        uvp = float(np.sum(state.u.values * vpos)) * self.grid.cell_area
        self.times.append(state.t)
        self.uv_pos.append(uvp)
        self.sup_uv_pos = max(self.sup_uv_pos, uvp)
        self.sup_linf_u = max(self.sup_linf_u, norm_linf(state.u))
        self.sup_linf_v = max(self.sup_linf_v, norm_linf(state.v))
        self.sup_l1_uv = max(self.sup_l1_uv, pairing(state.u, state.v))


@dataclass
class BlowupBoundReport:
    applicable: bool
    note: str
    verdict: str | None = None  # "A" (blow-up) or "B" (bounded but large)
    consistent: bool | None = None
    sup_uv_pos: float = math.nan
    sup_linf_u: float = math.nan
    sup_linf_v: float = math.nan
    sup_l1_uv: float = math.nan
    bound_uv: float = math.nan
    bound_norms: float = math.nan


def blowup_bound_check(tracker: FamilyTracker, params: Params, k_cap: float,
                       diam: float, blowup_fired: bool) -> BlowupBoundReport:
    """Compare observed suprema of a concentrating-family run against the
    explicit lower bounds (scaled by ln(1/eps)); decide which alternative
    the run exhibited."""
    spec = tracker.spec
    if spec.m * params.chi <= 4.0 * math.pi:
        return BlowupBoundReport(
            applicable=False,
            note=f"m*chi = {spec.m * params.chi:.6g} <= 4*pi: subcritical, check skipped",
        )
    log_factor = math.log(1.0 / spec.eps)
    verdict = "A" if blowup_fired else "B"
    try:
        per_uv = _constants.blowup_lower_bound(
            spec.m, params.chi, params.xi, params.eta, k_cap, diam
        )
        per_norms = _constants.blowup_lower_bound(
            spec.m, params.chi, params.xi, params.eta, k_cap, diam, per_mass=True
        )
    except _constants.BlowupForced:
        return BlowupBoundReport(
            applicable=True,
            note="xi = 0: bound is infinite, only alternative (A) is consistent",
            verdict=verdict,
            consistent=blowup_fired,
            sup_uv_pos=tracker.sup_uv_pos,
            sup_linf_u=tracker.sup_linf_u,
            sup_linf_v=tracker.sup_linf_v,
            sup_l1_uv=tracker.sup_l1_uv,
            bound_uv=math.inf,
            bound_norms=math.inf,
        )
    bound_uv = per_uv * log_factor
    bound_norms = per_norms * log_factor
    if blowup_fired:
        consistent = True
        note = "blow-up signal fired: alternative (A)"
    else:
        consistent = tracker.sup_uv_pos >= bound_uv and min(
            tracker.sup_linf_u, tracker.sup_linf_v
        ) >= bound_norms
        note = "bounded run: alternative (B), suprema vs explicit bound"
    return BlowupBoundReport(
        applicable=True,
        note=note,
        verdict=verdict,
        consistent=consistent,
        sup_uv_pos=tracker.sup_uv_pos,
        sup_linf_u=tracker.sup_linf_u,
        sup_linf_v=tracker.sup_linf_v,
        sup_l1_uv=tracker.sup_l1_uv,
        bound_uv=bound_uv,
        bound_norms=bound_norms,
    )
