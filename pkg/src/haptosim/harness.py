"""Scenario configuration, runners and the parameter sweep.

Scenarios are flat `key = value` text files (``#`` starts a comment).
Unknown keys are rejected; semantic validation reports every violated
constraint at once.  `run_scenario` produces the diagnostics CSV, periodic
binary snapshots, optional PGM heatmaps and a flat-text summary printed
with 17 significant digits so reruns are bit-comparable.  `compare_runner`
marches the full system and the chemotaxis-only system in lockstep (the
coupled run's dt schedule is forced onto both) and fits the exponential
approach between them.  `sweep` grids over (m, chi, xi, eta, eps) and
tabulates verdicts next to the closed-form threshold constants.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import constants as consts
from . import diagnostics as diag
from . import initdata, model
from .domain import (
    DomainError,
    DomainSpec,
    Field,
    Grid,
    integrate,
    norm_linf,
    read_snapshot,
    write_pgm,
    write_snapshot,
)
from .linsolve import LinearSolverError


class ConfigError(ValueError):
    pass


def preset_path(name: str) -> str:
    """Absolute path of a shipped preset config (e.g. 'b1_subcritical.cfg')."""
    from importlib import resources

    path = resources.files("haptosim").joinpath("presets", name)
    if not path.is_file():
        shipped = sorted(p.name for p in resources.files("haptosim").joinpath("presets").iterdir())
        raise ConfigError(f"no preset {name!r}; shipped presets: {', '.join(shipped)}")
    return str(path)


_STR_KEYS = {"mode", "init.kind", "expect", "output_dir", "name",
             "init.u_file", "init.v_file", "init.w_file"}
_INT_KEYS = {"nx", "ny", "tau"}
_BOOL_KEYS = {"pgm"}
_FLOAT_KEYS = {
    "lx", "ly", "chi", "xi", "eta", "t_end", "cfl", "dt_max", "dt_min",
    "observe_every", "snapshot_every", "blowup_threshold",
    "init.mass", "init.center_x", "init.center_y", "init.radius",
    "init.eps", "init.x0_x", "init.x0_y", "init.w0", "init.v0",
    "compare.window_start", "compare.window_end",
}
_LIST_KEYS = {"sweep.m", "sweep.chi", "sweep.xi", "sweep.eta", "sweep.eps"}
KNOWN_KEYS = _STR_KEYS | _INT_KEYS | _BOOL_KEYS | _FLOAT_KEYS | _LIST_KEYS

REQUIRED_KEYS = ("lx", "ly", "nx", "ny", "chi", "xi", "eta", "tau", "t_end",
                 "init.kind")

_DEFAULTS = {
    "mode": "full",
    "expect": "none",
    "output_dir": "out",
    "cfl": 0.4,
    "dt_max": 1e-3,
    "dt_min": 1e-10,
    "observe_every": 0.1,
    "snapshot_every": 0.0,
    "blowup_threshold": 1e4,
    "pgm": False,
    "init.w0": 0.5,
    "init.v0": 0.0,
    "compare.window_start": 1.0,
    "compare.window_end": 4.0,
}


@dataclass
class InitSpec:
    kind: str  # bump | blowup | snapshot
    mass: float = math.nan
    center: tuple[float, float] = (math.nan, math.nan)
    radius: float = math.nan
    eps: float = math.nan
    x0: tuple[float, float] = (0.0, 0.0)
    w0_const: float = 0.5
    v0_const: float = 0.0
    u_file: str = ""
    v_file: str = ""
    w_file: str = ""


@dataclass
class Scenario:
    name: str
    params: model.Params
    grid: Grid
    control: model.StepControl
    init: InitSpec
    t_end: float
    observe_every: float
    snapshot_every: float
    output_dir: str
    expect: str
    blowup_threshold: float
    pgm: bool
    compare_window: tuple[float, float]
    sweep_lists: dict
    base_dir: str

    def kernel_constants(self, mass: float | None = None) -> consts.KernelConstants:
        m = self.init.mass if mass is None else mass
        return consts.KernelConstants.derive(m, self.params.eta, self.grid.domain)


def _parse_kv(path):
    values, problems = {}, []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {lineno}: expected `key = value`, got {raw.strip()!r}")
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in KNOWN_KEYS:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            if key in values:
                problems.append(f"line {lineno}: duplicate key {key!r}")
                continue
            try:
                if key in _INT_KEYS:
                    values[key] = int(val)
                elif key in _FLOAT_KEYS:
                    values[key] = float(val)
                elif key in _BOOL_KEYS:
                    if val.lower() not in ("0", "1", "true", "false", "yes", "no"):
                        raise ValueError(val)
                    values[key] = val.lower() in ("1", "true", "yes")
                elif key in _LIST_KEYS:
                    values[key] = [float(x) for x in val.split(",") if x.strip()]
                else:
                    values[key] = val
            except ValueError:
                problems.append(f"line {lineno}: cannot parse value {val!r} for {key!r}")
    return values, problems


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; raises ConfigError listing every
    problem found."""
    values, problems = _parse_kv(path)

    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))
    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))

    get = lambda k: values.get(k, _DEFAULTS.get(k))
    problems = []

    mode = get("mode")
    pp = dict(chi=values["chi"], xi=values["xi"], eta=values["eta"],
              tau=values["tau"], mode=mode)
    try:
        params = model.Params(**pp)
    except model.ModelError as exc:
        problems.append(str(exc))
        params = None

    grid = None
    try:
        grid = Grid(values["nx"], values["ny"], DomainSpec(values["lx"], values["ly"]))
    except DomainError as exc:
        problems.append(str(exc))

    control = None
    try:
        control = model.StepControl(
            dt_max=get("dt_max"), dt_min=get("dt_min"), cfl=get("cfl")
        )
    except model.ModelError as exc:
        problems.append(str(exc))

    if values["t_end"] < 0:
        problems.append(f"t_end must be >= 0, got {values['t_end']}")
    if get("observe_every") <= 0:
        problems.append(f"observe_every must be positive, got {get('observe_every')}")
    if get("expect") not in ("none", "bounded", "blowup"):
        problems.append(f"expect must be none|bounded|blowup, got {get('expect')!r}")
    if get("blowup_threshold") <= 1:
        problems.append("blowup_threshold is a multiplier of the initial peak; must be > 1")

    kind = values["init.kind"]
    init = InitSpec(kind=kind)
    base_dir = os.path.dirname(os.path.abspath(path))
    if kind == "bump":
        for k in ("init.mass", "init.center_x", "init.center_y", "init.radius"):
            if k not in values:
                problems.append(f"init.kind = bump requires {k}")
        init.mass = values.get("init.mass", math.nan)
        init.center = (values.get("init.center_x", math.nan),
                       values.get("init.center_y", math.nan))
        init.radius = values.get("init.radius", math.nan)
        if init.radius <= 0 or math.isnan(init.radius):
            problems.append(f"init.radius must be positive, got {init.radius}")
        if not init.mass > 0:
            problems.append(f"init.mass must be positive, got {init.mass}")
    elif kind == "blowup":
        for k in ("init.mass", "init.eps"):
            if k not in values:
                problems.append(f"init.kind = blowup requires {k}")
        init.mass = values.get("init.mass", math.nan)
        init.eps = values.get("init.eps", math.nan)
        init.x0 = (values.get("init.x0_x", 0.0), values.get("init.x0_y", 0.0))
        if not init.eps > 0:
            problems.append(f"init.eps must be positive, got {init.eps}")
        if not init.mass > 0:
            problems.append(f"init.mass must be positive, got {init.mass}")
    elif kind == "snapshot":
        for k in ("init.u_file", "init.w_file"):
            if k not in values:
                problems.append(f"init.kind = snapshot requires {k}")
        init.u_file = values.get("init.u_file", "")
        init.v_file = values.get("init.v_file", "")
        init.w_file = values.get("init.w_file", "")
        for f in (init.u_file, init.v_file, init.w_file):
            if f and not os.path.exists(os.path.join(base_dir, f)):
                problems.append(f"referenced snapshot does not exist: {f}")
        if values.get("tau") == 1 and not init.v_file:
            problems.append("tau = 1 snapshot init requires init.v_file")
    else:
        problems.append(f"init.kind must be bump|blowup|snapshot, got {kind!r}")
    init.w0_const = get("init.w0")
    init.v0_const = get("init.v0")
    if init.w0_const < 0:
        problems.append(f"init.w0 must be >= 0, got {init.w0_const}")
    if init.v0_const < 0:
        problems.append(f"init.v0 must be >= 0, got {init.v0_const}")

    cw = (get("compare.window_start"), get("compare.window_end"))
    if not cw[0] < cw[1]:
        problems.append(f"compare window must be increasing, got {cw}")

    if problems:
        raise ConfigError(f"{path}: " + "; ".join(problems))

    name = values.get("name", os.path.splitext(os.path.basename(path))[0])
    sweep_lists = {k.split(".", 1)[1]: values[k] for k in _LIST_KEYS if k in values}
    return Scenario(
        name=name,
        params=params,
        grid=grid,
        control=control,
        init=init,
        t_end=values["t_end"],
        observe_every=get("observe_every"),
        snapshot_every=get("snapshot_every"),
        output_dir=get("output_dir"),
        expect=get("expect"),
        blowup_threshold=get("blowup_threshold"),
        pgm=get("pgm"),
        compare_window=cw,
        sweep_lists=sweep_lists,
        base_dir=base_dir,
    )


def build_initial(scenario: Scenario):
    """Construct (state, family_spec_or_None) from the init section."""
    g = scenario.grid
    p = scenario.params
    init = scenario.init
    w0 = g.full(init.w0_const)
    spec = None
    if init.kind == "bump":
        u0 = initdata.bump(g, init.center, init.radius, init.mass)
        v0 = g.full(init.v0_const) if p.tau == 1 else None
    elif init.kind == "blowup":
        chi_family = p.chi if p.chi > 0 else 1.0
        spec = initdata.BlowupFamilySpec(eps=init.eps, m=init.mass,
                                         chi=chi_family, x0=init.x0)
        u0 = initdata.u_eps(g, spec)
        v0 = initdata.shifted_initial_v(g, spec) if p.tau == 1 else None
    elif init.kind == "snapshot":
        u0, _ = read_snapshot(os.path.join(scenario.base_dir, init.u_file))
        if u0.grid != g:
            raise ConfigError("snapshot grid does not match scenario grid")
        v0 = None
        if init.v_file:
            v0, _ = read_snapshot(os.path.join(scenario.base_dir, init.v_file))
        w0, _ = read_snapshot(os.path.join(scenario.base_dir, init.w_file))
    else:  # pragma: no cover - guarded at load time
        raise ConfigError(f"unknown init kind {init.kind}")
    state = model.initial_state(u0, w0, p, v0=v0,
                                solver_tol=scenario.control.solver_tol)
    return state, spec


@dataclass
class ScenarioResult:
    scenario: Scenario
    run: model.RunResult
    recorder: diag.Recorder
    family_report: diag.BlowupBoundReport | None
    summary: dict
    expect_ok: bool


def _fit_w_decay(recorder, kc, t_end):
    times, linf_w = recorder.series("linf_w")
    start = max(1.0, kc.delta if math.isfinite(kc.delta) else 1.0)
    try:
        return diag.fit_decay_rate(times, linf_w, (start, t_end))
    except (ValueError, diag.InsufficientDataError):
        return None


def run_scenario(scenario: Scenario, out_dir=None, quiet=False,
                 extra_observers=()) -> ScenarioResult:
    out_dir = out_dir or scenario.output_dir
    os.makedirs(out_dir, exist_ok=True)
    state0, spec = build_initial(scenario)

    recorder = diag.Recorder(scenario.params, scenario.observe_every)
    detector = diag.BlowupDetector(norm_linf(state0.u), scenario.blowup_threshold)
    tracker = diag.FamilyTracker(spec, scenario.grid) if spec is not None else None
    snapshotter = _Snapshotter(out_dir, scenario) if scenario.snapshot_every >= 0 else None

    observers = [recorder]
    if tracker is not None:
        observers.append(tracker)
    if snapshotter is not None:
        observers.append(snapshotter)
    observers.extend(extra_observers)

    result = model.run(state0, scenario.params, scenario.control, scenario.t_end,
                       observers=observers, detector=detector)
    if result.status == "blowup":
        recorder.mark_blowup(result.state, 0.0)
    else:
        recorder.finalize(result.state, 0.0)
    recorder.write_csv(os.path.join(out_dir, "diagnostics.csv"))
    if snapshotter is not None:
        snapshotter.write_final(result.state)

    kc = scenario.kernel_constants(mass=state0.target_mass)
    family_report = None
    if tracker is not None:
        family_report = diag.blowup_bound_check(
            tracker, scenario.params, state0.k_cap, scenario.grid.domain.diam,
            blowup_fired=result.status == "blowup",
        )

    fit = _fit_w_decay(recorder, kc, scenario.t_end)
    final = recorder.records[-1]
    summary = {
        "name": scenario.name,
        "status": result.status,
        "reason": result.reason or "",
        "steps": result.steps,
        "t_final": result.state.t,
        "mass_u": final.mass_u,
        "linf_u": final.linf_u,
        "linf_v": final.linf_v,
        "linf_w": final.linf_w,
        "l1_uv": final.l1_uv,
        "v_inf_m": kc.v_inf_m,
        "delta": kc.delta,
        "eta": scenario.params.eta,
        "eta_below_v_inf_m": int(scenario.params.eta < kc.v_inf_m),
        "w_decay_rate": fit.rate if fit else math.nan,
        "w_decay_r2": fit.r2 if fit else math.nan,
    }
    if family_report is not None:
        summary.update(
            family_alternative=family_report.verdict or "",
            family_consistent="" if family_report.consistent is None
            else int(family_report.consistent),
            sup_uv_pos=family_report.sup_uv_pos,
            bound_uv=family_report.bound_uv,
            bound_norms=family_report.bound_norms,
        )

    expect_ok = _check_expectation(scenario.expect, result.status)
    write_summary(os.path.join(out_dir, "summary.txt"), summary)
    if not quiet:
        for line in format_summary(summary):
            print(line)
    return ScenarioResult(scenario, result, recorder, family_report, summary, expect_ok)


def _check_expectation(expect: str, status: str) -> bool:
    if expect == "bounded":
        return status == "completed"
    if expect == "blowup":
        return status == "blowup"
    return True


def format_summary(summary: dict):
    lines = []
    for key, val in summary.items():
        if isinstance(val, float):
            lines.append(f"{key} = {val:.17g}")
        else:
            lines.append(f"{key} = {val}")
    return lines


def write_summary(path, summary: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for line in format_summary(summary):
            fh.write(line + "\n")


class _Snapshotter:
    def __init__(self, out_dir, scenario: Scenario):
        self.out_dir = out_dir
        self.every = scenario.snapshot_every
        self.pgm = scenario.pgm
        self.next_t = 0.0
        self.index = 0

    def __call__(self, state: model.State, dt_used: float):
        if self.every <= 0:
            if state.t == 0.0 and self.index == 0:
                self._emit(state, "init")
            return
        if state.t >= self.next_t - 1e-12 * max(1.0, state.t):
            self._emit(state, f"{self.index:06d}")
            self.index += 1
            while self.next_t <= state.t + 1e-12 * max(1.0, state.t):
                self.next_t += self.every

    def write_final(self, state):
        self._emit(state, "final")

    def _emit(self, state, tag):
        for name, field in (("u", state.u), ("v", state.v), ("w", state.w)):
            write_snapshot(os.path.join(self.out_dir, f"{name}_{tag}.hsim"),
                           field, state.t)
            if self.pgm:
                write_pgm(os.path.join(self.out_dir, f"{name}_{tag}.pgm"), field)


# ---------------------------------------------------------------------------
# lockstep comparison against the chemotaxis-only system

@dataclass
class CompareReport:
    times: list
    du_linf: list
    dv_linf: list
    zero_difference: bool
    u_rate: diag.RateFit | None
    v_rate: diag.RateFit | None
    w_rate: diag.RateFit | None
    status: str


def compare_runner(scenario: Scenario, out_dir=None, quiet=False) -> CompareReport:
    """Run the full system and the w=0 chemotaxis-only system from the same
    (u0, v0) with a shared dt schedule; record the sup-norm differences."""
    if scenario.params.mode != "full":
        raise ConfigError("compare requires mode = full")
    out_dir = out_dir or scenario.output_dir
    os.makedirs(out_dir, exist_ok=True)

    p_full = scenario.params
    p_ks = replace(p_full, mode="chemotaxis_only")
    state_f, _ = build_initial(scenario)
    state_k, _ = build_initial(replace(scenario, params=p_ks))

    control = scenario.control
    recorder = diag.Recorder(p_full, scenario.observe_every)
    recorder(state_f, 0.0)

    times, du, dv = [0.0], [0.0], [0.0]
    next_t = scenario.observe_every
    t_end = scenario.t_end
    status = "completed"
    while state_f.t < t_end - 1e-12 * max(1.0, t_end):
        dt = min(model.cfl_dt(state_f, p_full, control), t_end - state_f.t)
        try:
            state_f, dt_used = model.step(state_f, p_full, control, dt_cap=dt)
            state_k, _ = model.step(state_k, p_ks, control, dt_forced=dt_used)
        except (LinearSolverError, model.CFLError) as exc:
            status = f"aborted: {exc}"
            break
        recorder(state_f, dt_used)
        if dt_used < control.dt_min:
            status = "aborted: dt collapse (blow-up suspected)"
            break
        if state_f.t >= next_t - 1e-12 * max(1.0, state_f.t):
            times.append(state_f.t)
            du.append(float(np.max(np.abs(state_f.u.values - state_k.u.values))))
            dv.append(float(np.max(np.abs(state_f.v.values - state_k.v.values))))
            while next_t <= state_f.t + 1e-12 * max(1.0, state_f.t):
                next_t += scenario.observe_every

    zero = all(x == 0.0 for x in du) and all(x == 0.0 for x in dv)
    window = scenario.compare_window
    u_rate = v_rate = w_rate = None
    if not zero and status == "completed":
        try:
            u_rate = diag.fit_decay_rate(times, du, window)
            v_rate = diag.fit_decay_rate(times, dv, window)
        except (ValueError, diag.InsufficientDataError):
            pass
    kc = scenario.kernel_constants()
    w_times, w_vals = recorder.series("linf_w")
    try:
        start = max(1.0, kc.delta if math.isfinite(kc.delta) else 1.0)
        w_rate = diag.fit_decay_rate(w_times, w_vals, (start, t_end))
    except (ValueError, diag.InsufficientDataError):
        pass

    report = CompareReport(times, du, dv, zero, u_rate, v_rate, w_rate, status)
    _write_compare(out_dir, report)
    if not quiet:
        print(f"compare: status={status} zero_difference={zero}")
        if u_rate:
            print(f"compare: u-difference rate={u_rate.rate:.17g} r2={u_rate.r2:.6f}")
        if w_rate:
            print(f"compare: w decay rate={w_rate.rate:.17g} r2={w_rate.r2:.6f}")
    return report


def _write_compare(out_dir, report: CompareReport):
    with open(os.path.join(out_dir, "compare.csv"), "w", encoding="ascii") as fh:
        fh.write("t,du_linf,dv_linf\n")
        for t, a, b in zip(report.times, report.du_linf, report.dv_linf):
            fh.write(f"{t!r},{a!r},{b!r}\n")
    summary = {
        "status": report.status,
        "zero_difference": int(report.zero_difference),
        "u_rate": report.u_rate.rate if report.u_rate else math.nan,
        "u_rate_r2": report.u_rate.r2 if report.u_rate else math.nan,
        "v_rate": report.v_rate.rate if report.v_rate else math.nan,
        "w_rate": report.w_rate.rate if report.w_rate else math.nan,
        "w_rate_r2": report.w_rate.r2 if report.w_rate else math.nan,
    }
    write_summary(os.path.join(out_dir, "compare_summary.txt"), summary)


# ---------------------------------------------------------------------------
# parameter sweep

SWEEP_HEADER = ("m,chi,xi,eta,eps,verdict,sup_linf_u,sup_linf_v,sup_l1_uv,"
                "v_inf_m,delta,blowup_bound,error")


def sweep(scenario: Scenario, out_dir=None, quiet=False):
    """Cartesian sweep over the scenario's sweep.* lists.  Rows run
    sequentially in deterministic product order; per-row failures are
    recorded and the sweep continues."""
    out_dir = out_dir or scenario.output_dir
    os.makedirs(out_dir, exist_ok=True)
    lists = scenario.sweep_lists
    ms = lists.get("m", [scenario.init.mass])
    chis = lists.get("chi", [scenario.params.chi])
    xis = lists.get("xi", [scenario.params.xi])
    etas = lists.get("eta", [scenario.params.eta])
    epss = lists.get("eps", [scenario.init.eps])

    rows = []
    for idx, (m, chi, xi, eta, eps) in enumerate(
        itertools.product(ms, chis, xis, etas, epss)
    ):
        row = _sweep_row(scenario, m, chi, xi, eta, eps,
                         os.path.join(out_dir, f"row_{idx:04d}"))
        rows.append(row)
        if not quiet:
            print(",".join(row))
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return rows


def _sweep_row(base: Scenario, m, chi, xi, eta, eps, row_dir):
    fmt = lambda x: repr(float(x))
    diam = base.grid.domain.diam
    try:
        v_inf = consts.v_lower_bound(m, diam)
        delta = consts.delta_time(m, eta, diam) if eta < v_inf else math.inf
    except ValueError:
        v_inf, delta = math.nan, math.nan
    try:
        bound = consts.blowup_lower_bound(m, chi, xi, eta, 1.0, diam)
    except consts.BlowupForced:
        bound = math.inf
    except ValueError:
        bound = math.nan

    mode = base.params.mode
    if chi == 0:
        mode = "haptotaxis_only"
    try:
        params = model.Params(chi=chi, xi=xi, eta=eta, tau=base.params.tau, mode=mode)
        init = replace(base.init, mass=m)
        if not math.isnan(eps) and base.init.kind == "blowup":
            init = replace(init, eps=eps)
        sub = replace(base, params=params, init=init, output_dir=row_dir)
        res = run_scenario(sub, out_dir=row_dir, quiet=True)
        times, linf_u = res.recorder.series("linf_u")
        _, linf_v = res.recorder.series("linf_v")
        _, l1_uv = res.recorder.series("l1_uv")
        verdict = "blowup" if res.run.status == "blowup" else "bounded"
        return [fmt(m), fmt(chi), fmt(xi), fmt(eta), fmt(eps), verdict,
                fmt(max(linf_u)), fmt(max(linf_v)), fmt(max(l1_uv)),
                fmt(v_inf), fmt(delta), fmt(bound), ""]
    except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
        return [fmt(m), fmt(chi), fmt(xi), fmt(eta), fmt(eps), "error",
                "nan", "nan", "nan", fmt(v_inf), fmt(delta), fmt(bound),
                str(exc).replace(",", ";")]
