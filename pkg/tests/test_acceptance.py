"""Acceptance gate: one test per criterion, each printing a PASS line with
the measured quantity (run with `pytest -s tests/test_acceptance.py -v`).

Shared expensive trajectories (the bounded 64^2 run to t = 50) are
computed once per session and reused by the criteria that probe them.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from haptosim import constants, diagnostics, harness, initdata, linsolve, model
from haptosim.domain import DomainSpec, Grid, integrate, norm_linf


def report(num, name, detail):
    print(f"[C{num:02d}] {name}: PASS ({detail})")


# ---------------------------------------------------------------------------
# shared runs


class InvariantWatch:
    """Per-step observer: mass drift, cell positivity, matrix band."""

    def __init__(self, state0):
        self.m0 = integrate(state0.u)
        self.k = state0.k_cap
        self.max_drift = 0.0
        self.min_u = math.inf
        self.min_w = math.inf
        self.max_w = -math.inf
        self.steps = 0

    def __call__(self, state, dt_used):
        self.steps += 1
        self.max_drift = max(self.max_drift, abs(integrate(state.u) - self.m0) / self.m0)
        self.min_u = min(self.min_u, float(state.u.values.min()))
        self.min_w = min(self.min_w, float(state.w.values.min()))
        self.max_w = max(self.max_w, float(state.w.values.max()))


@pytest.fixture(scope="session")
def b1_run(tmp_path_factory):
    scenario = harness.load_scenario(harness.preset_path("b1_subcritical.cfg"))
    out = tmp_path_factory.mktemp("b1")
    state0, _ = harness.build_initial(scenario)
    watch = InvariantWatch(state0)
    t0 = time.time()
    result = harness.run_scenario(scenario, out_dir=str(out), quiet=True,
                                  extra_observers=[watch])
    return scenario, result, watch, time.time() - t0


# ---------------------------------------------------------------------------
# criterion 1: kernel identity


def test_c01_kernel_identity_matches_bessel_oracle():
    from test_constants import k0_series

    t0 = time.time()
    worst = 0.0
    for d in (0.5, 1.0, 2.0):
        oracle = k0_series(d) / (2.0 * math.pi)
        got = constants.heat_kernel_integral(math.inf, d)
        worst = max(worst, abs(got - oracle) / oracle)
    assert worst <= 1e-8
    report(1, "kernel identity", f"max rel err {worst:.2e}, {time.time() - t0:.2f}s")


# criterion 2: delta residual


def test_c02_delta_defining_equation_residual():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        m = rng.uniform(0.5, 30.0)
        d = rng.uniform(0.4, 3.0)
        v_inf = constants.v_lower_bound(m, d)
        eta = rng.uniform(0.0, 0.98) * v_inf
        delta = constants.delta_time(m, eta, d)
        resid = abs(m * constants.heat_kernel_integral(delta, d) - 0.5 * (eta + v_inf))
        worst = max(worst, resid)
    assert worst <= 1e-10
    report(2, "delta residual", f"max residual {worst:.2e}, {time.time() - t0:.2f}s")


# criterion 3: analytic elliptic solve, second order


def test_c03_helmholtz_second_order_convergence():
    t0 = time.time()
    errors = []
    for n in (32, 64, 128):
        g = Grid(n, n, DomainSpec(1.0, 1.0))
        f = g.from_function(lambda X, Y: 1.0 + np.cos(np.pi * X))
        v, _ = linsolve.helmholtz_solve(f)
        exact = g.from_function(
            lambda X, Y: 1.0 + np.cos(np.pi * X) / (1.0 + np.pi**2)
        )
        errors.append(float(np.max(np.abs(v.values - exact.values))))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(abs(o - 2.0) <= 0.2 for o in orders)
    report(3, "elliptic convergence",
           f"orders {', '.join(f'{o:.3f}' for o in orders)}, {time.time() - t0:.2f}s")


# criterion 4: conservation and positivity on the bounded preset


def test_c04_conservation_and_positivity(b1_run):
    scenario, result, watch, elapsed = b1_run
    assert watch.steps >= 1000
    # max drift at any step bounds the per-1000-step drift
    assert watch.max_drift <= 1e-12
    assert watch.min_u >= 0.0
    assert watch.min_w >= 0.0
    assert watch.max_w <= result.run.state.k_cap
    report(4, "conservation",
           f"{watch.steps} steps, max drift {watch.max_drift:.2e}, "
           f"min u {watch.min_u:g}, w in [{watch.min_w:g}, {watch.max_w:.6f}], "
           f"run {elapsed:.0f}s")


# criterion 5: chemical mass law (fully parabolic)


def test_c05_v_mass_law():
    t0 = time.time()
    g = Grid(32, 32, DomainSpec(1.0, 1.0))
    m = 2.0 * math.pi
    params = model.Params(chi=1.0, xi=0.5, eta=0.01, tau=1)
    control = model.StepControl(dt_max=1e-3, dt_min=1e-12)
    u0 = initdata.bump(g, (0.5, 0.5), 0.35, m)
    state = model.initial_state(u0, g.full(0.5), params, v0=g.zeros())
    rec = diagnostics.Recorder(params, every=0.1)
    res = model.run(state, params, control, t_end=5.0, observers=[rec])
    assert res.status == "completed"
    worst = 0.0
    for r in rec.records:
        if r.t < 0.05:
            continue
        closed = m * (1.0 - math.exp(-r.t))  # ||v0||_1 = 0
        worst = max(worst, abs(r.l1_v - closed) / closed)
    assert worst <= 1e-3
    report(5, "v mass law", f"max rel err {worst:.2e}, {time.time() - t0:.1f}s")


# criterion 6: exact matrix update vs RK4 oracle


def test_c06_w_exactness_vs_rk4():
    from test_model import advance_frozen_w, rk4_logistic_decay

    t0 = time.time()
    g = Grid(4, 4, DomainSpec(1.0, 1.0))
    cases = [
        (2.0, 0.0, 0.5, 1.0),
        (0.0, 1.0, 0.5, math.log(2.0)),
        (1.0, 0.5, 0.8, 2.0),
    ]
    worst = 0.0
    for v_const, eta, w0c, t_end in cases:
        state = advance_frozen_w(g, v_const, eta, w0c, t_end, dt=1e-3)
        oracle = rk4_logistic_decay(w0c, v_const, eta, t_end, dt=1e-4)
        worst = max(worst, float(np.max(np.abs(state.w.values - oracle))))
    assert worst <= 1e-6
    report(6, "matrix-field exactness", f"max |err| {worst:.2e}, {time.time() - t0:.2f}s")


# criterion 7: boundedness of the subcritical preset


def test_c07_subcritical_boundedness(b1_run):
    scenario, result, watch, elapsed = b1_run
    assert result.run.status == "completed"
    assert result.expect_ok
    times, linf_u = result.recorder.series("linf_u")
    at10 = next(v for t, v in zip(times, linf_u) if t >= 10.0 - 1e-9)
    at50 = linf_u[-1]
    assert result.run.state.t >= 50.0 - 1e-6
    assert at50 <= 2.0 * at10
    report(7, "subcritical boundedness",
           f"linf u(50) = {at50:.4f} <= 2 * linf u(10) = 2 * {at10:.4f}, run {elapsed:.0f}s")


# criterion 8: supercritical chemotaxis-only blow-up proxy


def test_c08_supercritical_blowup_detected(tmp_path):
    t0 = time.time()
    scenario = harness.load_scenario(harness.preset_path("b3_blowup_ks.cfg"))
    state0, _ = harness.build_initial(scenario)
    peak0 = norm_linf(state0.u)
    result = harness.run_scenario(scenario, out_dir=str(tmp_path), quiet=True)
    assert result.run.status == "blowup"
    assert result.expect_ok
    assert result.run.state.t < 20.0
    growth = norm_linf(result.run.state.u) / peak0
    assert growth >= 10.0
    report(8, "blow-up proxy",
           f"detector at t = {result.run.state.t:.5f}, growth {growth:.1f}x, "
           f"{time.time() - t0:.1f}s")


# criterion 9: matrix extinction rate on the bounded run


def test_c09_w_extinction_rate(b1_run):
    scenario, result, watch, elapsed = b1_run
    kc = scenario.kernel_constants()
    floor = 0.5 * (kc.v_inf_m - scenario.params.eta)
    times, linf_w = result.recorder.series("linf_w")
    fit = diagnostics.fit_decay_rate(times, linf_w,
                                     (max(kc.delta, 1.0), scenario.t_end))
    assert fit.rate >= floor
    assert fit.r2 >= 0.9
    report(9, "matrix extinction",
           f"rate {fit.rate:.3f} >= floor {floor:.4f}, r2 {fit.r2:.4f}")


# criterion 10: free-energy inequality and slope for the concentrating family


def test_c10_family_energy_bound_and_slope():
    t0 = time.time()
    m, chi = 6.0 * math.pi, 1.0
    g = Grid(256, 256, DomainSpec(1.0, 1.0))
    epss = [0.2, 0.1, 0.05]
    energies = []
    for eps in epss:
        spec = initdata.BlowupFamilySpec(eps=eps, m=m, chi=chi, x0=(0.0, 0.0))
        u = initdata.u_eps(g, spec)
        v = initdata.v_eps(g, spec)
        fks = diagnostics.ks_free_energy(u, v, chi)
        bound = constants.free_energy_upper_bound(eps, m, chi, g.domain, (0.0, 0.0))
        assert fks <= bound.value
        energies.append(fks)
    slope = float(np.polyfit(np.log(1.0 / np.array(epss)), energies, 1)[0])
    target = -4.0 * (m - 4.0 * math.pi / chi)
    assert abs(slope - target) <= 0.15 * abs(target)
    report(10, "family energy bound",
           f"slope {slope:.2f} vs {target:.2f} "
           f"({abs(slope - target) / abs(target) * 100:.1f}%), {time.time() - t0:.1f}s")


# criterion 11: convergence to the chemotaxis-only system


def test_c11_comparison_decay(tmp_path):
    t0 = time.time()
    scenario = harness.load_scenario(harness.preset_path("b5_compare.cfg"))
    rep = harness.compare_runner(scenario, out_dir=str(tmp_path / "full"), quiet=True)
    assert rep.status == "completed"
    assert not rep.zero_difference
    assert rep.u_rate is not None
    assert rep.u_rate.rate > 0.0
    assert rep.u_rate.r2 >= 0.9

    zero_sc = replace(scenario, params=replace(scenario.params, xi=0.0))
    rep0 = harness.compare_runner(zero_sc, out_dir=str(tmp_path / "xi0"), quiet=True)
    assert rep0.zero_difference
    report(11, "chemotaxis-only convergence",
           f"u-difference rate {rep.u_rate.rate:.2f} (r2 {rep.u_rate.r2:.3f}); "
           f"xi=0 exactly zero, {time.time() - t0:.0f}s")


# criterion 12: energy-balance residual refinement


def _mean_residual(n, dt_max):
    g = Grid(n, n, DomainSpec(1.0, 1.0))
    params = model.Params(chi=0.5, xi=0.25, eta=0.05, tau=1)
    control = model.StepControl(dt_max=dt_max, dt_min=1e-12)
    u0 = initdata.bump(g, (0.5, 0.5), 0.35, math.pi)
    state = model.initial_state(u0, g.full(0.5), params, v0=g.zeros())
    rec = diagnostics.Recorder(params, every=0.1)
    res = model.run(state, params, control, t_end=1.0, observers=[rec])
    assert res.status == "completed"
    vals = [r.dissipation_residual for r in rec.records if 0.2 <= r.t <= 1.0]
    return float(np.mean(vals))


def test_c12_residual_refinement():
    t0 = time.time()
    coarse = _mean_residual(32, 2e-3)
    fine = _mean_residual(64, 1e-3)
    assert coarse / fine >= 1.5
    report(12, "energy-balance refinement",
           f"residual {coarse:.3e} -> {fine:.3e}, factor {coarse / fine:.2f}, "
           f"{time.time() - t0:.0f}s")


# criterion 13: haptotaxis-only boundedness and the algebraic envelope


def test_c13_haptotaxis_only(tmp_path):
    t0 = time.time()
    scenario = harness.load_scenario(harness.preset_path("r1_haptoonly.cfg"))
    kc = scenario.kernel_constants()
    assert scenario.params.eta == pytest.approx(0.9 * kc.v_inf_m, rel=1e-10)
    res = harness.run_scenario(scenario, out_dir=str(tmp_path / "a"), quiet=True)
    assert res.run.status == "completed"
    assert res.run.state.t >= 50.0 - 1e-6

    # tau = 0 at the borderline rate eta = v_inf_m: algebraic envelope
    border = replace(scenario, params=replace(scenario.params, tau=0, eta=kc.v_inf_m))
    res0 = harness.run_scenario(border, out_dir=str(tmp_path / "b"), quiet=True)
    assert res0.run.status == "completed"
    times, linf_w = res0.recorder.series("linf_w")
    k_cap = res0.run.state.k_cap
    margin = math.inf
    for t, w in zip(times, linf_w):
        if 1.0 <= t <= 50.0:
            envelope = 1.1 * k_cap / (1.0 + kc.v_inf_m * t)
            assert w <= envelope
            margin = min(margin, envelope / max(w, 5e-324))
    report(13, "haptotaxis-only",
           f"bounded to t = 50; envelope margin >= {margin:.1e}, "
           f"{time.time() - t0:.0f}s")
