"""Grid, field, discrete-calculus and snapshot-format tests."""

import math

import numpy as np
import pytest

from haptosim import domain as dom
from haptosim import initdata


def unit_grid(n=16):
    return dom.Grid(n, n, dom.DomainSpec(1.0, 1.0))


def test_domain_spec_invariants():
    d = dom.DomainSpec(3.0, 4.0)
    assert d.diam == pytest.approx(5.0)
    assert d.area == pytest.approx(12.0)
    with pytest.raises(dom.DomainError):
        dom.DomainSpec(0.0, 1.0)
    with pytest.raises(dom.DomainError):
        dom.DomainSpec(1.0, -1.0)


def test_grid_invariants():
    g = dom.Grid(8, 16, dom.DomainSpec(2.0, 1.0))
    assert g.nx * g.hx == pytest.approx(2.0)
    assert g.ny * g.hy == pytest.approx(1.0)
    with pytest.raises(dom.DomainError):
        dom.Grid(3, 8, dom.DomainSpec(1.0, 1.0))


def test_field_shape_checked():
    g = unit_grid(8)
    with pytest.raises(dom.DomainError):
        dom.Field(g, np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# integrals and norms


def test_integrate_trivials():
    g = unit_grid(12)
    assert dom.integrate(g.zeros()) == 0.0
    assert dom.integrate(g.full(1.0)) == pytest.approx(1.0, rel=1e-14)


def test_integrate_concentrated_family_mass():
    # normalized against the discrete quadrature: exact mass by construction
    g = unit_grid(48)
    spec = initdata.BlowupFamilySpec(eps=0.3, m=2.0 * math.pi, chi=1.0, x0=(0.0, 0.0))
    u = initdata.u_eps(g, spec)
    assert dom.integrate(u) == pytest.approx(2.0 * math.pi, rel=1e-10)
    # refined-grid quadrature of the same profile agrees at resolved eps
    g2 = unit_grid(192)
    u2 = initdata.u_eps(g2, spec)
    assert dom.integrate(u2) == pytest.approx(2.0 * math.pi, rel=1e-10)


def test_entropy_trivials():
    g = unit_grid(10)
    assert dom.entropy_l1(g.full(1.0)) == 0.0
    assert dom.entropy_l1(g.full(math.e)) == pytest.approx(math.e, rel=1e-12)
    assert dom.entropy_l1(g.zeros()) == 0.0  # s ln s -> 0 extension
    with pytest.raises(dom.DomainError):
        dom.entropy_l1(dom.Field(g, np.full(g.shape, -0.5)))


def test_pairing_trivials():
    g = unit_grid(10)
    f = g.full(2.0)
    assert dom.pairing(f, f) == pytest.approx(4.0, rel=1e-14)


def test_norms():
    g = unit_grid(8)
    f = g.zeros()
    f.values[3, 5] = -7.0
    assert dom.norm_linf(f) == 7.0
    assert dom.norm_l1(f) == pytest.approx(7.0 * g.cell_area)


# ---------------------------------------------------------------------------
# difference operators


def test_gradient_of_constant_is_zero():
    g = unit_grid(9)
    q = dom.gradient(g.full(3.7))
    assert not q.fx.any()
    assert not q.fy.any()


def test_divergence_integral_vanishes_for_any_flux():
    g = dom.Grid(11, 7, dom.DomainSpec(1.3, 0.8))
    rng = np.random.default_rng(7)
    q = dom.FluxField(g)
    q.fx[:, 1:-1] = rng.standard_normal((7, 10))
    q.fy[1:-1, :] = rng.standard_normal((6, 11))
    total = dom.integrate(dom.divergence(q))
    assert abs(total) <= 1e-13 * max(1.0, np.abs(q.fx).max() / g.hx)


def test_divergence_gradient_equals_laplacian_bitwise():
    g = dom.Grid(13, 9, dom.DomainSpec(2.0, 1.1))
    rng = np.random.default_rng(3)
    f = dom.Field(g, rng.standard_normal(g.shape))
    composed = dom.divergence(dom.gradient(f))
    direct = dom.laplacian(f)
    assert np.array_equal(composed.values, direct.values)


def test_gradient_divergence_adjointness():
    g = dom.Grid(10, 14, dom.DomainSpec(1.0, 2.0))
    rng = np.random.default_rng(11)
    f = dom.Field(g, rng.standard_normal(g.shape))
    q = dom.FluxField(g)
    q.fx[:, 1:-1] = rng.standard_normal((14, 9))
    q.fy[1:-1, :] = rng.standard_normal((13, 10))
    lhs = dom.pairing(f, dom.divergence(q))
    gf = dom.gradient(f)
    rhs = -(np.sum(gf.fx * q.fx) + np.sum(gf.fy * q.fy)) * g.cell_area
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)


def test_laplacian_second_order_on_neumann_eigenfunction():
    errors = []
    for n in (32, 64, 128):
        g = unit_grid(n)
        f = g.from_function(lambda X, Y: np.cos(np.pi * X))
        lap = dom.laplacian(f)
        exact = -(math.pi**2) * f.values
        errors.append(np.max(np.abs(lap.values - exact)))
    order1 = math.log2(errors[0] / errors[1])
    order2 = math.log2(errors[1] / errors[2])
    assert order1 == pytest.approx(2.0, abs=0.2)
    assert order2 == pytest.approx(2.0, abs=0.2)


def test_grad_sq_integral_on_linear_field():
    g = unit_grid(20)
    f = g.from_function(lambda X, Y: 3.0 * X)
    # interior faces see slope 3; boundary faces contribute zero, so the
    # discrete integral is (n-1)/n of the continuum value 9
    expected = 9.0 * (g.nx - 1) / g.nx
    assert dom.grad_sq_integral(f) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# snapshot I/O


def test_snapshot_roundtrip_bit_exact(tmp_path):
    g = dom.Grid(6, 5, dom.DomainSpec(1.25, 0.75))
    rng = np.random.default_rng(123)
    f = dom.Field(g, rng.standard_normal(g.shape))
    path = tmp_path / "field.hsim"
    dom.write_snapshot(path, f, t=0.7071067811865476)
    back, t = dom.read_snapshot(path)
    assert t == 0.7071067811865476
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_snapshot_header_format(tmp_path):
    g = dom.Grid(4, 4, dom.DomainSpec(1.0, 2.0))
    path = tmp_path / "f.hsim"
    dom.write_snapshot(path, g.full(1.0), t=0.5)
    raw = path.read_bytes()
    header, payload = raw.split(b"\n", 1)
    assert header == b"HSIM1 4 4 1.0 2.0 0.5"
    assert len(payload) == 16 * 8
    assert np.frombuffer(payload, dtype="<f8").reshape(4, 4) == pytest.approx(1.0)


def test_snapshot_rejects_garbage(tmp_path):
    path = tmp_path / "bad.hsim"
    path.write_bytes(b"NOTASNAP 1 2 3\n")
    with pytest.raises(dom.DomainError):
        dom.read_snapshot(path)


def test_pgm_export(tmp_path):
    g = dom.Grid(8, 6, dom.DomainSpec(1.0, 1.0))
    f = g.from_function(lambda X, Y: X + Y)
    path = tmp_path / "f.pgm"
    dom.write_pgm(path, f)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n8 6\n255\n")
    img = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8)
    assert img.size == 48
    assert img.min() == 0 and img.max() == 255
