"""Backend parity: the compiled core and the numpy fallback must agree
bitwise on the shared kernels and to solver tolerance on the fused CG."""

import numpy as np
import pytest

from haptosim import _kernels
from haptosim.domain import DomainSpec, Field, Grid
from haptosim.linsolve import _operator_diagonal

cython_available = "cython" in _kernels.available_backends()
needs_cython = pytest.mark.skipif(not cython_available, reason="compiled core not built")


def random_inputs(seed, shape=(13, 17)):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.standard_normal(shape))
    u = np.ascontiguousarray(rng.uniform(0.0, 2.0, shape))
    return x, u


@needs_cython
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_shifted_laplacian_bitwise_parity(seed):
    ncy = _kernels.get_backend("cython")
    nnp = _kernels.get_backend("numpy")
    x, _ = random_inputs(seed)
    o1, o2 = np.empty_like(x), np.empty_like(x)
    ncy.shifted_laplacian(x, 1.3, 0.7, 0.05, 0.08, o1)
    nnp.shifted_laplacian(x, 1.3, 0.7, 0.05, 0.08, o2)
    assert np.array_equal(o1, o2)


@needs_cython
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_upwind_divergence_bitwise_parity(seed):
    ncy = _kernels.get_backend("cython")
    nnp = _kernels.get_backend("numpy")
    p, u = random_inputs(seed)
    o1, o2 = np.empty_like(p), np.empty_like(p)
    ncy.upwind_divergence(u, p, 0.05, 0.08, o1)
    nnp.upwind_divergence(u, p, 0.05, 0.08, o2)
    assert np.array_equal(o1, o2)


@needs_cython
def test_max_face_speeds_parity():
    ncy = _kernels.get_backend("cython")
    nnp = _kernels.get_backend("numpy")
    p, _ = random_inputs(7)
    assert ncy.max_face_speeds(p, 0.05, 0.08) == nnp.max_face_speeds(p, 0.05, 0.08)


@needs_cython
def test_fused_cg_agrees_with_python_loop():
    # same system, both solvers, answers within a small multiple of tol
    from haptosim import linsolve

    g = Grid(24, 24, DomainSpec(1.0, 1.0))
    rng = np.random.default_rng(11)
    rhs = rng.standard_normal(g.shape)
    a, b = 1.0, 0.01
    diag = _operator_diagonal(g, a, b)

    x_c = np.zeros(g.shape)
    iters, resid, ok = _kernels.pcg_solve(
        x_c, np.ascontiguousarray(rhs), a, b, g.hx, g.hy, diag, 1e-12, 2000
    )
    assert ok and resid <= 1e-12

    saved = linsolve._kernels.pcg_solve
    linsolve._kernels.pcg_solve = None
    try:
        x_p, rep = linsolve._pcg(g, a, b, rhs, 1e-12, 2000, None)
    finally:
        linsolve._kernels.pcg_solve = saved
    assert rep.converged
    assert np.max(np.abs(x_c - x_p)) <= 1e-9 * max(1.0, np.abs(x_c).max())


def test_selected_backend_is_reported():
    assert _kernels.backend_name() in ("cython", "numpy")
    assert "numpy" in _kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")
