"""Matrix-free preconditioned conjugate gradients for the SPD operators
a*I - b*Lap_h (mirror-ghost Neumann Laplacian).

Three flavors are exposed: the elliptic chemical solve (-Lap + 1)v = f,
the backward-Euler chemical step (1+dt)I - dt*Lap, and the backward-Euler
diffusion step I - dt*Lap used for the cell density.  All three share one
PCG core with a Jacobi preconditioner (the diagonal is non-constant at
boundary cells).  After convergence the solution is shifted by a constant
so the discrete integral identity of the operator holds exactly, keeping
integral budgets at roundoff rather than at solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domain import Field, Grid


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool


class LinearSolverError(RuntimeError):
    def __init__(self, message, report: SolveReport):
        super().__init__(message)
        self.report = report


def _operator_diagonal(grid: Grid, a: float, b: float) -> np.ndarray:
    ny, nx = grid.shape
    cx = np.full(nx, 2.0)
    cx[0] = cx[-1] = 1.0
    cy = np.full(ny, 2.0)
    cy[0] = cy[-1] = 1.0
    d = cx[None, :] / grid.hx**2 + cy[:, None] / grid.hy**2
    return a + b * d


def _pcg(grid: Grid, a: float, b: float, rhs: np.ndarray, tol: float,
         maxiter: int, x0: np.ndarray | None):
    hx, hy = grid.hx, grid.hy
    diag = _operator_diagonal(grid, a, b)
    x = np.zeros_like(rhs) if x0 is None else x0.astype(float).copy()

    if _kernels.pcg_solve is not None:
        iters, resid, converged = _kernels.pcg_solve(
            x, np.ascontiguousarray(rhs), a, b, hx, hy, diag, tol, maxiter
        )
        return x, SolveReport(iters, resid, converged)

    scratch = np.empty_like(rhs)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True)

    _kernels.shifted_laplacian(x, a, b, hx, hy, scratch)
    r = rhs - scratch
    z = r / diag
    p = z.copy()
    rz = float(np.dot(r.ravel(), z.ravel()))
    resid = float(np.linalg.norm(r)) / bnorm
    if resid <= tol:
        return x, SolveReport(0, resid, True)

    for k in range(1, maxiter + 1):
        ap = _kernels.shifted_laplacian(p, a, b, hx, hy, scratch)
        alpha = rz / float(np.dot(p.ravel(), ap.ravel()))
        x += alpha * p
        r -= alpha * ap
        resid = float(np.linalg.norm(r)) / bnorm
        if resid <= tol:
            return x, SolveReport(k, resid, True)
        z = r / diag
        rz_new = float(np.dot(r.ravel(), z.ravel()))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(maxiter, resid, False)


def _solve(field: Field, a: float, b: float, tol: float, maxiter, x0, what: str):
    grid = field.grid
    if maxiter is None:
        maxiter = 10 * (grid.nx + grid.ny)
    x0v = x0.values if isinstance(x0, Field) else x0
    sol, report = _pcg(grid, a, b, field.values, tol, maxiter, x0v)
    if not report.converged:
        raise LinearSolverError(
            f"{what}: CG stalled at relative residual {report.residual:.3e} "
            f"after {report.iterations} iterations (tol {tol:.1e})",
            report,
        )
    # pin the constant-mode identity: integrate(A v) = a * integrate(v)
    sol += (field.values.sum() / a - sol.sum()) / sol.size
    return Field(grid, sol), report


def helmholtz_solve(f: Field, tol: float = 1e-10, maxiter: int | None = None,
                    x0=None) -> tuple[Field, SolveReport]:
    """Solve (-Lap_h + I) v = f.  For f >= 0 the solution is nonnegative
    (M-matrix) and integrate(v) = integrate(f) holds exactly."""
    if not 0 < tol <= 1e-4:
        raise ValueError(f"tol must be in (0, 1e-4], got {tol}")
    return _solve(f, 1.0, 1.0, tol, maxiter, x0, "helmholtz")


def implicit_heat_solve(rhs: Field, dt: float, tol: float = 1e-10,
                        maxiter: int | None = None, x0=None):
    """Solve ((1+dt) I - dt Lap_h) v = rhs, the backward-Euler step of
    v_t = Lap v - v + (forcing folded into rhs).  Satisfies
    integrate(v) * (1+dt) = integrate(rhs) exactly."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not 0 < tol <= 1e-4:
        raise ValueError(f"tol must be in (0, 1e-4], got {tol}")
    return _solve(rhs, 1.0 + dt, dt, tol, maxiter, x0, "implicit heat")


def implicit_diffusion_solve(rhs: Field, dt: float, tol: float = 1e-10,
                             maxiter: int | None = None, x0=None):
    """Solve (I - dt Lap_h) u = rhs: the implicit diffusion half of the
    cell-density step.  integrate(u) = integrate(rhs) exactly."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not 0 < tol <= 1e-4:
        raise ValueError(f"tol must be in (0, 1e-4], got {tol}")
    return _solve(rhs, 1.0, dt, tol, maxiter, x0, "implicit diffusion")
