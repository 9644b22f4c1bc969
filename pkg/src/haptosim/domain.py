"""Uniform cell-centered rectangular grid, scalar fields and the discrete
no-flux calculus.

The mesh covers [0, Lx] x [0, Ly] with nx*ny cells of size hx*hy; cell
(i, j) is centered at ((i+0.5)hx, (j+0.5)hy).  Field values are stored as
C-contiguous (ny, nx) arrays, so the flat layout is row-major with index
j*nx + i (the contract used by the binary snapshot format).

All difference operators close the boundary with mirror ghost cells:
boundary-face differences vanish identically, which makes the no-flux
condition exact and mass conservation a telescoping identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class DomainError(ValueError):
    """Invalid domain geometry or incompatible grids."""


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle [0, Lx] x [0, Ly]."""

    lx: float
    ly: float

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise DomainError(f"side lengths must be positive, got {self.lx}, {self.ly}")

    @property
    def diam(self) -> float:
        return float(np.hypot(self.lx, self.ly))

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def corners(self):
        return ((0.0, 0.0), (self.lx, 0.0), (0.0, self.ly), (self.lx, self.ly))


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    domain: DomainSpec

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise DomainError(f"need at least 4 cells per direction, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return self.domain.lx / self.nx

    @property
    def hy(self) -> float:
        return self.domain.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self):
        return (self.ny, self.nx)

    def cell_centers(self):
        """Meshgrid arrays (X, Y) of shape (ny, nx)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="xy")

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def full(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))

    def from_function(self, fn) -> "Field":
        X, Y = self.cell_centers()
        return Field(self, np.asarray(fn(X, Y), dtype=float))


@dataclass
class Field:
    """One scalar quantity as cell averages on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


@dataclass
class FluxField:
    """Face-normal flux values; boundary faces are identically zero.

    fx has shape (ny, nx+1): fx[j, i] is the flux through the face between
    cells (i-1, j) and (i, j); columns 0 and nx are boundary faces.
    fy has shape (ny+1, nx) analogously.
    """

    grid: Grid
    fx: np.ndarray = field(default=None)
    fy: np.ndarray = field(default=None)

    def __post_init__(self):
        ny, nx = self.grid.shape
        if self.fx is None:
            self.fx = np.zeros((ny, nx + 1))
        if self.fy is None:
            self.fy = np.zeros((ny + 1, nx))
        if self.fx.shape != (ny, nx + 1) or self.fy.shape != (ny + 1, nx):
            raise DomainError("flux array shapes do not match grid")


# ---------------------------------------------------------------------------
# integrals and norms

def integrate(f: Field) -> float:
    return float(f.values.sum()) * f.grid.cell_area


def norm_linf(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def norm_l1(f: Field) -> float:
    return float(np.sum(np.abs(f.values))) * f.grid.cell_area


def entropy_l1(f: Field) -> float:
    """Integral of |f ln f|, with s ln s extended by 0 at s = 0."""
    v = f.values
    if np.any(v < 0):
        raise DomainError("entropy_l1 requires a nonnegative field")
    out = np.zeros_like(v)
    mask = v > 0
    out[mask] = np.abs(v[mask] * np.log(v[mask]))
    return float(out.sum()) * f.grid.cell_area


def xlogx(f: Field) -> float:
    """Integral of f ln f (signed), with s ln s -> 0 at s = 0."""
    v = f.values
    out = np.zeros_like(v)
    mask = v > 0
    out[mask] = v[mask] * np.log(v[mask])
    return float(out.sum()) * f.grid.cell_area


def pairing(f: Field, g: Field) -> float:
    if f.grid is not g.grid and f.grid != g.grid:
        raise DomainError("pairing requires fields on the same grid")
    return float(np.sum(f.values * g.values)) * f.grid.cell_area


# ---------------------------------------------------------------------------
# difference operators

def gradient(f: Field) -> FluxField:
    """Face-normal differences; boundary faces zero (mirror ghosts)."""
    g = f.grid
    q = FluxField(g)
    q.fx[:, 1:-1] = (f.values[:, 1:] - f.values[:, :-1]) / g.hx
    q.fy[1:-1, :] = (f.values[1:, :] - f.values[:-1, :]) / g.hy
    return q


def divergence(q: FluxField) -> Field:
    # accumulation order matches the kernel Laplacian bit-for-bit, so
    # divergence(gradient(f)) == laplacian(f) exactly
    g = q.grid
    out = q.fx[:, 1:] / g.hx
    out -= q.fx[:, :-1] / g.hx
    out += q.fy[1:, :] / g.hy
    out -= q.fy[:-1, :] / g.hy
    return Field(g, out)


def laplacian(f: Field) -> Field:
    """divergence(gradient(f)), evaluated by the kernel backend."""
    g = f.grid
    out = np.empty(g.shape)
    _kernels.shifted_laplacian(f.values, 0.0, -1.0, g.hx, g.hy, out)
    return Field(g, out)


def grad_norm_linf(f: Field) -> float:
    """Max face-gradient magnitude (discrete surrogate for ||grad f||_inf)."""
    q = gradient(f)
    mx = np.max(np.abs(q.fx)) if q.fx.size else 0.0
    my = np.max(np.abs(q.fy)) if q.fy.size else 0.0
    return float(max(mx, my))


def grad_sq_integral(f: Field) -> float:
    """Integral of |grad f|^2 from face-centered differences."""
    g = f.grid
    qx = (f.values[:, 1:] - f.values[:, :-1]) / g.hx
    qy = (f.values[1:, :] - f.values[:-1, :]) / g.hy
    return (float(np.sum(qx * qx)) + float(np.sum(qy * qy))) * g.cell_area


# ---------------------------------------------------------------------------
# snapshot I/O: ASCII header + little-endian float64 payload, row-major

_HEADER_RE = re.compile(rb"^HSIM1 (\S+) (\S+) (\S+) (\S+) (\S+)\n$")


def write_snapshot(path, f: Field, t: float):
    g = f.grid
    header = f"HSIM1 {g.nx} {g.ny} {g.domain.lx!r} {g.domain.ly!r} {float(t)!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path):
    """Returns (Field, t)."""
    with open(path, "rb") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header)
        if not m:
            raise DomainError(f"{path}: not an HSIM1 snapshot")
        nx, ny = int(m.group(1)), int(m.group(2))
        lx, ly, t = (float(m.group(k)) for k in (3, 4, 5))
        payload = fh.read(nx * ny * 8)
        if len(payload) != nx * ny * 8:
            raise DomainError(f"{path}: truncated payload")
        vals = np.frombuffer(payload, dtype="<f8").reshape(ny, nx)
    grid = Grid(nx, ny, DomainSpec(lx, ly))
    return Field(grid, vals.astype(float)), t


def write_pgm(path, f: Field):
    """8-bit portable graymap with linear min-max scaling, for eyeballing."""
    v = f.values
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip((v - lo) * scale, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{f.grid.nx} {f.grid.ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
