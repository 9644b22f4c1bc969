"""Initial data constructors.

The concentrating family (U_eps, V_eps) anchors a logarithmic chemical
profile at a boundary point x0 and puts the cell density proportional to
exp(chi V_eps), normalized to total mass m.  Normalizations (mean-zero V,
mass-m U) are taken against the discrete quadrature so the discrete
invariants hold exactly.  The family is the supercritical-regime probe:
as eps -> 0 its chemotaxis free energy drops like the slope
-4 (m - 4 pi / chi) per unit ln(1/eps).

`bump` provides generic smooth compactly-supported data for the bounded
regimes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import DomainError, Field, Grid, integrate


@dataclass(frozen=True)
class BlowupFamilySpec:
    eps: float
    m: float
    chi: float
    x0: tuple[float, float]

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not self.m > 0:
            raise DomainError(f"mass must be positive, got {self.m}")
        if not self.chi > 0:
            raise DomainError(f"chi must be positive, got {self.chi}")


def snap_to_boundary(grid: Grid, point) -> tuple[float, float]:
    """Nearest boundary face center to `point` (the anchor must sit on the
    discrete boundary)."""
    x, y = point
    lx, ly = grid.domain.lx, grid.domain.ly
    x = min(max(x, 0.0), lx)
    y = min(max(y, 0.0), ly)
    # candidate: project onto each of the four edges, snapping the running
    # coordinate to the nearest face center along that edge
    fx = (min(int(x / grid.hx), grid.nx - 1) + 0.5) * grid.hx
    fy = (min(int(y / grid.hy), grid.ny - 1) + 0.5) * grid.hy
    candidates = [(fx, 0.0), (fx, ly), (0.0, fy), (lx, fy)]
    return min(candidates, key=lambda c: (c[0] - x) ** 2 + (c[1] - y) ** 2)


def _log_profile(grid: Grid, spec: BlowupFamilySpec):
    x0 = snap_to_boundary(grid, spec.x0)
    X, Y = grid.cell_centers()
    r2 = (X - x0[0]) ** 2 + (Y - x0[1]) ** 2
    e2 = spec.eps * spec.eps
    return np.log(e2 / (e2 + math.pi * r2) ** 2), x0


def _check_resolution(grid: Grid, spec: BlowupFamilySpec):
    if spec.eps < 2.0 * max(grid.hx, grid.hy):
        warnings.warn(
            f"eps = {spec.eps} is below two cells ({2 * max(grid.hx, grid.hy):.4g}); "
            "the concentrated density is not resolved on this grid",
            stacklevel=3,
        )


def v_eps(grid: Grid, spec: BlowupFamilySpec) -> Field:
    """Mean-zero logarithmic chemical profile peaked at the anchor."""
    _check_resolution(grid, spec)
    phi, _ = _log_profile(grid, spec)
    return Field(grid, (phi - phi.mean()) / spec.chi)


def u_eps(grid: Grid, spec: BlowupFamilySpec) -> Field:
    """Cell density m exp(chi V_eps)/int exp(chi V_eps); strictly positive
    and of discrete mass exactly m.  The exponent is shifted by its max
    before exponentiation to avoid overflow."""
    _check_resolution(grid, spec)
    phi, _ = _log_profile(grid, spec)
    v = phi - phi.mean()  # chi * V_eps
    ex = np.exp(v - v.max())
    u = spec.m * ex / (ex.sum() * grid.cell_area)
    return Field(grid, u)


def family_inf_v(grid: Grid, spec: BlowupFamilySpec) -> float:
    """Discrete infimum of V_eps (attained at the cell farthest from the
    anchor)."""
    return float(np.min(v_eps(grid, spec).values))


def shifted_initial_v(grid: Grid, spec: BlowupFamilySpec) -> Field:
    """Nonnegative initial chemical field V_eps - inf V_eps used when
    launching the original system from the concentrating family."""
    v = v_eps(grid, spec)
    return Field(grid, v.values - float(np.min(v.values)))


def translate_v(v: Field, t: float, grid: Grid, spec: BlowupFamilySpec,
                inf_v: float | None = None) -> Field:
    """Map the chemical field of the original system onto the shifted
    system: subtract the spatially uniform drift

        vbar(t) = -(inf V_eps + m/|O|) e^{-t} + m/|O|.

    At t = 0 this undoes the inf shift exactly: the translated field of
    V_eps - inf V_eps is V_eps again."""
    if inf_v is None:
        inf_v = family_inf_v(grid, spec)
    mbar = spec.m / grid.domain.area
    shift = -(inf_v + mbar) * math.exp(-t) + mbar
    return Field(grid, v.values - shift)


def bump(grid: Grid, center, radius: float, mass: float) -> Field:
    """C^1 cosine-squared bump of given total mass, supported in the disc
    of `radius` around `center`."""
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    X, Y = grid.cell_centers()
    r = np.hypot(X - center[0], Y - center[1])
    prof = np.where(r < radius, np.cos(0.5 * math.pi * r / radius) ** 2, 0.0)
    total = prof.sum() * grid.cell_area
    if total <= 0:
        raise DomainError("bump support does not intersect the grid")
    f = Field(grid, prof * (mass / total))
    assert abs(integrate(f) - mass) <= 1e-10 * max(1.0, abs(mass))
    return f
