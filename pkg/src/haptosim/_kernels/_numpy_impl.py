"""Vectorized numpy implementations of the hot grid kernels.

This is the fallback backend used when the compiled extension is not
available.  Both backends share the same stencil evaluation order so that
`divergence(gradient(f))` and `laplacian(f)` agree bitwise and the two
backends can be cross-checked at tight tolerances.

Arrays are C-contiguous float64 of shape (ny, nx); x runs along axis 1.
All stencils close the boundary with mirror ghost cells, i.e. zero
difference across boundary faces (homogeneous Neumann / no-flux).
"""

import numpy as np

BACKEND = "numpy"


def shifted_laplacian(x, a, b, hx, hy, out):
    """out = a*x - b*lap(x) with the mirror-ghost 5-point Laplacian."""
    lap = np.zeros_like(x)
    qx = (x[:, 1:] - x[:, :-1]) / hx
    qy = (x[1:, :] - x[:-1, :]) / hy
    lap[:, :-1] += qx / hx
    lap[:, 1:] -= qx / hx
    lap[:-1, :] += qy / hy
    lap[1:, :] -= qy / hy
    np.multiply(x, a, out=out)
    out -= b * lap
    return out


def upwind_divergence(u, p, hx, hy, out):
    """Divergence of the first-order upwind flux u_donor * grad(p).

    Face velocity is the face-normal difference quotient of the potential
    p; the donor cell is chosen by the velocity sign.  Boundary faces
    carry zero flux.
    """
    vx = (p[:, 1:] - p[:, :-1]) / hx
    vy = (p[1:, :] - p[:-1, :]) / hy
    fx = np.where(vx > 0.0, u[:, :-1], u[:, 1:]) * vx
    fy = np.where(vy > 0.0, u[:-1, :], u[1:, :]) * vy
    out[:] = 0.0
    out[:, :-1] += fx / hx
    out[:, 1:] -= fx / hx
    out[:-1, :] += fy / hy
    out[1:, :] -= fy / hy
    return out


def max_face_speeds(p, hx, hy):
    """Largest |grad p| per direction over interior faces."""
    if p.shape[1] > 1:
        sx = float(np.max(np.abs(p[:, 1:] - p[:, :-1]))) / hx
    else:
        sx = 0.0
    if p.shape[0] > 1:
        sy = float(np.max(np.abs(p[1:, :] - p[:-1, :]))) / hy
    else:
        sy = 0.0
    return sx, sy
