"""Closed-form threshold constants, kernel integrals and analytic bounds.

Everything here is a pure function of model parameters and the rectangle
geometry; nothing depends on a grid or a simulation.  The central object
is the heat-kernel mass integral

    zeta(t; d) = int_0^t  exp(-(s + d^2/(4s))) / (4 pi s)  ds,

whose value at t = infinity equals K0(d)/(2 pi) (modified Bessel).  The
chemical field of the model is bounded below by m * zeta(t; diam), which
yields the remodeling-rate threshold eta < v_inf_m, the midpoint time
delta, and the explicit lower bound for the norms of the concentrating
family in the supercritical regime.

t = infinity is passed as the distinguished float value math.inf, never as
a large finite float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

from .domain import DomainError, DomainSpec


class InvalidMassError(ValueError):
    pass


class NoFiniteRootError(ValueError):
    """The smallness condition eta < v_inf_m fails: no finite delta."""


class InvalidRegimeError(ValueError):
    """Parameters outside the supercritical regime m*chi > 4*pi."""


class BlowupForced(ValueError):
    """xi = 0: the bounded-but-large alternative is impossible, a genuine
    blow-up must occur (the bound would be +infinity)."""


class NumericalIntegrationError(ArithmeticError):
    pass


def heat_kernel_integral(t: float, diam: float) -> float:
    """zeta(t; diam), by adaptive quadrature.  Absolute error <= 1e-12.

    Nondecreasing in t; t = math.inf is allowed and gives K0(diam)/(2 pi).
    """
    if not diam > 0:
        raise DomainError(f"diam must be positive, got {diam}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0
    d2 = diam * diam

    def g(s):
        return math.exp(-(s + d2 / (4.0 * s))) / (4.0 * math.pi * s)

    if math.isinf(t):
        val, err = integrate.quad(g, 0.0, math.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        # the integrand peaks near s = diam/2; pass it as a breakpoint
        pts = [diam / 2.0] if diam / 2.0 < t else None
        val, err = integrate.quad(
            g, 0.0, t, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200
        )
    if err > 1e-12:
        raise NumericalIntegrationError(
            f"zeta({t}, {diam}): quadrature error estimate {err:.2e} > 1e-12"
        )
    return max(val, 0.0)


def v_lower_bound(m: float, diam: float, t: float = math.inf) -> float:
    """Guaranteed floor of the chemical field: m * zeta(t; diam).

    t = math.inf gives v_inf_m; finite t gives the floor valid from time t
    on (fully parabolic case).  Linear in m, increasing in t.
    """
    if not m > 0:
        raise InvalidMassError(f"mass must be positive, got {m}")
    return m * heat_kernel_integral(t, diam)


def delta_time(m: float, eta: float, diam: float) -> float:
    """The time delta at which m*zeta(delta) reaches (eta + v_inf_m)/2.

    Unique by strict monotonicity of zeta; found by bisection with bracket
    expansion.  Residual of the defining equation <= 1e-10.
    """
    if not m > 0:
        raise InvalidMassError(f"mass must be positive, got {m}")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    v_inf = v_lower_bound(m, diam)
    if eta >= v_inf:
        raise NoFiniteRootError(
            f"eta = {eta} >= v_inf_m = {v_inf}: midpoint level is unreachable"
        )
    target = 0.5 * (eta + v_inf)

    def f(t):
        return m * heat_kernel_integral(t, diam) - target

    lo, hi = 1e-8, 1e4
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise NoFiniteRootError(
                f"could not bracket delta for eta = {eta}, v_inf_m = {v_inf}"
            )
    if f(lo) > 0:
        lo = 1e-300
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = f(mid)
        if abs(r) <= 1e-11:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
    raise NumericalIntegrationError("delta bisection did not reach residual 1e-11")


def lambda1(domain: DomainSpec) -> float:
    """First nonzero Neumann eigenvalue of -Lap on the rectangle."""
    return min((math.pi / domain.lx) ** 2, (math.pi / domain.ly) ** 2)


@dataclass(frozen=True)
class KernelConstants:
    """Derived threshold quantities for a given (m, domain, eta)."""

    m: float
    v_inf_m: float
    delta: float
    lambda1: float

    @classmethod
    def derive(cls, m: float, eta: float, domain: DomainSpec) -> "KernelConstants":
        v_inf = v_lower_bound(m, domain.diam)
        d = delta_time(m, eta, domain.diam) if eta < v_inf else math.inf
        return cls(m=m, v_inf_m=v_inf, delta=d, lambda1=lambda1(domain))


def blowup_lower_bound(
    m: float,
    chi: float,
    xi: float,
    eta: float,
    k_cap: float,
    diam: float,
    per_mass: bool = False,
) -> float:
    """Explicit lower bound for the concentrating-family norms, per unit of
    ln(1/eps):

        4 (m chi - 4 pi)(v_inf_m - eta) / (K chi xi [2 + (v_inf_m - eta) delta])

    `per_mass=True` divides by m (the bound for ||u||_inf and ||v||_inf
    rather than for ||u v||_L1).  Homogeneous of degree -1 in xi.
    """
    if not chi > 0:
        raise InvalidRegimeError(f"chi must be positive, got {chi}")
    if m * chi <= 4.0 * math.pi:
        raise InvalidRegimeError(
            f"m*chi = {m * chi} <= 4*pi: subcritical, bound does not apply"
        )
    if k_cap < 1:
        raise ValueError(f"K = max(1, sup w0) must be >= 1, got {k_cap}")
    if xi < 0:
        raise ValueError(f"xi must be >= 0, got {xi}")
    if xi == 0:
        raise BlowupForced(
            "xi = 0: bound is +infinity, a genuine blow-up must occur"
        )
    v_inf = v_lower_bound(m, diam)
    if eta >= v_inf:
        raise NoFiniteRootError(f"eta = {eta} >= v_inf_m = {v_inf}")
    gap = v_inf - eta
    delta = delta_time(m, eta, diam)
    val = 4.0 * (m * chi - 4.0 * math.pi) * gap / (k_cap * chi * xi * (2.0 + gap * delta))
    return val / m if per_mass else val


@dataclass(frozen=True)
class FreeEnergyBound:
    """Upper bound  slope * ln(1/eps) + r_eps  for the chemotaxis free
    energy of the concentrating family."""

    value: float
    slope: float
    r_eps: float
    eps: float


def free_energy_upper_bound(
    eps: float, m: float, chi: float, domain: DomainSpec, x0: tuple[float, float]
) -> FreeEnergyBound:
    """Evaluate -4 (m - 4 pi / chi) ln(1/eps) + R_eps.

    R_eps collects the eps-uniformly-bounded remainder; its two domain
    integrals (of ln(eps^2 + pi |x-x0|^2) and its square) are evaluated by
    adaptive quadrature to absolute error <= 1e-8.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not chi > 0:
        raise ValueError(f"chi must be positive, got {chi}")
    if not m > 0:
        raise InvalidMassError(f"mass must be positive, got {m}")
    _require_on_boundary(domain, x0)

    e2 = eps * eps
    big_r = max(math.hypot(cx - x0[0], cy - x0[1]) for cx, cy in domain.corners())
    area = domain.area

    def log_term(y, x):
        r2 = (x - x0[0]) ** 2 + (y - x0[1]) ** 2
        return 2.0 * math.log(e2 + math.pi * r2)

    def log_term_sq(y, x):
        r2 = (x - x0[0]) ** 2 + (y - x0[1]) ** 2
        t = 2.0 * math.log(e2 + math.pi * r2)
        return t * t

    i1 = _dblquad(log_term, domain)
    i2 = _dblquad(log_term_sq, domain)

    edge = e2 + math.pi * big_r * big_r
    r_eps = (
        m * math.log(m)
        - m / area * i1
        - m * math.log(area / edge**2)
        + 8.0 * math.pi / chi * (math.log(edge) + e2 / edge - 1.0)
        + 1.0 / (2.0 * chi) * i2
        - 1.0 / (2.0 * chi * area) * i1 * i1
    )
    slope = -4.0 * (m - 4.0 * math.pi / chi)
    return FreeEnergyBound(
        value=slope * math.log(1.0 / eps) + r_eps, slope=slope, r_eps=r_eps, eps=eps
    )


def _dblquad(fn, domain: DomainSpec) -> float:
    val, err = integrate.dblquad(
        fn, 0.0, domain.lx, 0.0, domain.ly, epsabs=1e-9, epsrel=1e-10
    )
    if err > 1e-8:
        raise NumericalIntegrationError(
            f"domain quadrature error estimate {err:.2e} > 1e-8"
        )
    return val


def _require_on_boundary(domain: DomainSpec, x0, tol_frac=1e-9):
    x, y = x0
    tol = tol_frac * domain.diam
    inside = -tol <= x <= domain.lx + tol and -tol <= y <= domain.ly + tol
    on_edge = (
        min(abs(x), abs(x - domain.lx)) <= tol or min(abs(y), abs(y - domain.ly)) <= tol
    )
    if not (inside and on_edge):
        raise DomainError(f"x0 = {x0} is not on the boundary of {domain}")
