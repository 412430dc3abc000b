"""Monotone graphs, their Yosida regularization, and smooth couplings.

The phase constraint enters the model through a maximal monotone graph
beta, the subdifferential of a convex potential beta_hat with
beta_hat(0) = 0.  Three variants are supported: the zero graph, the
subdifferential of the indicator of a box [lo, hi] containing 0, and odd
polynomials with nonnegative coefficients (p(x) = c0*x + c1*x^3 + ...).
Solvers never touch the multivalued graph directly; they use its resolvent
(I + mu*beta)^(-1) and the single-valued, 1/mu-Lipschitz Yosida map
beta_mu = (I - resolvent)/mu.

Smooth couplings (the entropy/phase coupling and the phase self-interaction)
are polynomials of degree <= 3, which keeps their derivatives Lipschitz on
every bounded interval.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NumericsError

__all__ = [
    "ZeroGraph",
    "BoxIndicatorGraph",
    "OddPolynomialGraph",
    "MonotoneGraph",
    "SmoothNonlinearity",
    "beta_hat_value",
    "resolvent",
    "yosida",
    "yosida_derivative",
    "moreau_envelope",
    "psi_value",
    "solve_scalar_log",
]


@dataclass(frozen=True)
class ZeroGraph:
    """beta identically {0}: no constraint on the phase variable."""


@dataclass(frozen=True)
class BoxIndicatorGraph:
    """Subdifferential of the indicator of [lo, hi]; requires lo <= 0 <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("box bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError("box indicator requires lo < hi")
        if not (self.lo <= 0.0 <= self.hi):
            raise ValueError("box indicator requires lo <= 0 <= hi so that beta(0) contains 0")


@dataclass(frozen=True)
class OddPolynomialGraph:
    """p(x) = sum_m odd_coefficients[m] * x^(2m+1) with nonnegative coefficients."""

    odd_coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.odd_coefficients)
        if not coeffs:
            raise ValueError("odd polynomial graph needs at least one coefficient")
        if any(not np.isfinite(c) or c < 0.0 for c in coeffs):
            raise ValueError("odd polynomial coefficients must be finite and nonnegative")
        object.__setattr__(self, "odd_coefficients", coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        power = x.copy()
        xsq = x * x
        for c in self.odd_coefficients:
            out = out + c * power
            power = power * xsq
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        power = np.ones_like(x)
        xsq = x * x
        for m, c in enumerate(self.odd_coefficients):
            out = out + (2 * m + 1) * c * power
            power = power * xsq
        return out


MonotoneGraph = Union[ZeroGraph, BoxIndicatorGraph, OddPolynomialGraph]


def beta_hat_value(graph, r):
    """The convex potential beta_hat at r (may be +inf outside a box)."""
    if isinstance(graph, ZeroGraph):
        return 0.0
    if isinstance(graph, BoxIndicatorGraph):
        return 0.0 if graph.lo <= r <= graph.hi else math.inf
    if isinstance(graph, OddPolynomialGraph):
        return float(
            sum(c * r ** (2 * m + 2) / (2 * m + 2) for m, c in enumerate(graph.odd_coefficients))
        )
    raise TypeError(f"not a monotone graph: {graph!r}")


def resolvent(graph, mu, r):
    """The resolvent (I + mu*beta)^(-1) at r; accepts scalars or arrays."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    r_arr = np.asarray(r, dtype=float)
    if isinstance(graph, ZeroGraph):
        out = r_arr.copy()
    elif isinstance(graph, BoxIndicatorGraph):
        out = np.clip(r_arr, graph.lo, graph.hi)
    elif isinstance(graph, OddPolynomialGraph):
        out = _poly_resolvent(graph, mu, r_arr)
    else:
        raise TypeError(f"not a monotone graph: {graph!r}")
    return out if out.ndim else float(out)


def _poly_resolvent(graph, mu, r, max_iters=100):
    """Safeguarded Newton for x + mu*p(x) = r, elementwise on the bracket [0, r]."""
    lo_b = np.minimum(r, 0.0)
    hi_b = np.maximum(r, 0.0)
    x = r.copy()
    rtol = 1e-12 * (1.0 + np.abs(r))
    for _ in range(max_iters):
        g = x + mu * graph(x) - r
        done = np.abs(g) <= rtol
        if done.all():
            return x
        hi_b = np.where(~done & (g > 0.0), x, hi_b)
        lo_b = np.where(~done & (g <= 0.0), x, lo_b)
        xn = x - g / (1.0 + mu * graph.derivative(x))
        outside = (xn <= lo_b) | (xn >= hi_b)
        xn = np.where(outside, 0.5 * (lo_b + hi_b), xn)
        x = np.where(done, x, xn)
    raise NumericsError("polynomial resolvent iteration did not converge")


def yosida(graph, mu, r):
    """The Yosida map beta_mu(r) = (r - resolvent(r))/mu (monotone, 1/mu-Lipschitz)."""
    res = resolvent(graph, mu, r)
    return (np.asarray(r, dtype=float) - res) / mu if np.ndim(r) else (r - res) / mu


def yosida_derivative(graph, mu, r):
    """Derivative of the Yosida map where it exists (used in Newton Jacobians)."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    r_arr = np.asarray(r, dtype=float)
    if isinstance(graph, ZeroGraph):
        out = np.zeros_like(r_arr)
    elif isinstance(graph, BoxIndicatorGraph):
        out = np.where((r_arr < graph.lo) | (r_arr > graph.hi), 1.0 / mu, 0.0)
    elif isinstance(graph, OddPolynomialGraph):
        pd = graph.derivative(_poly_resolvent(graph, mu, r_arr))
        out = pd / (1.0 + mu * pd)
    else:
        raise TypeError(f"not a monotone graph: {graph!r}")
    return out if out.ndim else float(out)


def moreau_envelope(graph, mu, r):
    """beta_hat_mu(r) = beta_hat(R) + (r - R)^2/(2 mu) with R the resolvent.

    This is the smooth potential whose derivative is the Yosida map; it is
    what the discrete energy identity accumulates in place of beta_hat.
    """
    r_arr = np.asarray(r, dtype=float)
    res = np.asarray(resolvent(graph, mu, r_arr), dtype=float)
    if isinstance(graph, ZeroGraph):
        base = np.zeros_like(res)
    elif isinstance(graph, BoxIndicatorGraph):
        base = np.zeros_like(res)  # indicator vanishes on the box, and R lands in it
    else:
        base = np.zeros_like(res)
        for m, c in enumerate(graph.odd_coefficients):
            base = base + c * res ** (2 * m + 2) / (2 * m + 2)
    out = base + 0.5 * (r_arr - res) ** 2 / mu
    return out if out.ndim else float(out)


def psi_value(r):
    """Entropy density r*(log r - 1) for r > 0, 0 at r = 0, +inf for r < 0."""
    r_arr = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            r_arr > 0.0,
            r_arr * (np.log(np.where(r_arr > 0.0, r_arr, 1.0)) - 1.0),
            np.where(r_arr == 0.0, 0.0, math.inf),
        )
    return out if out.ndim else float(out)


def solve_scalar_log(a, c, b, max_iters=100, max_halvings=60):
    """Solve a*ln(theta) + c*theta = b for the unique theta > 0.

    Damped Newton from theta = 1 with a positivity line search (the step is
    halved until the iterate stays positive), converged to
    ``|a*ln(theta) + c*theta - b| <= 1e-12 * (1 + |b|)``.
    """
    if not (np.isfinite(a) and a > 0.0):
        raise ValueError("a must be positive")
    if not (np.isfinite(c) and c >= 0.0):
        raise ValueError("c must be nonnegative")
    if not np.isfinite(b):
        raise ValueError("b must be finite")
    tol = 1e-12 * (1.0 + abs(b))
    theta = 1.0
    for _ in range(max_iters):
        g = a * math.log(theta) + c * theta - b
        if abs(g) <= tol:
            return theta
        step = -g / (a / theta + c)
        scale = 1.0
        halvings = 0
        while theta + scale * step <= 0.0:
            scale *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise NumericsError("positivity line search exhausted in solve_scalar_log")
        theta += scale * step
    raise NumericsError("solve_scalar_log did not converge within the iteration cap")


@dataclass(frozen=True)
class SmoothNonlinearity:
    """Polynomial coupling of degree <= 3 with its exact derivative.

    ``coefficients`` are in increasing powers.  ``lipschitz_of_derivative``
    bounds |second derivative| on the reference interval [-10, 10], which
    covers every range the solutions visit in practice.
    """

    coefficients: tuple
    lipschitz_of_derivative: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) > 4:
            raise ValueError("smooth nonlinearities are limited to degree 3")
        if not coeffs:
            coeffs = (0.0,)
        if any(not np.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        c2 = coeffs[2] if len(coeffs) > 2 else 0.0
        c3 = coeffs[3] if len(coeffs) > 3 else 0.0
        lip = max(abs(2.0 * c2 + 6.0 * c3 * 10.0), abs(2.0 * c2 - 6.0 * c3 * 10.0))
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "lipschitz_of_derivative", lip)
        self._spot_check_derivative()

    def _spot_check_derivative(self):
        # centered finite differences at a few fixed points, 1e-6 relative
        pts = np.array([-2.3, -0.7, 0.31, 1.9])
        eh = 1e-6
        fd = (self.value(pts + eh) - self.value(pts - eh)) / (2.0 * eh)
        scale = 1.0 + np.abs(self.derivative(pts))
        if np.any(np.abs(fd - self.derivative(pts)) > 1e-6 * scale):
            raise ValueError("stored derivative disagrees with finite differences")

    def value(self, r):
        return npoly.polyval(r, self.coefficients)

    def derivative(self, r):
        return npoly.polyval(r, npoly.polyder(self.coefficients))

    @classmethod
    def zero(cls):
        return cls((0.0,))

    @classmethod
    def linear(cls, a, b):
        """a + b*r"""
        return cls((a, b))

    @classmethod
    def quadratic(cls, a, b, c):
        """a + b*r + c*r^2"""
        return cls((a, b, c))
