"""Memory kernels for the heat-flux history term and their diagnostics.

A kernel k acts on a nodal temperature history through the time convolution
``(k * theta)(t) = int_0^t k(s) theta(t - s) ds``.  Three variants are
supported: the zero kernel, the exponential family
``k(t) = (amplitude/timescale) * exp(-t/timescale)`` whose cumulative
integral concentrates to ``amplitude`` as the timescale shrinks, and a
tabulated kernel interpolated linearly between samples (held constant
beyond the last sample).

Besides pointwise and cumulative evaluation, the module provides the
L1 distance of the cumulative integral from its concentration limit, the
sufficient positive-type conditions (nonnegative, non-increasing, convex),
a discrete estimate of the coercivity constant of the quadratic form
``v -> int_0^T (kappa0*v + k*v) v dt``, and two realizations of the running
convolution state: an exact recursion for exponential kernels and a full
stored history for general ones.
"""

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import NumericsError

__all__ = [
    "ZeroKernel",
    "ExponentialKernel",
    "TabulatedKernel",
    "MemoryKernel",
    "ExponentialMemory",
    "FullHistoryMemory",
    "NoMemory",
    "MemoryState",
    "KernelReport",
    "eval_kernel",
    "cumulative_kernel",
    "l1_norm",
    "l1_deviation",
    "check_positive_type_sufficient",
    "estimate_coercivity_constant",
    "convolve_history",
    "advance_exponential_memory",
    "exponential_step_coefficients",
    "kernel_report",
]


@dataclass(frozen=True)
class ZeroKernel:
    """The identically zero kernel (memory-free limit problem)."""


@dataclass(frozen=True)
class ExponentialKernel:
    """k(t) = (amplitude/timescale) * exp(-t/timescale).

    ``amplitude`` is the total mass of the kernel on (0, inf); the cumulative
    integral tends to it monotonically, so shrinking ``timescale`` with fixed
    ``amplitude`` concentrates the kernel at the origin.
    """

    amplitude: float
    timescale: float

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude > 0.0):
            raise ValueError("exponential kernel requires amplitude > 0")
        if not (np.isfinite(self.timescale) and self.timescale > 0.0):
            raise ValueError("exponential kernel requires timescale > 0")


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear kernel through (times, values) samples.

    ``times`` must be strictly increasing and start at 0; beyond the last
    sample the kernel is held constant at the last value.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        if times.size < 2:
            raise ValueError("a tabulated kernel needs at least two samples")
        if times[0] != 0.0:
            raise ValueError("tabulated kernel times must start at 0")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("tabulated kernel times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("tabulated kernel samples must be finite")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


MemoryKernel = Union[ZeroKernel, ExponentialKernel, TabulatedKernel]


@dataclass
class ExponentialMemory:
    """Running convolution state for an exponential kernel.

    ``weights`` holds, node by node (boundary nodes included), the value of
    the convolution of the kernel with the piecewise-linear-in-time
    interpolant of the visited fields at ``last_time``.
    """

    weights: np.ndarray
    last_time: float = 0.0


@dataclass
class FullHistoryMemory:
    """Stored snapshots theta^0..theta^n for general kernels (O(n*N) memory)."""

    snapshots: list = field(default_factory=list)
    last_time: float = 0.0


@dataclass
class NoMemory:
    """Placeholder state when the kernel is zero and no history is needed."""

    last_time: float = 0.0


MemoryState = Union[ExponentialMemory, FullHistoryMemory, NoMemory]


@dataclass(frozen=True)
class KernelReport:
    """Summary diagnostics of one kernel against the structural hypotheses."""

    l1_norm: float
    l1_deviation: float
    positive_type_sufficient: bool
    coercivity_estimate: float


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("kernel evaluation times must be finite")
    if np.any(t < 0.0):
        raise ValueError("kernel evaluation times must be nonnegative")
    return t


def eval_kernel(k, t):
    """Evaluate k(t); accepts a scalar or an array of nonnegative times."""
    t = _check_times(t)
    if isinstance(k, ZeroKernel):
        out = np.zeros_like(t)
    elif isinstance(k, ExponentialKernel):
        out = (k.amplitude / k.timescale) * np.exp(-t / k.timescale)
    elif isinstance(k, TabulatedKernel):
        out = np.interp(t, k.times, k.values)
    else:
        raise TypeError(f"not a memory kernel: {k!r}")
    return out if out.ndim else float(out)


def cumulative_kernel(k, t):
    """Evaluate (1*k)(t) = int_0^t k(s) ds exactly for every variant."""
    t = _check_times(t)
    if isinstance(k, ZeroKernel):
        out = np.zeros_like(t)
    elif isinstance(k, ExponentialKernel):
        out = k.amplitude * (-np.expm1(-t / k.timescale))
    elif isinstance(k, TabulatedKernel):
        out = _tabulated_cumulative(k, t)
    else:
        raise TypeError(f"not a memory kernel: {k!r}")
    return out if out.ndim else float(out)


def _tabulated_cumulative(k, t):
    """Exact integral of the piecewise-linear interpolant up to each t."""
    times, values = k.times, k.values
    seg = 0.5 * (values[1:] + values[:-1]) * np.diff(times)
    knots = np.concatenate(([0.0], np.cumsum(seg)))
    idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2)
    t0 = times[idx]
    dt_seg = times[idx + 1] - t0
    slope = (values[idx + 1] - values[idx]) / dt_seg
    s = np.minimum(t, times[-1]) - t0
    out = knots[idx] + values[idx] * s + 0.5 * slope * s * s
    # constant extension beyond the last sample
    tail = t > times[-1]
    if np.any(tail):
        out = np.where(tail, knots[-1] + values[-1] * (t - times[-1]), out)
    return out


def l1_norm(k, T):
    """The L1 norm of the kernel on (0, T), exact for every variant."""
    if T <= 0.0 or not np.isfinite(T):
        raise ValueError("T must be positive and finite")
    if isinstance(k, ZeroKernel):
        return 0.0
    if isinstance(k, ExponentialKernel):
        return k.amplitude * (-math.expm1(-T / k.timescale))
    if isinstance(k, TabulatedKernel):
        return _tabulated_abs_integral(k, T)
    raise TypeError(f"not a memory kernel: {k!r}")


def _tabulated_abs_integral(k, T):
    """Exact integral of |piecewise-linear interpolant| on (0, T)."""
    total = 0.0
    times, values = k.times, k.values
    for i in range(times.size - 1):
        a, b = times[i], times[i + 1]
        if a >= T:
            break
        va, vb = values[i], values[i + 1]
        if b > T:  # clip the segment at T
            vb = va + (vb - va) * (T - a) / (b - a)
            b = T
        if va * vb >= 0.0:
            total += 0.5 * abs(va + vb) * (b - a)
        else:  # split at the zero crossing into two triangles
            c = a + (b - a) * va / (va - vb)
            total += 0.5 * abs(va) * (c - a) + 0.5 * abs(vb) * (b - c)
    if T > times[-1]:
        total += abs(values[-1]) * (T - times[-1])
    return total


def l1_deviation(k, kappa0_prime, T, n_points=10_000):
    """Integral of |(1*k)(t) - kappa0_prime| over (0, T).

    Uses the closed form ``kappa0_prime * timescale * (1 - exp(-T/timescale))``
    for an exponential kernel whose amplitude equals ``kappa0_prime`` and for
    the zero kernel; otherwise composite trapezoid quadrature on ``n_points``
    intervals (the cumulative integral itself is always exact).
    """
    if T <= 0.0 or not np.isfinite(T):
        raise ValueError("T must be positive and finite")
    if isinstance(k, ZeroKernel):
        return abs(kappa0_prime) * T
    if isinstance(k, ExponentialKernel) and k.amplitude == kappa0_prime:
        eps = k.timescale
        return kappa0_prime * eps * (-math.expm1(-T / eps))
    t = np.linspace(0.0, T, n_points + 1)
    integrand = np.abs(cumulative_kernel(k, t) - kappa0_prime)
    return float(np.trapezoid(integrand, t))


def check_positive_type_sufficient(k):
    """Sufficient positive-type conditions: nonnegative, non-increasing, convex.

    Exact for the zero and exponential variants; a tabulated kernel is
    checked on its samples through divided differences with tolerance
    ``1e-12 * max(1, max|values|)``.
    """
    if isinstance(k, (ZeroKernel, ExponentialKernel)):
        return True
    if not isinstance(k, TabulatedKernel):
        raise TypeError(f"not a memory kernel: {k!r}")
    times, values = k.times, k.values
    tol = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    if np.any(values < -tol):
        return False
    first = np.diff(values) / np.diff(times)
    if np.any(first > tol):
        return False
    if first.size >= 2:
        second = np.diff(first) / (times[2:] - times[:-2])
        if np.any(second < -tol):
            return False
    return True


def _coercivity_matrix(k, kappa0, T, n_grid):
    """Symmetric matrix Q with delta * v^T Q v ~ int_0^T (kappa0*v + k*v) v dt.

    v is sampled at t_i = (i+1)*delta, i = 0..n_grid-1, delta = T/n_grid.
    The history integral uses composite trapezoid weights on that grid with
    a zero anchor at s = 0 (where v carries no degree of freedom), which
    keeps the symmetrized convolution matrix of a positive-type kernel
    positive semidefinite.
    """
    delta = T / n_grid
    lags = eval_kernel(k, delta * np.arange(n_grid))
    col = np.asarray(lags, dtype=float) * delta
    kmat = np.zeros((n_grid, n_grid))
    for i in range(n_grid):
        kmat[i, : i + 1] = col[: i + 1][::-1]
        kmat[i, i] = 0.5 * col[0]
    return kappa0 * np.eye(n_grid) + 0.5 * (kmat + kmat.T)


def _smallest_eigenvalue(q, tol=1e-8, max_iters=10_000):
    """Smallest eigenvalue of a symmetric matrix by shifted inverse power."""
    n = q.shape[0]
    gersh = float(np.min(np.diag(q) - (np.sum(np.abs(q), axis=1) - np.abs(np.diag(q)))))
    scale = max(1.0, float(np.max(np.abs(q))))
    shift = gersh - 1e-8 * scale
    a = q - shift * np.eye(n)
    x = np.linspace(1.0, 2.0, n)
    x /= np.linalg.norm(x)
    lam = float(x @ (q @ x))
    for _ in range(max_iters):
        y = np.linalg.solve(a, x)
        x = y / np.linalg.norm(y)
        lam_new = float(x @ (q @ x))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    raise NumericsError("inverse power iteration did not converge")


def estimate_coercivity_constant(k, kappa0, T, n_grid, tol=1e-8, max_iters=10_000):
    """Discrete coercivity constant of v -> int_0^T (kappa0*v + k*v) v dt.

    Returns the smallest eigenvalue of the symmetrized discrete quadratic
    form on an ``n_grid``-point grid; for the zero kernel this is exactly
    ``kappa0`` and for any kernel meeting the positive-type sufficient
    conditions it is >= ``kappa0`` up to the eigensolver tolerance.  The
    value is grid-dependent and makes no claim about the continuum constant.
    """
    if not (np.isfinite(kappa0) and kappa0 > 0.0):
        raise ValueError("kappa0 must be positive")
    if n_grid < 8:
        raise ValueError("n_grid must be at least 8")
    if T <= 0.0 or not np.isfinite(T):
        raise ValueError("T must be positive and finite")
    if isinstance(k, ZeroKernel):
        return float(kappa0)
    q = _coercivity_matrix(k, kappa0, T, n_grid)
    return _smallest_eigenvalue(q, tol=tol, max_iters=max_iters)


def convolve_history(k, history, dt):
    """Trapezoid evaluation of (k*theta)(t_n) from a full stored history.

    ``history.snapshots`` holds the nodal fields theta(t_0)..theta(t_n) on a
    uniform grid of spacing ``dt``; the result is the nodal field of the
    convolution at the last stored time.
    """
    if not isinstance(history, FullHistoryMemory) or not history.snapshots:
        raise ValueError("convolve_history requires a nonempty stored history")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    snaps = np.asarray(history.snapshots)
    n = snaps.shape[0] - 1
    if n == 0:
        return np.zeros(snaps.shape[1])
    weights = np.full(n + 1, dt)
    weights[0] = weights[-1] = 0.5 * dt
    lags = eval_kernel(k, dt * np.arange(n, -1, -1))
    return (weights * np.asarray(lags, dtype=float)) @ snaps


def exponential_step_coefficients(k, dt):
    """Exact one-step update coefficients for an exponential kernel.

    For the piecewise-linear interpolant between two consecutive fields, the
    convolution obeys ``w_new = decay * w_old + a_new * theta_new +
    b_old * theta_old`` with the coefficients returned here; ``a_new`` is the
    implicit weight of the not-yet-known field.
    """
    if not isinstance(k, ExponentialKernel):
        raise TypeError("exponential step coefficients need an exponential kernel")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    eps = k.timescale
    decay = math.exp(-dt / eps)
    em1 = -math.expm1(-dt / eps)  # 1 - decay, accurate for dt << eps
    ramp = (eps / dt) * em1
    a_new = k.amplitude * (1.0 - ramp)
    b_old = k.amplitude * (ramp - decay)
    return decay, a_new, b_old


def advance_exponential_memory(state, k, theta_old, theta_new, dt):
    """Advance the exponential convolution state by one step of size dt.

    The segment integral over (t_n, t_n + dt) is evaluated in closed form for
    the linear interpolant between ``theta_old`` and ``theta_new``, so after
    any number of steps the weights equal the convolution of the kernel with
    the piecewise-linear history exactly (up to round-off).
    """
    if not isinstance(state, ExponentialMemory):
        raise TypeError("advance_exponential_memory needs an ExponentialMemory state")
    decay, a_new, b_old = exponential_step_coefficients(k, dt)
    theta_old = np.asarray(theta_old, dtype=float)
    theta_new = np.asarray(theta_new, dtype=float)
    weights = decay * state.weights + a_new * theta_new + b_old * theta_old
    return ExponentialMemory(weights=weights, last_time=state.last_time + dt)


def kernel_report(k, kappa0, kappa0_prime, T, n_grid=128):
    """Assemble the kernel diagnostics used by the `kernel` CLI subcommand."""
    return KernelReport(
        l1_norm=l1_norm(k, T),
        l1_deviation=l1_deviation(k, kappa0_prime, T),
        positive_type_sufficient=check_positive_type_sufficient(k),
        coercivity_estimate=estimate_coercivity_constant(k, kappa0, T, n_grid),
    )
