"""Concentration sweeps: memory runs against the memory-free limit.

A sweep integrates the limit problem once, then one memory run per kernel
timescale, and measures how far each memory trajectory sits from the limit
trajectory in the mixed functional combining the accumulated temperature
difference in H1, the phase difference in L-infinity(L2) and L2(H1), and
the two nonnegative duality products (logarithm against temperature, Yosida
selection against phase).  The totals are paired with the L1 distance of
the cumulative kernel from its concentration constant, and the log-log
slope of that pairing is the empirical rate.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .kernels import ExponentialKernel, ZeroKernel, l1_deviation
from .solver import limit_config, run
from .grid import trapezoid_weights

__all__ = [
    "SweepPlan",
    "ErrorFunctional",
    "RateRow",
    "RateReport",
    "compute_error_functional",
    "run_sweep",
    "fit_rate",
    "sweep_flags",
]

DEFAULT_EPSILONS = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class SweepPlan:
    """One concentration experiment.

    The kernel family is the exponential prototype with amplitude
    ``base_config.kappa0_prime`` and timescale running over ``epsilons``
    (strictly decreasing); a zero amplitude degenerates the family to the
    zero kernel.  ``parallelism`` bounds the number of concurrent runs.
    """

    base_config: object
    epsilons: tuple = DEFAULT_EPSILONS
    parallelism: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0.0 for e in eps):
            raise ValueError("epsilons must be positive")
        if not all(b < a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        base = self.base_config
        if base.kappa0 + base.kappa0_prime <= 0.0:
            raise ValueError("kappa0 + kappa0_prime must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        object.__setattr__(self, "epsilons", eps)

    def kernel_for(self, epsilon):
        if self.base_config.kappa0_prime == 0.0:
            return ZeroKernel()
        return ExponentialKernel(amplitude=self.base_config.kappa0_prime, timescale=epsilon)


@dataclass(frozen=True)
class ErrorFunctional:
    """The measured left-hand side of the concentration estimate, by component."""

    sup_V_accum: float
    sup_H_chi: float
    l2_V_chi: float
    log_duality: float
    xi_duality: float

    @property
    def total(self):
        return self.sup_V_accum + self.sup_H_chi + self.l2_V_chi + self.log_duality + self.xi_duality


@dataclass(frozen=True)
class RateRow:
    epsilon: float
    l1_deviation: float
    functional: ErrorFunctional
    ratio: float


@dataclass(frozen=True)
class RateReport:
    """Sweep rows ordered by decreasing epsilon, plus the fitted rate."""

    rows: tuple
    fitted_slope: float
    ratio_max: float


def compute_error_functional(sol_eps, sol_limit):
    """Evaluate the error functional between two trajectories on one grid.

    Norms are trapezoid in space; time accumulation is right-endpoint
    rectangle, including the running accumulation of the temperature
    difference.  Both runs must share mesh, time grid, and Yosida parameter.
    """
    cfg_a, cfg_b = sol_eps.config, sol_limit.config
    if cfg_a.mesh != cfg_b.mesh:
        raise ValueError("trajectories live on different meshes")
    if not np.array_equal(sol_eps.times, sol_limit.times):
        raise ValueError("trajectories use different time grids")
    if cfg_a.mu != cfg_b.mu:
        raise ValueError("trajectories were produced with different Yosida parameters")
    mesh = cfg_a.mesh
    w = trapezoid_weights(mesh)
    h = mesh.h
    dt = float(sol_eps.times[1] - sol_eps.times[0])

    d_theta = sol_eps.theta - sol_limit.theta
    d_chi = sol_eps.chi - sol_limit.chi
    d_xi = sol_eps.xi - sol_limit.xi
    d_log = np.log(sol_eps.theta) - np.log(sol_limit.theta)

    accum = np.zeros_like(d_theta)
    accum[1:] = dt * np.cumsum(d_theta[1:], axis=0)
    grad_accum = np.diff(accum, axis=1) / h
    sup_v = float(
        np.max(np.sum(w * accum * accum, axis=1) + h * np.sum(grad_accum * grad_accum, axis=1))
    )

    chi_h_sq = np.sum(w * d_chi * d_chi, axis=1)
    grad_chi = np.diff(d_chi, axis=1) / h
    chi_v_sq = chi_h_sq + h * np.sum(grad_chi * grad_chi, axis=1)

    return ErrorFunctional(
        sup_V_accum=sup_v,
        sup_H_chi=float(np.max(chi_h_sq)),
        l2_V_chi=float(dt * np.sum(chi_v_sq[1:])),
        log_duality=float(dt * np.sum(np.sum(w * d_log * d_theta, axis=1)[1:])),
        xi_duality=float(dt * np.sum(np.sum(w * d_xi * d_chi, axis=1)[1:])),
    )


def fit_rate(rows):
    """Least-squares slope of log(total error) against log(kernel deviation)."""
    if len(rows) < 3:
        raise ValueError("rate fitting needs at least 3 rows")
    devs = np.array([r.l1_deviation for r in rows])
    totals = np.array([r.functional.total for r in rows])
    if np.any(devs <= 0.0) or np.any(totals <= 0.0):
        raise ValueError("rate fitting needs positive deviations and error totals")
    return float(np.polyfit(np.log(devs), np.log(totals), 1)[0])


def run_sweep(plan):
    """Execute the sweep; the limit trajectory is computed once and shared."""
    base = plan.base_config
    sol_limit = run(limit_config(base))
    configs = [replace(base, kernel=plan.kernel_for(eps)) for eps in plan.epsilons]
    if plan.parallelism > 1:
        with ThreadPoolExecutor(max_workers=plan.parallelism) as pool:
            solutions = list(pool.map(run, configs))
    else:
        solutions = [run(cfg) for cfg in configs]
    rows = []
    for eps, cfg, sol in zip(plan.epsilons, configs, solutions):
        functional = compute_error_functional(sol, sol_limit)
        dev = l1_deviation(cfg.kernel, base.kappa0_prime, base.T)
        ratio = functional.total / dev if dev > 0.0 else math.nan
        rows.append(RateRow(epsilon=eps, l1_deviation=dev, functional=functional, ratio=ratio))
    rows = tuple(rows)
    try:
        slope = fit_rate(rows)
    except ValueError:
        slope = math.nan  # degenerate sweep (exact match); reported, not fitted
    ratios = [r.ratio for r in rows if np.isfinite(r.ratio)]
    ratio_max = max(ratios) if ratios else math.nan
    return RateReport(rows=rows, fitted_slope=slope, ratio_max=ratio_max)


def sweep_flags(report):
    """Acceptance flags of one sweep report."""
    totals = [r.functional.total for r in report.rows]
    monotone = all(b < a for a, b in zip(totals, totals[1:]))
    first_ratio = report.rows[0].ratio if report.rows else math.nan
    ratio_bounded = (
        np.isfinite(report.ratio_max)
        and np.isfinite(first_ratio)
        and report.ratio_max <= 10.0 * first_ratio
    )
    slope_ok = np.isfinite(report.fitted_slope) and report.fitted_slope >= 0.8
    dualities = all(
        r.functional.log_duality >= 0.0 and r.functional.xi_duality >= 0.0 for r in report.rows
    )
    return {
        "monotone_decreasing": bool(monotone),
        "ratio_bounded": bool(ratio_bounded),
        "slope_ok": bool(slope_ok),
        "dualities_nonnegative": bool(dualities),
        "passed": bool(monotone and ratio_bounded and slope_ok and dualities),
    }
