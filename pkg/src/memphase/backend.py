"""Hot numeric cores: compiled with numba by default, pure numpy otherwise.

The three functions below carry essentially all of the solver's runtime:
a tridiagonal (Thomas) solve and the two per-step Newton iterations.  They
are written once, in nopython-compatible style, and compiled twins are
built at import when numba is importable.  The active implementation is
chosen by the ``MEMPHASE_BACKEND`` environment variable (``"numba"`` or
``"numpy"``); :func:`use` switches it at runtime, which is what the
benchmark in ``benchmarks/backend_bench.py`` relies on.

Each function is self-contained (no calls into other module functions) so
that the same source object can be executed interpreted or compiled.
"""

import os

import numpy as np

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

__all__ = [
    "HAVE_NUMBA",
    "available",
    "current",
    "use",
    "tridiag_solve",
    "phase_newton",
    "temperature_newton",
]

GRAPH_ZERO = 0
GRAPH_BOX = 1
GRAPH_ODD_POLY = 2


def _py_tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system by the Thomas algorithm (no pivoting).

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``;
    ``lower[0]`` and ``upper[-1]`` are ignored.  Intended for the strictly
    diagonally dominant systems assembled by the steppers.
    """
    n = diag.shape[0]
    scratch = np.empty(n)
    x = np.empty(n)
    beta = diag[0]
    x[0] = rhs[0] / beta
    for i in range(1, n):
        scratch[i - 1] = upper[i - 1] / beta
        beta = diag[i] - lower[i] * scratch[i - 1]
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        x[i] -= scratch[i] * x[i + 1]
    return x


def _py_phase_newton(chi_n, forcing, dt, inv_h2, mu, kind, lo, hi, coeffs, tol, max_iters):
    """Newton solve of the implicit phase step on all nodes.

    System: ``(chi - chi_n)/dt - lap_N(chi) + beta_mu(chi) = forcing`` with the
    reflecting-ghost Neumann Laplacian ``lap_N``.  ``kind`` selects the
    monotone graph (0 zero, 1 box on [lo, hi], 2 odd polynomial with
    coefficients ``coeffs`` of x, x^3, ...); ``beta_mu`` is its Yosida map.

    Returns ``(chi, iterations, residual, converged)`` with the residual in
    max norm.
    """
    n = chi_n.shape[0]
    chi = chi_n.copy()
    res = 0.0
    inv_dt = 1.0 / dt
    inv_mu = 1.0 / mu
    n_coeffs = coeffs.shape[0]
    bval = np.zeros(n)
    bder = np.zeros(n)
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    scratch = np.empty(n)
    delta = np.empty(n)

    for it in range(max_iters + 1):
        # Yosida value and derivative at the current iterate.
        if kind == GRAPH_BOX:
            for i in range(n):
                c = chi[i]
                if c < lo:
                    bval[i] = (c - lo) * inv_mu
                    bder[i] = inv_mu
                elif c > hi:
                    bval[i] = (c - hi) * inv_mu
                    bder[i] = inv_mu
                else:
                    bval[i] = 0.0
                    bder[i] = 0.0
        elif kind == GRAPH_ODD_POLY:
            for i in range(n):
                r = chi[i]
                # resolvent: x + mu*p(x) = r, safeguarded Newton on [0, r].
                if r >= 0.0:
                    lo_b = 0.0
                    hi_b = r
                else:
                    lo_b = r
                    hi_b = 0.0
                x = r
                rtol = 1e-12 * (1.0 + abs(r))
                for _ in range(100):
                    p = 0.0
                    pp = 0.0
                    xsq = x * x
                    xpow = x
                    ppow = 1.0
                    for m in range(n_coeffs):
                        p += coeffs[m] * xpow
                        pp += (2.0 * m + 1.0) * coeffs[m] * ppow
                        xpow *= xsq
                        ppow *= xsq
                    g = x + mu * p - r
                    if abs(g) <= rtol:
                        break
                    if g > 0.0:
                        hi_b = x
                    else:
                        lo_b = x
                    xn = x - g / (1.0 + mu * pp)
                    if xn <= lo_b or xn >= hi_b:
                        xn = 0.5 * (lo_b + hi_b)
                    x = xn
                pp = 0.0
                ppow = 1.0
                xsq = x * x
                for m in range(n_coeffs):
                    pp += (2.0 * m + 1.0) * coeffs[m] * ppow
                    ppow *= xsq
                bval[i] = (r - x) * inv_mu
                bder[i] = pp / (1.0 + mu * pp)

        # Residual of the implicit equation, Neumann ghosts at both ends.
        res = 0.0
        for i in range(n):
            if i == 0:
                lap = 2.0 * inv_h2 * (chi[1] - chi[0])
            elif i == n - 1:
                lap = 2.0 * inv_h2 * (chi[n - 2] - chi[n - 1])
            else:
                lap = inv_h2 * (chi[i - 1] - 2.0 * chi[i] + chi[i + 1])
            f = inv_dt * (chi[i] - chi_n[i]) - lap + bval[i] - forcing[i]
            delta[i] = -f
            a = abs(f)
            if a > res:
                res = a
        if res <= tol:
            return chi, it, res, True
        if it == max_iters:
            break

        for i in range(n):
            diag[i] = inv_dt + 2.0 * inv_h2 + bder[i]
            lower[i] = -inv_h2
            upper[i] = -inv_h2
        upper[0] = -2.0 * inv_h2
        lower[n - 1] = -2.0 * inv_h2

        beta = diag[0]
        delta[0] = delta[0] / beta
        for i in range(1, n):
            scratch[i - 1] = upper[i - 1] / beta
            beta = diag[i] - lower[i] * scratch[i - 1]
            delta[i] = (delta[i] - lower[i] * delta[i - 1]) / beta
        for i in range(n - 2, -1, -1):
            delta[i] -= scratch[i] * delta[i + 1]
        chi = chi + delta

    return chi, max_iters, res, False


def _py_temperature_newton(theta, source, diffusivity, dt, inv_h2, tol, max_iters, max_halvings):
    """Damped Newton solve of the implicit temperature step on interior nodes.

    System per interior node: ``ln(theta_i)/dt - diffusivity*lap_D(theta)_i =
    source_i`` where ``theta[0]`` and ``theta[-1]`` hold the Dirichlet values
    and ``source`` collects every term that is constant during the solve.
    Positivity of the iterate is enforced by halving the Newton step.

    Returns ``(theta, iterations, residual, status)`` with status 0 on
    convergence, 1 on iteration cap, 2 on positivity-line-search failure.
    """
    n = theta.shape[0]
    m = n - 2
    th = theta.copy()
    inv_dt = 1.0 / dt
    lower = np.empty(m)
    diag = np.empty(m)
    upper = np.empty(m)
    scratch = np.empty(m)
    delta = np.empty(m)
    res = 0.0

    for it in range(max_iters + 1):
        res = 0.0
        for j in range(m):
            i = j + 1
            lap = inv_h2 * (th[i - 1] - 2.0 * th[i] + th[i + 1])
            f = inv_dt * np.log(th[i]) - diffusivity * lap - source[j]
            delta[j] = -f
            a = abs(f)
            if a > res:
                res = a
        if res <= tol:
            return th, it, res, 0
        if it == max_iters:
            break

        for j in range(m):
            diag[j] = inv_dt / th[j + 1] + 2.0 * diffusivity * inv_h2
            lower[j] = -diffusivity * inv_h2
            upper[j] = -diffusivity * inv_h2

        beta = diag[0]
        delta[0] = delta[0] / beta
        for j in range(1, m):
            scratch[j - 1] = upper[j - 1] / beta
            beta = diag[j] - lower[j] * scratch[j - 1]
            delta[j] = (delta[j] - lower[j] * delta[j - 1]) / beta
        for j in range(m - 2, -1, -1):
            delta[j] -= scratch[j] * delta[j + 1]

        step = 1.0
        halvings = 0
        while True:
            positive = True
            for j in range(m):
                if th[j + 1] + step * delta[j] <= 0.0:
                    positive = False
                    break
            if positive:
                break
            step *= 0.5
            halvings += 1
            if halvings > max_halvings:
                return th, it, res, 2
        for j in range(m):
            th[j + 1] += step * delta[j]

    return th, max_iters, res, 1


_PY_IMPL = {
    "tridiag_solve": _py_tridiag_solve,
    "phase_newton": _py_phase_newton,
    "temperature_newton": _py_temperature_newton,
}

_IMPLS = {"numpy": _PY_IMPL}
if HAVE_NUMBA:
    _IMPLS["numba"] = {name: _njit(cache=True)(fn) for name, fn in _PY_IMPL.items()}


def available():
    """Names of the selectable backends."""
    return tuple(sorted(_IMPLS))


def _initial_backend():
    env = os.environ.get("MEMPHASE_BACKEND", "").strip().lower()
    if env:
        if env not in _IMPLS:
            raise RuntimeError(
                f"MEMPHASE_BACKEND={env!r} is not available; choose from {available()}"
            )
        return env
    return "numba" if HAVE_NUMBA else "numpy"


_active = _initial_backend()


def use(name):
    """Select the active backend ("numba" or "numpy")."""
    global _active
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; choose from {available()}")
    _active = name


def current():
    """Name of the active backend."""
    return _active


def tridiag_solve(lower, diag, upper, rhs):
    return _IMPLS[_active]["tridiag_solve"](lower, diag, upper, rhs)


def phase_newton(chi_n, forcing, dt, inv_h2, mu, kind, lo, hi, coeffs, tol, max_iters):
    return _IMPLS[_active]["phase_newton"](
        chi_n, forcing, dt, inv_h2, mu, kind, lo, hi, coeffs, tol, max_iters
    )


def temperature_newton(theta, source, diffusivity, dt, inv_h2, tol, max_iters, max_halvings):
    return _IMPLS[_active]["temperature_newton"](
        theta, source, diffusivity, dt, inv_h2, tol, max_iters, max_halvings
    )


tridiag_solve.__doc__ = _py_tridiag_solve.__doc__
phase_newton.__doc__ = _py_phase_newton.__doc__
temperature_newton.__doc__ = _py_temperature_newton.__doc__
