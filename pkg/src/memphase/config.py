"""YAML run-configuration parsing for the CLI.

One document configures one invocation.  Sections: ``mesh``, ``time``,
``coefficients``, ``kernel``, ``beta``, ``lambda``, ``sigma``, ``source``,
``boundary``, ``initial``, and optionally ``newton``, ``mu``, ``sweep``,
``mms``, ``kernel_report``.  Violations raise :class:`ConfigError` whose
message is prefixed with the violated rule label.
"""

import numpy as np
import yaml

from .errors import ConfigError
from .grid import (
    BoundaryTrace,
    ConstantInTime,
    Field,
    LinearInTime,
    Mesh1D,
    SinusoidalInTime,
)
from .kernels import ExponentialKernel, TabulatedKernel, ZeroKernel
from .limitstudy import DEFAULT_EPSILONS, SweepPlan
from .nonlinear import BoxIndicatorGraph, OddPolynomialGraph, SmoothNonlinearity, ZeroGraph
from .solver import (
    NewtonSettings,
    ProblemConfig,
    SeparableSource,
    TabulatedSource,
    ZeroSource,
    validate_config,
)

__all__ = [
    "load_document",
    "build_problem",
    "build_sweep_plan",
    "build_kernel_spec",
    "mms_settings",
]


def load_document(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError("(config)", f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("(config)", f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("(config)", "the configuration document must be a mapping")
    return doc


def _section(doc, name, required=True):
    value = doc.get(name)
    if value is None:
        if required:
            raise ConfigError("(config)", f"missing section {name!r}")
        return {}
    if not isinstance(value, dict):
        raise ConfigError("(config)", f"section {name!r} must be a mapping")
    return value


def _get(section, key, where, cast=float):
    if key not in section:
        raise ConfigError("(config)", f"missing key {key!r} in section {where!r}")
    try:
        return cast(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError("(config)", f"bad value for {where}.{key}: {exc}") from exc


def _wrap(code, builder, *args):
    try:
        return builder(*args)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(code, str(exc)) from exc


def build_mesh(doc):
    sec = _section(doc, "mesh")
    return _wrap(
        "(mesh)",
        Mesh1D,
        _get(sec, "x_lo", "mesh"),
        _get(sec, "x_hi", "mesh"),
        _get(sec, "n_cells", "mesh", int),
    )


def build_kernel(doc):
    sec = _section(doc, "kernel")
    kind = _get(sec, "kind", "kernel", str)
    if kind == "zero":
        return ZeroKernel()
    if kind == "exponential":
        return _wrap(
            "(hpregk)",
            ExponentialKernel,
            _get(sec, "amplitude", "kernel"),
            _get(sec, "timescale", "kernel"),
        )
    if kind == "tabulated":
        return _wrap(
            "(hpregk)",
            TabulatedKernel,
            np.asarray(_get(sec, "times", "kernel", list), dtype=float),
            np.asarray(_get(sec, "values", "kernel", list), dtype=float),
        )
    raise ConfigError("(config)", f"unknown kernel kind {kind!r}")


def build_graph(doc):
    sec = _section(doc, "beta")
    kind = _get(sec, "kind", "beta", str)
    if kind == "zero":
        return ZeroGraph()
    if kind == "box":
        return _wrap(
            "(hpBeta)", BoxIndicatorGraph, _get(sec, "lo", "beta"), _get(sec, "hi", "beta")
        )
    if kind == "odd_poly":
        return _wrap(
            "(hpBeta)", OddPolynomialGraph, tuple(_get(sec, "coefficients", "beta", list))
        )
    raise ConfigError("(config)", f"unknown beta kind {kind!r}")


def build_nonlinearity(doc, name):
    sec = _section(doc, name)
    kind = _get(sec, "kind", name, str)
    if kind == "zero":
        return SmoothNonlinearity.zero()
    if kind in ("linear", "quadratic", "poly"):
        coeffs = tuple(float(c) for c in _get(sec, "coefficients", name, list))
        expected = {"linear": 2, "quadratic": 3}.get(kind)
        if expected is not None and len(coeffs) != expected:
            raise ConfigError("(hpls)", f"{name}: {kind} needs {expected} coefficients")
        return _wrap("(hpls)", SmoothNonlinearity, coeffs)
    raise ConfigError("(config)", f"unknown {name} kind {kind!r}")


def build_time_function(sec, where):
    kind = _get(sec, "kind", where, str)
    if kind == "constant":
        return ConstantInTime(_get(sec, "value", where))
    if kind == "linear":
        return LinearInTime(_get(sec, "offset", where), _get(sec, "slope", where))
    if kind == "sinusoidal":
        return SinusoidalInTime(
            _get(sec, "offset", where),
            _get(sec, "amplitude", where),
            _get(sec, "frequency", where),
            float(sec.get("phase", 0.0)),
        )
    raise ConfigError("(config)", f"unknown time function kind {kind!r} in {where}")


def build_source(doc, mesh):
    sec = _section(doc, "source", required=False)
    kind = sec.get("kind", "zero")
    if kind == "zero":
        return ZeroSource()
    if kind == "separable":
        return _wrap(
            "(hpf)",
            SeparableSource,
            tuple(float(c) for c in _get(sec, "space_coefficients", "source", list)),
            build_time_function(_section(sec, "time"), "source.time"),
        )
    if kind == "tabulated":
        times = np.asarray(_get(sec, "times", "source", list), dtype=float)
        values = np.asarray(_get(sec, "values", "source", list), dtype=float)
        if values.ndim != 2 or values.shape[1] != mesh.n_nodes:
            raise ConfigError("(hpf)", "source.values must have one row per time, one column per node")
        return _wrap("(hpf)", TabulatedSource, times, values)
    raise ConfigError("(config)", f"unknown source kind {kind!r}")


def build_initial_field(sec, where, mesh):
    kind = _get(sec, "kind", where, str)
    if kind == "constant":
        return Field.constant(mesh, _get(sec, "value", where))
    if kind == "polynomial":
        coeffs = [float(c) for c in _get(sec, "coefficients", where, list)]
        return Field.from_function(mesh, lambda x: np.polynomial.polynomial.polyval(x, coeffs))
    if kind == "cosine":
        offset = _get(sec, "offset", where)
        amplitude = _get(sec, "amplitude", where)
        modes = int(sec.get("modes", 1))
        span = mesh.x_hi - mesh.x_lo
        return Field.from_function(
            mesh,
            lambda x: offset + amplitude * np.cos(modes * np.pi * (x - mesh.x_lo) / span),
        )
    if kind == "values":
        return _wrap(
            "(config)",
            Field,
            np.asarray(_get(sec, "values", where, list), dtype=float),
            mesh,
        )
    raise ConfigError("(config)", f"unknown initial field kind {kind!r} in {where}")


def build_boundary(doc):
    sec = _section(doc, "boundary")
    return _wrap(
        "(hpthetaminmax)",
        BoundaryTrace,
        build_time_function(_section(sec, "left"), "boundary.left"),
        build_time_function(_section(sec, "right"), "boundary.right"),
        _get(sec, "theta_min", "boundary"),
        _get(sec, "theta_max", "boundary"),
    )


def build_newton(doc):
    sec = _section(doc, "newton", required=False)
    if not sec:
        return NewtonSettings()
    return _wrap(
        "(newton)",
        NewtonSettings,
        int(sec.get("max_iters", 50)),
        float(sec.get("tol", 1e-10)),
        int(sec.get("max_halvings", 40)),
    )


def build_problem(doc):
    """Assemble and validate a full problem configuration from a document."""
    mesh = build_mesh(doc)
    time_sec = _section(doc, "time")
    coeff_sec = _section(doc, "coefficients")
    initial = _section(doc, "initial")
    dt = _get(time_sec, "dt", "time")
    cfg = ProblemConfig(
        mesh=mesh,
        T=_get(time_sec, "T", "time"),
        dt=dt,
        kappa0=_get(coeff_sec, "kappa0", "coefficients"),
        kernel=build_kernel(doc),
        kappa0_prime=_get(coeff_sec, "kappa0_prime", "coefficients"),
        lam=build_nonlinearity(doc, "lambda"),
        sigma=build_nonlinearity(doc, "sigma"),
        beta=build_graph(doc),
        mu=float(doc.get("mu", dt)),
        source=build_source(doc, mesh),
        theta_bc=build_boundary(doc),
        theta0=build_initial_field(_section(initial, "theta0"), "initial.theta0", mesh),
        chi0=build_initial_field(_section(initial, "chi0"), "initial.chi0", mesh),
        newton=build_newton(doc),
    )
    validate_config(cfg)
    return cfg


def build_sweep_plan(doc, parallelism=None):
    """Sweep plan from the document; the `sweep` section holds the epsilons."""
    base = build_problem(doc)
    sec = _section(doc, "sweep", required=False)
    epsilons = tuple(float(e) for e in sec.get("epsilons", DEFAULT_EPSILONS))
    if len(epsilons) < 3:
        raise ConfigError("(sweep)", "rate fitting needs at least 3 epsilons")
    workers = parallelism if parallelism is not None else int(sec.get("parallelism", 1))
    return _wrap("(sweep)", SweepPlan, base, epsilons, workers)


def build_kernel_spec(doc):
    """Kernel, coefficients, horizon, and grid size for the `kernel` subcommand."""
    kernel = build_kernel(doc)
    coeff_sec = _section(doc, "coefficients")
    time_sec = _section(doc, "time")
    kappa0 = _get(coeff_sec, "kappa0", "coefficients")
    if kappa0 <= 0.0:
        raise ConfigError("(hpregk)", "kappa0 > 0 is required")
    report_sec = _section(doc, "kernel_report", required=False)
    return {
        "kernel": kernel,
        "kappa0": kappa0,
        "kappa0_prime": _get(coeff_sec, "kappa0_prime", "coefficients"),
        "T": _get(time_sec, "T", "time"),
        "n_grid": int(report_sec.get("n_grid", 128)),
    }


def mms_settings(doc):
    """Study parameters for the `mms` subcommand (all defaulted)."""
    sec = _section(doc, "mms", required=False)
    kernel_sec = sec.get("kernel")
    if kernel_sec is not None:
        kernel = build_kernel({"kernel": kernel_sec})
    else:
        kernel = ExponentialKernel(amplitude=1.0, timescale=0.1)
    return {
        "kernel": kernel,
        "dts": tuple(float(v) for v in sec.get("temporal_dts", (4e-3, 2e-3, 1e-3))),
        "temporal_n_cells": int(sec.get("temporal_n_cells", 200)),
        "n_cells_list": tuple(int(v) for v in sec.get("spatial_n_cells", (50, 100, 200))),
        "spatial_dt": float(sec.get("spatial_dt", 1e-3)),
        "T": float(sec.get("T", 1.0)),
        "temporal_threshold": float(sec.get("temporal_threshold", 0.9)),
        "spatial_threshold": float(sec.get("spatial_threshold", 1.9)),
    }
