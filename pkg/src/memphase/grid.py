"""Uniform 1D meshes, difference operators, and discrete norms.

Fields are nodal samples on a uniform mesh.  The temperature carries
Dirichlet data, discretized by the standard second difference with the
boundary nodes replaced by the boundary values; the phase variable carries
a homogeneous Neumann condition, discretized with reflecting ghost nodes so
the operator has zero row sums and is symmetric in the trapezoid inner
product.  Norms use trapezoid quadrature for nodal fields and cell sums for
the forward-difference gradient, which is exact for piecewise-linear
interpolants.
"""

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Mesh1D",
    "Field",
    "ConstantInTime",
    "LinearInTime",
    "SinusoidalInTime",
    "TimeFunction",
    "BoundaryTrace",
    "laplacian_dirichlet",
    "laplacian_neumann",
    "harmonic_extension",
    "trapezoid_weights",
    "integral",
    "inner_H",
    "norm_H",
    "norm_V",
    "cell_gradient",
]


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh on [x_lo, x_hi] with n_cells cells (n_cells + 1 nodes)."""

    x_lo: float
    x_hi: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi) and self.x_lo < self.x_hi):
            raise ValueError("mesh requires x_lo < x_hi, both finite")
        if self.n_cells < 4:
            raise ValueError("mesh requires at least 4 cells")

    @property
    def h(self):
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def n_nodes(self):
        return self.n_cells + 1

    @property
    def nodes(self):
        return np.linspace(self.x_lo, self.x_hi, self.n_cells + 1)


@dataclass
class Field:
    """Nodal values on a mesh (length n_cells + 1, all finite)."""

    values: np.ndarray
    mesh: Mesh1D

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"field needs {self.mesh.n_nodes} nodal values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.values = values

    @classmethod
    def constant(cls, mesh, value):
        return cls(np.full(mesh.n_nodes, float(value)), mesh)

    @classmethod
    def from_function(cls, mesh, fn):
        return cls(np.asarray(fn(mesh.nodes), dtype=float), mesh)


@dataclass(frozen=True)
class ConstantInTime:
    value: float

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class LinearInTime:
    offset: float
    slope: float

    def __call__(self, t):
        return self.offset + self.slope * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SinusoidalInTime:
    offset: float
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __call__(self, t):
        arg = 2.0 * math.pi * self.frequency * np.asarray(t, dtype=float) + self.phase
        return self.offset + self.amplitude * np.sin(arg)


TimeFunction = Union[ConstantInTime, LinearInTime, SinusoidalInTime, Callable]


@dataclass(frozen=True)
class BoundaryTrace:
    """Time-dependent Dirichlet data for the temperature with uniform bounds.

    ``theta_min`` and ``theta_max`` are the positive constants that must
    bracket both trace functions on [0, T]; :meth:`validate` samples the
    traces to enforce this.
    """

    left: TimeFunction
    right: TimeFunction
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if not (np.isfinite(self.theta_min) and np.isfinite(self.theta_max)):
            raise ValueError("temperature bounds must be finite")
        if not (0.0 < self.theta_min <= self.theta_max):
            raise ValueError("temperature bounds require 0 < theta_min <= theta_max")

    def validate(self, horizon, n_samples=1000):
        """Check theta_min <= trace(t) <= theta_max on a sample grid of [0, horizon]."""
        t = np.linspace(0.0, horizon, n_samples)
        for side, fn in (("left", self.left), ("right", self.right)):
            vals = np.asarray(fn(t), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"{side} boundary trace is not finite on [0, {horizon}]")
            if np.any(vals < self.theta_min) or np.any(vals > self.theta_max):
                raise ValueError(
                    f"{side} boundary trace leaves [{self.theta_min}, {self.theta_max}]"
                )


def _require_same_mesh(*fields):
    mesh = fields[0].mesh
    for f in fields[1:]:
        if f.mesh != mesh:
            raise ValueError("fields live on different meshes")
    return mesh


def _laplacian_dirichlet_values(values, h, bc_left, bc_right):
    out = np.zeros_like(values)
    inv_h2 = 1.0 / (h * h)
    out[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) * inv_h2
    out[1] = (bc_left - 2.0 * values[1] + values[2]) * inv_h2
    out[-2] = (values[-3] - 2.0 * values[-2] + bc_right) * inv_h2
    return out


def _laplacian_neumann_values(values, h):
    out = np.empty_like(values)
    inv_h2 = 1.0 / (h * h)
    out[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) * inv_h2
    out[0] = 2.0 * (values[1] - values[0]) * inv_h2
    out[-1] = 2.0 * (values[-2] - values[-1]) * inv_h2
    return out


def laplacian_dirichlet(field, bc_left, bc_right):
    """Second difference at interior nodes with boundary nodes replaced by bc values.

    The boundary entries of the result are zero; only interior nodes carry
    the operator.
    """
    vals = _laplacian_dirichlet_values(field.values, field.mesh.h, bc_left, bc_right)
    return Field(vals, field.mesh)


def laplacian_neumann(field):
    """Second difference with reflecting ghost nodes; row sums are zero."""
    return Field(_laplacian_neumann_values(field.values, field.mesh.h), field.mesh)


def harmonic_extension(mesh, bc_left, bc_right):
    """The affine field interpolating the boundary values (exact 1D harmonic fn)."""
    frac = np.linspace(0.0, 1.0, mesh.n_nodes)
    return Field(bc_left + (bc_right - bc_left) * frac, mesh)


def trapezoid_weights(mesh):
    w = np.full(mesh.n_nodes, mesh.h)
    w[0] = w[-1] = 0.5 * mesh.h
    return w


def integral(field):
    """Trapezoid integral of the field over the domain."""
    return float(trapezoid_weights(field.mesh) @ field.values)


def inner_H(f, g):
    """Trapezoid-weighted L2 inner product of two fields."""
    mesh = _require_same_mesh(f, g)
    return float((trapezoid_weights(mesh) * f.values) @ g.values)


def norm_H(field):
    """Trapezoid-weighted L2 norm."""
    return math.sqrt(inner_H(field, field))


def cell_gradient(field):
    """Forward-difference gradient, one value per cell."""
    return np.diff(field.values) / field.mesh.h


def norm_V(field):
    """H1 norm: norm_H squared plus the exact L2 norm of the cell gradient."""
    g = cell_gradient(field)
    grad_sq = field.mesh.h * float(g @ g)
    return math.sqrt(inner_H(field, field) + grad_sq)
