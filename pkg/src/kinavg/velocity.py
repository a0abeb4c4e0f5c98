"""Velocity measure spaces, the BGK relaxation operator and averaged coefficients."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from kinavg.fields import DensityField, KineticField

STRUCTURE_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a velocity model violates its structural constraints."""


@dataclass(frozen=True)
class AveragedCoefficients:
    K: np.ndarray
    J: np.ndarray


@dataclass(frozen=True)
class VelocityModel:
    """Discretized velocity space ``(V, mu)`` with Maxwellian and velocity fields.

    Attributes
    ----------
    nodes : ndarray, shape (n, d)
    weights : ndarray, shape (n,)
        Quadrature weights of the reference measure.
    maxwellian : ndarray, shape (n,)
    a_field, b_field : ndarray, shape (n, d)
        Fast (``1/eps``-scaled) and slow transport velocities.
    """

    nodes: np.ndarray
    weights: np.ndarray
    maxwellian: np.ndarray
    a_field: np.ndarray
    b_field: np.ndarray
    kind: str = "discrete"

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def a_sup(self) -> float:
        return float(np.max(np.linalg.norm(self.a_field, axis=1)))

    @property
    def b_sup(self) -> float:
        return float(np.max(np.linalg.norm(self.b_field, axis=1)))

    def normalization_deficit(self) -> float:
        return abs(_ordered_sum(self.weights * self.maxwellian) - 1.0)

    def centering_deficit(self) -> float:
        m = self.weights * self.maxwellian
        return float(np.linalg.norm(_ordered_sum(m[:, None] * self.a_field)))

    def validate(self, tol: float = STRUCTURE_TOL) -> "VelocityModel":
        if np.any(self.weights <= 0) or np.any(self.maxwellian <= 0):
            raise ModelError("weights and Maxwellian values must be positive")
        deficit = self.normalization_deficit()
        if deficit > tol:
            raise ModelError(f"Maxwellian not normalized: |sum mu M - 1| = {deficit:.3e}")
        deficit = self.centering_deficit()
        if deficit > tol:
            raise ModelError(f"centering condition fails: |sum mu M a| = {deficit:.3e}")
        return self


def _ordered_sum(terms: np.ndarray):
    """Sum along the node axis in ascending node order."""
    total = np.zeros_like(terms[0])
    for t in terms:
        total = total + t
    return total


def make_discrete_model(d: int, b_const=None) -> VelocityModel:
    """Velocities ``{-1, +1}^d`` with counting measure and ``a(v) = v``.

    The Maxwellian is ``2^-d`` so that it is a probability on the ``2^d``
    nodes.
    """
    if d not in (1, 2):
        raise ModelError(f"unsupported dimension d={d}; expected 1 or 2")
    nodes = np.array(list(product((-1.0, 1.0), repeat=d)))
    n = nodes.shape[0]
    b = np.zeros(d) if b_const is None else np.asarray(b_const, dtype=float).reshape(d)
    model = VelocityModel(
        nodes=nodes,
        weights=np.ones(n),
        maxwellian=np.full(n, 2.0**-d),
        a_field=nodes.copy(),
        b_field=np.tile(b, (n, 1)),
        kind="discrete",
    )
    return model.validate()


def _sinh_trapezoid(n_nodes: int, half_width: float):
    # v = sinh(u), uniform midpoint grid in u; symmetric, no node at 0
    h = 2.0 * half_width / n_nodes
    u = (np.arange(n_nodes) - (n_nodes - 1) / 2.0) * h
    return np.sinh(u), np.cosh(u) * h


def make_continuous_model(d: int = 1, n_nodes: int = 32, b_const=None,
                          half_width: float = 2.75) -> VelocityModel:
    """Standard Gaussian Maxwellian with relativistic ``a(v) = v / sqrt(1 + v^2)``.

    The Lebesgue measure is discretized by a trapezoid rule in the variable
    ``u = asinh(v)``. Nodes are odd-symmetric, so the centering condition
    holds to rounding, and the weights are rescaled so that the Maxwellian
    integrates to one.
    """
    if d != 1:
        raise ModelError("continuous velocity model is only available for d=1")
    if n_nodes < 8 or n_nodes % 2:
        raise ModelError(f"n_nodes must be even and >= 8, got {n_nodes}")
    v, w = _sinh_trapezoid(n_nodes, half_width)
    M = np.exp(-0.5 * v**2) / np.sqrt(2.0 * np.pi)
    w = w / _ordered_sum(w * M)
    b = np.zeros(1) if b_const is None else np.asarray(b_const, dtype=float).reshape(1)
    model = VelocityModel(
        nodes=v[:, None],
        weights=w,
        maxwellian=M,
        a_field=(v / np.sqrt(1.0 + v**2))[:, None],
        b_field=np.tile(b, (n_nodes, 1)),
        kind="continuous",
    )
    return model.validate()


def density(f: KineticField, model: VelocityModel) -> DensityField:
    """``rho = <f> = sum_j mu_j f(., v_j)``."""
    if f.n_nodes != model.n_nodes:
        raise ModelError(f"field has {f.n_nodes} nodes, model has {model.n_nodes}")
    shape = (-1,) + (1,) * f.d
    return DensityField(_ordered_sum(model.weights.reshape(shape) * f.coeffs), f.d)


def bgk_apply(f: KineticField, model: VelocityModel) -> KineticField:
    """BGK operator ``Lf = rho M - f``."""
    rho = density(f, model)
    return KineticField.equilibrium(rho, model.maxwellian) - f


def averaged_coefficients(model: VelocityModel) -> AveragedCoefficients:
    """``K = sum mu M a a^T`` and ``J = sum mu M b``."""
    m = model.weights * model.maxwellian
    K = _ordered_sum(m[:, None, None] * np.einsum("ni,nj->nij", model.a_field, model.a_field))
    J = _ordered_sum(m[:, None] * model.b_field)
    return AveragedCoefficients(K=K, J=J)
