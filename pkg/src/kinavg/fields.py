"""Spectral field containers shared by the kinetic and limit solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kinavg import spectral


@dataclass(frozen=True)
class DensityField:
    """Real scalar field on the torus, stored as Fourier coefficients."""

    coeffs: np.ndarray
    d: int = 1

    @property
    def N(self) -> int:
        return self.coeffs.shape[-1]

    @classmethod
    def from_real(cls, values, d: int = 1) -> "DensityField":
        return cls(spectral.forward(np.asarray(values, dtype=float), d), d)

    @classmethod
    def from_function(cls, func, N: int, d: int = 1) -> "DensityField":
        x = spectral.grid_points(N, d)
        return cls.from_real(func(*x), d)

    @classmethod
    def constant(cls, value: float, N: int, d: int = 1) -> "DensityField":
        c = np.zeros((N,) * d, dtype=complex)
        c[(0,) * d] = value
        return cls(c, d)

    def real(self) -> np.ndarray:
        return spectral.backward(self.coeffs, self.d)

    def __add__(self, other: "DensityField") -> "DensityField":
        return DensityField(self.coeffs + other.coeffs, self.d)

    def __sub__(self, other: "DensityField") -> "DensityField":
        return DensityField(self.coeffs - other.coeffs, self.d)

    def __mul__(self, scalar: float) -> "DensityField":
        return DensityField(self.coeffs * scalar, self.d)

    __rmul__ = __mul__


@dataclass(frozen=True)
class KineticField:
    """Distribution ``f(x, v_j)``: one set of Fourier coefficients per velocity node.

    ``coeffs`` has shape ``(n_nodes, N, ..., N)``.
    """

    coeffs: np.ndarray
    d: int = 1

    @property
    def N(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def n_nodes(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def from_real(cls, values, d: int = 1) -> "KineticField":
        return cls(spectral.forward(np.asarray(values, dtype=float), d), d)

    @classmethod
    def equilibrium(cls, rho: DensityField, maxwellian: np.ndarray) -> "KineticField":
        """The local equilibrium ``rho(x) M(v_j)``."""
        M = np.asarray(maxwellian, dtype=float)
        shape = (-1,) + (1,) * rho.d
        return cls(M.reshape(shape) * rho.coeffs[np.newaxis], rho.d)

    def real(self) -> np.ndarray:
        return spectral.backward(self.coeffs, self.d)

    def __add__(self, other: "KineticField") -> "KineticField":
        return KineticField(self.coeffs + other.coeffs, self.d)

    def __sub__(self, other: "KineticField") -> "KineticField":
        return KineticField(self.coeffs - other.coeffs, self.d)

    def __mul__(self, scalar: float) -> "KineticField":
        return KineticField(self.coeffs * scalar, self.d)

    __rmul__ = __mul__


def random_kinetic_field(rng: np.random.Generator, n_nodes: int, N: int, d: int = 1,
                         decay: float = 1.0) -> KineticField:
    """Smooth random real field with spectrum decaying like ``exp(-decay |k|)``."""
    k = spectral.wavenumbers(N, d)
    env = np.exp(-decay * np.sqrt(np.sum(k**2, axis=0)))
    values = spectral.backward(
        (rng.standard_normal((n_nodes,) + (N,) * d)
         + 1j * rng.standard_normal((n_nodes,) + (N,) * d)) * env, d)
    return KineticField.from_real(values, d)


def random_density(rng: np.random.Generator, N: int, d: int = 1,
                   decay: float = 1.0) -> DensityField:
    return DensityField(random_kinetic_field(rng, 1, N, d, decay).coeffs[0], d)
