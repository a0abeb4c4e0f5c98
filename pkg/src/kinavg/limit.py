"""Averaged drift-diffusion-absorption equation and its weak form.

``d rho/dt + J.grad rho + sigma_bar rho = div(K grad rho)`` on the torus.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from kinavg import spectral
from kinavg.fields import DensityField


class LimitError(ValueError):
    pass


@dataclass(frozen=True)
class DensityTrajectory:
    times: np.ndarray
    coeffs: np.ndarray
    d: int = 1

    def at(self, i: int) -> DensityField:
        return DensityField(self.coeffs[i], self.d)

    @property
    def final(self) -> DensityField:
        return self.at(-1)


def _is_constant(c: np.ndarray, d: int) -> bool:
    mask = np.ones(c.shape, dtype=bool)
    mask[(0,) * d] = False
    return not np.any(np.abs(c[mask]) > 0)


def mode_exponents(N: int, d: int, K, J, sigma_const: float = 0.0) -> np.ndarray:
    """``lambda_k = -4 pi^2 k.Kk - 2 pi i J.k - sigma`` for every mode."""
    k = spectral.wavenumbers(N, d)
    K = np.asarray(K, dtype=float).reshape(d, d)
    J = np.asarray(J, dtype=float).reshape(d)
    kKk = np.einsum("i...,ij,j...->...", k, K, k)
    Jk = np.tensordot(J, k, axes=([0], [0]))
    return -4.0 * np.pi**2 * kKk - 2j * np.pi * Jk - sigma_const


def _check_K(K, d):
    K = np.asarray(K, dtype=float).reshape(d, d)
    if not np.allclose(K, K.T) or np.min(np.linalg.eigvalsh(K)) < -1e-14:
        raise LimitError("K must be symmetric positive semidefinite")
    return K


def solve_limit(rho0: DensityField, K, J, sigma_bar: np.ndarray, T: float,
                dt: float | None = None, n_out: int = 50, method: str = "auto"
                ) -> DensityTrajectory:
    """Solve the limit equation on ``[0, T]`` with ``n_out + 1`` stored times.

    Parameters
    ----------
    sigma_bar : ndarray
        Fourier coefficients of the absorption profile.
    method : {"auto", "exact", "split"}
        ``exact`` multiplies each mode by its exponential and requires a
        constant ``sigma_bar``. ``split`` alternates half absorption steps in
        real space with the exact diffusion-advection flow. ``auto`` picks
        ``exact`` when possible.
    """
    d, N = rho0.d, rho0.N
    K = _check_K(K, d)
    sigma_bar = np.asarray(sigma_bar)
    constant = _is_constant(sigma_bar, d)
    if method == "auto":
        method = "exact" if constant else "split"
    times = T * np.arange(n_out + 1) / n_out
    out = np.zeros((n_out + 1,) + rho0.coeffs.shape, dtype=complex)

    if method == "exact":
        if not constant:
            raise LimitError("exact mode solution requires a constant sigma_bar")
        lam = mode_exponents(N, d, K, J, sigma_bar[(0,) * d].real)
        for i, t in enumerate(times):
            out[i] = rho0.coeffs * np.exp(lam * t)
        return DensityTrajectory(times, out, d)
    if method != "split":
        raise LimitError(f"unknown method {method!r}")

    if dt is None:
        raise LimitError("split method needs a time step")
    per_out = max(1, int(np.ceil(T / n_out / dt - 1e-9)))
    h = T / (n_out * per_out)
    flow = np.exp(mode_exponents(N, d, K, J) * h)
    half_absorb = np.exp(-0.5 * h * spectral.to_padded_real(sigma_bar, d))

    def absorb(c):
        return spectral.from_padded_real(spectral.to_padded_real(c, d) * half_absorb, d, N)

    c = rho0.coeffs.astype(complex)
    out[0] = c
    for i in range(1, n_out + 1):
        for _ in range(per_out):
            c = absorb(flow * absorb(c))
        out[i] = c
    return DensityTrajectory(times, out, d)


def weak_operator(xi: np.ndarray, K, J, sigma_bar: np.ndarray, d: int = 1) -> np.ndarray:
    """Adjoint action ``div(K grad xi) + J.grad xi - sigma_bar xi`` on a profile."""
    J = np.asarray(J, dtype=float).reshape(d)
    return (spectral.second_derivative_form(xi, K, d)
            + spectral.directional_derivative(xi, J, d)
            - spectral.multiply(sigma_bar, xi, d))


def weak_residual(traj: DensityTrajectory, K, J, sigma_bar: np.ndarray, xi: np.ndarray,
                  t_index: int = -1) -> float:
    """Defect of the weak formulation at ``traj.times[t_index]``.

    The time integral uses Simpson's rule over the stored samples.
    """
    d = traj.d
    n = len(traj.times) if t_index == -1 else t_index + 1
    if n < 3:
        raise LimitError("need at least three stored times for Simpson quadrature")
    g = weak_operator(xi, K, J, sigma_bar, d)
    pairing = spectral.inner(traj.coeffs[:n], g, d)
    integral = simpson(pairing, x=traj.times[:n])
    lhs = spectral.inner(traj.coeffs[n - 1], xi, d) - spectral.inner(traj.coeffs[0], xi, d)
    return float(abs(lhs - integral))
