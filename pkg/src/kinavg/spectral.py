"""Fourier utilities on the unit torus.

Coefficients use the ``norm="forward"`` convention, so a field is
``f(x) = sum_k c_k exp(2 pi i k.x)`` and ``||f||_{L^2}^2 = sum_k |c_k|^2``.
The spatial axes are always the trailing ``d`` axes of an array; any
leading axes (velocity nodes, time samples) are carried along.

The Nyquist mode is kept at zero everywhere. Derivative wavenumbers are
zero at Nyquist as well, so that second derivatives are exactly the
square of first derivatives.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


def _axes(d: int) -> tuple[int, ...]:
    return tuple(range(-d, 0))


@lru_cache(maxsize=None)
def wavenumbers(N: int, d: int) -> np.ndarray:
    """Integer wavenumbers, shape ``(d, N, ..., N)``."""
    k1 = np.fft.fftfreq(N, 1.0 / N)
    k = np.stack(np.meshgrid(*([k1] * d), indexing="ij"))
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def derivative_wavenumbers(N: int, d: int) -> np.ndarray:
    """Wavenumbers with the Nyquist entry zeroed, for odd-order operators."""
    k1 = np.fft.fftfreq(N, 1.0 / N)
    if N % 2 == 0:
        k1[N // 2] = 0.0
    k = np.stack(np.meshgrid(*([k1] * d), indexing="ij"))
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def nyquist_mask(N: int, d: int) -> np.ndarray:
    """Boolean mask of modes that touch the Nyquist frequency."""
    mask = np.zeros((N,) * d, dtype=bool)
    if N % 2 == 0:
        for ax in range(d):
            idx = [slice(None)] * d
            idx[ax] = N // 2
            mask[tuple(idx)] = True
    mask.setflags(write=False)
    return mask


def grid_points(N: int, d: int) -> np.ndarray:
    """Uniform grid ``x_j = j/N``, shape ``(d, N, ..., N)``."""
    x1 = np.arange(N) / N
    return np.stack(np.meshgrid(*([x1] * d), indexing="ij"))


def forward(values: np.ndarray, d: int) -> np.ndarray:
    c = np.fft.fftn(values, axes=_axes(d), norm="forward")
    N = values.shape[-1]
    c[..., nyquist_mask(N, d)] = 0.0
    return c


def backward(coeffs: np.ndarray, d: int) -> np.ndarray:
    return np.fft.ifftn(coeffs, axes=_axes(d), norm="forward").real


def pad(coeffs: np.ndarray, d: int, M: int) -> np.ndarray:
    """Zero-pad an ``N``-mode array to ``M >= N`` modes per axis."""
    N = coeffs.shape[-1]
    if M == N:
        return coeffs.copy()
    axes = _axes(d)
    s = np.fft.fftshift(coeffs, axes=axes)
    lo = (M - N) // 2
    width = [(0, 0)] * (coeffs.ndim - d) + [(lo, M - N - lo)] * d
    return np.fft.ifftshift(np.pad(s, width), axes=axes)


def truncate(coeffs: np.ndarray, d: int, N: int) -> np.ndarray:
    """Inverse of :func:`pad`; the Nyquist mode of the result is zeroed."""
    M = coeffs.shape[-1]
    axes = _axes(d)
    s = np.fft.fftshift(coeffs, axes=axes)
    lo = (M - N) // 2
    idx = (Ellipsis,) + (slice(lo, lo + N),) * d
    out = np.fft.ifftshift(s[idx], axes=axes).copy()
    out[..., nyquist_mask(N, d)] = 0.0
    return out


def to_padded_real(coeffs: np.ndarray, d: int, factor: int = 2) -> np.ndarray:
    N = coeffs.shape[-1]
    return backward(pad(coeffs, d, factor * N), d)


def from_padded_real(values: np.ndarray, d: int, N: int) -> np.ndarray:
    return truncate(np.fft.fftn(values, axes=_axes(d), norm="forward"), d, N)


def multiply(a: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Product of two band-limited fields, computed on a 2x padded grid."""
    N = a.shape[-1]
    prod = to_padded_real(a, d) * to_padded_real(b, d)
    return from_padded_real(prod, d, N)


def inner(a: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Real ``L^2`` inner product over the spatial axes."""
    axes = _axes(d)
    return np.sum((a * np.conj(b)).real, axis=axes)


def gradient(coeffs: np.ndarray, d: int) -> np.ndarray:
    """Spectral gradient; the derivative axis is prepended."""
    N = coeffs.shape[-1]
    k = derivative_wavenumbers(N, d)
    return (1j * TWO_PI) * k * coeffs[np.newaxis]


def directional_derivative(coeffs: np.ndarray, c: np.ndarray, d: int) -> np.ndarray:
    """Apply ``c . grad`` where ``c`` has shape ``(..., d)`` matching leading axes.

    ``coeffs`` either has the same leading shape as ``c[..., 0]`` or is a
    pure spatial array broadcast against it.
    """
    N = coeffs.shape[-1]
    k = derivative_wavenumbers(N, d)
    c = np.asarray(c, dtype=float)
    kc = np.tensordot(c, k, axes=([-1], [0]))
    return (1j * TWO_PI) * kc * coeffs


def second_derivative_form(coeffs: np.ndarray, K: np.ndarray, d: int) -> np.ndarray:
    """Apply ``div(K grad .)`` for a constant symmetric matrix ``K``."""
    N = coeffs.shape[-1]
    k = derivative_wavenumbers(N, d)
    kKk = np.einsum("i...,ij,j...->...", k, np.asarray(K, dtype=float).reshape(d, d), k)
    return -(TWO_PI**2) * kKk * coeffs


def sup_norm(coeffs: np.ndarray, d: int, factor: int = 8) -> float:
    """Sup of a band-limited field estimated on a refined grid."""
    return float(np.max(np.abs(to_padded_real(coeffs, d, factor))))


def c1_norm(coeffs: np.ndarray, d: int, factor: int = 8) -> float:
    """``sup|g| + sup|grad g|`` (Euclidean gradient), on a refined grid."""
    grad = to_padded_real(gradient(coeffs, d), d, factor)
    gmag = np.sqrt(np.sum(grad**2, axis=0))
    return sup_norm(coeffs, d, factor) + float(np.max(gmag))
