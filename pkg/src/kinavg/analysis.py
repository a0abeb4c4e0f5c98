"""Norms, trajectory error metrics and rate fitting."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats
from scipy.integrate import simpson

from kinavg import spectral
from kinavg.fields import DensityField, KineticField
from kinavg.velocity import VelocityModel


def _coeffs(rho) -> tuple[np.ndarray, int]:
    if isinstance(rho, DensityField):
        return rho.coeffs, rho.d
    return np.asarray(rho), 1


def l2_norm(rho, d: int | None = None) -> np.ndarray:
    """``L^2_x`` norm; leading axes (e.g. time) are kept."""
    c, dd = _coeffs(rho)
    d = dd if d is None else d
    return np.sqrt(np.sum(np.abs(c) ** 2, axis=tuple(range(-d, 0))))


def sobolev_weights(N: int, d: int, varsigma: float) -> np.ndarray:
    k2 = np.sum(spectral.wavenumbers(N, d) ** 2, axis=0)
    return (1.0 + 4.0 * np.pi**2 * k2) ** (-varsigma)


def h_neg_norm(rho, varsigma: float = 1.0, d: int | None = None) -> np.ndarray:
    """``H^{-s}`` norm with Fourier weights ``(1 + 4 pi^2 |k|^2)^{-s}``."""
    if not 0 < varsigma <= 1:
        raise ValueError(f"varsigma must lie in (0, 1], got {varsigma}")
    c, dd = _coeffs(rho)
    d = dd if d is None else d
    w = sobolev_weights(c.shape[-1], d, varsigma)
    return np.sqrt(np.sum(w * np.abs(c) ** 2, axis=tuple(range(-d, 0))))


def weighted_norm(f: KineticField, model: VelocityModel) -> float:
    """Norm in ``L^2(M^{-1})``: ``sum_j mu_j / M_j sum_k |f_k(v_j)|^2``, square-rooted."""
    per_node = np.sum(np.abs(f.coeffs) ** 2, axis=tuple(range(1, f.coeffs.ndim)))
    return float(np.sqrt(np.sum(model.weights / model.maxwellian * per_node)))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def fit_rate(scales, errors) -> RateFit:
    """Least-squares fit of ``log(error)`` against ``log(scale)``."""
    scales = np.asarray(scales, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if scales.size < 4 or scales.size != errors.size:
        raise ValueError("need at least 4 paired samples")
    if np.any(scales <= 0) or np.any(errors <= 0):
        raise ValueError("scales and errors must be positive")
    res = stats.linregress(np.log(scales), np.log(errors))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


@dataclass(frozen=True)
class ErrorRecord:
    eps: float
    delta: float
    replication: int
    err_Hneg: float
    err_L2_time: float
    err_sup_Hneg: float
    tau_hit: bool
    varsigma: float = 1.0

    def __post_init__(self):
        for name in ("err_Hneg", "err_L2_time", "err_sup_Hneg"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name}={v} is not a finite nonnegative error")

    def as_row(self) -> dict:
        return asdict(self)


def trajectory_errors(times, rho, rho_bar, d: int = 1, varsigma: float = 1.0):
    """Final-time ``H^{-s}``, ``C^0_T H^{-s}`` and ``L^2_T L^2_x`` errors.

    ``rho`` and ``rho_bar`` hold coefficients with time as the leading axis.
    The sup is taken over the stored times only. The time integral uses
    Simpson's rule.
    """
    diff = np.asarray(rho) - np.asarray(rho_bar)
    hneg = h_neg_norm(diff, varsigma, d)
    l2sq = l2_norm(diff, d) ** 2
    l2_time = np.sqrt(max(simpson(l2sq, x=np.asarray(times)), 0.0))
    return float(hneg[-1]), float(np.max(hneg)), float(l2_time)
