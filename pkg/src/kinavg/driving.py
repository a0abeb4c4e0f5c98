"""Ornstein-Uhlenbeck driving process, affine reaction coefficient and stopping rule.

The fast process ``m`` solves ``dm = -(m - m_bar) dt + dW`` and the slow
driver is ``m_delta(t) = m(t / delta^2)``. The reaction coefficient is affine
in the driver, ``sigma(l)(x) = sigma0(x) + l * sigma1(x)``, so its average
under the invariant law ``N(m_bar, 1/2)`` is ``sigma0 + m_bar * sigma1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.signal import lfilter

from kinavg import spectral


class DrivingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# OU process


@dataclass(frozen=True)
class OUProcess:
    m_bar: float
    ell0: float
    state: float
    t_fast: float = 0.0

    @classmethod
    def start(cls, m_bar: float, ell0: float) -> "OUProcess":
        return cls(m_bar=float(m_bar), ell0=float(ell0), state=float(ell0))


def ou_coefficients(h_fast: float) -> tuple[float, float]:
    """Decay factor and noise amplitude of one exact OU transition."""
    if not h_fast > 0:
        raise DrivingError(f"fast step must be positive, got {h_fast}")
    decay = np.exp(-h_fast)
    return decay, np.sqrt(-np.expm1(-2.0 * h_fast) / 2.0)


def ou_step(p: OUProcess, h_fast: float, gauss: float) -> OUProcess:
    """Advance the OU state by ``h_fast`` fast-time units, exactly in law."""
    decay, amp = ou_coefficients(h_fast)
    state = p.m_bar + (p.state - p.m_bar) * decay + gauss * amp
    return replace(p, state=state, t_fast=p.t_fast + h_fast)


def delta_bound(ell0: float) -> float:
    """Open upper bound ``min(1, 1/|l0|)`` on admissible ``delta``."""
    return 1.0 if ell0 == 0 else min(1.0, 1.0 / abs(ell0))


def check_delta(delta: float, ell0: float) -> None:
    bound = delta_bound(ell0)
    if not (0 < delta < bound):
        raise DrivingError(
            f"delta={delta} outside (0, delta0) with delta0 < min(1, 1/|ell0|) = {bound:.6g}")


# ---------------------------------------------------------------------------
# reaction coefficient


@dataclass(frozen=True)
class SigmaModel:
    """Affine reaction coefficient ``sigma0 + l * sigma1`` stored spectrally.

    Parameters
    ----------
    sigma0, sigma1 : ndarray
        Fourier coefficients (forward-normalized) of the two profiles.
    m_bar : float
        Mean of the invariant law of the driver.
    """

    sigma0: np.ndarray
    sigma1: np.ndarray
    m_bar: float = 0.0
    d: int = 1

    @property
    def N(self) -> int:
        return self.sigma0.shape[-1]

    @classmethod
    def from_functions(cls, sigma0, sigma1, N: int, d: int = 1, m_bar: float = 0.0):
        x = spectral.grid_points(N, d)
        c0 = spectral.forward(np.broadcast_to(sigma0(*x), (N,) * d).astype(float), d)
        c1 = spectral.forward(np.broadcast_to(sigma1(*x), (N,) * d).astype(float), d)
        return cls(c0, c1, float(m_bar), d)

    @classmethod
    def from_coefficients(cls, sigma0_terms, sigma1_terms, N: int, d: int = 1,
                          m_bar: float = 0.0):
        """Build from sparse lists of ``[k..., re, im]`` entries.

        Each entry sets mode ``k`` to ``re + i im``; the conjugate mode is
        filled in so that the profile is real.
        """
        return cls(_coeffs_from_terms(sigma0_terms, N, d),
                   _coeffs_from_terms(sigma1_terms, N, d), float(m_bar), d)

    @classmethod
    def constant(cls, s0: float, N: int, d: int = 1, m_bar: float = 0.0):
        return cls.from_coefficients([[0] * d + [s0, 0.0]], [], N, d, m_bar)

    def sigma(self, ell: float) -> np.ndarray:
        return self.sigma0 + ell * self.sigma1

    @cached_property
    def sigma_bar(self) -> np.ndarray:
        return self.sigma(self.m_bar)

    @cached_property
    def padded_profiles(self) -> tuple[np.ndarray, np.ndarray]:
        """Real values of sigma0 and sigma1 on the 2x padded grid."""
        return (spectral.to_padded_real(self.sigma0, self.d),
                spectral.to_padded_real(self.sigma1, self.d))

    @cached_property
    def sigma1_c1(self) -> float:
        return spectral.c1_norm(self.sigma1, self.d)

    @cached_property
    def sigma_bar_c0(self) -> float:
        return spectral.sup_norm(self.sigma_bar, self.d)

    @cached_property
    def sigma_bar_c1(self) -> float:
        return spectral.c1_norm(self.sigma_bar, self.d)

    def is_constant(self, tol: float = 1e-14) -> bool:
        """True if neither profile has a nonzero nonconstant mode."""
        mask = np.ones(self.sigma0.shape, dtype=bool)
        mask[(0,) * self.d] = False
        return bool(np.all(np.abs(self.sigma0[mask]) <= tol)
                    and np.all(np.abs(self.sigma1[mask]) <= tol))


def _coeffs_from_terms(terms, N: int, d: int) -> np.ndarray:
    c = np.zeros((N,) * d, dtype=complex)
    for term in terms or ():
        term = list(term)
        if len(term) != d + 2:
            raise DrivingError(f"coefficient entry {term} should have {d} indices plus re, im")
        k = tuple(int(kk) for kk in term[:d])
        if any(abs(kk) >= N // 2 for kk in k):
            raise DrivingError(f"mode {k} not resolved with N={N}")
        val = complex(term[d], term[d + 1])
        kneg = tuple(-kk for kk in k)
        if k == kneg:
            if val.imag != 0:
                raise DrivingError("zero mode must be real")
            c[k] = val.real
        else:
            c[k] = val
            c[kneg] = np.conj(val)
    return c


def resolvent_apply(s: SigmaModel, ell: float, h: np.ndarray) -> np.ndarray:
    """Resolvent of the OU generator applied to ``h``: ``(l - m_bar) sigma1 h``.

    For the observable ``l -> ((sigma(l) - sigma_bar) h, k)`` this is the
    solution ``psi`` of ``-L_m psi = theta - theta_bar`` that is centered at
    the invariant mean.
    """
    return (ell - s.m_bar) * spectral.multiply(s.sigma1, h, s.d)


# ---------------------------------------------------------------------------
# stopping


@dataclass(frozen=True)
class DrivingState:
    ou: OUProcess
    zeta_scalar: float = 0.0
    tau_hit: float | None = None
    alpha: float = 0.5

    @property
    def stopped(self) -> bool:
        return self.tau_hit is not None


def stopping_thresholds(delta: float, alpha: float) -> tuple[float, float]:
    """Thresholds on ``|m_delta|`` and on ``||zeta||_{C^1}``."""
    return delta ** (-alpha), 1.0 / delta


def update_stopping(state: DrivingState, s: SigmaModel, delta: float, t: float) -> DrivingState:
    """Record ``t`` as the hit time if a threshold is reached and none was yet."""
    if state.stopped:
        return state
    m_cap, z_cap = stopping_thresholds(delta, state.alpha)
    if abs(state.ou.state) >= m_cap or abs(state.zeta_scalar) * s.sigma1_c1 >= z_cap:
        return replace(state, tau_hit=float(t))
    return state


# ---------------------------------------------------------------------------
# sampled paths


@dataclass(frozen=True)
class DrivingPath:
    """Driver sampled on a slow grid.

    Attributes
    ----------
    times : ndarray, shape (n+1,)
    m : ndarray, shape (n+1,)
        ``m_delta`` at the grid times.
    m_mid : ndarray, shape (n,)
        ``m_delta`` at the midpoints of the slow steps.
    zeta : ndarray, shape (n+1,)
        ``(1/delta) int_0^t (m_delta - m_bar) ds`` at the grid times.
    tau_hit : float or None
    hit_index : int or None
        Grid index of ``tau_hit``.
    """

    times: np.ndarray
    m: np.ndarray
    m_mid: np.ndarray
    zeta: np.ndarray
    delta: float
    alpha: float
    tau_hit: float | None = None
    hit_index: int | None = None
    extras: dict = field(default_factory=dict)


def substeps_per_slow_step(dt_slow: float, delta: float, fast_factor: float = 0.5) -> int:
    """Even number of fast substeps keeping the fast step below ``fast_factor``."""
    n = int(np.ceil(dt_slow / delta**2 / fast_factor - 1e-12))
    n = max(n, 2)
    return n + (n % 2)


def sample_path(p: OUProcess, delta: float, dt_slow: float, n_steps: int,
                rng: np.random.Generator, sigma: SigmaModel | None = None,
                alpha: float = 0.5, fast_factor: float = 0.5,
                check_bound: bool = True) -> DrivingPath:
    """Sample ``m_delta`` on ``t_i = i dt_slow`` together with the compensator.

    Each slow step is cut into an even number of exact OU substeps, which
    also yields the driver at the step midpoints. The compensator is
    integrated by the trapezoid rule on the fast grid. Stopping is checked
    at the slow grid times.
    """
    if check_bound:
        check_delta(delta, p.ell0)
    if not 0 < alpha < 1:
        raise DrivingError(f"alpha must lie in (0, 1), got {alpha}")
    n_sub = substeps_per_slow_step(dt_slow, delta, fast_factor)
    decay, amp = ou_coefficients(dt_slow / delta**2 / n_sub)
    z = rng.standard_normal(n_steps * n_sub)
    y0 = p.state - p.m_bar
    # centered AR(1) recursion y_i = decay y_{i-1} + amp z_i
    y = lfilter([amp], [1.0, -decay], z, zi=[decay * y0])[0]
    y = np.concatenate(([y0], y))
    m_fine = p.m_bar + y

    h_slow = dt_slow / n_sub
    incr = 0.5 * h_slow * (y[:-1] + y[1:]) / delta
    zeta_fine = np.concatenate(([0.0], np.cumsum(incr)))

    times = dt_slow * np.arange(n_steps + 1)
    m = m_fine[::n_sub]
    m_mid = m_fine[n_sub // 2::n_sub]
    zeta = zeta_fine[::n_sub]

    tau, idx = None, None
    if sigma is not None:
        m_cap, z_cap = stopping_thresholds(delta, alpha)
        hit = (np.abs(m) >= m_cap) | (np.abs(zeta) * sigma.sigma1_c1 >= z_cap)
        if hit.any():
            idx = int(np.argmax(hit))
            tau = float(times[idx])
    return DrivingPath(times=times, m=m, m_mid=m_mid, zeta=zeta, delta=delta,
                       alpha=alpha, tau_hit=tau, hit_index=idx,
                       extras={"n_sub": n_sub})


def frozen_path(ell: float, dt_slow: float, n_steps: int, delta: float = 1.0,
                m_bar: float = 0.0) -> DrivingPath:
    """Constant driver, for deterministic runs and tests."""
    times = dt_slow * np.arange(n_steps + 1)
    zeta = (ell - m_bar) * times / delta
    return DrivingPath(times=times, m=np.full(n_steps + 1, float(ell)),
                       m_mid=np.full(n_steps, float(ell)), zeta=zeta, delta=delta,
                       alpha=0.5)
