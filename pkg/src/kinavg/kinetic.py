"""Pathwise Strang-split solver for the driven BGK kinetic equation.

Solves ``df/dt + (a/eps + b).grad f + sigma(m_delta) f = (rho M - f)/eps^2``
on the torus for one realization of the driver. Each sub-flow is exact:
transport is a Fourier phase, relaxation is an exponential toward the local
equilibrium, and absorption is a pointwise exponential in real space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from kinavg import spectral
from kinavg.driving import (DrivingPath, OUProcess, SigmaModel, check_delta, frozen_path,
                            sample_path)
from kinavg.fields import KineticField
from kinavg.velocity import VelocityModel, bgk_apply, density

BOUND_SLACK = 1.1


class SolverError(RuntimeError):
    pass


class ParameterError(ValueError):
    pass


class BoundViolation(SolverError):
    pass


def epsilon_bound(model: VelocityModel, sigma: SigmaModel, T: float) -> float:
    """Open upper bound on ``eps`` for the uniform energy estimate."""
    growth = 4.0 * (model.a_sup + model.b_sup) * (1.0 + T * sigma.sigma_bar_c1)
    return min(1.0, 1.0 / growth)


def apriori_constant(model: VelocityModel, sigma: SigmaModel, T: float) -> float:
    """``C(T)`` in ``||f(t)||^2 + (1/2eps^2) int ||Lf||^2 <= C(T) ||f0||^2``."""
    s1 = 1.0 + T * sigma.sigma_bar_c1
    c0 = model.b_sup * s1 + 4.0 * (model.a_sup + model.b_sup) ** 2 * s1**2
    return float(np.exp(2.0 + 2.0 * T * sigma.sigma_bar_c0) * np.exp(2.0 * c0 * T))


@dataclass(frozen=True)
class SolverParams:
    """Run parameters.

    The step is ``dt <= min(c1 eps^2, c2 delta^2)``, rounded down so that
    ``T`` is a whole number of output intervals, each a whole number of
    steps.
    """

    epsilon: float
    delta: float
    T: float
    N: int = 64
    n_out: int = 50
    c1: float = 0.1
    c2: float = 0.5
    dt_slow: float | None = None
    stopped: bool = True
    fast_factor: float = 0.5

    def steps_per_output(self) -> int:
        target = self.dt_slow or min(self.c1 * self.epsilon**2, self.c2 * self.delta**2)
        return max(1, int(np.ceil(self.T / self.n_out / target - 1e-9)))

    @property
    def n_steps(self) -> int:
        return self.n_out * self.steps_per_output()

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def validate(self, model: VelocityModel, sigma: SigmaModel, ell0: float) -> "SolverParams":
        eps0 = epsilon_bound(model, sigma, self.T)
        if not 0 < self.epsilon < eps0:
            raise ParameterError(
                f"epsilon={self.epsilon} violates the energy-estimate bound "
                f"eps < min(1, 1/(4(|a|+|b|)(1+T|sigma_bar|_C1))) = {eps0:.6g}")
        try:
            check_delta(self.delta, ell0)
        except ValueError as exc:
            raise ParameterError(str(exc)) from exc
        if self.T <= 0 or self.N < 4 or self.N % 2:
            raise ParameterError("need T > 0 and an even N >= 4")
        return self


def transport_phase(model: VelocityModel, eps: float, h: float, N: int) -> np.ndarray:
    k = spectral.wavenumbers(N, model.d)
    speed = model.a_field / eps + model.b_field
    kc = np.tensordot(speed, k, axes=([1], [0]))
    return np.exp(-2j * np.pi * kc * h)


def transport_step(f: KineticField, model: VelocityModel, eps: float, h: float) -> KineticField:
    """Exact advection ``df/dt + (a/eps + b).grad f = 0`` over ``h``."""
    if not h > 0:
        raise ValueError("step must be positive")
    return KineticField(f.coeffs * transport_phase(model, eps, h, f.N), f.d)


def relaxation_step(f: KineticField, model: VelocityModel, eps: float, h: float) -> KineticField:
    """Exact BGK relaxation over ``h``: ``rho M + exp(-h/eps^2)(f - rho M)``."""
    if not h > 0:
        raise ValueError("step must be positive")
    return f + bgk_apply(f, model) * (-np.expm1(-h / eps**2))


def reaction_step(f: KineticField, s: SigmaModel, ell: float, h: float) -> KineticField:
    """Multiply by ``exp(-sigma(l)(x) h)`` pointwise on the padded grid."""
    if not h > 0:
        raise ValueError("step must be positive")
    s0, s1 = s.padded_profiles
    factor = np.exp(-(s0 + ell * s1) * h)
    values = spectral.to_padded_real(f.coeffs, f.d) * factor
    return KineticField(spectral.from_padded_real(values, f.d, f.N), f.d)


@dataclass
class Trajectory:
    """Output of :func:`solve_path`; arrays are indexed by output time."""

    times: np.ndarray
    rho: np.ndarray
    norm_f: np.ndarray
    norm_Lf: np.ndarray
    dissipation: np.ndarray
    mass: np.ndarray
    tau_hit: float | None
    bound_constant: float
    bound_ratio_max: float
    f_final: KineticField
    info: dict = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return self.bound_ratio_max > BOUND_SLACK


class _Stepper:
    """Precomputed factors for one ``(eps, dt)`` pair."""

    def __init__(self, model, sigma, eps, dt, N, d):
        self.model = model
        self.sigma = sigma
        self.dt = dt
        self.d = d
        self.N = N
        self.half_phase = transport_phase(model, eps, 0.5 * dt, N)
        self.relax = -np.expm1(-dt / eps**2)
        self.diss_factor = -np.expm1(-2.0 * dt / eps**2) / 4.0
        self.no_reaction = not (np.any(sigma.sigma0) or np.any(sigma.sigma1))
        self.uniform = sigma.is_constant()
        s0, s1 = sigma.padded_profiles
        self.s0, self.s1 = s0, s1
        self.w = model.weights / model.maxwellian

    def _react(self, c, ell):
        h = 0.5 * self.dt
        if self.no_reaction:
            return c
        if self.uniform:
            rate = (self.s0.flat[0] + ell * self.s1.flat[0])
            return c * np.exp(-rate * h)
        factor = np.exp(-(self.s0 + ell * self.s1) * h)
        values = spectral.to_padded_real(c, self.d) * factor
        return spectral.from_padded_real(values, self.d, self.N)

    def step(self, c, ell):
        """One Strang step; returns new coefficients and the dissipation increment."""
        c = self._react(c, ell)
        c = c * self.half_phase
        Lf = bgk_apply(KineticField(c, self.d), self.model).coeffs
        diss = self.diss_factor * self.weighted_sq(Lf)
        c = c + self.relax * Lf
        c = c * self.half_phase
        c = self._react(c, ell)
        return c, diss

    def weighted_sq(self, c) -> float:
        per_node = np.sum(np.abs(c) ** 2, axis=tuple(range(1, c.ndim)))
        return float(np.sum(self.w * per_node))


def solve_path(f0: KineticField, params: SolverParams, model: VelocityModel,
               sigma: SigmaModel, path: DrivingPath, assert_bound: bool = True) -> Trajectory:
    """Integrate one path of the kinetic equation along a sampled driver.

    ``path`` must be sampled on the step grid of ``params``. With
    ``params.stopped`` the solution is frozen from the stopping time on.
    The energy estimate is checked after every step; with
    ``assert_bound`` a violation beyond the slack factor raises.
    """
    n_steps, per_out = params.n_steps, params.steps_per_output()
    if path.m_mid.shape[0] < n_steps:
        raise ParameterError(f"driver has {path.m_mid.shape[0]} steps, need {n_steps}")
    if not np.isclose(path.times[1] - path.times[0], params.dt, rtol=1e-10):
        raise ParameterError("driver grid does not match the solver step")
    if f0.N != params.N:
        raise ParameterError(f"initial field has N={f0.N}, params N={params.N}")
    d = f0.d
    stepper = _Stepper(model, sigma, params.epsilon, params.dt, params.N, d)
    C = apriori_constant(model, sigma, params.T)
    norm0_sq = stepper.weighted_sq(f0.coeffs)
    ref = C * norm0_sq if norm0_sq > 0 else 1.0

    stop_at = path.hit_index if (params.stopped and path.hit_index is not None) else None
    n_rec = params.n_out + 1
    shape = (n_rec,) + (params.N,) * d
    rho = np.zeros(shape, dtype=complex)
    norm_f = np.zeros(n_rec)
    norm_Lf = np.zeros(n_rec)
    diss_out = np.zeros(n_rec)
    mass = np.zeros(n_rec)

    def record(j, c, diss):
        fk = KineticField(c, d)
        rho[j] = density(fk, model).coeffs
        norm_f[j] = np.sqrt(stepper.weighted_sq(c))
        norm_Lf[j] = np.sqrt(stepper.weighted_sq(bgk_apply(fk, model).coeffs))
        diss_out[j] = diss
        mass[j] = rho[j][(0,) * d].real

    c = f0.coeffs.astype(complex)
    diss = 0.0
    ratio_max = norm0_sq / ref
    record(0, c, diss)
    for n in range(n_steps):
        if stop_at is None or n < stop_at:
            c, dq = stepper.step(c, path.m_mid[n])
            diss += dq
            nsq = stepper.weighted_sq(c)
            if not np.isfinite(nsq):
                raise SolverError(f"non-finite solution at step {n} (t={(n + 1) * params.dt:.6g})")
            ratio = (nsq + diss) / ref
            ratio_max = max(ratio_max, ratio)
            if assert_bound and ratio > BOUND_SLACK:
                raise BoundViolation(
                    f"energy estimate exceeded at t={(n + 1) * params.dt:.6g}: "
                    f"ratio {ratio:.4g} > {BOUND_SLACK}")
        if (n + 1) % per_out == 0:
            record((n + 1) // per_out, c, diss)

    times = params.T * np.arange(n_rec) / params.n_out
    return Trajectory(times=times, rho=rho, norm_f=norm_f, norm_Lf=norm_Lf,
                      dissipation=diss_out, mass=mass, tau_hit=path.tau_hit,
                      bound_constant=C, bound_ratio_max=ratio_max,
                      f_final=KineticField(c, d),
                      info={"dt": params.dt, "n_steps": n_steps})


def simulate(f0: KineticField, params: SolverParams, model: VelocityModel, sigma: SigmaModel,
             m_bar: float, ell0: float, rng: np.random.Generator | None, alpha: float = 0.5,
             assert_bound: bool = True) -> Trajectory:
    """Validate parameters, sample a driver and solve one path.

    ``rng=None`` freezes the driver at ``ell0`` (deterministic run).
    """
    params.validate(model, sigma, ell0)
    if rng is None:
        path = frozen_path(ell0, params.dt, params.n_steps, params.delta, m_bar)
    else:
        path = sample_path(OUProcess.start(m_bar, ell0), params.delta, params.dt,
                           params.n_steps, rng, sigma=sigma, alpha=alpha,
                           fast_factor=params.fast_factor)
    return solve_path(f0, params, model, sigma, path, assert_bound=assert_bound)
