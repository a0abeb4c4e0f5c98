"""Perturbed test functions for the joint diffusion/averaging limit.

A limit test function is ``phi(f) = chi((rho, xi))`` with ``rho = <f>``.
It is corrected to

    phi_eps_delta = phi + eps phi10 + eps^2 phi20 + delta^2 phi02 + eps delta^2 phi12

so that the generator of the pair ``(f, m)``,

    L_eps_delta = eps^-2 L2 + eps^-1 L1 + L0 + delta^-2 Lm,

applied to it differs from the limit generator by ``O(eps + delta^2)``.
Here ``L2``, ``L1``, ``L0`` are directional derivatives in ``f`` along
``Lf``, ``-Af`` and ``-(sigma(l) f + Bf)``, and ``Lm`` is the OU generator
in ``l``.

Every corrector is a polynomial in five linear functionals of ``f``:

    u(f)  = (<f>, xi)
    p(f)  = (f, a.grad xi)
    q(f)  = (f - <f>M, (a.grad)^2 xi + b.grad xi)
    rr(f) = (<f>, sigma1 xi)
    ss(f) = (f, a.grad(sigma1 xi))

with pairings over ``x`` and ``mu``. Directional derivatives are therefore
closed-form polynomials in these functionals evaluated at ``f`` and at the
direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kinavg import spectral
from kinavg.analysis import weighted_norm
from kinavg.driving import SigmaModel
from kinavg.fields import DensityField, KineticField
from kinavg.limit import weak_operator
from kinavg.velocity import VelocityModel, averaged_coefficients, bgk_apply, density

CORRECTORS = ("phi", "phi10", "phi20", "phi02", "phi12")
GENERATORS = ("L0", "L1", "L2", "Lm")


# ---------------------------------------------------------------------------
# chi families


class Chi:
    """Scalar profile with derivatives up to order three."""

    def derivatives(self, u: float) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def __call__(self, u: float) -> float:
        return self.derivatives(u)[0]


class IdentityChi(Chi):
    def derivatives(self, u):
        return u, 1.0, 0.0, 0.0


@dataclass(frozen=True)
class SigmoidChi(Chi):
    """``chi(u) = s tanh(u / s)``: bounded, with unit slope at the origin."""

    scale: float = 1.0

    def derivatives(self, u):
        s = self.scale
        t = np.tanh(u / s)
        sech2 = 1.0 - t * t
        return s * t, sech2, -2.0 * t * sech2 / s, -2.0 * sech2 * (1.0 - 3.0 * t * t) / s**2


def _blend_coefficients() -> np.ndarray:
    # g(s) = s + c4 s^4 + ... + c7 s^7 with g(1) = 1 and g', g'', g''' zero at 1
    A = np.array([[1.0, 1.0, 1.0, 1.0],
                  [4.0, 5.0, 6.0, 7.0],
                  [12.0, 20.0, 30.0, 42.0],
                  [24.0, 60.0, 120.0, 210.0]])
    rhs = np.array([0.0, -1.0, 0.0, 0.0])
    return np.linalg.solve(A, rhs)


_BLEND = _blend_coefficients()


@dataclass(frozen=True)
class TruncatedLinearChi(Chi):
    """Odd ``C^3`` function equal to ``u`` on ``[0, r]`` and to ``r + 1`` beyond ``r + 1``."""

    r: float = 1.0

    def derivatives(self, u):
        sign = -1.0 if u < 0 else 1.0
        a = abs(u)
        if a <= self.r:
            vals = (a, 1.0, 0.0, 0.0)
        elif a >= self.r + 1.0:
            vals = (self.r + 1.0, 0.0, 0.0, 0.0)
        else:
            s = a - self.r
            c4, c5, c6, c7 = _BLEND
            g = s + c4 * s**4 + c5 * s**5 + c6 * s**6 + c7 * s**7
            g1 = 1.0 + 4 * c4 * s**3 + 5 * c5 * s**4 + 6 * c6 * s**5 + 7 * c7 * s**6
            g2 = 12 * c4 * s**2 + 20 * c5 * s**3 + 30 * c6 * s**4 + 42 * c7 * s**5
            g3 = 24 * c4 * s + 60 * c5 * s**2 + 120 * c6 * s**3 + 210 * c7 * s**4
            vals = (self.r + g, g1, g2, g3)
        # odd function: even-order derivatives flip sign with u
        return sign * vals[0], vals[1], sign * vals[2], vals[3]


@dataclass(frozen=True)
class CustomChi(Chi):
    """User-supplied ``chi`` given as four callables ``(chi, chi', chi'', chi''')``."""

    funcs: tuple

    def derivatives(self, u):
        return tuple(float(fn(u)) for fn in self.funcs)


# ---------------------------------------------------------------------------
# test function and functionals


@dataclass(frozen=True)
class TestFunction:
    """``phi(f) = chi((<f>, xi))`` with ``xi`` stored as Fourier coefficients."""

    __test__ = False  # not a pytest class

    chi: Chi
    xi: np.ndarray
    d: int = 1

    @classmethod
    def from_function(cls, chi: Chi, func, N: int, d: int = 1) -> "TestFunction":
        return cls(chi, DensityField.from_function(func, N, d).coeffs, d)


class _Profiles:
    """Spatial profiles entering the functionals, per velocity node."""

    def __init__(self, tf: TestFunction, model: VelocityModel, sigma: SigmaModel):
        d = tf.d
        xi = tf.xi
        self.d = d
        self.model = model
        self.xi = xi
        self.A_xi = spectral.directional_derivative(xi[np.newaxis], model.a_field, d)
        self.B_xi = spectral.directional_derivative(xi[np.newaxis], model.b_field, d)
        self.AA_xi = spectral.directional_derivative(self.A_xi, model.a_field, d)
        self.s1_xi = spectral.multiply(sigma.sigma1, xi, d)
        self.A_s1_xi = spectral.directional_derivative(self.s1_xi[np.newaxis], model.a_field, d)
        self.q_profile = self.AA_xi + self.B_xi

    def kin_pair(self, g: np.ndarray, prof: np.ndarray) -> float:
        """``sum_j mu_j (g_j, prof_j)_x``."""
        return float(np.sum(self.model.weights * spectral.inner(g, prof, self.d)))

    def functionals(self, g: np.ndarray) -> dict:
        model = self.model
        rho = density(KineticField(g, self.d), model).coeffs
        shape = (-1,) + (1,) * self.d
        dev = g - model.maxwellian.reshape(shape) * rho[np.newaxis]
        return {
            "u": float(spectral.inner(rho, self.xi, self.d)),
            "p": self.kin_pair(g, self.A_xi),
            "q": self.kin_pair(dev, self.q_profile),
            "rr": float(spectral.inner(rho, self.s1_xi, self.d)),
            "ss": self.kin_pair(g, self.A_s1_xi),
        }


def eval_phi(tf: TestFunction, f: KineticField, model: VelocityModel) -> float:
    """``chi((rho, xi))``."""
    rho = density(f, model)
    return float(tf.chi(float(spectral.inner(rho.coeffs, tf.xi, tf.d))))


def _corrector_values(chi_d, F: dict, c: float) -> dict:
    """Corrector values from the functionals; ``c = l - m_bar``."""
    x0, x1, x2, _ = chi_d
    p, q, rr, ss = F["p"], F["q"], F["rr"], F["ss"]
    return {
        "phi": x0,
        "phi10": x1 * p,
        "phi20": 0.5 * x2 * p * p + x1 * q,
        "phi02": -x1 * c * rr,
        "phi12": -x2 * p * c * rr - x1 * c * ss,
    }


def _corrector_directional(chi_d, F: dict, G: dict, c: float) -> dict:
    """Directional derivatives of the correctors along a field with functionals ``G``."""
    _, x1, x2, x3 = chi_d
    p, q, r, s = F["p"], F["q"], c * F["rr"], c * F["ss"]
    uG, pG, qG, rG, sG = G["u"], G["p"], G["q"], c * G["rr"], c * G["ss"]
    return {
        "phi": x1 * uG,
        "phi10": x2 * uG * p + x1 * pG,
        "phi20": 0.5 * x3 * uG * p * p + x2 * p * pG + x2 * uG * q + x1 * qG,
        "phi02": -x2 * uG * r - x1 * rG,
        "phi12": (-x3 * uG * p * r - x2 * pG * r - x2 * p * rG
                  - x2 * uG * s - x1 * sG),
    }


def _corrector_ell_derivative(chi_d, F: dict) -> dict:
    """``d/dl`` of each corrector; every second ``l``-derivative vanishes."""
    _, x1, x2, _ = chi_d
    return {
        "phi": 0.0,
        "phi10": 0.0,
        "phi20": 0.0,
        "phi02": -x1 * F["rr"],
        "phi12": -x2 * F["p"] * F["rr"] - x1 * F["ss"],
    }


def eval_correctors(tf: TestFunction, f: KineticField, ell: float, model: VelocityModel,
                    sigma: SigmaModel) -> dict:
    """Values of ``phi, phi10, phi20, phi02, phi12`` at ``(f, l)``."""
    prof = _Profiles(tf, model, sigma)
    F = prof.functionals(f.coeffs)
    return _corrector_values(tf.chi.derivatives(F["u"]), F, ell - sigma.m_bar)


def generator_directions(f: KineticField, ell: float, model: VelocityModel,
                         sigma: SigmaModel) -> dict:
    """Fields along which ``L0``, ``L1``, ``L2`` differentiate."""
    d = f.d
    c = f.coeffs
    Af = spectral.directional_derivative(c, model.a_field, d)
    Bf = spectral.directional_derivative(c, model.b_field, d)
    sf = spectral.multiply(sigma.sigma(ell)[np.newaxis], c, d)
    return {"L0": -(sf + Bf), "L1": -Af, "L2": bgk_apply(f, model).coeffs}


def limit_generator(tf: TestFunction, rho: DensityField, K, J, sigma_bar: np.ndarray) -> float:
    """``chi'((rho, xi)) (rho, div(K grad xi) + J.grad xi - sigma_bar xi)``."""
    d = tf.d
    u = float(spectral.inner(rho.coeffs, tf.xi, d))
    g = weak_operator(tf.xi, K, J, sigma_bar, d)
    return tf.chi.derivatives(u)[1] * float(spectral.inner(rho.coeffs, g, d))


@dataclass(frozen=True)
class GeneratorTable:
    """All generator/corrector combinations at one point ``(f, l)``.

    ``terms[(gen, corr)]`` is e.g. ``terms[("L1", "phi10")]``; ``limit`` is
    the limit generator applied to ``phi``.
    """

    terms: dict
    limit: float
    correctors: dict

    def __getitem__(self, key):
        return self.terms[key]


def apply_generators(tf: TestFunction, f: KineticField, ell: float, model: VelocityModel,
                     sigma: SigmaModel) -> GeneratorTable:
    prof = _Profiles(tf, model, sigma)
    c = ell - sigma.m_bar
    F = prof.functionals(f.coeffs)
    chi_d = tf.chi.derivatives(F["u"])
    terms = {}
    for gen, G in generator_directions(f, ell, model, sigma).items():
        row = _corrector_directional(chi_d, F, prof.functionals(G), c)
        for corr in CORRECTORS:
            terms[(gen, corr)] = row[corr]
    dl = _corrector_ell_derivative(chi_d, F)
    for corr in CORRECTORS:
        terms[("Lm", corr)] = dl[corr] * (sigma.m_bar - ell)
    coeffs = averaged_coefficients(model)
    rho = density(f, model)
    lim = limit_generator(tf, rho, coeffs.K, coeffs.J, sigma.sigma_bar)
    return GeneratorTable(terms=terms, limit=lim,
                          correctors=_corrector_values(chi_d, F, c))


def poisson_check(tf: TestFunction, f: KineticField, ell: float, model: VelocityModel,
                  sigma: SigmaModel) -> dict:
    """Residuals of the five corrector equations at ``(f, l)``."""
    t = apply_generators(tf, f, ell, model, sigma)
    return {
        "order_-1": abs(t["L1", "phi"] + t["L2", "phi10"]),
        "order_0": abs(t["L0", "phi"] + t["L1", "phi10"] + t["L2", "phi20"]
                       + t["Lm", "phi02"] - t.limit),
        "L2_phi02": abs(t["L2", "phi02"]),
        "Lm_phi20": abs(t["Lm", "phi20"]),
        "delta2_over_eps": abs(t["L1", "phi02"] + t["L2", "phi12"]),
    }


def perturbed_generator_residual(table: GeneratorTable, eps: float, delta: float) -> float:
    """``|L_eps_delta phi_eps_delta - L phi|`` assembled from a generator table.

    Groups whose prefactor is singular at ``eps = 0`` or ``delta = 0`` are
    dropped in that case; they vanish identically by the corrector
    equations.
    """
    t = table
    total = (t["L0", "phi"] + t["L1", "phi10"] + t["L2", "phi20"] + t["Lm", "phi02"]
             - t.limit)
    if eps > 0:
        total += eps**-2 * t["L2", "phi"] + eps**-1 * (t["L1", "phi"] + t["L2", "phi10"])
        total += eps**-2 * delta**2 * t["L2", "phi02"]
        total += eps**-1 * delta**2 * (t["L1", "phi02"] + t["L2", "phi12"])
    if delta > 0:
        total += delta**-2 * t["Lm", "phi"] + eps * delta**-2 * t["Lm", "phi10"]
        total += eps**2 * delta**-2 * t["Lm", "phi20"]
    total += eps * (t["L0", "phi10"] + t["L1", "phi20"] + t["Lm", "phi12"])
    total += eps**2 * t["L0", "phi20"]
    total += delta**2 * (t["L0", "phi02"] + t["L1", "phi12"])
    total += eps * delta**2 * t["L0", "phi12"]
    return abs(total)


def residual_bound(f: KineticField, ell: float, model: VelocityModel, eps: float,
                   delta: float) -> float:
    """Shape ``(1 + ||f||^3)(eps (1 + |l|) + delta^2 (1 + l^2))`` of the residual bound."""
    nf = weighted_norm(f, model)
    return (1.0 + nf**3) * (eps * (1.0 + abs(ell)) + delta**2 * (1.0 + ell**2))


def residual_scaling(tf: TestFunction, f: KineticField, ell: float, model: VelocityModel,
                     sigma: SigmaModel, eps_list, delta_list) -> list[dict]:
    """Residual samples on the grid ``eps_list x delta_list``."""
    table = apply_generators(tf, f, ell, model, sigma)
    rows = []
    for eps in eps_list:
        for delta in delta_list:
            rows.append({
                "eps": float(eps),
                "delta": float(delta),
                "residual": perturbed_generator_residual(table, eps, delta),
                "bound_value": residual_bound(f, ell, model, eps, delta),
            })
    return rows


def leading_coefficients(tf: TestFunction, f: KineticField, model: VelocityModel,
                         sigma: SigmaModel) -> tuple[float, float]:
    """Leading large-``l`` growth of the ``eps`` and ``delta^2`` residual groups.

    The ``eps`` group is affine in ``l`` and the ``delta^2`` group quadratic;
    returns the slope of the first and the curvature of the second, read off
    from three evaluations.
    """
    vals = []
    for ell in (-1.0, 0.0, 1.0):
        t = apply_generators(tf, f, sigma.m_bar + ell, model, sigma)
        vals.append((t["L0", "phi10"] + t["L1", "phi20"] + t["Lm", "phi12"],
                     t["L0", "phi02"] + t["L1", "phi12"]))
    (e_m, d_m), (_, d_0), (e_p, d_p) = vals
    return 0.5 * (e_p - e_m), 0.5 * (d_p - 2.0 * d_0 + d_m)


def balanced_driver_value(tf: TestFunction, f: KineticField, model: VelocityModel,
                          sigma: SigmaModel, eps_min: float, eps_fixed: float,
                          delta_min: float, delta_fixed: float) -> float:
    """Driver value at which both one-parameter sweeps see their own term dominate.

    In the ``eps`` sweep at ``delta_fixed`` the ``delta^2`` group contaminates
    most at ``eps_min``; in the ``delta`` sweep at ``eps_fixed`` the ``eps``
    group contaminates most at ``delta_min``. The returned ``l`` makes the
    two worst-case contamination ratios equal.
    """
    c_eps, c_delta = leading_coefficients(tf, f, model, sigma)
    if c_eps == 0 or c_delta == 0:
        raise ValueError("degenerate test point: a leading residual coefficient vanishes")
    scale = np.sqrt(eps_min * eps_fixed) / (delta_fixed * delta_min)
    return sigma.m_bar + abs(c_eps / c_delta) * scale
