import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kinavg.driving import SigmaModel
from kinavg.fields import DensityField, KineticField, random_density, random_kinetic_field
from kinavg.limit import solve_limit
from kinavg.ptf import (CORRECTORS, CustomChi, IdentityChi, SigmoidChi, TestFunction,
                        TruncatedLinearChi, apply_generators, balanced_driver_value,
                        eval_correctors, eval_phi, leading_coefficients, limit_generator,
                        perturbed_generator_residual, poisson_check, residual_bound,
                        residual_scaling)
from kinavg.velocity import averaged_coefficients, make_discrete_model

N = 16
TP = 2 * np.pi
X = np.arange(N) / N


def xi_fn(x):
    return np.cos(TP * x) + 0.5 * np.sin(2 * TP * x)


def dxi_fn(x):
    return -TP * np.sin(TP * x) + TP * np.cos(2 * TP * x)


def ddxi_fn(x):
    return -TP**2 * np.cos(TP * x) - 2 * TP**2 * np.sin(2 * TP * x)


def s1_fn(x):
    return np.cos(TP * x)


def d_s1xi_fn(x):
    # derivative of cos(2 pi x) * xi(x)
    return -TP * np.sin(TP * x) * xi_fn(x) + np.cos(TP * x) * dxi_fn(x)


@pytest.fixture(scope="module")
def model():
    return make_discrete_model(1, [0.3])


@pytest.fixture(scope="module")
def sigma():
    return SigmaModel.from_functions(lambda x: 0.5 + 0.2 * np.sin(TP * x), s1_fn, N, m_bar=0.4)


def low_mode_field(seed, n_nodes=2):
    # modes |k| <= 3 so products with the order-one profiles stay resolved on the grid
    gen = np.random.default_rng(seed)
    vals = np.zeros((n_nodes, N))
    for k in range(4):
        amp = gen.standard_normal((n_nodes, 2)) / (1 + k)
        vals += amp[:, :1] * np.cos(TP * k * X) + amp[:, 1:] * np.sin(TP * k * X)
    return vals


def oracle_correctors(vals, ell, model, chi, m_bar):
    """Corrector values by real-space grid means with analytic derivatives."""
    mu, M = model.weights, model.maxwellian
    a, b = model.a_field[:, 0], model.b_field[:, 0]
    rho = mu @ vals
    u = np.mean(rho * xi_fn(X))
    p = sum(mu[j] * np.mean(vals[j] * a[j] * dxi_fn(X)) for j in range(2))
    q = sum(mu[j] * np.mean((vals[j] - M[j] * rho) * (a[j]**2 * ddxi_fn(X) + b[j] * dxi_fn(X)))
            for j in range(2))
    rr = np.mean(rho * s1_fn(X) * xi_fn(X))
    ss = sum(mu[j] * np.mean(vals[j] * a[j] * d_s1xi_fn(X)) for j in range(2))
    x0, x1, x2, _ = chi.derivatives(u)
    c = ell - m_bar
    return {"phi": x0, "phi10": x1 * p, "phi20": 0.5 * x2 * p * p + x1 * q,
            "phi02": -x1 * c * rr, "phi12": -x2 * p * c * rr - x1 * c * ss}


def oracle_directions(vals, ell, model, sig_model):
    """Real-space fields -(sigma f + Bf), -Af and Lf computed with numpy FFT."""
    k = np.fft.fftfreq(N, 1.0 / N)
    dx = np.real(np.fft.ifft(2j * np.pi * k * np.fft.fft(vals, axis=-1), axis=-1))
    a, b = model.a_field[:, :1], model.b_field[:, :1]
    sig = 0.5 + 0.2 * np.sin(TP * X) + ell * s1_fn(X)
    rho = model.weights @ vals
    return {"L0": -(sig * vals + b * dx), "L1": -a * dx,
            "L2": model.maxwellian[:, None] * rho - vals}


CHIS = [IdentityChi(), SigmoidChi(0.8), TruncatedLinearChi(0.3)]


@pytest.mark.parametrize("chi", CHIS, ids=["identity", "sigmoid", "truncated"])
def test_corrector_values_against_real_space_oracle(chi, model, sigma):
    vals = low_mode_field(3)
    tf = TestFunction.from_function(chi, xi_fn, N)
    got = eval_correctors(tf, KineticField.from_real(vals), 1.3, model, sigma)
    want = oracle_correctors(vals, 1.3, model, chi, sigma.m_bar)
    for name in CORRECTORS:
        assert got[name] == pytest.approx(want[name], rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("chi", CHIS, ids=["identity", "sigmoid", "truncated"])
def test_generator_terms_against_finite_differences(chi, model, sigma):
    vals, ell, h = low_mode_field(5), 0.9, 1e-5
    tf = TestFunction.from_function(chi, xi_fn, N)
    table = apply_generators(tf, KineticField.from_real(vals), ell, model, sigma)
    for gen, direction in oracle_directions(vals, ell, model, sigma).items():
        plus = oracle_correctors(vals + h * direction, ell, model, chi, sigma.m_bar)
        minus = oracle_correctors(vals - h * direction, ell, model, chi, sigma.m_bar)
        for name in CORRECTORS:
            fd = (plus[name] - minus[name]) / (2 * h)
            assert table[gen, name] == pytest.approx(fd, rel=1e-6, abs=1e-7), (gen, name)
    up = oracle_correctors(vals, ell + h, model, chi, sigma.m_bar)
    mid = oracle_correctors(vals, ell, model, chi, sigma.m_bar)
    down = oracle_correctors(vals, ell - h, model, chi, sigma.m_bar)
    for name in CORRECTORS:
        fd = (up[name] - down[name]) / (2 * h) * (sigma.m_bar - ell)
        assert table["Lm", name] == pytest.approx(fd, rel=1e-6, abs=1e-7)
        # correctors are affine in l, so the second l-derivative part of Lm is zero
        assert abs(up[name] - 2 * mid[name] + down[name]) < 1e-12


def test_constant_xi_kills_gradient_terms(model, sigma):
    tf = TestFunction.from_function(IdentityChi(), lambda x: 1.0 + 0 * x, N)
    f = KineticField.from_real(low_mode_field(7))
    vals = eval_correctors(tf, f, 2.0, model, sigma)
    assert vals["phi10"] == 0.0 and vals["phi20"] == 0.0
    table = apply_generators(tf, f, 2.0, model, sigma)
    assert abs(table["L1", "phi"]) < 1e-14
    assert abs(table["L2", "phi"]) < 1e-14


def test_equilibrium_fields(model, sigma, rng):
    # f = rho M: the relaxation direction vanishes, so every L2 term is zero
    rho = random_density(rng, N)
    f = KineticField.equilibrium(rho, model.maxwellian)
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    table = apply_generators(tf, f, -0.5, model, sigma)
    for name in CORRECTORS:
        assert abs(table["L2", name]) < 1e-13
    # the q functional sees only f - rho M, which is zero here
    vals = eval_correctors(tf, f, -0.5, model, sigma)
    u = float(np.real(np.sum(rho.coeffs * np.conj(tf.xi))))
    _, x1, x2, _ = SigmoidChi().derivatives(u)
    p = vals["phi10"] / x1
    assert vals["phi20"] == pytest.approx(0.5 * x2 * p * p, rel=1e-12)


def test_eval_phi_examples(model):
    rho = DensityField.from_function(lambda x: 2 * np.cos(TP * x), N)
    f = KineticField.equilibrium(rho, model.maxwellian)
    tf = TestFunction.from_function(IdentityChi(), lambda x: np.cos(TP * x), N)
    assert eval_phi(tf, f, model) == pytest.approx(1.0, rel=1e-14)
    tf2 = TestFunction.from_function(SigmoidChi(0.5), lambda x: np.cos(TP * x), N)
    assert eval_phi(tf2, f, model) == pytest.approx(0.5 * np.tanh(2.0), rel=1e-14)


def test_limit_generator_single_mode():
    rho = DensityField.from_function(lambda x: np.cos(TP * x), N)
    tf = TestFunction.from_function(IdentityChi(), lambda x: np.cos(TP * x), N)
    sbar = np.zeros(N, dtype=complex)
    sbar[0] = 0.3
    got = limit_generator(tf, rho, 0.7, 0.0, sbar)
    assert got == pytest.approx(-0.5 * (0.7 * 4 * np.pi**2 + 0.3), rel=1e-13)


def test_limit_generator_is_time_derivative_along_limit_flow(rng):
    sbar = DensityField.from_function(lambda x: 1 + 0.5 * np.cos(TP * x), N).coeffs
    rho0 = random_density(rng, N)
    tf = TestFunction.from_function(SigmoidChi(0.7), xi_fn, N)
    K, J, h = 0.6, 0.4, 1e-6
    traj = solve_limit(rho0, K, J, sbar, 2 * h, dt=h, n_out=2)

    def phi(c):
        return tf.chi(float(np.real(np.sum(c * np.conj(tf.xi)))))

    vals = [phi(c) for c in traj.coeffs]
    fd = (-3 * vals[0] + 4 * vals[1] - vals[2]) / (2 * h)
    assert limit_generator(tf, rho0, K, J, sbar) == pytest.approx(fd, rel=1e-6)


def test_phi10_is_relaxation_integral(model, sigma):
    # phi10(f) = int_0^inf (L1 phi)(g(t)) dt with g(t) = rho M + exp(-t)(f - rho M)
    chi = SigmoidChi(1.5)
    tf = TestFunction.from_function(chi, xi_fn, N)
    vals = low_mode_field(11)
    rho = model.weights @ vals
    eq = model.maxwellian[:, None] * rho

    def integrand(t):
        g = KineticField.from_real(eq + np.exp(-t) * (vals - eq))
        return apply_generators(tf, g, 0.0, model, sigma)["L1", "phi"]

    value, _ = quad(integrand, 0.0, 60.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    target = eval_correctors(tf, KineticField.from_real(vals), 0.0, model, sigma)["phi10"]
    assert value == pytest.approx(target, abs=1e-8)


@given(st.integers(0, 10**6), st.floats(-4, 4), st.sampled_from([0, 1, 2]))
@settings(max_examples=25, deadline=None)
def test_poisson_identities_hold(seed, ell, which):
    mod = make_discrete_model(1, [0.3])
    sig = SigmaModel.from_functions(lambda x: 0.5 + 0.2 * np.sin(TP * x), s1_fn, N, m_bar=0.4)
    tf = TestFunction.from_function(CHIS[which], xi_fn, N)
    f = random_kinetic_field(np.random.default_rng(seed), 2, N)
    for key, val in poisson_check(tf, f, ell, mod, sig).items():
        assert val < 1e-9 * (1 + abs(ell)), key


@given(st.floats(0.1, 3.0), st.floats(-6, 6))
@settings(max_examples=100, deadline=None)
def test_truncated_chi_properties(r, u):
    chi = TruncatedLinearChi(r)
    v = chi.derivatives(u)
    w = chi.derivatives(-u)
    assert v[0] == pytest.approx(-w[0], abs=1e-15)
    assert abs(v[0]) <= r + 1 + 1e-12
    # nondecreasing; the slope must exceed one somewhere to climb from r to r + 1
    assert 0.0 <= v[1] <= 1.7
    if abs(u) <= r:
        assert v == (u, 1.0, 0.0, 0.0)
    if abs(u) >= r + 1:
        assert v[1:] == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("chi", [TruncatedLinearChi(0.7), SigmoidChi(0.6)],
                         ids=["truncated", "sigmoid"])
def test_chi_derivatives_finite_difference(chi):
    h = 1e-6
    for u in np.linspace(-2.2, 2.2, 37):
        d = chi.derivatives(u)
        up, dn = chi.derivatives(u + h), chi.derivatives(u - h)
        for order in range(3):
            fd = (up[order] - dn[order]) / (2 * h)
            assert d[order + 1] == pytest.approx(fd, abs=1e-6)


def test_truncated_chi_continuous_at_joins():
    chi = TruncatedLinearChi(1.0)
    for u in (1.0, 2.0):
        left, right = chi.derivatives(u - 1e-12), chi.derivatives(u + 1e-12)
        np.testing.assert_allclose(left, right, atol=1e-9)


def test_custom_chi_wraps_callables():
    chi = CustomChi((np.sin, np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)))
    assert chi.derivatives(0.3) == pytest.approx((np.sin(0.3), np.cos(0.3), -np.sin(0.3),
                                                  -np.cos(0.3)))


def test_degenerate_assembly(model, sigma):
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    f = KineticField.from_real(low_mode_field(13))
    table = apply_generators(tf, f, 1.1, model, sigma)
    assert perturbed_generator_residual(table, 0.0, 0.0) < 1e-12
    # eps = 0: only the delta^2 group survives
    d = 0.3
    expected = d**2 * abs(table["L0", "phi02"] + table["L1", "phi12"])
    assert perturbed_generator_residual(table, 0.0, d) == pytest.approx(expected, rel=1e-9)
    # delta = 0: only the eps and eps^2 groups survive
    e = 0.2
    expected = abs(e * (table["L0", "phi10"] + table["L1", "phi20"] + table["Lm", "phi12"])
                   + e**2 * table["L0", "phi20"])
    assert perturbed_generator_residual(table, e, 0.0) == pytest.approx(expected, rel=1e-9)


def test_residual_groups_polynomial_in_ell(model, sigma):
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    f = KineticField.from_real(low_mode_field(17))

    def groups(ell):
        t = apply_generators(tf, f, ell, model, sigma)
        return (t["L0", "phi10"] + t["L1", "phi20"] + t["Lm", "phi12"],
                t["L0", "phi02"] + t["L1", "phi12"])

    g = np.array([groups(ell) for ell in (-1.0, 0.5, 2.0, 3.5)])
    # eps group affine, delta^2 group quadratic
    assert abs(g[0, 0] - 2 * g[1, 0] + g[2, 0]) < 1e-10 * np.max(np.abs(g))
    assert abs(g[0, 1] - 3 * g[1, 1] + 3 * g[2, 1] - g[3, 1]) < 1e-10 * np.max(np.abs(g))


def test_residual_below_calibrated_bound(model, sigma):
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    gen = np.random.default_rng(99)

    def ratios(n):
        out = []
        for _ in range(n):
            f = random_kinetic_field(gen, 2, N) * float(gen.uniform(0.2, 3.0))
            ell = float(gen.uniform(-10, 10))
            eps, delta = (float(v) for v in 10 ** gen.uniform(-3, -1, 2))
            table = apply_generators(tf, f, ell, model, sigma)
            out.append(perturbed_generator_residual(table, eps, delta)
                       / residual_bound(f, ell, model, eps, delta))
        return np.array(out)

    calibrated = ratios(30).max()
    held_out = ratios(30)
    assert np.all(held_out <= 4 * calibrated)


def test_constant_sigma_gives_first_order_in_eps(model):
    sig = SigmaModel.constant(0.5, N, m_bar=0.0)
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    f = KineticField.from_real(low_mode_field(19))
    eps = 2.0 ** -np.arange(4, 10)
    rows = residual_scaling(tf, f, 3.0, model, sig, eps, [0.1])
    res = np.array([r["residual"] for r in rows])
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)
    assert {"eps", "delta", "residual", "bound_value"} <= set(rows[0])


def test_balanced_driver_value_formula(model, sigma):
    tf = TestFunction.from_function(SigmoidChi(), xi_fn, N)
    f = KineticField.from_real(low_mode_field(23))
    ce, cd = leading_coefficients(tf, f, model, sigma)
    ell = balanced_driver_value(tf, f, model, sigma, 1e-3, 1e-2, 1e-3, 1e-2)
    assert ell - sigma.m_bar == pytest.approx(abs(ce / cd) * np.sqrt(1e-5) / 1e-5)


def test_K_used_by_limit_generator(model):
    assert averaged_coefficients(model).K[0, 0] == 1.0
