import importlib.resources
import math

import numpy as np
import pytest
from scipy.special import exp1

from manyheom import bath

MODE_TABLE = importlib.resources.files("manyheom") / "data/methylene_blue_modes.csv"


def mb_modes():
    return bath.load_mode_table(str(MODE_TABLE))


# ---------------------------------------------------------------------------
# exponential integral


def ei_series(x, terms=300):
    # independent oracle: gamma + ln x + sum_k x^k / (k k!)
    total = 0.0
    term = 1.0
    for k in range(1, terms):
        term *= x / k
        total += term / k
    return 0.5772156649015328606 + math.log(x) + total


def test_ei_reference_value():
    assert abs(bath.exp_integral_Ei(1.0) - 1.8951178163559368) < 1e-12


def test_ei_against_series():
    for x in [1e-4, 0.01, 0.3, 1.0, 4.7, 12.0, 35.0]:
        assert abs(bath.exp_integral_Ei(x) - ei_series(x)) < 1e-10 * abs(ei_series(x))


def test_ei_small_x_asymptote():
    x = 1e-6
    expected = math.log(x) + 0.5772156649015328606 + x
    assert abs(bath.exp_integral_Ei(x) - expected) < 1e-12 * abs(expected)


def test_ei_asymptotic_large_x():
    # Ei(50) * 50 * e^-50 -> 1 + 1/50 + 2/50^2 + 6/50^3 + ...
    got = bath.exp_integral_Ei(50.0) * 50.0 * math.exp(-50.0)
    expected = sum(math.factorial(k) / 50.0**k for k in range(12))
    assert abs(got - expected) < 1e-8


def test_ei_rejects_nonpositive():
    with pytest.raises(ValueError):
        bath.exp_integral_Ei(0.0)
    with pytest.raises(ValueError):
        bath.exp_integral_Ei(-1.0)


def test_ei_vectorized():
    xs = np.array([0.5, 5.0, 50.0, 500.0])
    out = bath.exp_integral_Ei(xs)
    for x, val in zip(xs, out):
        assert np.isclose(val, bath.exp_integral_Ei(float(x)), rtol=1e-12)


# ---------------------------------------------------------------------------
# bath correlation functions


def test_bcf_zero_density():
    j = bath.TabulatedDensity(np.linspace(0.1, 10, 50), np.zeros(50))
    b = bath.bcf_from_spectral_density(j, 5.0, 20)
    assert np.all(b.values == 0)


def test_bcf_ohmic_against_closed_form():
    a, lam = 0.7, 2.5
    j = bath.OhmicDensity(a, lam)
    b = bath.bcf_from_spectral_density(j, 4.0, 33)
    # oracle: int_0^inf A w e^{-w/L} e^{-i w t} dw = A / (1/L + i t)^2
    exact = a / (1.0 / lam + 1j * b.tau) ** 2
    assert abs(b.at_zero - a * lam**2) < 1e-8 * a * lam**2
    assert np.max(np.abs(b.values - exact)) < 1e-7 * a * lam**2


def test_bcf_lorentzian_against_closed_form():
    s, w0, hw = 2.0, 1000.0, 1e-3
    j = bath.LorentzianDensity(s, w0, hw)
    b = bath.bcf_from_spectral_density(j, 0.02, 21)
    exact = s * np.exp((-1j * w0 - hw) * b.tau)
    rel = np.abs(b.values - exact) / np.abs(exact)
    assert np.max(rel) < 1e-6


def test_bcf_lorentzian_against_exp1_oracle():
    # exact half-line transform via complex exponential integrals:
    # alpha = s e^{-i p- t} + s/(2 pi i) [I(p+) - I(p-)],
    # I(p) = e^{-i p t} E1(-i p t), p+- = w0 +- i hw
    s, w0, hw = 1.3, 5.0, 0.7
    j = bath.LorentzianDensity(s, w0, hw)
    b = bath.bcf_from_spectral_density(j, 3.0, 11)
    pp, pm = w0 + 1j * hw, w0 - 1j * hw

    def half_line(p, t):
        return np.exp(-1j * p * t) * exp1(-1j * p * t)

    exact = []
    for t in b.tau:
        if t == 0:
            exact.append(j.integral())
            continue
        val = s * np.exp(-1j * pm * t) + s / (2j * math.pi) * (
            half_line(pp, t) - half_line(pm, t)
        )
        exact.append(val)
    exact = np.array(exact)
    assert np.max(np.abs(b.values - exact)) < 1e-7 * s


def test_bcf_linearity():
    j1 = bath.OhmicDensity(0.5, 1.0)
    j2 = bath.LorentzianDensity(1.0, 4.0, 0.5)
    combo = bath.CompositeDensity([j1, j2])
    b1 = bath.bcf_from_spectral_density(j1, 2.0, 9)
    b2 = bath.bcf_from_spectral_density(j2, 2.0, 9)
    bc = bath.bcf_from_spectral_density(combo, 2.0, 9)
    assert np.max(np.abs(bc.values - b1.values - b2.values)) < 1e-6


def test_bcf_tabulated_matches_quadrature_of_interpolant():
    grid = np.linspace(0.5, 8.0, 40)
    vals = np.exp(-((grid - 3.0) ** 2))
    j = bath.TabulatedDensity(grid, vals)
    b = bath.bcf_from_spectral_density(j, 1.5, 7)
    from scipy.integrate import quad

    pts = list(grid[1:-1])  # interpolation kinks
    for t, got in zip(b.tau, b.values):
        re, _ = quad(
            lambda w: j(w) * np.cos(w * t), grid[0], grid[-1], points=pts, limit=300
        )
        im, _ = quad(
            lambda w: j(w) * np.sin(w * t), grid[0], grid[-1], points=pts, limit=300
        )
        assert abs(got - (re - 1j * im)) < 1e-9


def test_bcf_validation():
    j = bath.OhmicDensity(1.0, 1.0)
    with pytest.raises(ValueError):
        bath.bcf_from_spectral_density(j, -1.0, 10)
    with pytest.raises(ValueError):
        bath.bcf_from_spectral_density(j, 1.0, 1)


# ---------------------------------------------------------------------------
# exponential fits


def test_fit_single_synthetic_exponential():
    tau = np.linspace(0, 5, 200)
    b = bath.BathCorrelationFunction(tau, np.exp(-(1 + 2j) * tau))
    model, res = bath.fit_exponentials(b, 1)
    assert res < 1e-10
    (g, w), = model.terms
    assert abs(g - 1) < 1e-8 and abs(w - (1 + 2j)) < 1e-8


def test_fit_recovers_lorentzian_bath():
    # closed-form correlation function of a narrow Lorentzian line,
    # sampled over several decay times so both scales are resolvable
    s, w0, hw = 2.0, 20.0, 1.0
    tau = np.linspace(0, 3.0 / hw, 600)
    b = bath.BathCorrelationFunction(tau, s * np.exp((-1j * w0 - hw) * tau))
    model, res = bath.fit_exponentials(b, 1)
    (g, w), = model.terms
    assert abs(g - s) / s < 1e-6
    assert abs(w.real - hw) / hw < 1e-6
    assert abs(w.imag - w0) / w0 < 1e-6


def test_fit_two_modes():
    tau = np.linspace(0, 8, 400)
    vals = 0.8 * np.exp(-(0.5 + 3j) * tau) + 0.2 * np.exp(-(1.5 - 1j) * tau)
    model, res = bath.fit_exponentials(bath.BathCorrelationFunction(tau, vals), 2)
    assert res < 1e-9
    assert all(w.real > 0 for _, w in model.terms)


def test_fit_residual_self_consistent():
    tau = np.linspace(0, 6, 300)
    vals = np.exp(-(0.7 + 2j) * tau) + 0.3 * np.exp(-1.1 * tau)
    b = bath.BathCorrelationFunction(tau, vals)
    model, res = bath.fit_exponentials(b, 2)
    recomputed = np.max(np.abs(model.evaluate(tau) - vals)) / abs(vals[0])
    assert res == recomputed


def test_fit_deterministic():
    tau = np.linspace(0, 6, 257)
    vals = np.exp(-(0.7 + 2j) * tau) + 0.3 * np.exp(-(1.1 + 0.3j) * tau)
    b = bath.BathCorrelationFunction(tau, vals)
    m1, r1 = bath.fit_exponentials(b, 3)
    m2, r2 = bath.fit_exponentials(b, 3)
    assert r1 == r2
    assert all(a == c for a, c in zip(m1.terms, m2.terms))


def test_fit_stability_enforced():
    rng = np.random.default_rng(7)
    tau = np.linspace(0, 4, 200)
    vals = np.exp(-(0.2 + 5j) * tau) + 0.01 * (
        rng.standard_normal(200) + 1j * rng.standard_normal(200)
    )
    model, res = bath.fit_exponentials(bath.BathCorrelationFunction(tau, vals), 3)
    assert all(w.real > 0 for _, w in model.terms)


def test_exponential_model_validation():
    with pytest.raises(ValueError):
        bath.ExponentialBathModel([(1.0, -0.5 + 1j)])
    with pytest.raises(ValueError):
        bath.ExponentialBathModel([(1.0, 1.0)], locality="weird")


# ---------------------------------------------------------------------------
# effective spectral density and the shipped mode table


def test_mode_table_shipped():
    modes = mb_modes()
    assert len(modes) == 107
    assert np.all(modes.omega > 0) and np.all(modes.huang_rhys >= 0)


def test_effective_density_zero_mode():
    modes = bath.VibrationalModeTable(np.array([500.0]), np.array([0.0]))
    grid = np.linspace(1, 2000, 400)
    j = bath.effective_spectral_density(modes, 0.025, 3500.0, grid)
    assert np.all(j.values == 0)


def test_effective_density_peak_converges_to_mode():
    # as the ohmic broadening vanishes the resonance approaches the bare
    # mode (the line shift scales like A * Lambda)
    modes = bath.VibrationalModeTable(np.array([800.0]), np.array([0.2]))
    grid = np.linspace(400, 1200, 32001)
    prev_gap = None
    for a in (0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625):
        j = bath.effective_spectral_density(modes, a, 3500.0, grid)
        peak = grid[np.argmax(j.values)]
        gap = abs(peak - 800.0)
        if prev_gap is not None:
            assert gap <= prev_gap + 0.05
        prev_gap = gap
    assert prev_gap < 3.0


def test_effective_density_nonnegative_and_golden():
    modes = mb_modes()
    grid = np.linspace(1.0, 4500.0, 4500)
    j = bath.effective_spectral_density(modes, 0.025, 3500.0, grid)
    assert np.all(j.values >= 0)
    golden = [
        (300.0, 9.856493538425e-02),
        (800.0, 2.978110846219e-01),
        (1253.0, 8.760029012658e00),
        (2000.0, 6.838864078005e-01),
        (2716.0, 4.990544254778e00),
        (4000.0, 2.253456891757e-01),
    ]
    for w, expected in golden:
        assert np.isclose(j(np.array(w)), expected, rtol=1e-9)


def test_effective_density_grid_coverage():
    modes = mb_modes()
    with pytest.raises(ValueError):
        bath.effective_spectral_density(modes, 0.025, 3500.0, np.linspace(1, 100, 10))


def test_mode_table_csv_roundtrip(tmp_path):
    p = tmp_path / "modes.csv"
    p.write_text("# comment\nomega_cm1,huang_rhys\n100.0,0.5\n200.0,0.25\n")
    modes = bath.load_mode_table(p)
    assert len(modes) == 2 and modes.omega[1] == 200.0
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        bath.load_mode_table(p)


def test_tabulated_csv_export(tmp_path):
    j = bath.TabulatedDensity(np.array([1.0, 2.0]), np.array([0.5, 0.25]))
    out = tmp_path / "j.csv"
    bath.export_tabulated_csv(j, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "omega,J"
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# composite phonon density


def test_composite_phonon_normalization():
    j = bath.composite_phonon_density(
        0.01, bath.SuperohmicDensity(1.0, 1.0), []
    )
    assert abs(j.integral() - 0.01) < 1e-8 * 0.01


def test_composite_phonon_scaling_linearity():
    bg = bath.SuperohmicDensity(1.0, 1.0)
    peaks = [bath.LorentzianDensity(0.3, 0.4, 0.02), bath.LorentzianDensity(0.2, 0.9, 0.02)]
    j1 = bath.composite_phonon_density(0.01, bg, peaks)
    j2 = bath.composite_phonon_density(0.02, bg, peaks)
    w = np.linspace(0.01, 3, 300)
    assert np.allclose(2 * j1(w), j2(w), rtol=1e-10)


def test_composite_phonon_peak_exchange_symmetry():
    bg = None
    pa = bath.LorentzianDensity(0.3, 0.4, 0.02)
    pb = bath.LorentzianDensity(0.3, 0.9, 0.02)
    j1 = bath.composite_phonon_density(0.01, bg, [pa, pb])
    j2 = bath.composite_phonon_density(0.01, bg, [pb, pa])
    w = np.linspace(0.01, 3, 300)
    assert np.allclose(j1(w), j2(w))


def test_composite_phonon_empty():
    with pytest.raises(ValueError):
        bath.composite_phonon_density(0.01, None, [])


def test_acceptance_style_mb_fit_gate():
    # the full acceptance criterion lives in test_acceptance; this is the
    # fast smoke version on a coarser grid
    modes = mb_modes()
    grid = np.linspace(1.0, 4500.0, 1500)
    j = bath.effective_spectral_density(modes, 0.025, 3500.0, grid)
    b = bath.bcf_from_spectral_density(j, 0.06, 600)
    model, res = bath.fit_exponentials(b, 5)
    assert res < 0.05
    assert all(w.real > 0 for _, w in model.terms)
