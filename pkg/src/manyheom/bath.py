"""Spectral densities, bath correlation functions, and exponential fits.

A bath is specified either by a spectral density J(omega) on omega > 0 or by
its correlation function alpha(tau) = int_0^inf J(omega) e^{-i omega tau} domega.
The hierarchy solvers consume the exponential parameterization
alpha(tau) ~ sum_j G_j exp(-W_j tau) with Re W_j > 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

_EULER_GAMMA = 0.57721566490153286060651209008240243


class QuadratureError(RuntimeError):
    def __init__(self, message, omega_range=None):
        super().__init__(message)
        self.omega_range = omega_range


class FitDivergenceError(RuntimeError):
    """Exponential fit failed to converge; carries the best model found."""

    def __init__(self, message, model=None, residual=None):
        super().__init__(message)
        self.model = model
        self.residual = residual


# ---------------------------------------------------------------------------
# spectral densities


class SpectralDensity:
    """Base class; subclasses implement value(omega) vectorized on omega > 0."""

    def value(self, omega):
        raise NotImplementedError

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.where(omega > 0, self.value(np.maximum(omega, 1e-300)), 0.0)
        return out if out.ndim else float(out)

    def integral(self):
        """int_0^inf J(omega) domega via adaptive quadrature."""
        val, err = quad(
            lambda w: float(self(w)), 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=400
        )
        return val


@dataclass
class OhmicDensity(SpectralDensity):
    """J = A * omega * exp(-omega / cutoff)."""

    amplitude: float
    cutoff: float

    def value(self, omega):
        return self.amplitude * omega * np.exp(-omega / self.cutoff)

    def integral(self):
        return self.amplitude * self.cutoff**2


@dataclass
class LorentzianDensity(SpectralDensity):
    """Lorentzian line of integrated strength ~ S centered at omega0.

    J = (S / pi) * hwhm / ((omega - omega0)^2 + hwhm^2) on omega > 0; for
    omega0 >> hwhm the correlation function approaches S e^{(-i omega0 - hwhm) tau}.
    """

    strength: float
    center: float
    hwhm: float

    def value(self, omega):
        return (
            self.strength
            / math.pi
            * self.hwhm
            / ((omega - self.center) ** 2 + self.hwhm**2)
        )

    def integral(self):
        return self.strength * (0.5 + math.atan(self.center / self.hwhm) / math.pi)


@dataclass
class SuperohmicDensity(SpectralDensity):
    """J = A3 * omega^3 * exp(-omega / cutoff)."""

    amplitude: float
    cutoff: float

    def value(self, omega):
        return self.amplitude * omega**3 * np.exp(-omega / self.cutoff)

    def integral(self):
        return 6.0 * self.amplitude * self.cutoff**4


@dataclass
class TabulatedDensity(SpectralDensity):
    """Piecewise-linear J on a strictly ascending grid, zero outside it."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.omega.ndim != 1 or self.omega.shape != self.values.shape:
            raise ValueError("omega and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("tabulated grid must be strictly ascending")
        if np.any(self.values < -1e-12 * max(1.0, self.values.max(initial=0.0))):
            raise ValueError("tabulated spectral density must be nonnegative")

    def value(self, omega):
        return np.interp(omega, self.omega, self.values, left=0.0, right=0.0)

    def integral(self):
        return float(np.trapezoid(self.values, self.omega))


@dataclass
class CompositeDensity(SpectralDensity):
    members: list = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError("composite spectral density needs at least one member")

    def value(self, omega):
        out = np.zeros_like(np.asarray(omega, dtype=float))
        for m in self.members:
            out = out + m.value(omega)
        return out

    def integral(self):
        return sum(m.integral() for m in self.members)


# ---------------------------------------------------------------------------
# bath correlation functions


@dataclass
class BathCorrelationFunction:
    tau: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.tau[0] != 0.0 or np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau grid must be ascending and start at 0")

    @property
    def at_zero(self):
        return self.values[0]


def _bcf_quad_samples(j, tau, epsrel, breakpoints):
    """Oscillatory quadrature of J e^{-i w tau} over (0, inf) per sample.

    alpha(0) = int J is computed first and sets the absolute-error target
    for the weighted (QAWO/QAWF) rules, which do not support pure relative
    control.
    """
    fn = lambda w: float(j(w))
    pieces = [0.0] + sorted(b for b in breakpoints if b > 0) + [np.inf]

    def piece_quad(lo, hi, t, kind, epsabs):
        try:
            if t == 0.0:
                val, _ = quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=500)
            elif np.isinf(hi):
                val, _ = quad(
                    fn, lo, hi, weight=kind, wvar=t, epsabs=epsabs, limlst=200,
                    limit=500,
                )
            else:
                val, _ = quad(
                    fn, lo, hi, weight=kind, wvar=t, epsabs=epsabs,
                    epsrel=epsrel, limit=500,
                )
        except Exception as exc:
            raise QuadratureError(
                f"quadrature failed on omega in [{lo}, {hi}] at tau = {t}: {exc}",
                omega_range=(lo, hi),
            ) from exc
        if not np.isfinite(val):
            raise QuadratureError(
                f"non-finite quadrature on omega in [{lo}, {hi}] at tau = {t}",
                omega_range=(lo, hi),
            )
        return val

    alpha0 = sum(piece_quad(lo, hi, 0.0, "cos", 0.0)
                 for lo, hi in zip(pieces[:-1], pieces[1:]))
    epsabs = max(epsrel * abs(alpha0), 1e-300)
    out = np.empty(len(tau), dtype=np.complex128)
    for i, t in enumerate(tau):
        if t == 0.0:
            out[i] = alpha0
            continue
        re = im = 0.0
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            re += piece_quad(lo, hi, t, "cos", epsabs)
            im += piece_quad(lo, hi, t, "sin", epsabs)
        out[i] = re - 1j * im
    return out


def _bcf_tabulated(j, tau):
    """Exact Fourier transform of the piecewise-linear interpolant.

    For a linear segment J(w) = a + b (w - w0) on [w0, w1] the integral of
    J e^{-i w t} has a closed form, so the only error is the tabulation
    itself.
    """
    w = j.omega
    v = j.values
    out = np.zeros(len(tau), dtype=np.complex128)
    w0, w1 = w[:-1], w[1:]
    v0, v1 = v[:-1], v[1:]
    dw = w1 - w0
    slope = (v1 - v0) / dw
    for i, t in enumerate(tau):
        if t == 0.0:
            out[i] = np.sum(0.5 * (v0 + v1) * dw)
            continue
        it = -1j * t
        e0 = np.exp(it * w0)
        e1 = np.exp(it * w1)
        # int (a + b(w-w0)) e^{it w} dw over [w0, w1]
        term = (v1 * e1 - v0 * e0) / it - slope * (e1 - e0) / it**2
        out[i] = np.sum(term)
    return out


def bcf_from_spectral_density(j, tau_max, n_samples, epsrel=1e-8):
    """Sample alpha(tau) on a uniform grid [0, tau_max].

    Tabulated members are transformed segment-exactly; everything else uses
    adaptive (oscillatory-weighted) quadrature with relative tolerance
    ``epsrel``.  Non-integrable densities surface as QuadratureError with
    the offending omega range.
    """
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    tau = np.linspace(0.0, tau_max, n_samples)
    members = j.members if isinstance(j, CompositeDensity) else [j]
    total = np.zeros(n_samples, dtype=np.complex128)
    for m in members:
        if isinstance(m, TabulatedDensity):
            total += _bcf_tabulated(m, tau)
        else:
            breaks = []
            if isinstance(m, LorentzianDensity):
                breaks = [
                    m.center - 30 * m.hwhm,
                    m.center,
                    m.center + 30 * m.hwhm,
                ]
            total += _bcf_quad_samples(m, tau, epsrel, breaks)
    return BathCorrelationFunction(tau, total)


# ---------------------------------------------------------------------------
# exponential integral


def exp_integral_Ei(x):
    """Ei(x) for x > 0, relative error below 1e-10.

    Power series sum x^k / (k k!) + gamma + ln x for moderate arguments,
    asymptotic series e^x/x sum k!/x^k (optimally truncated) for large x.
    Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("Ei requires x > 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr <= 40.0
    if np.any(small):
        xs = arr[small]
        total = np.zeros_like(xs)
        term = np.ones_like(xs)
        for k in range(1, 200):
            term = term * xs / k
            total += term / k
            if np.all(np.abs(term / k) < 1e-18 * (np.abs(total) + 1.0)):
                break
        out[small] = _EULER_GAMMA + np.log(xs) + total
    if np.any(~small):
        xl = arr[~small]
        total = np.ones_like(xl)
        term = np.ones_like(xl)
        # truncate before terms start growing: k! / x^k shrinks while k < x
        for k in range(1, 38):
            term = term * k / xl
            total += term
        out[~small] = np.exp(xl) / xl * total
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# effective spectral density of damped vibrational modes


@dataclass
class VibrationalModeTable:
    """Rows of (frequency in cm^-1, dimensionless Huang-Rhys factor)."""

    omega: np.ndarray
    huang_rhys: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.huang_rhys = np.asarray(self.huang_rhys, dtype=float)
        if self.omega.shape != self.huang_rhys.shape or self.omega.ndim != 1:
            raise ValueError("mode table needs matching 1-d columns")
        if np.any(self.omega <= 0):
            raise ValueError("mode frequencies must be positive")
        if np.any(self.huang_rhys < 0):
            raise ValueError("Huang-Rhys factors must be nonnegative")

    def __len__(self):
        return len(self.omega)

    @property
    def displacement_sq(self):
        # Delta_lambda^2 = 2 S_lambda / omega_lambda
        return 2.0 * self.huang_rhys / self.omega


def load_mode_table(path):
    """Read a `omega_cm1,huang_rhys` CSV; lines starting with # are comments."""
    omegas, hrs = [], []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header = [c.strip() for c in rows[0]]
    if header != ["omega_cm1", "huang_rhys"]:
        raise ValueError(
            f"unexpected mode-table header {header}, want ['omega_cm1', 'huang_rhys']"
        )
    for r in rows[1:]:
        omegas.append(float(r[0]))
        hrs.append(float(r[1]))
    return VibrationalModeTable(np.array(omegas), np.array(hrs))


def effective_spectral_density(modes, broadening_amp, broadening_cutoff, omega_grid):
    """Tabulated effective density of ohmically damped vibrational modes.

    Each mode of displacement Delta (Delta^2 = 2S/omega_mode) embedded in an
    ohmic phonon continuum A omega e^{-omega/Lambda} contributes

        J_mode(w) = Delta^2 A w^3 e^{-w/L}
                    / [pi^2 A^2 w^2 e^{-2w/L} + (w - w_mode + A L - A w e^{-w/L} Ei(w/L))^2]
    """
    a = float(broadening_amp)
    lam = float(broadening_cutoff)
    if a <= 0 or lam <= 0:
        raise ValueError("broadening parameters must be positive")
    grid = np.asarray(omega_grid, dtype=float)
    if grid[0] > modes.omega.min() or grid[-1] < modes.omega.max():
        raise ValueError(
            f"grid [{grid[0]}, {grid[-1]}] does not cover mode support "
            f"[{modes.omega.min()}, {modes.omega.max()}]"
        )
    w = np.maximum(grid, 1e-12)
    ew = np.exp(-w / lam)
    shift = a * lam - a * w * ew * exp_integral_Ei(w / lam)
    denom_width = np.pi**2 * a**2 * w**2 * ew**2
    num_base = a * w**3 * ew
    total = np.zeros_like(w)
    d2 = modes.displacement_sq
    for wm, dsq in zip(modes.omega, d2):
        total += dsq * num_base / (denom_width + (w - wm + shift) ** 2)
    return TabulatedDensity(grid, total)


def composite_phonon_density(total_coupling_sq, background, peaks):
    """Rescale (background + peaks) so the integrated density matches.

    ``total_coupling_sq`` is int J domega after rescaling (to relative 1e-8,
    exact for the analytic members used here).
    """
    if total_coupling_sq <= 0:
        raise ValueError("total coupling must be positive")
    members = ([background] if background is not None else []) + list(peaks)
    if not members:
        raise ValueError("empty composite")
    raw = CompositeDensity(members)
    norm = raw.integral()
    if norm <= 0:
        raise ValueError("composite integrates to zero")
    s = total_coupling_sq / norm
    scaled = []
    for m in members:
        if isinstance(m, OhmicDensity):
            scaled.append(OhmicDensity(m.amplitude * s, m.cutoff))
        elif isinstance(m, SuperohmicDensity):
            scaled.append(SuperohmicDensity(m.amplitude * s, m.cutoff))
        elif isinstance(m, LorentzianDensity):
            scaled.append(LorentzianDensity(m.strength * s, m.center, m.hwhm))
        elif isinstance(m, TabulatedDensity):
            scaled.append(TabulatedDensity(m.omega, m.values * s))
        else:
            raise TypeError(f"cannot rescale member of type {type(m)}")
    return CompositeDensity(scaled)


def export_tabulated_csv(density, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "J"])
        for om, val in zip(density.omega, density.values):
            w.writerow([f"{om:.17e}", f"{val:.17e}"])


# ---------------------------------------------------------------------------
# exponential decomposition


@dataclass
class ExponentialBathModel:
    """alpha(tau) ~ sum_j G_j exp(-W_j tau), Re W_j > 0."""

    terms: list  # [(G, W)]
    coupling_op_id: str = ""
    locality: str = "global"

    def __post_init__(self):
        terms = [(complex(g), complex(w)) for g, w in self.terms]
        for g, w in terms:
            if not (np.isfinite(g) and np.isfinite(w)):
                raise ValueError("bath terms must be finite")
            if w.real <= 0:
                raise ValueError(f"Re W must be positive, got W = {w}")
        self.terms = terms
        if self.locality not in ("global", "local"):
            raise ValueError("locality must be 'global' or 'local'")

    @property
    def n_terms(self):
        return len(self.terms)

    def evaluate(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(tau.shape, dtype=np.complex128)
        for g, w in self.terms:
            out += g * np.exp(-w * tau)
        return out


def _resample_uniform(bcf):
    tau = bcf.tau
    dt = np.diff(tau)
    if np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        return tau, bcf.values
    n = len(tau)
    uni = np.linspace(tau[0], tau[-1], n)
    vals = np.interp(uni, tau, bcf.values.real) + 1j * np.interp(
        uni, tau, bcf.values.imag
    )
    return uni, vals


def _matrix_pencil_poles(values, n_exp):
    """Pole estimates z_j of sum_j c_j z_j^k from uniform samples."""
    n = len(values)
    pencil = max(n_exp + 1, n // 3)
    pencil = min(pencil, n - n_exp - 1)
    rows = n - pencil
    hank = np.empty((rows, pencil + 1), dtype=np.complex128)
    for i in range(rows):
        hank[i] = values[i : i + pencil + 1]
    u, s, vh = np.linalg.svd(hank, full_matrices=False)
    # row space of the Hankel matrix is spanned by the conjugated right
    # singular vectors; the shift-invariance eigenvalues come out conjugated
    v = vh.conj().T[:, :n_exp]
    v0 = v[:-1, :]
    v1 = v[1:, :]
    m = np.linalg.lstsq(v0, v1, rcond=None)[0]
    return np.conj(np.linalg.eigvals(m))


def _amplitudes_lstsq(tau, values, w):
    basis = np.exp(-np.outer(tau, w))
    g, *_ = np.linalg.lstsq(basis, values, rcond=None)
    return g, basis @ g - values


def _gauss_newton(tau, values, g, w, rate_cap, freq_cap, max_iter=200):
    """Damped Gauss-Newton on (G, W) for least-squares exponential fitting.

    Parameters are complex; the normal equations are solved in the
    real-imaginary splitting.  Unstable Re W < 0 candidates are reflected
    back to the decaying half-plane after every update, and decay rates
    above ``rate_cap`` (unresolvable by the sampling) are clamped so the
    returned model stays integrable.
    """
    n_exp = len(w)

    def resid(gv, wv):
        return np.exp(-np.outer(tau, wv)) @ gv - values

    r = resid(g, w)
    cost = np.vdot(r, r).real
    lam = 1e-6
    rel_drop = 0.0
    for _ in range(max_iter):
        e = np.exp(-np.outer(tau, w))
        # complex Jacobian wrt (g_j, w_j)
        jac = np.concatenate([e, -tau[:, None] * (e * g[None, :])], axis=1)
        a = np.concatenate([np.concatenate([jac.real, -jac.imag], axis=1),
                            np.concatenate([jac.imag, jac.real], axis=1)])
        b = -np.concatenate([r.real, r.imag])
        jtj = a.T @ a
        jtb = a.T @ b
        improved = False
        for _ in range(25):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-30), jtb)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            dg = step[:n_exp] + 1j * step[2 * n_exp : 3 * n_exp]
            dw = step[n_exp : 2 * n_exp] + 1j * step[3 * n_exp :]
            g_new = g + dg
            w_new = w + dw
            w_new = np.where(w_new.real <= 0, -w_new.real + 1e-12 + 1j * w_new.imag, w_new)
            w_new = np.where(
                w_new.real > rate_cap, rate_cap + 1j * w_new.imag, w_new
            )
            w_new = w_new.real + 1j * np.clip(w_new.imag, -freq_cap, freq_cap)
            r_new = resid(g_new, w_new)
            cost_new = np.vdot(r_new, r_new).real
            if np.isfinite(cost_new) and cost_new <= cost:
                g, w, r = g_new, w_new, r_new
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                cost = cost_new
                lam = max(lam / 3, 1e-14)
                improved = True
                break
            lam *= 10
        if not improved or rel_drop < 1e-15:
            break
    return g, w, cost


def fit_exponentials(bcf, n_exp):
    """Fit alpha(tau) with ``n_exp`` decaying complex exponentials.

    Matrix-pencil initialization on a uniform grid followed by damped
    Gauss-Newton refinement; deterministic for fixed inputs.  Returns the
    model and the max-norm residual relative to |alpha(0)|.
    """
    if n_exp < 1:
        raise ValueError("n_exp must be >= 1")
    tau, values = _resample_uniform(bcf)
    if len(tau) < 2 * n_exp + 2:
        raise ValueError("too few samples for the requested number of exponentials")
    scale = abs(values[0])
    if scale == 0.0:
        raise ValueError("alpha(0) = 0; nothing to fit")
    dt = tau[1] - tau[0]

    # rates beyond a couple of sample spacings are not resolvable; capping
    # them keeps the returned model usable by the hierarchy solvers
    rate_cap = 2.0 / dt
    freq_cap = np.pi / dt
    z = _matrix_pencil_poles(values, n_exp)
    z = np.where(np.abs(z) < 1e-14, 1e-14, z)
    w = -np.log(z) / dt
    w = np.where(w.real <= 0, np.abs(w.real) + 1e-12 + 1j * w.imag, w)
    w = np.where(w.real > rate_cap, rate_cap + 1j * w.imag, w)
    g, _ = _amplitudes_lstsq(tau, values, w)
    g, w, cost = _gauss_newton(tau, values, g, w, rate_cap, freq_cap)

    model = ExponentialBathModel(list(zip(g, w)), locality="global")
    residual = float(np.max(np.abs(model.evaluate(tau) - values)) / scale)
    if not np.isfinite(residual):
        raise FitDivergenceError(
            "refinement diverged", model=model, residual=residual
        )
    return model, residual
