"""Few-emitter lasing: coherently driven molecules with a structured local
vibrational bath and a shared lossy cavity, plus the incoherent-pump
comparison model.

Frame: rotating at the electronic transition frequency omega_0; energies in
cm^-1.  Each molecule couples to its own copy of the vibrational bath
through sigma+ sigma- (the excited-state projector); the cavity enters as a
global single-exponential bath alpha_cav = G_c exp(-kappa_c tau) with
G_c = 0.2 E_d and kappa_c = 5 E_d.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .. import qlinalg as ql
from ..bath import (
    ExponentialBathModel,
    bcf_from_spectral_density,
    effective_spectral_density,
    fit_exponentials,
    load_mode_table,
)
from ..bbgky import (
    ManyBodyModel,
    ReducedPropagator,
    contract_F1,
    initial_state_factory,
)
from ..observables import photon_number
from ..propagator import OdeProblem, integrate

SP = ql.spin_ops()

DEFAULT_MODE_TABLE = importlib.resources.files("manyheom") / "data/methylene_blue_modes.csv"


@dataclass
class LasingParams:
    n: int
    e_drive: float  # cm^-1
    omega0: float = 20857.0
    gc_factor: float = 0.2  # G_c = gc_factor * E_d
    kappa_factor: float = 5.0  # kappa_c = kappa_factor * E_d
    gamma_down: float = None  # default 0.01 * E_max
    n_exp: int = 5
    broadening_amp: float = 0.025
    broadening_cutoff: float = 3500.0
    fit_gate: float = 0.05

    def __post_init__(self):
        self.e_max = 0.1 * self.omega0
        if not 0 <= self.e_drive <= self.e_max:
            raise ValueError(f"drive must lie in [0, E_max = {self.e_max}]")
        if self.gamma_down is None:
            self.gamma_down = 0.01 * self.e_max
        if self.n < 2:
            raise ValueError("need at least two molecules")


def effective_density_from_table(params, table_path=None, grid=None):
    modes = load_mode_table(str(table_path or DEFAULT_MODE_TABLE))
    if grid is None:
        grid = np.linspace(1.0, max(4500.0, 1.3 * modes.omega.max()), 3000)
    return effective_spectral_density(
        modes, params.broadening_amp, params.broadening_cutoff, grid
    )


def fit_vibrational_bath(params, j_eff, tau_max=0.06, n_samples=600):
    """Exponential decomposition of the vibrational correlation function;
    enforces the residual gate and marks the bath local."""
    bcf = bcf_from_spectral_density(j_eff, tau_max, n_samples)
    model, residual = fit_exponentials(bcf, params.n_exp)
    if residual > params.fit_gate:
        raise ValueError(
            f"vibrational fit residual {residual:.3%} above the "
            f"{params.fit_gate:.0%} gate"
        )
    return (
        ExponentialBathModel(model.terms, locality="local"),
        residual,
    )


def build_lasing_model(params, vibrational_bath):
    """Full model: coherent drive, local vibrational bath on the excited-
    state projector, global cavity bath, spontaneous emission."""
    if params.e_drive <= 0:
        raise ValueError("the full lasing model needs a positive drive")
    h1 = params.e_drive * SP["x"]
    cavity = ExponentialBathModel(
        [(params.gc_factor * params.e_drive, params.kappa_factor * params.e_drive)]
    )
    return ManyBodyModel(
        n_particles=params.n,
        d=2,
        h1=h1,
        global_baths=[(cavity, SP["-"])],
        local_baths=[(vibrational_bath, SP["+"] @ SP["-"])],
        lindblad_local=[(params.gamma_down, SP["-"])],
        statistics="sym",
    )


def build_incoherent_lasing_model(params):
    """Comparison model: drive plus vibrational relaxation replaced by an
    incoherent pump E_d D[sigma+]; cavity bath unchanged."""
    h1 = np.zeros((2, 2), dtype=np.complex128)
    if params.e_drive > 0:
        cavity = ExponentialBathModel(
            [(params.gc_factor * params.e_drive, params.kappa_factor * params.e_drive)]
        )
    else:
        cavity = ExponentialBathModel([(0.0, 1.0)])
    return ManyBodyModel(
        n_particles=params.n,
        d=2,
        h1=h1,
        global_baths=[(cavity, SP["-"])],
        lindblad_local=[
            (params.e_drive, SP["+"]),
            (params.gamma_down, SP["-"]),
        ],
        statistics="sym",
    )


@dataclass
class SteadyStateResult:
    p_excited: float
    photon: float
    t_reached: float
    converged: bool
    state: object  # final ReducedHierarchyState, reusable as a warm start


def excited_population(state):
    f1 = contract_F1(state.physical, state.n_particles)
    return float(f1[0, 0].real) / state.n_particles


def relax_to_steady_state(
    model,
    depth,
    window,
    initial=None,
    rel_change=1e-5,
    max_windows=60,
    atol=1e-9,
    rtol=1e-7,
    photon_g=None,
):
    """Integrate in windows until (p_e, <a^dag a>) stop moving.

    ``window`` should be of order 10 / kappa_c.  Returns the steady-state
    observables and the final hierarchy state for warm-starting sweeps.
    """
    if initial is None:
        rho_g = np.zeros((2, 2), dtype=np.complex128)
        rho_g[1, 1] = 1.0
        state = initial_state_factory("product", model, depth=depth, rho=rho_g)
    else:
        state = initial.copy()
    prop = ReducedPropagator(model, depth)
    rhs = prop.make_rhs(model.pair_hamiltonian(0.0))
    flat = state.f12.reshape(-1).copy()
    if photon_g is None:
        photon_g = model.global_baths[0][0].terms[0][0]
    prev = None
    t = 0.0
    converged = False
    for _ in range(max_windows):
        traj = integrate(
            OdeProblem(
                rhs=rhs,
                t_span=(t, t + window),
                y0=flat,
                abs_tol=atol,
                rel_tol=rtol,
                sample_times=np.array([t + window]),
            )
        )
        flat = traj.states[-1]
        t += window
        state.f12 = flat.reshape(state.f12.shape)
        pe = excited_population(state)
        ph = photon_number(state, 0, photon_g) if abs(photon_g) > 0 else 0.0
        if prev is not None:
            dpe = abs(pe - prev[0]) / max(abs(prev[0]), 1e-12)
            dph = abs(ph - prev[1]) / max(abs(prev[1]), 1e-9)
            if dpe < rel_change and dph < rel_change:
                converged = True
                break
        prev = (pe, ph)
    return SteadyStateResult(
        p_excited=pe, photon=ph, t_reached=t, converged=converged, state=state
    )
