"""Driven Tavis-Cummings family: reduced-hierarchy model, the exact
collective-basis oracle, and the factorized mean-field baseline.

Frame and units: rotating frame at the drive frequency, cavity loss rate
kappa = 1 is the unit.  The cavity is traded for a single-exponential bath
G = g^2, W = i Delta_c + kappa, the correlation function of a lossy mode;
no fitting step is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import liouville as lv
from .. import qlinalg as ql
from ..bath import ExponentialBathModel
from ..bbgky import ManyBodyModel
from ..observables import (
    collective_spin_matrices,
    spin_coherent_state,
    spin_moments_from_collective,
)
from ..propagator import OdeProblem, integrate

SP = ql.spin_ops()


@dataclass
class TavisCummingsParams:
    n: int
    delta_z: float  # emitter detuning, units of kappa
    delta_c: float  # cavity detuning
    omega_drive: float  # transverse drive amplitude (caption symbol Delta_x)
    g: float  # single-emitter coupling
    kappa: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one emitter")
        if self.kappa <= 0:
            raise ValueError("kappa is the unit and must be positive")


def build_tavis_cummings(p):
    """Spins-only many-body model; the cavity enters as the global bath."""
    h1 = p.delta_z * SP["z"] + p.omega_drive * SP["x"]
    bath = ExponentialBathModel([(p.g**2, p.kappa + 1j * p.delta_c)])
    return ManyBodyModel(
        n_particles=p.n,
        d=2,
        h1=h1,
        global_baths=[(bath, SP["-"])],
        statistics="sym",
    )


@dataclass
class DickeTrajectory:
    times: np.ndarray
    moments: list  # SpinMoments per sample
    photon: np.ndarray
    rho_spin: list  # collective density matrices (kept small)
    cutoff: int

    @property
    def s_z(self):
        return np.array([m.mean[2] for m in self.moments])


def _dicke_initial(p, cutoff, initial):
    if initial == "fully_excited":
        spin = np.zeros(p.n + 1, dtype=np.complex128)
        spin[0] = 1.0
    elif initial == "plus_x":
        spin = spin_coherent_state(p.n, np.pi / 2, 0.0)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    fock = np.zeros(cutoff, dtype=np.complex128)
    fock[0] = 1.0
    vec = np.kron(spin, fock)
    return np.outer(vec, vec.conj())


def dicke_lindblad_oracle(
    p,
    photon_cutoff,
    t_span,
    sample_times,
    initial="fully_excited",
    atol=1e-10,
    rtol=1e-8,
):
    """Exact master-equation solution in the symmetric collective basis.

    Hilbert space: Dicke states |N/2, m> tensor a truncated Fock mode; the
    dissipator 2 kappa D[a] matches the bath parameterization W = i Dc + k.
    """
    jx, jy, jz = collective_spin_matrices(p.n)
    nph = photon_cutoff
    bos = ql.boson_ops(nph)
    eye_s = np.eye(p.n + 1)
    a_full = ql.kron(eye_s, bos["a"])
    h = (
        2.0 * p.delta_z * ql.kron(jz, np.eye(nph))
        + 2.0 * p.omega_drive * ql.kron(jx, np.eye(nph))
        + p.delta_c * a_full.conj().T @ a_full
        + p.g
        * (
            ql.kron(jx + 1j * jy, bos["a"])  # J+ a
            + ql.kron(jx - 1j * jy, bos["adag"])  # J- a^dag
        )
    )
    rho0 = _dicke_initial(p, nph, initial)
    n_op = a_full.conj().T @ a_full

    def sample_map(t, rho):
        rho_spin = ql.partial_trace(rho, [p.n + 1, nph], keep=[0])
        return (
            spin_moments_from_collective(rho_spin, p.n),
            lv.expect(n_op, rho).real,
            rho_spin,
        )

    times, res = lv.propagate_master(
        h,
        [(2.0 * p.kappa, a_full)],
        rho0,
        t_span,
        sample_times,
        atol=atol,
        rtol=rtol,
        sample_map=sample_map,
    )
    return DickeTrajectory(
        times=times,
        moments=[r[0] for r in res],
        photon=np.array([r[1] for r in res]),
        rho_spin=[r[2] for r in res],
        cutoff=nph,
    )


def dicke_oracle_converged(
    p,
    t_span,
    sample_times,
    initial="fully_excited",
    start_cutoff=4,
    max_cutoff=256,
    shift_tol=1e-4,
    atol=1e-10,
    rtol=1e-8,
):
    """Double the Fock cutoff until <S_z> and <a^dag a> stop moving."""
    cutoff = start_cutoff
    prev = None
    while cutoff <= max_cutoff:
        traj = dicke_lindblad_oracle(
            p, cutoff, t_span, sample_times, initial, atol=atol, rtol=rtol
        )
        if prev is not None:
            shift = max(
                np.max(np.abs(traj.s_z - prev.s_z)),
                np.max(np.abs(traj.photon - prev.photon)),
            )
            if shift < shift_tol:
                return traj
        prev = traj
        cutoff *= 2
    raise RuntimeError(f"Fock cutoff did not converge below {max_cutoff}")


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    s_x: np.ndarray
    s_y: np.ndarray
    s_z: np.ndarray
    a_mode: np.ndarray  # complex


def mean_field_baseline(p, t_span, sample_times, initial="fully_excited"):
    """Factorized single-emitter equations with all correlators split.

    Per-emitter Bloch vector plus the coherent mode amplitude; the fully
    excited state sits exactly on the unstable fixed point when the drive
    vanishes.
    """
    if initial == "fully_excited":
        y0 = np.array([0.0, 1.0, 0.0], dtype=np.complex128)  # s-, s_z, a
    elif initial == "plus_x":
        y0 = np.array([0.5, 0.0, 0.0], dtype=np.complex128)
    else:
        raise ValueError(f"unknown initial state {initial!r}")

    dz, om, g, dc, kap, n = (
        p.delta_z,
        p.omega_drive,
        p.g,
        p.delta_c,
        p.kappa,
        p.n,
    )

    def rhs(t, y):
        sm, sz, a = y
        dsm = -2j * dz * sm + 1j * om * sz + 1j * g * sz * a
        dsz = 2j * om * (sm - np.conj(sm)) - 2j * g * (
            np.conj(sm) * a - sm * np.conj(a)
        )
        da = -(1j * dc + kap) * a - 1j * g * n * sm
        return np.array([dsm, dsz, da])

    traj = integrate(
        OdeProblem(
            rhs=rhs,
            t_span=t_span,
            y0=y0,
            abs_tol=1e-12,
            rel_tol=1e-10,
            sample_times=np.asarray(sample_times, dtype=float),
        )
    )
    sm = traj.states[:, 0]
    sz = traj.states[:, 1].real
    return MeanFieldTrajectory(
        times=traj.times,
        s_x=p.n * 2 * sm.real,
        s_y=p.n * (-2) * sm.imag,
        s_z=p.n * sz,
        a_mode=traj.states[:, 2],
    )
