"""Cavity-coupled Hubbard chain: reduced-hierarchy builder and the exact
small-cluster oracle (full fermionic Fock space times an explicit lossy
mode).

Conventions: open chain, hopping J = 1 is the unit, spin-orbital ordering
site x spin (index 2 i + s), half filling by default.  The cavity couples
to the centered dipole sum_i r_i n_i through a single-exponential bath
G = g^2, W = i omega + kappa; charge noise enters as a piecewise-constant
onsite potential; the optional phonon bath couples to the hopping operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import liouville as lv
from .. import qlinalg as ql
from ..bath import ExponentialBathModel
from ..bbgky import ManyBodyModel


@dataclass
class PotentialSchedule:
    """Multiplicative time profile f(t) for the site potential amplitudes.

    'step': f = 0 before t_on, 1 afterwards.  'telegraph': f toggles
    0 <-> 1 at the given switch times, or at Poisson times drawn from a
    seeded generator (the drawn times are stored, so reruns reproduce the
    schedule exactly).
    """

    amplitudes: np.ndarray
    kind: str = "step"
    t_on: float = 0.0
    switch_times: tuple = ()
    seed: int = None
    rate: float = 0.1
    t_max: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.kind not in ("step", "telegraph"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "telegraph" and not self.switch_times:
            if self.seed is None or self.t_max <= 0:
                raise ValueError(
                    "telegraph schedules need switch times or (seed, rate, t_max)"
                )
            rng = np.random.default_rng(self.seed)
            times, t = [], 0.0
            while True:
                t += rng.exponential(1.0 / self.rate)
                if t >= self.t_max:
                    break
                times.append(t)
            self.switch_times = tuple(times)
        if list(self.switch_times) != sorted(self.switch_times):
            raise ValueError("switch times must be ascending")

    def factor(self, t):
        if self.kind == "step":
            return 1.0 if t >= self.t_on else 0.0
        flips = sum(1 for s in self.switch_times if s <= t)
        return float(flips % 2)

    def site_potential(self, t):
        return self.factor(t) * self.amplitudes

    @property
    def all_switch_times(self):
        if self.kind == "step":
            return (self.t_on,)
        return tuple(self.switch_times)


@dataclass
class HubbardParams:
    n_sites: int = 4
    u: float = 0.1
    hopping: float = 1.0
    cavity_g: float = 0.1
    cavity_omega: float = 0.5
    cavity_kappa: float = 0.2
    spacing: float = 1.0
    n_electrons: int = None
    schedule: PotentialSchedule = None

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least two sites")
        if self.n_electrons is None:
            self.n_electrons = self.n_sites  # half filling
        if self.u < 0:
            raise ValueError("onsite repulsion must be nonnegative")


def hopping_matrix(p):
    d = 2 * p.n_sites
    h = np.zeros((d, d), dtype=np.complex128)
    for i in range(p.n_sites - 1):
        for s in range(2):
            h[2 * i + s, 2 * (i + 1) + s] = -p.hopping
            h[2 * (i + 1) + s, 2 * i + s] = -p.hopping
    return h


def site_positions(p):
    return (np.arange(p.n_sites) - (p.n_sites - 1) / 2) * p.spacing


def dipole_matrix(p):
    d = 2 * p.n_sites
    r = site_positions(p)
    return np.diag(np.repeat(r, 2)).astype(np.complex128)


def onsite_interaction(p):
    """U sum_i (P_iu x P_id + P_id x P_iu) on the pair space."""
    d = 2 * p.n_sites
    v = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(p.n_sites):
        up, dn = 2 * i, 2 * i + 1
        v[up * d + dn, up * d + dn] += p.u
        v[dn * d + up, dn * d + up] += p.u
    return v


def potential_matrix(p, t):
    if p.schedule is None:
        return 0.0
    pot = p.schedule.site_potential(t)
    return np.diag(np.repeat(pot, 2)).astype(np.complex128)


def build_cavity_hubbard(p, phonon_bath=None):
    """Reduced-hierarchy model; ``phonon_bath`` is an optional
    ExponentialBathModel attached to the hopping operator."""
    hop = hopping_matrix(p)

    if p.schedule is None:
        h1 = hop
        switches = ()
    else:
        def h1(t, hop=hop, p=p):
            return hop + potential_matrix(p, t)

        switches = p.schedule.all_switch_times
    cavity = ExponentialBathModel(
        [(p.cavity_g**2, p.cavity_kappa + 1j * p.cavity_omega)]
    )
    baths = [(cavity, dipole_matrix(p))]
    if phonon_bath is not None:
        baths.append((phonon_bath, hop / max(p.hopping, 1e-300)))
    return ManyBodyModel(
        n_particles=p.n_electrons,
        d=2 * p.n_sites,
        h1=h1,
        v12=onsite_interaction(p),
        global_baths=baths,
        statistics="fermionic",
        switch_times=switches,
    )


def ground_state_orbitals(p):
    """Lowest N_e spin-orbitals of the bare hopping matrix (the
    equilibrium Slater determinant before any quench)."""
    vals, vecs = np.linalg.eigh(hopping_matrix(p))
    return vecs[:, np.argsort(vals)[: p.n_electrons]]


# ---------------------------------------------------------------------------
# exact oracle: fermionic Fock space x explicit cavity


@dataclass
class HubbardOracleResult:
    times: np.ndarray
    dipole: np.ndarray
    occupations: np.ndarray  # [n_samples, n_sites]
    photon: np.ndarray
    f1: list  # one-body matrices per sample


class HubbardOracle:
    """Master-equation reference on the fixed-particle-number sector."""

    def __init__(self, p, photon_cutoff=8):
        if p.n_sites > 5:
            raise ValueError("oracle limited to 5 sites")
        self.p = p
        n_modes = 2 * p.n_sites
        self.c_ops = ql.fermion_ops(n_modes)
        dim_full = 2**n_modes
        # fixed-N sector basis
        sector = [
            s for s in range(dim_full) if bin(s).count("1") == p.n_electrons
        ]
        self.sector = np.array(sector)
        basis = np.zeros((len(sector), dim_full))
        for row, s in enumerate(sector):
            basis[row, s] = 1.0
        self.basis = basis
        self.cutoff = photon_cutoff
        self.n_sector = len(sector)

        self.num_ops = [
            self._project(c.conj().T @ c) for c in self.c_ops
        ]
        hop = np.zeros((dim_full, dim_full), dtype=np.complex128)
        for i in range(p.n_sites - 1):
            for s in range(2):
                a = self.c_ops[2 * i + s]
                b = self.c_ops[2 * (i + 1) + s]
                hop += -p.hopping * (a.conj().T @ b + b.conj().T @ a)
        self.hop_sector = self._project(hop)
        u_op = np.zeros((dim_full, dim_full), dtype=np.complex128)
        for i in range(p.n_sites):
            nu = self.c_ops[2 * i].conj().T @ self.c_ops[2 * i]
            nd = self.c_ops[2 * i + 1].conj().T @ self.c_ops[2 * i + 1]
            u_op += p.u * (nu @ nd)
        self.u_sector = self._project(u_op)
        r = site_positions(p)
        self.mu_sector = sum(
            r[i] * (self.num_ops[2 * i] + self.num_ops[2 * i + 1])
            for i in range(p.n_sites)
        )
        bos = ql.boson_ops(photon_cutoff)
        eye_s = np.eye(self.n_sector)
        self.a_full = ql.kron(eye_s, bos["a"])
        self.h_cav = p.cavity_omega * self.a_full.conj().T @ self.a_full
        self.h_coupl = -p.cavity_g * ql.kron(
            self.mu_sector, bos["a"] + bos["adag"]
        )

    def _project(self, op):
        return self.basis @ op @ self.basis.T

    def hamiltonian(self, t):
        p = self.p
        h_el = self.hop_sector + self.u_sector
        if p.schedule is not None:
            pot = p.schedule.site_potential(t)
            for i in range(p.n_sites):
                h_el = h_el + pot[i] * (
                    self.num_ops[2 * i] + self.num_ops[2 * i + 1]
                )
        return ql.kron(h_el, np.eye(self.cutoff)) + self.h_cav + self.h_coupl

    def slater_vector(self, orbitals):
        """Apply the orbital creation operators to the vacuum (full Fock),
        then project onto the sector."""
        orbitals = np.asarray(orbitals)
        if orbitals.ndim == 1:
            cols = np.zeros((2 * self.p.n_sites, len(orbitals)))
            for j, o in enumerate(orbitals):
                cols[int(o), j] = 1.0
            orbitals = cols
        dim_full = 2 ** (2 * self.p.n_sites)
        vac = np.zeros(dim_full, dtype=np.complex128)
        vac[0] = 1.0
        psi = vac
        for j in range(orbitals.shape[1]):
            cdag = sum(
                orbitals[i, j] * self.c_ops[i].conj().T
                for i in range(2 * self.p.n_sites)
            )
            psi = cdag @ psi
        psi = self.basis @ psi
        nrm = np.linalg.norm(psi)
        if nrm < 1e-12:
            raise ValueError("orbital set annihilates the vacuum sector")
        return psi / nrm

    def run(self, orbitals, t_span, sample_times, atol=1e-10, rtol=1e-8):
        p = self.p
        psi = self.slater_vector(orbitals)
        fock0 = np.zeros(self.cutoff, dtype=np.complex128)
        fock0[0] = 1.0
        vec = np.kron(psi, fock0)
        rho0 = np.outer(vec, vec.conj())
        d = 2 * p.n_sites
        # sector-projected c^dag_j c_i for the one-body matrix f1[i, j]
        cdc = np.empty((d, d, self.n_sector, self.n_sector), dtype=np.complex128)
        for i in range(d):
            for j in range(d):
                cdc[i, j] = self._project(self.c_ops[j].conj().T @ self.c_ops[i])
        ph_weights = np.arange(self.cutoff, dtype=float)
        positions = site_positions(p)

        def sample_map(t, rho):
            rho_el = ql.partial_trace(rho, [self.n_sector, self.cutoff], keep=[0])
            rho_ph = ql.partial_trace(rho, [self.n_sector, self.cutoff], keep=[1])
            f1 = np.einsum("ijab,ba->ij", cdc, rho_el)
            occ = np.array(
                [f1[2 * i, 2 * i].real + f1[2 * i + 1, 2 * i + 1].real
                 for i in range(p.n_sites)]
            )
            total = occ.sum()
            if abs(total - p.n_electrons) > 1e-6 * p.n_electrons:
                raise RuntimeError(
                    f"particle number drifted to {total} at t = {t}"
                )
            mu = float(positions @ occ)
            photon = float(ph_weights @ np.diag(rho_ph).real)
            return occ, mu, photon, f1

        switches = () if p.schedule is None else p.schedule.all_switch_times
        times, res = lv.propagate_master(
            self.hamiltonian,
            [(2.0 * p.cavity_kappa, self.a_full)],
            rho0,
            t_span,
            sample_times,
            atol=atol,
            rtol=rtol,
            sample_map=sample_map,
            switch_times=switches,
        )
        return HubbardOracleResult(
            times=times,
            dipole=np.array([r[1] for r in res]),
            occupations=np.array([r[0] for r in res]),
            photon=np.array([r[2] for r in res]),
            f1=[r[3] for r in res],
        )
