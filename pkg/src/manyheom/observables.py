"""Derived quantities from reduced or oracle states.

Collective spin conventions: S_k = sum_i sigma_k^i with Pauli matrices, so
a fully polarized ensemble has <S_z> = N.  The squeezing parameter is
invariant under the overall factor-of-two relative to spin-1/2 operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qlinalg as ql
from .bbgky import contract_F1, reconstruct_F123


@dataclass
class SpinMoments:
    mean: np.ndarray  # <S_x>, <S_y>, <S_z>
    second: np.ndarray  # symmetrized <S_i S_j>, 3 x 3

    def variance_along(self, n_vec):
        n_vec = np.asarray(n_vec, dtype=float)
        n_vec = n_vec / np.linalg.norm(n_vec)
        mean = float(self.mean @ n_vec)
        return float(n_vec @ self.second @ n_vec) - mean**2


@dataclass
class SqueezingResult:
    xi2: float
    direction: np.ndarray  # minimizing unit vector, orthogonal to <S>


def spin_moments_from_rdm(f1, f12, n_particles):
    """First and second collective-spin moments from the one- and two-body
    matrices: <S_k> = Tr(sigma_k F1), <S_k S_l> = Tr(sigma_k x sigma_l F12)
    plus the single-particle diagonal Tr(sigma_k sigma_l F1)."""
    sp = ql.spin_ops()
    paulis = [sp["x"], sp["y"], sp["z"]]
    mean = np.array([np.trace(s @ f1).real for s in paulis])
    second = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            two = np.trace(np.kron(paulis[a], paulis[b]) @ f12)
            one = np.trace(paulis[a] @ paulis[b] @ f1)
            val = two + one
            sym = 0.5 * (val + np.conj(val))
            second[a, b] = sym.real
    second = 0.5 * (second + second.T)
    return SpinMoments(mean=mean, second=second)


def spin_moments_from_collective(rho_spin, n_particles):
    """Moments from a density matrix in the symmetric (Dicke) basis
    |j = N/2, m>, m descending from N/2."""
    jx, jy, jz = collective_spin_matrices(n_particles)
    ops = [2 * jx, 2 * jy, 2 * jz]  # S_k = 2 J_k in Pauli convention
    mean = np.array([np.trace(o @ rho_spin).real for o in ops])
    second = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            second[a, b] = np.trace(
                0.5 * (ops[a] @ ops[b] + ops[b] @ ops[a]) @ rho_spin
            ).real
    return SpinMoments(mean=mean, second=0.5 * (second + second.T))


def collective_spin_matrices(n):
    """J_x, J_y, J_z on the (N+1)-dimensional symmetric sector, basis
    m = N/2, N/2 - 1, ..., -N/2."""
    j = n / 2.0
    m = j - np.arange(n + 1)
    jz = np.diag(m).astype(np.complex128)
    lower = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1))
    jm = np.diag(lower, -1).astype(np.complex128)  # J_- in this ordering
    jp = jm.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz


def spin_squeezing(moments, n_particles):
    """Squeezing parameter xi^2 = N (Delta S_n1)^2 / |<S>|^2 with n1 the
    minimal-variance direction orthogonal to the mean spin."""
    mean = moments.mean
    norm = np.linalg.norm(mean)
    if norm < 1e-12 * max(1.0, n_particles):
        raise ValueError("mean spin vanishes; squeezing direction undefined")
    e3 = mean / norm
    # orthonormal in-plane basis
    trial = np.array([1.0, 0.0, 0.0])
    if abs(trial @ e3) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    cov = np.zeros((2, 2))
    basis = [e1, e2]
    for a in range(2):
        for b in range(2):
            cov[a, b] = basis[a] @ moments.second @ basis[b] - (
                mean @ basis[a]
            ) * (mean @ basis[b])
    vals, vecs = np.linalg.eigh(cov)
    min_var = vals[0]
    direction = vecs[0, 0] * e1 + vecs[1, 0] * e2
    direction /= np.linalg.norm(direction)
    xi2 = n_particles * min_var / norm**2
    return SqueezingResult(xi2=float(xi2), direction=direction)


def spin_squeezing_scan(moments, n_particles, n_angles=360):
    """Brute-force angular scan oracle for the minimal transverse variance."""
    mean = moments.mean
    norm = np.linalg.norm(mean)
    e3 = mean / norm
    trial = np.array([1.0, 0.0, 0.0])
    if abs(trial @ e3) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    best = None
    for k in range(n_angles):
        th = math.pi * k / n_angles
        v = math.cos(th) * e1 + math.sin(th) * e2
        var = moments.variance_along(v)
        if best is None or var < best[0]:
            best = (var, v)
    return SqueezingResult(
        xi2=float(n_particles * best[0] / norm**2), direction=best[1]
    )


def spin_coherent_state(n, theta, phi):
    """Coherent spin state in the Dicke basis (m descending)."""
    amps = np.empty(n + 1, dtype=np.complex128)
    for k in range(n + 1):  # k spins flipped away from +z
        amps[k] = (
            math.sqrt(math.comb(n, k))
            * math.cos(theta / 2) ** (n - k)
            * math.sin(theta / 2) ** k
            * np.exp(1j * k * phi)
        )
    return amps


def spin_q_map(rho_spin, n_particles, n_theta=60, n_phi=120):
    """Husimi-style Q(theta, phi) = <theta,phi| rho |theta,phi> on a grid.

    Normalized so that int Q dOmega (N+1)/(4 pi) = 1.
    """
    thetas = np.linspace(0, np.pi, n_theta)
    phis = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    q = np.empty((n_theta, n_phi))
    for i, th in enumerate(thetas):
        for k, ph in enumerate(phis):
            v = spin_coherent_state(n_particles, th, ph)
            q[i, k] = np.real(v.conj() @ rho_spin @ v)
    return thetas, phis, q


def symmetric_sector_density(rho_full, n_particles):
    """Project an N-spin density matrix onto the Dicke basis (N <= 3)."""
    if n_particles > 3:
        raise ValueError("full-state projection implemented for N <= 3 only")
    basis = []
    dim = 2**n_particles
    for k in range(n_particles + 1):
        vec = np.zeros(dim, dtype=np.complex128)
        # all computational states with k ground-state spins (|e> = index 0)
        for state in range(dim):
            if bin(state).count("1") == k:
                vec[state] = 1.0
        vec /= np.linalg.norm(vec)
        basis.append(vec)
    basis = np.array(basis)
    return basis.conj() @ rho_full @ basis.T


def photon_number(state, bath_slot, g_amp, n_particles=None):
    """Mode occupation from the (e_j, e_j) auxiliary.

    Full-hierarchy states: Tr rho^(e,e) / G.  Reduced states:
    Tr F12^(e,e) / (N (N-1) G), identical by the contraction chain.
    The imaginary residue must stay below 1e-6 of the magnitude scale.
    """
    lay = state.layout
    k = lay.k
    n_vec = np.zeros(k, dtype=int)
    n_vec[bath_slot] = 1
    try:
        pos = lay.offset(n_vec, n_vec)
    except KeyError:
        raise ValueError("hierarchy depth < 2: photon auxiliary not present")
    if hasattr(state, "f12"):
        n = state.n_particles
        val = np.trace(state.f12[pos]) / (n * (n - 1) * g_amp)
    else:
        val = np.trace(state.matrices[pos]) / g_amp
    if abs(val.imag) > 1e-6 * max(1.0, abs(val)):
        raise ValueError(f"photon number has imaginary residue {val.imag:.2e}")
    return float(val.real)


def three_body_correlation_norm(rho_exact_3, f1, f12, n_particles=3):
    """Relative Frobenius distance between the exact three-body matrix and
    the reconstruction from its own contractions."""
    f123_exact = n_particles * (n_particles - 1) * (n_particles - 2) * rho_exact_3
    approx = reconstruct_F123(f1, f12, f1, f12, n_particles)
    scale = np.linalg.norm(f123_exact)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(f123_exact - approx) / scale)


def dipole_and_occupations(f1, n_sites, spacing=1.0):
    """Site occupations and dipole moment from a site x spin one-body matrix.

    n_i = sum_sigma <c^dag_is c_is>; positions r_i are centered:
    r_i = (i - (n_sites - 1)/2) * spacing.
    """
    d = f1.shape[0]
    if d != 2 * n_sites:
        raise ValueError("one-body matrix must be (2 n_sites) dimensional")
    occ = np.array(
        [f1[2 * i, 2 * i].real + f1[2 * i + 1, 2 * i + 1].real for i in range(n_sites)]
    )
    total = occ.sum()
    expected = np.trace(f1).real
    if abs(total - expected) > 1e-6 * max(1.0, abs(expected)):
        raise ValueError("occupations do not sum to the one-body trace")
    positions = (np.arange(n_sites) - (n_sites - 1) / 2) * spacing
    return float(positions @ occ), occ
