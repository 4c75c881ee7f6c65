import numpy as np
import pytest

from manyheom import bbgky, observables as obs
from manyheom import qlinalg as ql

SP = ql.spin_ops()


def product_rdms(rho, n):
    f1 = n * rho
    f12 = n * (n - 1) * np.kron(rho, rho)
    return f1, f12


def test_all_up_moments():
    n = 12
    up = np.zeros((2, 2), dtype=complex)
    up[0, 0] = 1.0
    f1, f12 = product_rdms(up, n)
    m = obs.spin_moments_from_rdm(f1, f12, n)
    assert np.allclose(m.mean, [0, 0, n], atol=1e-12)
    assert abs(m.variance_along([0, 0, 1])) < 1e-10


def test_coherent_state_moments_binomial_oracle():
    # Pauli convention: S_k = sum_i sigma_k, so a CSS along +x has
    # <S_x> = N and transverse variances N (binomial: N * Var(sigma) = N)
    n = 9
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    f1, f12 = product_rdms(plus, n)
    m = obs.spin_moments_from_rdm(f1, f12, n)
    assert np.allclose(m.mean, [n, 0, 0], atol=1e-12)
    assert abs(m.variance_along([0, 1, 0]) - n) < 1e-10
    assert abs(m.variance_along([0, 0, 1]) - n) < 1e-10


def test_moments_from_rdm_match_full_state():
    # random symmetric 3-spin state: contraction commutes with evaluation
    rng = np.random.default_rng(0)
    n = 3
    dim = 2**n
    rho = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = rho @ rho.conj().T
    sym = np.zeros_like(rho)
    import itertools

    for perm in itertools.permutations(range(n)):
        p = ql.permutation_operator(2, list(perm))
        sym += p @ rho @ p.conj().T
    rho = sym / np.trace(sym)
    f12 = n * (n - 1) * ql.partial_trace(rho, [2, 2, 2], keep=[0, 1])
    f1 = bbgky.contract_F1(f12, n)
    m_rdm = obs.spin_moments_from_rdm(f1, f12, n)

    eye = np.eye(2)
    def coll(op):
        return (
            ql.kron_all(op, eye, eye)
            + ql.kron_all(eye, op, eye)
            + ql.kron_all(eye, eye, op)
        )

    s_ops = [coll(SP["x"]), coll(SP["y"]), coll(SP["z"])]
    mean_full = [np.trace(s @ rho).real for s in s_ops]
    assert np.allclose(m_rdm.mean, mean_full, atol=1e-12)
    for a in range(3):
        for b in range(3):
            sym_ab = 0.5 * (s_ops[a] @ s_ops[b] + s_ops[b] @ s_ops[a])
            assert abs(m_rdm.second[a, b] - np.trace(sym_ab @ rho).real) < 1e-11


def test_squeezing_coherent_state_unity():
    n = 20
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    f1, f12 = product_rdms(plus, n)
    m = obs.spin_moments_from_rdm(f1, f12, n)
    res = obs.spin_squeezing(m, n)
    assert abs(res.xi2 - 1.0) < 1e-10
    assert abs(res.direction @ m.mean) < 1e-8


def one_axis_twisted_moments(n, chi_t):
    # exact collective evolution under H = chi J_z^2 from a CSS along +x
    jx, jy, jz = obs.collective_spin_matrices(n)
    psi0 = obs.spin_coherent_state(n, np.pi / 2, 0.0)
    u = np.diag(np.exp(-1j * chi_t * np.diag(jz) ** 2))
    psi = u @ psi0
    rho = np.outer(psi, psi.conj())
    return obs.spin_moments_from_collective(rho, n), rho


def test_squeezing_one_axis_twisting():
    n = 30
    m, _ = one_axis_twisted_moments(n, 0.05)
    res = obs.spin_squeezing(m, n)
    assert res.xi2 < 1.0
    # brute-force angular scan agrees with the eigen-solution
    scan = obs.spin_squeezing_scan(m, n, n_angles=360)
    assert abs(scan.xi2 - res.xi2) < 2e-3 * max(res.xi2, 0.1)
    dot = abs(scan.direction @ res.direction)
    assert dot > np.cos(np.deg2rad(1.5))


def test_squeezing_rotation_invariance():
    n = 14
    m, rho = one_axis_twisted_moments(n, 0.08)
    base = obs.spin_squeezing(m, n).xi2
    jx, jy, jz = obs.collective_spin_matrices(n)
    from scipy.linalg import expm

    for axis in (jx, jy, jx + 0.3 * jz):
        u = expm(-1j * 0.7 * axis)
        m_rot = obs.spin_moments_from_collective(u @ rho @ u.conj().T, n)
        assert abs(obs.spin_squeezing(m_rot, n).xi2 - base) < 1e-8


def test_squeezing_undefined_direction():
    n = 4
    mixed = np.eye(2, dtype=complex) / 2
    f1, f12 = product_rdms(mixed, n)
    m = obs.spin_moments_from_rdm(f1, f12, n)
    with pytest.raises(ValueError):
        obs.spin_squeezing(m, n)


def test_q_map_all_up_and_mixed():
    n = 6
    rho_up = np.zeros((n + 1, n + 1), dtype=complex)
    rho_up[0, 0] = 1.0
    thetas, phis, q = obs.spin_q_map(rho_up, n, n_theta=41, n_phi=16)
    assert abs(q[0, 0] - 1.0) < 1e-12
    assert np.unravel_index(np.argmax(q), q.shape)[0] == 0

    rho_mix = np.eye(n + 1, dtype=complex) / (n + 1)
    _, _, q_mix = obs.spin_q_map(rho_mix, n, n_theta=31, n_phi=8)
    assert np.allclose(q_mix, 1.0 / (n + 1), atol=1e-12)


def test_q_map_normalization():
    n = 5
    rng = np.random.default_rng(1)
    rho = rng.standard_normal((n + 1, n + 1)) + 1j * rng.standard_normal(
        (n + 1, n + 1)
    )
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    n_theta, n_phi = 201, 64
    thetas, phis, q = obs.spin_q_map(rho, n, n_theta=n_theta, n_phi=n_phi)
    # int Q dOmega (N+1)/(4 pi) with trapezoid in theta, uniform in phi
    w_theta = np.sin(thetas)
    integral = (
        np.trapezoid(q.mean(axis=1) * w_theta, thetas) * 2 * np.pi
    )
    assert abs(integral * (n + 1) / (4 * np.pi) - 1.0) < 1e-3


def test_q_map_waist_matches_squeezing_direction():
    n = 16
    m, rho = one_axis_twisted_moments(n, 0.06)
    res = obs.spin_squeezing(m, n)
    # mean spin ~ +x; measure Q-spread along the two transverse directions
    thetas, phis, q = obs.spin_q_map(rho, n, n_theta=61, n_phi=120)
    # variance of Q along n1 vs the orthogonal transverse direction: the
    # squeezed direction must show the smaller angular spread
    e3 = m.mean / np.linalg.norm(m.mean)
    e1 = res.direction
    e2 = np.cross(e3, e1)
    v1 = v2 = w = 0.0
    for i, th in enumerate(thetas):
        for k, ph in enumerate(phis):
            vec = np.array(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
            )
            # vec components ordered (x, y, z); moments use the same order
            wt = q[i, k] * np.sin(th)
            v1 += wt * (vec @ e1) ** 2
            v2 += wt * (vec @ e2) ** 2
            w += wt
    assert v1 / w < v2 / w


def test_symmetric_sector_density_roundtrip():
    rho = np.zeros((8, 8), dtype=complex)
    # symmetric (W-like) state of 3 spins
    vec = np.zeros(8, dtype=complex)
    for s in (0b001, 0b010, 0b100):
        vec[s] = 1 / np.sqrt(3)
    rho = np.outer(vec, vec.conj())
    red = obs.symmetric_sector_density(rho, 3)
    assert abs(np.trace(red) - 1.0) < 1e-12
    # the W state is the m = j - 1 Dicke state
    assert abs(red[1, 1] - 1.0) < 1e-12


def test_three_body_norm_product_state():
    rho1 = np.array([[0.7, 0.2], [0.2, 0.3]], dtype=complex)
    rho3 = ql.kron_all(rho1, rho1, rho1)
    f12 = 6 * ql.kron(rho1, rho1)
    f1 = bbgky.contract_F1(f12, 3)
    assert obs.three_body_correlation_norm(rho3, f1, f12, 3) < 1e-10


def test_dipole_and_occupations():
    # sites 1 and 3 doubly occupied, 4 sites, spacing 1
    f1 = np.diag([0, 0, 1, 1, 0, 0, 1, 1]).astype(complex)
    mu, occ = obs.dipole_and_occupations(f1, 4, spacing=1.0)
    assert np.allclose(occ, [0, 2, 0, 2])
    assert abs(mu - 2.0) < 1e-12

    half = np.eye(8, dtype=complex) * 0.5
    mu0, occ0 = obs.dipole_and_occupations(half, 4)
    assert abs(mu0) < 1e-12
    assert abs(occ0.sum() - 4) < 1e-12


def test_photon_number_initial_zero():
    from manyheom.bath import ExponentialBathModel

    bm = ExponentialBathModel([(0.04, 1.0 + 2.0j)])
    model = bbgky.ManyBodyModel(
        n_particles=4, d=2, h1=0.3 * SP["z"], global_baths=[(bm, SP["-"])]
    )
    st = bbgky.initial_state_factory("fully_excited", model, depth=2)
    assert obs.photon_number(st, 0, 0.04) == 0.0
    st_shallow = bbgky.initial_state_factory("fully_excited", model, depth=1)
    with pytest.raises(ValueError):
        obs.photon_number(st_shallow, 0, 0.04)
