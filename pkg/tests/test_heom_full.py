import numpy as np
import pytest

from manyheom import heom_full, liouville as lv
from manyheom import qlinalg as ql
from manyheom.bath import ExponentialBathModel
from manyheom.propagator import OdeProblem, integrate

SP = ql.spin_ops()


def damped_qubit_model(g, kappa, delta=0.0, h_sys=None):
    bm = ExponentialBathModel([(g * g, kappa + 1j * delta)])
    h = np.zeros((2, 2), dtype=complex) if h_sys is None else h_sys
    return heom_full.HeomModel(h_sys=h, baths=[(bm, SP["-"])])


def single_excitation_oracle(g, kappa, delta, times):
    """Exact excited-state population for one emitter and one lossy mode.

    Amplitude equations: c' = -G b, b' = -W b + c with G = g^2,
    W = kappa + i delta; solved in closed form via the 2x2 eigensystem.
    """
    big_g = g * g
    big_w = kappa + 1j * delta
    m = np.array([[0, -big_g], [1, -big_w]], dtype=complex)
    vals, vecs = np.linalg.eig(m)
    c0 = np.linalg.solve(vecs, np.array([1.0, 0.0], dtype=complex))
    out = []
    for t in times:
        amp = (vecs @ (c0 * np.exp(vals * t)))[0]
        out.append(abs(amp) ** 2)
    return np.array(out)


def excited_rho():
    rho = np.zeros((2, 2), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def test_decoupled_limit_closed_evolution():
    bm = ExponentialBathModel([(0.0, 1.0)])
    h = 0.7 * SP["z"]
    model = heom_full.HeomModel(h_sys=h, baths=[(bm, SP["-"])])
    rho0 = np.array([[0.5, 0.4], [0.4, 0.5]], dtype=complex)
    times = np.linspace(0, 3, 7)
    snaps = heom_full.propagate(
        model, rho0, (0, 3), times, depth=3, atol=1e-12, rtol=1e-11
    )
    for t, s in zip(times, snaps):
        u = np.diag(np.exp(-1j * np.diag(h) * t))
        expected = u @ rho0 @ u.conj().T
        assert np.linalg.norm(s.physical - expected) < 1e-8
        # auxiliaries start at zero and only decay: they remain zero
        assert np.linalg.norm(s.matrices[1:]) < 1e-12


def test_exact_single_excitation_dynamics():
    g, kappa, delta = 0.4, 1.2, 0.3
    model = damped_qubit_model(g, kappa, delta)
    times = np.linspace(0, 6, 25)
    snaps = heom_full.propagate(
        model, excited_rho(), (0, 6), times, depth=6, atol=1e-12, rtol=1e-11
    )
    pe = np.array([s.physical[0, 0].real for s in snaps])
    exact = single_excitation_oracle(g, kappa, delta, times)
    assert np.max(np.abs(pe - exact)) < 1e-8


def test_markovian_limit_against_lindblad_rate():
    # kappa >> g: populations follow exp(-Gamma t), Gamma = 2 g^2 / kappa
    g, kappa = 0.1, 20.0
    model = damped_qubit_model(g, kappa)
    times = np.linspace(0, 40, 11)
    snaps = heom_full.propagate(model, excited_rho(), (0, 40), times, depth=4)
    pe = np.array([s.physical[0, 0].real for s in snaps])
    gamma = 2 * g * g / kappa
    exact = single_excitation_oracle(g, kappa, 0.0, times)
    markov = np.exp(-gamma * times)
    assert np.max(np.abs(pe - exact)) < 1e-8
    assert np.max(np.abs(pe - markov)) < 2e-4  # O((g/kappa)^2) correction


def test_depth_self_convergence():
    g, kappa, delta = 0.6, 0.8, 0.5
    h = 0.3 * SP["x"]
    model = damped_qubit_model(g, kappa, delta, h_sys=h)
    times = np.linspace(0, 5, 11)

    def run(depth):
        snaps = heom_full.propagate(model, excited_rho(), (0, 5), times, depth=depth)
        return np.array([s.physical[0, 0].real for s in snaps])

    deep = run(12)
    devs = [np.max(np.abs(run(d) - deep)) for d in (4, 6, 8)]
    assert devs[2] < 1e-8
    assert devs[0] >= devs[1] >= devs[2] - 1e-12


def explicit_cavity_oracle(g, kappa, delta, omega, cutoff, times, h_spin):
    """Qubit plus explicitly tracked lossy mode, standard master equation."""
    bos = ql.boson_ops(cutoff)
    a = ql.kron(np.eye(2), bos["a"])
    h = (
        ql.kron(h_spin, np.eye(cutoff))
        + delta * a.conj().T @ a
        + g * (ql.kron(SP["+"], bos["a"]) + ql.kron(SP["-"], bos["adag"]))
    )
    rho0 = np.zeros((2 * cutoff, 2 * cutoff), dtype=complex)
    rho0[0, 0] = 1.0  # |e, 0>
    _, res = lv.propagate_master(
        h,
        [(2 * kappa, a)],
        rho0,
        (times[0], times[-1]),
        times,
        atol=1e-12,
        rtol=1e-10,
        sample_map=lambda t, r: (
            ql.partial_trace(r, [2, cutoff], keep=[0]),
            lv.expect(a.conj().T @ a, r).real,
        ),
    )
    spins = [r[0] for r in res]
    photons = np.array([r[1] for r in res])
    return spins, photons


def test_pseudomode_equivalence_and_photon_identity():
    # driven qubit: HEOM with a single-exponential bath must match the
    # explicit lossy cavity, including the photon number extracted from
    # the (1,1) auxiliary
    g, kappa, delta = 0.35, 0.5, 0.2
    h_spin = 0.4 * SP["x"] + 0.1 * SP["z"]
    model = damped_qubit_model(g, kappa, delta, h_sys=h_spin)
    times = np.linspace(0, 8, 17)
    snaps = heom_full.propagate(
        model, excited_rho(), (0, 8), times, depth=10, atol=1e-12, rtol=1e-10
    )
    spins, photons = explicit_cavity_oracle(
        g, kappa, delta, None, 12, times, h_spin
    )
    for s, rho_oracle in zip(snaps, spins):
        assert np.linalg.norm(s.physical - rho_oracle) < 1e-6
    heom_photons = np.array(
        [heom_full.bath_observable_trace(s, 0).real / (g * g) for s in snaps]
    )
    assert photons.max() > 0.05  # the test exercises a populated mode
    mask = photons > 1e-3
    rel = np.abs(heom_photons[mask] - photons[mask]) / photons[mask]
    assert np.max(rel) < 1e-3


def test_trace_conserved_and_conjugation_pairing():
    g, kappa, delta = 0.5, 0.7, -0.4
    h = 0.3 * SP["x"] + 0.2 * SP["z"]
    bm = ExponentialBathModel([(g * g, kappa + 1j * delta), (0.1, 1.5)])
    model = heom_full.HeomModel(h_sys=h, baths=[(bm, SP["-"])])
    times = np.linspace(0, 4, 9)
    snaps = heom_full.propagate(model, excited_rho(), (0, 4), times, depth=4)
    lay = snaps[0].layout
    for s in snaps:
        assert abs(np.trace(s.physical) - 1) < 1e-9
        assert np.linalg.norm(s.physical - s.physical.conj().T) < 1e-8
        for pos in range(lay.size):
            partner = lay.conj_partner[pos]
            assert (
                np.linalg.norm(s.matrices[pos] - s.matrices[partner].conj().T) < 1e-8
            )


def test_lindblad_channels_match_master_equation():
    # no exponential bath amplitude, pure Lindblad: hierarchy reduces to a
    # plain master equation
    h = 0.9 * SP["z"] + 0.2 * SP["x"]
    gamma = 0.3
    bm = ExponentialBathModel([(0.0, 1.0)])
    model = heom_full.HeomModel(
        h_sys=h, baths=[(bm, SP["-"])], lindblad=[(gamma, SP["-"])]
    )
    times = np.linspace(0, 5, 11)
    snaps = heom_full.propagate(model, excited_rho(), (0, 5), times, depth=2)
    _, oracle = lv.propagate_master(
        h, [(gamma, SP["-"])], excited_rho(), (0, 5), times,
        atol=1e-12, rtol=1e-10,
    )
    for s, r in zip(snaps, oracle):
        assert np.linalg.norm(s.physical - r) < 1e-8


def test_time_dependent_hamiltonian_segments():
    h0 = 0.5 * SP["z"]
    h1 = 0.5 * SP["z"] + 1.0 * SP["x"]

    def h_of_t(t):
        return h1 if t >= 1.0 else h0

    bm = ExponentialBathModel([(0.04, 0.8)])
    model = heom_full.HeomModel(
        h_sys=h_of_t, baths=[(bm, SP["-"])], switch_times=(1.0,)
    )
    times = np.array([0.5, 1.0, 2.0])
    snaps = heom_full.propagate(model, excited_rho(), (0, 2), times, depth=4)

    # reference: two manual constant-H propagations chained
    m0 = heom_full.HeomModel(h_sys=h0, baths=[(bm, SP["-"])])
    lay = heom_full.build_layout(m0, 4)
    gen0 = heom_full.build_generator(m0, lay)
    gen1 = heom_full.build_generator(
        heom_full.HeomModel(h_sys=h1, baths=[(bm, SP["-"])]), lay
    )
    y0 = heom_full.initial_state(m0, excited_rho(), lay).matrices.reshape(-1)
    t1 = integrate(
        OdeProblem(lambda t, v: gen0 @ v, (0, 1), y0, 1e-12, 1e-10, np.array([1.0]))
    ).states[-1]
    t2 = integrate(
        OdeProblem(lambda t, v: gen1 @ v, (1, 2), t1, 1e-12, 1e-10, np.array([2.0]))
    ).states[-1]
    assert np.linalg.norm(snaps[2].matrices.reshape(-1) - t2) < 1e-7


def test_bath_observable_requires_depth():
    model = damped_qubit_model(0.3, 1.0)
    lay = heom_full.build_layout(model, 1)
    state = heom_full.initial_state(model, excited_rho(), lay)
    with pytest.raises(ValueError):
        heom_full.bath_observable_trace(state, 0)


def test_initial_state_validation():
    model = damped_qubit_model(0.3, 1.0)
    lay = heom_full.build_layout(model, 2)
    with pytest.raises(ValueError):
        heom_full.initial_state(model, 2 * excited_rho(), lay)
