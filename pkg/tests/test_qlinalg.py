import numpy as np
import pytest

from manyheom import qlinalg as ql


def random_hermitian(rng, d):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (m + m.conj().T) / 2


def test_kron_identities():
    i2 = np.eye(2)
    assert np.array_equal(ql.kron(i2, i2), np.eye(4))
    sz = ql.spin_ops()["z"]
    assert np.array_equal(ql.kron(sz, i2), np.diag([1, 1, -1, -1]).astype(complex))


def test_kron_flips_two_qubits():
    sx = ql.spin_ops()["x"]
    xx = ql.kron(sx, sx)
    # |00> -> |11>; basis index 0 = |e e> here, flips to index 3
    v = np.zeros(4, dtype=complex)
    v[0] = 1.0
    out = xx @ v
    expected = np.zeros(4, dtype=complex)
    expected[3] = 1.0
    assert np.allclose(out, expected)


def test_kron_associative():
    # dyadic entries keep every product exact, so associativity is bitwise
    rng = np.random.default_rng(1)
    a = (rng.integers(-8, 9, (2, 2)) + 1j * rng.integers(-8, 9, (2, 2))) / 16.0
    b = (rng.integers(-8, 9, (3, 3)) + 1j * rng.integers(-8, 9, (3, 3))) / 16.0
    c = (rng.integers(-8, 9, (2, 2)) + 1j * rng.integers(-8, 9, (2, 2))) / 16.0
    assert np.array_equal(ql.kron(ql.kron(a, b), c), ql.kron(a, ql.kron(b, c)))


def test_partial_trace_maximally_mixed():
    got = ql.partial_trace(np.eye(4) / 4, [2, 2], keep=[0])
    assert np.allclose(got, np.eye(2) / 2)


def test_partial_trace_bell_state():
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    rho = np.outer(bell, bell.conj())
    got = ql.partial_trace(rho, [2, 2], keep=[0])
    assert np.allclose(got, np.eye(2) / 2)


def test_partial_trace_product_rule_and_trace_preservation():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    m = ql.kron(a, b)
    assert np.allclose(ql.partial_trace(m, [3, 4], keep=[0]), a * np.trace(b))
    assert np.allclose(ql.partial_trace(m, [3, 4], keep=[1]), b * np.trace(a))
    assert np.isclose(np.trace(ql.partial_trace(m, [3, 4], keep=[1])), np.trace(m))


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValueError):
        ql.partial_trace(np.eye(5), [2, 2], keep=[0])


def test_projectors_idempotent_hermitian():
    for d, p in [(2, 2), (3, 2), (2, 3), (3, 3)]:
        for proj in (ql.symmetrizer(d, p), ql.antisymmetrizer(d, p)):
            assert np.linalg.norm(proj @ proj - proj) < 1e-12
            assert np.linalg.norm(proj - proj.conj().T) < 1e-12


def test_projector_resolution_p2():
    for d in (2, 3, 4):
        total = ql.symmetrizer(d, 2) + ql.antisymmetrizer(d, 2)
        assert np.allclose(total, np.eye(d * d))


def test_antisymmetrizer_ranks():
    # two qubits: single singlet state
    vals = np.linalg.eigvalsh(ql.antisymmetrizer(2, 2))
    assert np.isclose(vals.sum(), 1.0)
    # Pauli exclusion: no antisymmetric 3-particle state on 2 levels
    assert np.linalg.norm(ql.antisymmetrizer(2, 3)) < 1e-14


def test_norm_preserving_projection():
    rng = np.random.default_rng(3)
    proj = ql.antisymmetrizer(2, 2)
    f = random_hermitian(rng, 4) + 2 * np.eye(4)
    out = ql.apply_projector_norm_preserving(proj, f)
    assert np.isclose(np.trace(out), np.trace(f))
    # projecting something fully symmetric gives zero
    sym = ql.symmetrizer(2, 2)
    f_sym = sym @ f @ sym
    out = ql.apply_projector_norm_preserving(proj, f_sym)
    assert np.linalg.norm(out) < 1e-12


def test_spin_algebra():
    s = ql.spin_ops()
    assert np.allclose(ql.commutator(s["x"], s["y"]), 2j * s["z"])
    assert np.allclose(s["+"] @ s["-"], np.diag([1, 0]).astype(complex))


def test_boson_ops():
    ops = ql.boson_ops(3)
    assert np.allclose(np.linalg.eigvalsh(ops["n"]), [0, 1, 2])
    comm = ql.commutator(ops["a"], ops["adag"])
    assert np.allclose(comm[:-1, :-1], np.eye(2))


def test_fermion_anticommutation():
    for n in (1, 2, 3, 4):
        cs = ql.fermion_ops(n)
        eye = np.eye(2**n)
        for i in range(n):
            for jj in range(n):
                anti = cs[i] @ cs[jj] + cs[jj] @ cs[i]
                assert np.linalg.norm(anti) < 1e-14
                cross = cs[i] @ cs[jj].conj().T + cs[jj].conj().T @ cs[i]
                expected = eye if i == jj else 0 * eye
                assert np.linalg.norm(cross - expected) < 1e-14


def test_fermion_number_counts():
    cs = ql.fermion_ops(2)
    n_tot = sum(c.conj().T @ c for c in cs)
    assert np.allclose(np.sort(np.linalg.eigvalsh(n_tot)), [0, 1, 1, 2])


def test_eig_hermitian():
    s = ql.spin_ops()
    vals, vecs = ql.eig_hermitian(s["z"])
    assert np.allclose(vals, [-1, 1])
    vals, vecs = ql.eig_hermitian(s["x"])
    assert np.allclose(vals, [-1, 1])
    assert np.isclose(abs(vecs[0, 0]), 1 / np.sqrt(2), atol=1e-12)

    rng = np.random.default_rng(4)
    m = random_hermitian(rng, 8)
    vals, vecs = ql.eig_hermitian(m)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.conj().T - m) < 1e-10
    assert np.linalg.norm(vecs.conj().T @ vecs - np.eye(8)) < 1e-10


def test_eig_hermitian_rejects_nonhermitian():
    with pytest.raises(ValueError):
        ql.eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_embed_matches_kron():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    space = ql.TensorSpace([2, 2, 2])
    assert np.allclose(ql.embed(a, space, [0]), ql.kron_all(a, np.eye(2), np.eye(2)))
    assert np.allclose(ql.embed(a, space, [1]), ql.kron_all(np.eye(2), a, np.eye(2)))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.allclose(ql.embed(b, space, [0, 1]), ql.kron(b, np.eye(2)))
    # operator on slots (0, 2): check against manual permutation
    sw = ql.permutation_operator(2, [0, 2, 1])  # swap slots 1 and 2
    assert np.allclose(ql.embed(b, space, [0, 2]), sw @ ql.kron(b, np.eye(2)) @ sw)


def test_partial_trace_random_property():
    rng = np.random.default_rng(6)
    for _ in range(20):
        dims = rng.integers(2, 4, size=3)
        total = int(np.prod(dims))
        m = rng.standard_normal((total, total)) + 1j * rng.standard_normal((total, total))
        keep = sorted(rng.choice(3, size=rng.integers(1, 3), replace=False))
        red = ql.partial_trace(m, dims, keep)
        assert np.isclose(np.trace(red), np.trace(m), rtol=1e-13, atol=1e-13)
