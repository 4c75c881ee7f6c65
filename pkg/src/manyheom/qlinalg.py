"""Dense complex operator algebra for small quantum systems.

Conventions used throughout the package:
  * operators and density matrices are square complex128 ndarrays,
  * multi-particle spaces are Kronecker products with particle 1 as the
    leftmost tensor factor,
  * basis of a two-level emitter: index 0 = excited |e>, index 1 = ground |g>,
    so sigma_z = diag(1, -1) and sigma_minus = |g><e|.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def as_operator(m, name="operator"):
    """Validate and return a square, finite complex matrix."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


class TensorSpace:
    """Ordered list of subsystem dimensions interpreting a flat matrix."""

    def __init__(self, factor_dims):
        dims = tuple(int(d) for d in factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be positive, got {dims}")
        self.factor_dims = dims
        self.total_dim = math.prod(dims)

    def __repr__(self):
        return f"TensorSpace{self.factor_dims}"


def kron(a, b):
    """Kronecker product, particle ordering left-to-right."""
    return np.kron(as_operator(a, "a"), as_operator(b, "b"))


def kron_all(*ops):
    out = as_operator(ops[0])
    for op in ops[1:]:
        out = np.kron(out, as_operator(op))
    return out


def partial_trace(m, space, keep):
    """Trace out all subsystems of ``space`` not listed in ``keep``.

    ``keep`` is an iterable of subsystem indices; the result acts on the
    kept subsystems in their original order.  The full trace is preserved
    exactly up to floating-point roundoff.
    """
    m = as_operator(m)
    if not isinstance(space, TensorSpace):
        space = TensorSpace(space)
    dims = space.factor_dims
    if m.shape[0] != space.total_dim:
        raise ValueError(
            f"matrix dimension {m.shape[0]} does not match tensor space {dims}"
        )
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} outside subsystem range 0..{n - 1}")
    t = m.reshape(dims + dims)
    # einsum: dropped subsystems share a row/column label (contraction)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out_labels = [row[k] for k in keep] + [col[k] for k in keep]
    t = np.einsum(t, row + col, out_labels)
    d_keep = math.prod(dims[k] for k in keep) if keep else 1
    return t.reshape(d_keep, d_keep)


def permutation_operator(d, perm):
    """Matrix on d^p permuting particle slots: slot i receives old slot perm[i]."""
    p = len(perm)
    dim = d**p
    op = np.zeros((dim, dim))
    # basis |i_0 ... i_{p-1}>  ->  |i_{perm(0)} ... >
    for idx in itertools.product(range(d), repeat=p):
        src = 0
        for i in idx:
            src = src * d + i
        dst = 0
        for k in range(p):
            dst = dst * d + idx[perm[k]]
        op[dst, src] = 1.0
    return op.astype(np.complex128)


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, clen = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


def symmetrizer(d, p):
    """Projector onto the permutation-symmetric subspace of (C^d)^p, p in {2,3}."""
    return _sym_projector(d, p, anti=False)


def antisymmetrizer(d, p):
    """Projector onto the antisymmetric subspace of (C^d)^p, p in {2,3}."""
    return _sym_projector(d, p, anti=True)


def _sym_projector(d, p, anti):
    if p not in (2, 3):
        raise ValueError(f"particle count p must be 2 or 3, got {p}")
    if d < 1:
        raise ValueError("d must be >= 1")
    dim = d**p
    out = np.zeros((dim, dim), dtype=np.complex128)
    for perm in itertools.permutations(range(p)):
        w = _perm_sign(perm) if anti else 1
        out += w * permutation_operator(d, perm)
    return out / math.factorial(p)


def apply_projector_norm_preserving(proj, f, rel_eps=1e-12):
    """P f P, rescaled so the trace matches the input trace.

    Auxiliary hierarchy matrices can carry (near-)zero traces; in that case
    the rescale is ill-posed and is skipped.  An exactly unprojectable input
    (finite trace, zero projected trace) maps to the zero matrix.
    """
    pf = proj @ f @ proj
    tr_in = np.trace(f)
    tr_out = np.trace(pf)
    scale = max(np.linalg.norm(pf), abs(tr_in), 1e-300)
    if abs(tr_out) > rel_eps * scale:
        return pf * (tr_in / tr_out)
    if abs(tr_in) <= rel_eps * scale:
        return pf
    return np.zeros_like(pf)


def spin_ops():
    """Pauli operators for a two-level emitter, |e> = index 0."""
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    sp = np.array([[0, 1], [0, 0]], dtype=np.complex128)  # |e><g|
    sm = np.array([[0, 0], [1, 0]], dtype=np.complex128)  # |g><e|
    return {"x": sx, "y": sy, "z": sz, "+": sp, "-": sm}


def boson_ops(cutoff):
    """Truncated mode operators on number states 0..cutoff-1.

    [a, a^dag] = 1 holds exactly except on the highest retained row.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(np.complex128)
    return {"a": a, "adag": a.conj().T, "n": a.conj().T @ a}


def fermion_ops(n_modes):
    """Fermionic annihilation operators on 2^n_modes via Jordan-Wigner.

    Mode 0 is the leftmost tensor factor; exact anticommutation relations on
    the full Fock space.  Intended for exact small-cluster oracles only.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    # occupation basis per mode: index 0 = empty, 1 = occupied
    lower = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    parity = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    eye = np.eye(2, dtype=np.complex128)
    ops = []
    for k in range(n_modes):
        factors = [parity] * k + [lower] + [eye] * (n_modes - k - 1)
        ops.append(kron_all(*factors))
    return ops


def eig_hermitian(m, rel_tol=1e-8):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises if the input deviates from Hermiticity by more than
    ``rel_tol * ||m||`` in Frobenius norm.
    """
    m = as_operator(m)
    scale = np.linalg.norm(m)
    defect = np.linalg.norm(m - m.conj().T)
    if defect > rel_tol * max(scale, 1e-300):
        raise ValueError(
            f"matrix is not Hermitian: ||M - M^dag|| = {defect:.3e} "
            f"exceeds {rel_tol:g} * ||M|| = {rel_tol * scale:.3e}"
        )
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def commutator(a, b):
    return a @ b - b @ a


def dagger(m):
    return np.asarray(m).conj().T


def embed(op, space, slots):
    """Place ``op`` (acting on the listed slots, in order) into the full space.

    ``slots`` must be strictly increasing; identity on all other factors.
    """
    if not isinstance(space, TensorSpace):
        space = TensorSpace(space)
    dims = space.factor_dims
    slots = list(slots)
    if slots != sorted(slots) or len(set(slots)) != len(slots):
        raise ValueError("slots must be strictly increasing")
    d_op = math.prod(dims[s] for s in slots)
    op = as_operator(op)
    if op.shape[0] != d_op:
        raise ValueError(f"operator dim {op.shape[0]} != product of slot dims {d_op}")
    n = len(dims)
    t = op.reshape([dims[s] for s in slots] * 2)
    full = t
    # build as einsum with identity factors
    for ax in range(n):
        if ax not in slots:
            full = np.tensordot(full, np.eye(dims[ax], dtype=np.complex128), axes=0)
    # current axis order: (slot rows..., slot cols..., id pairs...)
    row_axes = [None] * n
    col_axes = [None] * n
    k = len(slots)
    for i, s in enumerate(slots):
        row_axes[s] = i
        col_axes[s] = i + k
    nxt = 2 * k
    for ax in range(n):
        if ax not in slots:
            row_axes[ax] = nxt
            col_axes[ax] = nxt + 1
            nxt += 2
    full = np.transpose(full, row_axes + col_axes)
    dim = space.total_dim
    return np.ascontiguousarray(full.reshape(dim, dim))
