"""Reduced two-body hierarchy for identical-particle open systems.

The propagated object is the set of two-particle matrices F12^(n,m) on a
d^2-dimensional pair space, augmented with hierarchy indices exactly like
the full solver; the one-body matrices are obtained by contraction.  The
coupling to three-body quantities is closed by a reconstruction functional
built from F1 and F12, so the cost is independent of the particle number N.

Conventions:
  * Tr F12^(0,0) = N(N-1), F1 = Tr_2 F12 / (N-1), Tr F1 = N;
  * the system Hamiltonian is sum_i h1_i + sum_{i<j} v12_ij (each unordered
    pair once), with v12 invariant under particle exchange;
  * global baths couple through L = sum_i L_i, identical local baths attach
    one hierarchy slot group per pair particle (slots of traced-out
    particles decouple and are omitted).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import qlinalg as ql
from .hierarchy import HierarchyLayout


class InstabilityError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConservationError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


@dataclass
class ManyBodyModel:
    n_particles: int
    d: int
    h1: object  # d x d matrix or callable t -> matrix
    v12: object = None  # d^2 x d^2 pair interaction, exchange symmetric
    global_baths: list = field(default_factory=list)  # [(ExponentialBathModel, L1)]
    local_baths: list = field(default_factory=list)  # [(ExponentialBathModel, S)]
    lindblad_local: list = field(default_factory=list)  # [(gamma, C)]
    statistics: str = "sym"
    switch_times: tuple = ()

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least two particles")
        if self.statistics not in ("sym", "fermionic", "bosonic"):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        d = self.d
        h0 = self.h1_at(0.0)
        if h0.shape != (d, d):
            raise ValueError("h1 dimension mismatch")
        if self.v12 is not None:
            self.v12 = np.asarray(self.v12, dtype=np.complex128)
            if self.v12.shape != (d * d, d * d):
                raise ValueError("v12 must act on the pair space")
            swap = ql.permutation_operator(d, [1, 0])
            if np.linalg.norm(swap @ self.v12 @ swap - self.v12) > 1e-10 * max(
                1.0, np.linalg.norm(self.v12)
            ):
                raise ValueError("v12 must be invariant under particle exchange")
        for bm, op in self.global_baths + self.local_baths:
            if np.asarray(op).shape != (d, d):
                raise ValueError("bath coupling operators act on one particle")
        for gamma, c in self.lindblad_local:
            if gamma < 0:
                raise ValueError("dissipator rates must be nonnegative")
            if np.asarray(c).shape != (d, d):
                raise ValueError("jump operators act on one particle")
        if not (self.global_baths or self.local_baths):
            raise ValueError("model needs at least one bath")

    def h1_at(self, t):
        h = self.h1(t) if callable(self.h1) else self.h1
        return np.asarray(h, dtype=np.complex128)

    def pair_hamiltonian(self, t):
        h = self.h1_at(t)
        eye = np.eye(self.d)
        hp = np.kron(h, eye) + np.kron(eye, h)
        if self.v12 is not None:
            hp = hp + self.v12
        return hp


class SlotTable:
    """Flattened hierarchy slots: global bath terms, then per-particle
    copies of each local bath's terms (particle-1 block before particle-2)."""

    GLOBAL, LOCAL_P1, LOCAL_P2 = 0, 1, 2

    def __init__(self, model):
        g, w, kind, op_group = [], [], [], []
        groups = []  # (kind, operator d x d, bath object)
        for bm, l_op in model.global_baths:
            gid = len(groups)
            groups.append((self.GLOBAL, np.asarray(l_op, dtype=np.complex128), bm))
            for gg, ww in bm.terms:
                g.append(gg), w.append(ww), kind.append(self.GLOBAL), op_group.append(gid)
        self.local_blocks = []  # (slot range p1, slot range p2) per local bath
        for bm, s_op in model.local_baths:
            s_op = np.asarray(s_op, dtype=np.complex128)
            gid1 = len(groups)
            groups.append((self.LOCAL_P1, s_op, bm))
            start1 = len(g)
            for gg, ww in bm.terms:
                g.append(gg), w.append(ww), kind.append(self.LOCAL_P1), op_group.append(gid1)
            gid2 = len(groups)
            groups.append((self.LOCAL_P2, s_op, bm))
            start2 = len(g)
            for gg, ww in bm.terms:
                g.append(gg), w.append(ww), kind.append(self.LOCAL_P2), op_group.append(gid2)
            self.local_blocks.append((start1, start2, len(bm.terms)))
        self.g = np.array(g, dtype=np.complex128)
        self.w = np.array(w, dtype=np.complex128)
        self.kind = np.array(kind, dtype=np.int64)
        self.op_group = np.array(op_group, dtype=np.int64)
        self.groups = groups
        self.k = len(g)

    def pair_operator(self, gid, d):
        kind, op, _ = self.groups[gid]
        eye = np.eye(d)
        if kind == self.GLOBAL:
            return np.kron(op, eye) + np.kron(eye, op)
        if kind == self.LOCAL_P1:
            return np.kron(op, eye)
        return np.kron(eye, op)

    def local_masks_and_swap(self, layout):
        """Per-index flags for local-slot excitations and the position of
        the index with the two particle blocks exchanged."""
        k = self.k
        idx = layout.indices  # [n_idx, 2k]
        p1_cols, p2_cols = [], []
        for s1, s2, nterms in self.local_blocks:
            p1_cols += list(range(s1, s1 + nterms)) + list(range(k + s1, k + s1 + nterms))
            p2_cols += list(range(s2, s2 + nterms)) + list(range(k + s2, k + s2 + nterms))
        if not p1_cols:
            n_idx = layout.size
            return (
                np.zeros(n_idx, bool),
                np.zeros(n_idx, bool),
                np.arange(n_idx, dtype=np.int64),
            )
        has1 = idx[:, p1_cols].sum(axis=1) > 0
        has2 = idx[:, p2_cols].sum(axis=1) > 0
        swap = np.empty(layout.size, dtype=np.int64)
        offset = {tuple(t): i for i, t in enumerate(idx)}
        for i, t in enumerate(idx):
            tt = list(t)
            for s1, s2, nterms in self.local_blocks:
                for half in (0, k):
                    a = half + s1
                    b = half + s2
                    tt[a : a + nterms], tt[b : b + nterms] = (
                        tt[b : b + nterms],
                        tt[a : a + nterms],
                    )
            swap[i] = offset[tuple(tt)]
        return has1, has2, swap


@dataclass
class ReducedHierarchyState:
    layout: HierarchyLayout
    f12: np.ndarray  # [n_idx, d^2, d^2]
    n_particles: int

    @property
    def d(self):
        return int(round(np.sqrt(self.f12.shape[1])))

    @property
    def physical(self):
        return self.f12[0]

    def copy(self):
        return ReducedHierarchyState(self.layout, self.f12.copy(), self.n_particles)


@dataclass
class ReconstructionReport:
    time: float
    min_eig_f1: float
    trace_defect: float


def contract_F1(f12, n_particles):
    """F1 = Tr_2 F12 / (N - 1)."""
    d = int(round(np.sqrt(f12.shape[0])))
    return ql.partial_trace(f12, [d, d], keep=[0]) / (n_particles - 1)


def _contract_F2(f12, n_particles):
    d = int(round(np.sqrt(f12.shape[0])))
    return ql.partial_trace(f12, [d, d], keep=[1]) / (n_particles - 1)


def _reconstruct_general(
    f1, f12, f1a, f2a, f3a, f12a, f13a, f23a, tr_a, n_particles
):
    """Three-body reconstruction from one- and two-body data.

    All inputs are matrices on their particle slots; the *a quantities
    carry the hierarchy index, the others are the physical (0,0) data.
    Returns the d^3 matrix before any statistics projection.
    """
    n = n_particles
    d = f1.shape[0]
    space = ql.TensorSpace([d, d, d])
    c1 = 4.0 * (n - 1) * (n - 2) / n**3
    c2 = (n - 2) / n
    c4 = -(n - 2) / n**2
    c5 = -2.0 * (n - 2) * (n - 1) / n**2

    def on(op, slots):
        return ql.embed(op, space, slots)

    out = (c1 * tr_a) * on(np.kron(f1, f1), [0, 1]) @ on(f1, [2])
    # fixed two-body at (0,0) times indexed one-body
    out += c2 * (
        on(f12, [0, 1]) @ on(f3a, [2])
        + on(f2a, [1]) @ on(f12, [0, 2])
        + on(f1a, [0]) @ on(f12, [1, 2])
    )
    # indexed two-body times fixed one-body
    out += c2 * (
        on(f1, [0]) @ on(f23a, [1, 2])
        + on(f13a, [0, 2]) @ on(f1, [1])
        + on(f12a, [0, 1]) @ on(f1, [2])
    )
    out += (c4 * tr_a) * (
        on(f12, [0, 1]) @ on(f1, [2])
        + on(f12, [0, 2]) @ on(f1, [1])
        + on(f1, [0]) @ on(f12, [1, 2])
    )
    out += c5 * (
        on(f1a, [0]) @ on(np.kron(f1, f1), [1, 2])
        + on(f1, [0]) @ on(f2a, [1]) @ on(f1, [2])
        + on(np.kron(f1, f1), [0, 1]) @ on(f3a, [2])
    )
    return out


def reconstruct_F123(f1, f12, f1_aux, f12_aux, n_particles, statistics="sym"):
    """Permutation-symmetric three-body closure (global-bath form).

    For statistics other than 'sym' the result is projected onto the
    (anti)symmetric subspace with the trace restored.
    """
    tr_a = np.trace(f1_aux)
    out = _reconstruct_general(
        f1, f12, f1_aux, f1_aux, f1_aux, f12_aux, f12_aux, f12_aux, tr_a, n_particles
    )
    return _project_statistics(out, f1.shape[0], statistics)


def _project_statistics(f123, d, statistics):
    if statistics == "sym":
        return f123
    proj = (
        ql.antisymmetrizer(d, 3) if statistics == "fermionic" else ql.symmetrizer(d, 3)
    )
    return ql.apply_projector_norm_preserving(proj, f123)


def reconstruction_inputs(state, pos, has_l1, has_l2, swap_idx):
    """Hierarchy-index-resolved inputs of the reconstruction at ``pos``.

    Lookups that leave the retained description (a third particle tagged
    with a pair-local bath excitation) read as zero; the (2,3)-pair object
    is gathered from the local-block-swapped index.
    """
    n = state.n_particles
    d = state.d
    a = state.f12[pos]
    f1a = contract_F1(a, n)
    f2a = _contract_F2(a, n)
    tr_a = np.trace(a) / (n - 1)
    zero1 = np.zeros((d, d), dtype=np.complex128)
    zero2 = np.zeros((d * d, d * d), dtype=np.complex128)
    pure = not (has_l1[pos] or has_l2[pos])
    f3a = f1a if pure else zero1
    f13a = a if not has_l2[pos] else zero2
    f23a = state.f12[swap_idx[pos]] if not has_l1[pos] else zero2
    return f1a, f2a, f3a, a, f13a, f23a, tr_a


def bbgky_rhs(model, state, t):
    """Reference right-hand side (readable, unoptimized).

    The production propagator uses a compiled kernel verified against this
    function; both share the slot conventions of SlotTable.
    """
    layout = state.layout
    slots = SlotTable(model)
    if slots.k != layout.k:
        raise ValueError("state layout does not match the model's bath terms")
    n = model.n_particles
    d = model.d
    dd = d * d
    has1, has2, swap = slots.local_masks_and_swap(layout)
    hp = model.pair_hamiltonian(t)
    f1_fix = contract_F1(state.f12[0], n)
    f12_fix = state.f12[0]
    space3 = ql.TensorSpace([d, d, d])

    def projected_recon(pos):
        f1a, f2a, f3a, f12a, f13a, f23a, tr_a = reconstruction_inputs(
            state, pos, has1, has2, swap
        )
        raw = _reconstruct_general(
            f1_fix, f12_fix, f1a, f2a, f3a, f12a, f13a, f23a, tr_a, n
        )
        return _project_statistics(raw, d, model.statistics)

    def tr3(m):
        return ql.partial_trace(m, space3, keep=[0, 1])

    v_embed = None
    if model.v12 is not None:
        v13 = ql.embed(model.v12, space3, [0, 2])
        v23 = ql.embed(model.v12, space3, [1, 2])
        v_embed = v13 + v23

    out = np.empty_like(state.f12)
    damp = layout.indices[:, : slots.k] @ slots.w + layout.indices[:, slots.k :] @ np.conj(
        slots.w
    )
    recon_cache = {}

    def recon(pos):
        if pos not in recon_cache:
            recon_cache[pos] = projected_recon(pos)
        return recon_cache[pos]

    for i in range(layout.size):
        a = state.f12[i]
        acc = -1j * (hp @ a - a @ hp) - damp[i] * a
        if v_embed is not None:
            q = recon(i)
            acc += -1j * tr3(v_embed @ q - q @ v_embed)
        for gamma, c in model.lindblad_local:
            for cp in (np.kron(c, np.eye(d)), np.kron(np.eye(d), c)):
                cdc = cp.conj().T @ cp
                acc += gamma * (cp @ a @ cp.conj().T - 0.5 * (cdc @ a + a @ cdc))
        nvec, mvec = layout.index(i)
        for k in range(slots.k):
            gid = slots.op_group[k]
            kind, op1, _ = slots.groups[gid]
            op = slots.pair_operator(gid, d)
            g_k = slots.g[k]
            dn = layout.down[k, i]
            if dn >= 0 and nvec[k] > 0:
                acc += g_k * nvec[k] * (op @ state.f12[dn])
                if kind == SlotTable.GLOBAL:
                    l3 = ql.embed(op1, space3, [2])
                    acc += g_k * nvec[k] * tr3(l3 @ recon(dn))
            dm = layout.down[slots.k + k, i]
            if dm >= 0 and mvec[k] > 0:
                acc += np.conj(g_k) * mvec[k] * (state.f12[dm] @ op.conj().T)
                if kind == SlotTable.GLOBAL:
                    l3d = ql.embed(op1.conj().T, space3, [2])
                    acc += np.conj(g_k) * mvec[k] * tr3(l3d @ recon(dm))
            un = layout.up[k, i]
            if un >= 0:
                acc += state.f12[un] @ op.conj().T - op.conj().T @ state.f12[un]
            um = layout.up[slots.k + k, i]
            if um >= 0:
                acc += op @ state.f12[um] - state.f12[um] @ op
        out[i] = acc
    return ReducedHierarchyState(layout, out, n)


# ---------------------------------------------------------------------------
# initial states


def initial_state_factory(kind, model, depth, **params):
    """Build a factorized initial ReducedHierarchyState.

    kinds: 'product' (params: rho), 'fully_excited' (d = 2),
    'slater' (params: orbitals as column matrix or occupied site-orbital
    index list; requires fermionic statistics and N occupied orbitals).
    """
    slots = SlotTable(model)
    layout = HierarchyLayout(slots.k, depth)
    n = model.n_particles
    d = model.d
    if kind == "product":
        rho = np.asarray(params["rho"], dtype=np.complex128)
        if rho.shape != (d, d) or abs(np.trace(rho) - 1) > 1e-10:
            raise ValueError("product state needs a unit-trace d x d matrix")
        f12 = n * (n - 1) * np.kron(rho, rho)
    elif kind == "fully_excited":
        if d != 2:
            raise ValueError("fully_excited is defined for two-level emitters")
        rho = np.zeros((2, 2), dtype=np.complex128)
        rho[0, 0] = 1.0
        f12 = n * (n - 1) * np.kron(rho, rho)
    elif kind == "slater":
        if model.statistics != "fermionic":
            raise ValueError("slater initial states require fermionic statistics")
        orbs = params["orbitals"]
        orbs = np.asarray(orbs)
        if orbs.ndim == 1:  # occupied site-orbital indices
            if len(orbs) != n:
                raise ValueError(
                    f"occupation list has {len(orbs)} entries for N = {n}"
                )
            cols = np.zeros((d, n), dtype=np.complex128)
            for j, o in enumerate(orbs):
                cols[int(o), j] = 1.0
            orbs = cols
        orbs = orbs.astype(np.complex128)
        if orbs.shape != (d, n):
            raise ValueError("orbital matrix must be d x N")
        overlap = orbs.conj().T @ orbs
        if np.linalg.norm(overlap - np.eye(n)) > 1e-8:
            raise ValueError("orbitals must be orthonormal")
        f12 = np.zeros((d * d, d * d), dtype=np.complex128)
        for p in range(n):
            pp = np.outer(orbs[:, p], orbs[:, p].conj())
            for q in range(n):
                if p == q:
                    continue
                qq = np.outer(orbs[:, q], orbs[:, q].conj())
                pq = np.outer(orbs[:, p], orbs[:, q].conj())
                f12 += np.kron(pp, qq) - np.kron(pq, pq.conj().T)
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    mats = np.zeros((layout.size, d * d, d * d), dtype=np.complex128)
    mats[0] = f12
    return ReducedHierarchyState(layout, mats, n)


# ---------------------------------------------------------------------------
# production propagation


def _perm_signs(statistics):
    import itertools

    perms = list(itertools.permutations(range(3)))
    signs = [
        ql._perm_sign(list(p)) if statistics == "fermionic" else 1.0 for p in perms
    ]
    return np.array(perms, dtype=np.int64), np.array(signs, dtype=np.float64)


class ReducedPropagator:
    """Precomputed tables and the vectorized right-hand side.

    The slot-shift (linear) part is evaluated with batched numpy; the
    reconstruction contractions run in the compiled kernel.  Models mixing
    local baths with fermionic/bosonic statistics fall back to the
    reference implementation (no such model family is used here).
    """

    def __init__(self, model, depth, assume_pairing=True):
        from . import _bbgky_kernels

        self.model = model
        self.slots = SlotTable(model)
        self.layout = HierarchyLayout(self.slots.k, depth)
        self.kernel = _bbgky_kernels.recon_contractions
        n = model.n_particles
        d = model.d
        self.d = d
        self.dd = d * d
        k = self.slots.k
        lay = self.layout
        idx = lay.indices

        self.fast_ok = model.statistics == "sym" or not model.local_baths
        self.damp = idx[:, :k] @ self.slots.w + idx[:, k:] @ np.conj(self.slots.w)
        has1, has2, swap = self.slots.local_masks_and_swap(lay)
        self.mask3 = (~(has1 | has2)).astype(np.uint8)
        self.mask13 = (~has2).astype(np.uint8)
        self.mask23 = (~has1).astype(np.uint8)
        self.swap_idx = swap
        self.want_l = (lay.totals <= max(lay.depth - 1, 0)).astype(np.uint8)
        # conjugation-pairing shortcut: evaluate the reconstruction only at
        # canonical indices and fill (n,m) <-> (m,n) partners by daggering
        self.assume_pairing = bool(assume_pairing)
        if self.assume_pairing and model.v12 is not None:
            if np.linalg.norm(model.v12 - model.v12.conj().T) > 1e-12 * max(
                1.0, np.linalg.norm(model.v12)
            ):
                self.assume_pairing = False
        order = np.arange(lay.size)
        if self.assume_pairing:
            self.canon = (order <= lay.conj_partner).astype(np.uint8)
            self.noncanon = order[order > lay.conj_partner]
            self.kernel_want = (
                self.want_l | self.want_l[lay.conj_partner]
            ).astype(np.uint8)
        else:
            self.canon = np.ones(lay.size, dtype=np.uint8)
            self.noncanon = order[:0]
            self.kernel_want = self.want_l

        # operator groups with gather tables: missing neighbors index the
        # padded zero row (position n_idx)
        self.groups = []
        gb_count = 0
        for gid, (kind, op1, _) in enumerate(self.slots.groups):
            cols = np.where(self.slots.op_group == gid)[0]
            pair_op = self.slots.pair_operator(gid, d)
            dn = np.where(lay.down[cols] < 0, lay.size, lay.down[cols])
            dm = np.where(lay.down[k + cols] < 0, lay.size, lay.down[k + cols])
            un = np.where(lay.up[cols] < 0, lay.size, lay.up[cols])
            um = np.where(lay.up[k + cols] < 0, lay.size, lay.up[k + cols])
            coefdn = self.slots.g[cols][:, None] * idx[:, cols].T
            coefdm = np.conj(self.slots.g[cols])[:, None] * idx[:, k + cols].T
            bath_no = gb_count if kind == SlotTable.GLOBAL else -1
            if kind == SlotTable.GLOBAL:
                gb_count += 1
            self.groups.append(
                dict(
                    kind=kind,
                    op=pair_op,
                    opd=pair_op.conj().T,
                    dn=dn,
                    dm=dm,
                    un=un,
                    um=um,
                    coefdn=coefdn.astype(np.complex128),
                    coefdm=coefdm.astype(np.complex128),
                    bath_no=bath_no,
                )
            )
        self.n_gb = gb_count
        if gb_count:
            self.l_ops = np.stack(
                [
                    op
                    for kind, op, _ in self.slots.groups
                    if kind == SlotTable.GLOBAL
                ]
            )
            self.ld_ops = np.conj(np.transpose(self.l_ops, (0, 2, 1))).copy()
        else:
            self.l_ops = np.zeros((0, d, d), dtype=np.complex128)
            self.ld_ops = self.l_ops

        if model.v12 is None:
            self.use_v = 0
            self.vd = np.zeros((d, d), dtype=np.complex128)
            self.v4 = np.zeros((d, d, d, d), dtype=np.complex128)
        else:
            v = model.v12
            diag = np.diag(np.diag(v))
            if np.linalg.norm(v - diag) < 1e-14 * max(1.0, np.linalg.norm(v)):
                self.use_v = 1
                self.vd = np.ascontiguousarray(np.diag(v).reshape(d, d))
                self.v4 = np.zeros((d, d, d, d), dtype=np.complex128)
            else:
                self.use_v = 2
                self.vd = np.zeros((d, d), dtype=np.complex128)
                self.v4 = np.ascontiguousarray(v.reshape(d, d, d, d))
        self.need_recon = self.use_v > 0 or self.n_gb > 0

        self.stat = {"sym": 0, "fermionic": 1, "bosonic": 2}[model.statistics]
        perms, signs = _perm_signs(model.statistics)
        if self.stat == 0:
            perms, signs = perms[:1], signs[:1]
        # precomputed permuted-column offsets for the projector application
        d3 = d**3
        cols = np.arange(d3)
        j = np.stack([cols // (d * d), (cols // d) % d, cols % d])
        self.colperm = np.empty((len(perms), d3), dtype=np.int64)
        for p, perm in enumerate(perms):
            self.colperm[p] = (j[perm[0]] * d + j[perm[1]]) * d + j[perm[2]]
        self.signs = signs

        import numba

        n_threads = numba.get_num_threads()
        self.ws_buf = np.zeros((n_threads, d3, d3), dtype=np.complex128)
        self.ws_q = np.zeros(
            (n_threads if self.stat else 1, d3, d3), dtype=np.complex128
        )
        n_idx = self.layout.size
        self.cv = np.zeros((n_idx, self.dd, self.dd), dtype=np.complex128)
        self.cl = np.zeros((self.n_gb, n_idx, self.dd, self.dd), dtype=np.complex128)
        self.cld = np.zeros_like(self.cl)

        eye = np.eye(d)
        self.lind_pairs = []
        for gamma, c in model.lindblad_local:
            for cp in (np.kron(c, eye), np.kron(eye, c)):
                self.lind_pairs.append(
                    (gamma, cp, cp.conj().T, cp.conj().T @ cp)
                )
        nn = model.n_particles
        self.c1 = 4.0 * (nn - 1) * (nn - 2) / nn**3
        self.c2 = (nn - 2) / nn
        self.c4 = -(nn - 2) / nn**2
        self.c5 = -2.0 * (nn - 2) * (nn - 1) / nn**2
        self._pad = np.zeros((1, self.dd, self.dd), dtype=np.complex128)

    def contraction_pieces(self, a_stack):
        """Batched F1/F2 contractions of all hierarchy matrices."""
        n = self.model.n_particles
        d = self.d
        view = a_stack.reshape(-1, d, d, d, d)
        f1a = np.einsum("naxbx->nab", view) / (n - 1)
        f2a = np.einsum("nxaxb->nab", view) / (n - 1)
        tr_a = np.einsum("nabab->n", view) / (n - 1)
        return np.ascontiguousarray(f1a), np.ascontiguousarray(f2a), tr_a

    def make_rhs(self, hp):
        """Right-hand side closure for a (segment-)constant Hamiltonian."""
        if not self.fast_ok:
            model, layout, n = self.model, self.layout, self.model.n_particles

            def slow_rhs(t, flat):
                st = ReducedHierarchyState(
                    layout, flat.reshape(layout.size, self.dd, self.dd), n
                )
                return bbgky_rhs(model, st, t).f12.reshape(-1)

            return slow_rhs

        n_idx = self.layout.size
        dd = self.dd
        d = self.d

        def rhs(t, flat):
            a = flat.reshape(n_idx, dd, dd)
            out = -1j * (hp @ a - a @ hp)
            out -= self.damp[:, None, None] * a
            for gamma, cp, cpd, cdc in self.lind_pairs:
                out += gamma * (cp @ a @ cpd) - (0.5 * gamma) * (cdc @ a + a @ cdc)

            if self.need_recon:
                f1a, f2a, tr_a = self.contraction_pieces(a)
                f1f = f1a[0]
                tb = self.c2 * a[0] + self.c5 * np.kron(f1f, f1f)
                cv, cl, cld = self.cv, self.cl, self.cld
                self.kernel(
                    a,
                    f1a,
                    f2a,
                    tr_a,
                    self.mask3,
                    self.mask13,
                    self.mask23,
                    self.swap_idx,
                    self.canon,
                    tb,
                    f1f,
                    self.c1,
                    self.c2,
                    self.c4,
                    self.stat,
                    self.colperm,
                    self.signs,
                    self.l_ops,
                    self.ld_ops,
                    self.kernel_want,
                    self.vd,
                    self.v4,
                    self.use_v,
                    self.ws_buf,
                    self.ws_q,
                    cv,
                    cl,
                    cld,
                )
                if len(self.noncanon):
                    nc = self.noncanon
                    pt = self.layout.conj_partner[nc]
                    if self.use_v:
                        cv[nc] = -np.conj(np.swapaxes(cv[pt], -1, -2))
                    if self.n_gb:
                        cl_c = cl[:, pt].copy()
                        cl[:, nc] = np.conj(np.swapaxes(cld[:, pt], -1, -2))
                        cld[:, nc] = np.conj(np.swapaxes(cl_c, -1, -2))
                if self.use_v:
                    out += -1j * cv

            a_pad = np.concatenate([a, self._pad])
            for grp in self.groups:
                acc = (grp["coefdn"][:, :, None, None] * a_pad[grp["dn"]]).sum(0)
                out += grp["op"] @ acc
                acc = (grp["coefdm"][:, :, None, None] * a_pad[grp["dm"]]).sum(0)
                out += acc @ grp["opd"]
                acc = a_pad[grp["un"]].sum(0)
                out += acc @ grp["opd"] - grp["opd"] @ acc
                acc = a_pad[grp["um"]].sum(0)
                out += grp["op"] @ acc - acc @ grp["op"]
                if grp["kind"] == SlotTable.GLOBAL and self.need_recon:
                    b = grp["bath_no"]
                    cl_pad = np.concatenate([cl[b], self._pad])
                    out += (grp["coefdn"][:, :, None, None] * cl_pad[grp["dn"]]).sum(0)
                    cld_pad = np.concatenate([cld[b], self._pad])
                    out += (grp["coefdm"][:, :, None, None] * cld_pad[grp["dm"]]).sum(0)
            return out.reshape(-1)

        return rhs


def reconstruction_report(state, t, statistics="sym"):
    """Per-sample diagnostics: min eigenvalue of F1 and the three-body
    contraction defect ||Tr_3 F123 - (N-2) F12||_F at the physical index."""
    n = state.n_particles
    d = state.d
    f12 = state.physical
    f1 = contract_F1(f12, n)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (f1 + f1.conj().T))))
    f123 = reconstruct_F123(f1, f12, f1, f12, n, statistics=statistics)
    tr3 = ql.partial_trace(f123, [d, d, d], keep=[0, 1])
    defect = float(np.linalg.norm(tr3 - (n - 2) * f12))
    return ReconstructionReport(time=t, min_eig_f1=min_eig, trace_defect=defect)


def propagate_reduced(
    model,
    initial,
    t_span,
    sample_times,
    atol=1e-10,
    rtol=1e-8,
    eig_floor=None,
    check=True,
    collect_reports=True,
    trace_tol=1e-6,
    herm_tol=1e-8,
):
    """Propagate a ReducedHierarchyState, returning (snapshots, reports).

    Per-sample invariants (relative trace conservation, Hermiticity of the
    physical matrix) raise on violation when ``check``.  ``eig_floor``
    (e.g. -0.05 * N) aborts with InstabilityError once min eig F1 drops
    below it, reflecting the known low-rank failure mode of the closure.
    """
    from .propagator import OdeProblem, integrate

    prop = ReducedPropagator(model, initial.layout.depth)
    if prop.layout.size != initial.layout.size:
        raise ValueError("initial state layout does not match the model")
    n = model.n_particles
    norm = n * (n - 1)
    t0, t1 = t_span
    sample_times = np.asarray(sample_times, dtype=float)
    eps = 1e-12 * max(1.0, abs(t1 - t0))
    edges = [t0] + sorted(
        t for t in model.switch_times if t0 + eps < t < t1 - eps
    ) + [t1]

    snapshots, reports = [], []

    def handle_sample(t, yvec):
        mats = yvec.reshape(initial.f12.shape).copy()
        st = ReducedHierarchyState(initial.layout, mats, n)
        if check:
            tr_err = abs(np.trace(st.physical) - norm) / norm
            if tr_err > trace_tol:
                raise ConservationError(
                    f"relative trace defect {tr_err:.3e} at t = {t}", t
                )
            herm = np.linalg.norm(st.physical - st.physical.conj().T)
            if herm > herm_tol * max(1.0, norm * 1e-3):
                raise ConservationError(f"hermiticity defect {herm:.3e} at t = {t}", t)
        rep = None
        if collect_reports or eig_floor is not None:
            rep = reconstruction_report(st, t, model.statistics)
            if eig_floor is not None and rep.min_eig_f1 < eig_floor:
                raise InstabilityError(
                    f"min eig F1 = {rep.min_eig_f1:.4f} below floor "
                    f"{eig_floor} at t = {t}",
                    t=t,
                )
        snapshots.append(st)
        if rep is not None:
            reports.append(rep)

    y = initial.f12.reshape(-1).copy()
    recorded = -np.inf
    for seg_start, seg_end in zip(edges[:-1], edges[1:]):
        hp = model.pair_hamiltonian(0.5 * (seg_start + seg_end))
        rhs = prop.make_rhs(hp)
        in_seg = sample_times[
            (sample_times > recorded + eps) & (sample_times <= seg_end + eps)
        ]
        need_end = len(in_seg) == 0 or in_seg[-1] < seg_end - eps
        req = np.append(in_seg, seg_end) if need_end else in_seg
        problem = OdeProblem(
            rhs=rhs,
            t_span=(seg_start, seg_end),
            y0=y,
            abs_tol=atol,
            rel_tol=rtol,
            sample_times=np.clip(req, seg_start, seg_end),
        )
        marks = set(np.round(in_seg, 12))

        def cb(t, yv):
            if np.round(t, 12) in marks:
                handle_sample(t, yv)
            return None

        traj = integrate(problem, sample_callback=cb)
        if len(in_seg):
            recorded = in_seg[-1]
        y = traj.states[-1]
    return snapshots, reports


# ---------------------------------------------------------------------------
# raw-state binary dump

_MAGIC = b"BBH1"


def save_state(state, path, d=None):
    d = state.d
    lay = state.layout
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIQII Q",
                1,  # version
                d,
                state.n_particles,
                lay.k,
                lay.depth,
                lay.size,
            )
        )
        lay.indices.astype("<i8").tofile(fh)
        state.f12.astype("<c16").tofile(fh)


def load_state(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a hierarchy state dump")
        version, d, n, k, depth, size = struct.unpack("<IIQII Q", fh.read(32))
        if version != 1:
            raise ValueError(f"unsupported dump version {version}")
        lay = HierarchyLayout(k, depth)
        idx = np.fromfile(fh, dtype="<i8", count=size * 2 * k).reshape(size, 2 * k)
        if not np.array_equal(idx, lay.indices):
            raise ValueError("stored index list does not match the layout")
        f12 = np.fromfile(fh, dtype="<c16", count=size * d**4).reshape(
            size, d * d, d * d
        )
    return ReducedHierarchyState(lay, f12, int(n))
