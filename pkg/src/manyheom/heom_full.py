"""Full hierarchical propagation of the system density matrix.

Numerically exact for harmonic environments with exponential correlation
functions: the physical density matrix rho^(0,0) is coupled to auxiliary
matrices rho^(n,m) indexed by per-exponential excitation counts.  Each
auxiliary obeys

    d/dt rho^(n,m) = -i [H, rho^(n,m)] - (w.n + w*.m) rho^(n,m)
        + sum_j ( G_j n_j L_j rho^(n-e_j,m) + G_j* m_j rho^(n,m-e_j) L_j^dag
                  + [rho^(n+e_j,m), L_j^dag] + [L_j, rho^(n,m+e_j)] )

with out-of-cap neighbors read as zero, plus any Markovian dissipators
applied uniformly across the hierarchy.  The coupling operators need not be
Hermitian.  Serves as the small-system oracle for the reduced solver and as
the bath-observable extractor: Tr rho^(e_j,e_j) = <B_j^dag B_j>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import liouville as lv
from .hierarchy import HierarchyLayout
from .propagator import OdeProblem, integrate


class NumericalError(RuntimeError):
    pass


@dataclass
class HeomModel:
    h_sys: object  # matrix, or callable t -> matrix with piecewise-constant switches
    baths: list  # [(ExponentialBathModel, L)]
    lindblad: list = field(default_factory=list)  # [(gamma, C)]
    switch_times: tuple = ()

    def __post_init__(self):
        h0 = self.hamiltonian(0.0)
        self.dim = h0.shape[0]
        for _, l_op in self.baths:
            if l_op.shape != (self.dim, self.dim):
                raise ValueError("bath coupling operator dimension mismatch")
        for gamma, c in self.lindblad:
            if gamma < 0:
                raise ValueError("Lindblad rates must be nonnegative")
            if c.shape != (self.dim, self.dim):
                raise ValueError("jump operator dimension mismatch")
        # flatten exponential terms into hierarchy slots
        self.slot_g = []
        self.slot_w = []
        self.slot_bath = []
        for b, (bm, _) in enumerate(self.baths):
            for g, w in bm.terms:
                self.slot_g.append(g)
                self.slot_w.append(w)
                self.slot_bath.append(b)
        self.n_slots = len(self.slot_g)
        if self.n_slots == 0:
            raise ValueError("model needs at least one bath exponential term")

    def hamiltonian(self, t):
        h = self.h_sys(t) if callable(self.h_sys) else self.h_sys
        return np.asarray(h, dtype=np.complex128)


@dataclass
class HeomState:
    layout: HierarchyLayout
    matrices: np.ndarray  # [n_idx, dim, dim]

    @property
    def physical(self):
        return self.matrices[0]

    def ado(self, n, m):
        return self.matrices[self.layout.offset(n, m)]


def build_layout(model, depth):
    return HierarchyLayout(model.n_slots, depth)


def build_generator(model, layout, t=0.0):
    """Sparse generator of the stacked hierarchy for the Hamiltonian at t."""
    dim = model.dim
    k = layout.k
    h = model.hamiltonian(t)
    base = lv.liouvillian(h, model.lindblad)
    eye_s = sp.identity(dim * dim, format="csr")

    g_vec = np.array(model.slot_g)
    w_vec = np.array(model.slot_w)
    pre_l = [lv.spre(l_op) for _, l_op in model.baths]
    post_ld = [lv.spost(l_op.conj().T) for _, l_op in model.baths]
    up_n_block = [post_ld[b] - lv.spre(model.baths[b][1].conj().T) for b in range(len(model.baths))]
    up_m_block = [pre_l[b] - lv.spost(model.baths[b][1]) for b in range(len(model.baths))]

    blocks = {}

    def add(i, j, mat):
        if (i, j) in blocks:
            blocks[(i, j)] = blocks[(i, j)] + mat
        else:
            blocks[(i, j)] = mat.copy()

    for i in range(layout.size):
        n, m = layout.index(i)
        damp = -(np.dot(w_vec, n) + np.dot(np.conj(w_vec), m))
        add(i, i, base + damp * eye_s)
        for j in range(k):
            b = model.slot_bath[j]
            dn = layout.down[j, i]
            if dn >= 0:
                add(i, dn, (g_vec[j] * n[j]) * pre_l[b])
            dm = layout.down[k + j, i]
            if dm >= 0:
                add(i, dm, (np.conj(g_vec[j]) * m[j]) * post_ld[b])
            un = layout.up[j, i]
            if un >= 0:
                add(i, un, up_n_block[b])
            um = layout.up[k + j, i]
            if um >= 0:
                add(i, um, up_m_block[b])

    grid = [[blocks.get((i, j)) for j in range(layout.size)] for i in range(layout.size)]
    return sp.bmat(grid, format="csr")


def heom_rhs(model, state, t):
    """Derivative of a HeomState; convenience wrapper over the generator."""
    gen = build_generator(model, state.layout, t)
    flat = state.matrices.reshape(-1)
    out = gen @ flat
    return HeomState(state.layout, out.reshape(state.matrices.shape))


def initial_state(model, rho0, layout):
    rho0 = np.asarray(rho0, dtype=np.complex128)
    tr = np.trace(rho0)
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"initial state must have unit trace, got {tr}")
    mats = np.zeros((layout.size, model.dim, model.dim), dtype=np.complex128)
    mats[0] = rho0
    return HeomState(layout, mats)


def propagate(
    model,
    rho0,
    t_span,
    sample_times,
    depth,
    atol=1e-10,
    rtol=1e-8,
    check_tolerances=(1e-9, 1e-8),
):
    """Hierarchy propagation from a factorized initial state.

    Returns a list of HeomState snapshots at the sample times.  Trace and
    Hermiticity of the physical matrix are checked at every sample
    (tolerances ``check_tolerances``); violations raise NumericalError.
    """
    layout = build_layout(model, depth)
    state0 = initial_state(model, rho0, layout)
    t0, t1 = t_span
    sample_times = np.asarray(sample_times, dtype=float)
    eps = 1e-12 * max(1.0, abs(t1 - t0))
    edges = [t0] + sorted(
        t for t in model.switch_times if t0 + eps < t < t1 - eps
    ) + [t1]

    trace_tol, herm_tol = check_tolerances
    snapshots = []
    y = state0.matrices.reshape(-1)
    recorded = -np.inf
    shape = state0.matrices.shape
    for seg_start, seg_end in zip(edges[:-1], edges[1:]):
        gen = build_generator(model, layout, 0.5 * (seg_start + seg_end))
        rhs = lambda t, v, g=gen: g @ v
        in_seg = sample_times[(sample_times > recorded + eps) & (sample_times <= seg_end + eps)]
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
        traj = integrate(problem)
        for t, yv in zip(traj.times[: len(in_seg)], traj.states[: len(in_seg)]):
            mats = yv.reshape(shape)
            rho = mats[0]
            tr_err = abs(np.trace(rho) - 1.0)
            if tr_err > trace_tol:
                raise NumericalError(f"trace defect {tr_err:.2e} at t = {t}")
            herm = np.linalg.norm(rho - rho.conj().T)
            if herm > herm_tol:
                raise NumericalError(f"hermiticity defect {herm:.2e} at t = {t}")
            snapshots.append(HeomState(layout, mats.copy()))
        if len(in_seg):
            recorded = in_seg[-1]
        y = traj.states[-1]
    return snapshots


def bath_observable_trace(state, slot):
    """Trace of the (e_j, e_j) auxiliary; equals <B_j^dag B_j>.

    For a single-mode bath with G = g^2 the caller divides by G to obtain
    the photon number.
    """
    k = state.layout.k
    n = np.zeros(k, dtype=int)
    n[slot] = 1
    try:
        pos = state.layout.offset(n, n)
    except KeyError:
        raise ValueError("hierarchy depth < 2: auxiliary (e_j, e_j) not present")
    return complex(np.trace(state.matrices[pos]))
