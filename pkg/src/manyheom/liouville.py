"""Sparse superoperator assembly for master equations.

Row-major vectorization: vec(A rho B) = (A kron B^T) vec(rho).  Used by the
full hierarchy solver and by the explicit-cavity Lindblad oracles.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .propagator import OdeProblem, integrate


def _sparse(a):
    return sp.csr_matrix(a)


def spre(a):
    n = a.shape[0]
    return sp.kron(_sparse(a), sp.identity(n, format="csr"), format="csr")


def spost(a):
    n = a.shape[0]
    return sp.kron(sp.identity(n, format="csr"), _sparse(a).T, format="csr")


def hamiltonian_superop(h):
    return -1j * (spre(h) - spost(h))


def dissipator_superop(rate, c):
    """rate * (C rho C^dag - {C^dag C, rho} / 2) as a sparse superoperator."""
    cdc = c.conj().T @ c
    return rate * (
        sp.kron(_sparse(c), _sparse(c.conj()), format="csr")
        - 0.5 * (spre(cdc) + spost(cdc))
    )


def liouvillian(h, collapse=()):
    """-i[H, .] plus Lindblad dissipators, sparse."""
    g = hamiltonian_superop(h)
    for rate, c in collapse:
        if rate < 0:
            raise ValueError("dissipator rates must be nonnegative")
        if rate > 0:
            g = g + dissipator_superop(rate, c)
    return g.tocsr()


def propagate_master(
    h,
    collapse,
    rho0,
    t_span,
    sample_times,
    atol=1e-10,
    rtol=1e-8,
    sample_map=None,
    switch_times=(),
):
    """Integrate rho' = L rho with a (piecewise-constant) Hamiltonian.

    ``h`` is a matrix or a callable t -> matrix that is constant between
    consecutive ``switch_times``.  Returns (sample_times, results) where
    results are density matrices, or the outputs of ``sample_map(t, rho)``
    when given (use it to avoid storing many large matrices).
    """
    t0, t1 = t_span
    sample_times = np.asarray(sample_times, dtype=float)
    dim = np.asarray(rho0).shape[0]
    eps = 1e-12 * max(1.0, abs(t1 - t0))
    edges = [t0] + sorted(t for t in switch_times if t0 + eps < t < t1 - eps) + [t1]

    results = []
    y = np.asarray(rho0, dtype=np.complex128).reshape(-1)

    def record(t, yvec):
        rho = yvec.reshape(dim, dim)
        results.append(sample_map(t, rho) if sample_map is not None else rho.copy())

    recorded_up_to = -np.inf
    for seg_start, seg_end in zip(edges[:-1], edges[1:]):
        h_seg = h(0.5 * (seg_start + seg_end)) if callable(h) else h
        gen = liouvillian(h_seg, collapse)
        rhs = lambda t, v, g=gen: g @ v
        in_seg = sample_times[
            (sample_times > recorded_up_to + eps) & (sample_times <= seg_end + eps)
        ]
        # always integrate to the segment end so the next segment starts there
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
            record(t, yv)
        if len(in_seg):
            recorded_up_to = in_seg[-1]
        y = traj.states[-1]
    return sample_times, results


def expect(op, rho):
    return complex(np.trace(op @ rho))
