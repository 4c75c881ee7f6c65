"""Compiled inner loops of the reduced-hierarchy right-hand side.

Everything here is index bookkeeping plus dense small-tensor arithmetic on
one hierarchy index at a time; the readable reference lives in bbgky.py and
the test suite pins the two against each other.  Workspaces are allocated
once by the caller and reused across evaluations.
"""

import numpy as np
from numba import get_thread_id, njit, prange


@njit(cache=True, fastmath=True, parallel=True)
def recon_contractions(
    a_stack,  # [n_idx, D, D]
    f1a,  # [n_idx, d, d]   Tr_2 A / (N-1)
    f2a,  # [n_idx, d, d]   Tr_1 A / (N-1)
    tr_a,  # [n_idx]
    mask3,  # [n_idx] uint8
    mask13,  # [n_idx] uint8
    mask23,  # [n_idx] uint8
    swap_idx,  # [n_idx]
    canon,  # [n_idx] uint8: evaluate here (pairing fill handles the rest)
    tb,  # [D, D] fixed two-slot tensor (c2 F12 + c5 F1xF1)
    f1f,  # [d, d] fixed F1
    c1,
    c2,
    c4,
    stat,  # 0 sym, 1 fermionic, 2 bosonic
    colperm,  # [n_perm, D3] permuted column offsets
    signs,  # [n_perm]
    l_ops,  # [n_gb, d, d]
    ld_ops,  # [n_gb, d, d]
    want_l,  # [n_idx] uint8
    vd,  # [d, d] diagonal interaction weights
    v4,  # [d, d, d, d] full interaction (row1, row3, col1, col3)
    use_v,  # 0 none, 1 diagonal, 2 full
    ws_buf,  # [n_threads, D3, D3] workspace
    ws_q,  # [n_threads, D3, D3] workspace
    cv,  # [n_idx, D, D] output
    cl,  # [n_gb, n_idx, D, D] output
    cld,  # [n_gb, n_idx, D, D] output
):
    n_idx, dd, _ = a_stack.shape
    d = f1f.shape[0]
    d3 = d * dd
    n_gb = l_ops.shape[0]
    n_perm = colperm.shape[0]
    f12f = a_stack[0]

    for i in prange(n_idx):
        if canon[i] == 0 or (use_v == 0 and want_l[i] == 0):
            continue
        tid = get_thread_id()
        buf = ws_buf[tid]
        ta = tr_a[i]
        m3 = 1.0 if mask3[i] else 0.0
        c2_13 = c2 if mask13[i] else 0.0
        c2_23 = c2 if mask23[i] else 0.0
        a_i = a_stack[i]
        a_sw = a_stack[swap_idx[i]]
        f1a_i = f1a[i]
        f2a_i = f2a[i]
        tac1 = ta * c1
        tac4 = ta * c4
        for a1 in range(d):
            for a2 in range(d):
                r12 = a1 * d + a2
                for a3 in range(d):
                    r = r12 * d + a3
                    r13 = a1 * d + a3
                    r23 = a2 * d + a3
                    for b1 in range(d):
                        f11 = f1f[a1, b1]
                        fa11 = f1a_i[a1, b1]
                        for b2 in range(d):
                            c12 = b1 * d + b2
                            f22 = f1f[a2, b2]
                            # coefficient of F1[a3, b3] in this column block
                            coef3 = (
                                tac1 * f11 * f22
                                + tac4 * f12f[r12, c12]
                                + c2 * a_i[r12, c12]
                            )
                            t_b = m3 * tb[r12, c12]
                            co_tb13 = f2a_i[a2, b2]
                            co_f1213 = tac4 * f22
                            co_a13 = c2_13 * f22
                            co_f1223 = tac4 * f11
                            co_a23 = c2_23 * f11
                            c13b = b1 * d
                            c23b = b2 * d
                            base = c12 * d
                            for b3 in range(d):
                                c13 = c13b + b3
                                c23 = c23b + b3
                                val = coef3 * f1f[a3, b3] + t_b * f1a_i[a3, b3]
                                val += (
                                    co_tb13 * tb[r13, c13]
                                    + co_f1213 * f12f[r13, c13]
                                    + co_a13 * a_i[r13, c13]
                                )
                                val += (
                                    fa11 * tb[r23, c23]
                                    + co_f1223 * f12f[r23, c23]
                                    + co_a23 * a_sw[r23, c23]
                                )
                                buf[r, base + b3] = val

        if stat == 0:
            q = buf
            fac = 1.0 + 0.0j
        else:
            q = ws_q[tid]
            inv = 1.0 / n_perm
            for r in range(d3):
                row = buf[r]
                for c in range(d3):
                    acc = signs[0] * row[colperm[0, c]]
                    for p in range(1, n_perm):
                        acc += signs[p] * row[colperm[p, c]]
                    q[r, c] = acc
            tr_in = 0.0 + 0.0j
            tr_out = 0.0 + 0.0j
            fro = 0.0
            for r in range(d3):
                tr_in += buf[r, r]
                tr_out += q[r, r]
                for c in range(d3):
                    fro += q[r, c].real ** 2 + q[r, c].imag ** 2
            tr_out *= inv
            fro = np.sqrt(fro) * inv
            scale = max(fro, abs(tr_in), 1e-300)
            if abs(tr_out) > 1e-12 * scale:
                fac = inv * tr_in / tr_out
            elif abs(tr_in) <= 1e-12 * scale:
                fac = inv * (1.0 + 0.0j)
            else:
                fac = 0.0 + 0.0j

        if use_v == 1:
            for a1 in range(d):
                for a2 in range(d):
                    r12 = a1 * d + a2
                    for b1 in range(d):
                        for b2 in range(d):
                            c12 = b1 * d + b2
                            acc = 0.0 + 0.0j
                            for a3 in range(d):
                                wgt = (
                                    vd[a1, a3]
                                    + vd[a2, a3]
                                    - vd[b1, a3]
                                    - vd[b2, a3]
                                )
                                acc += wgt * q[r12 * d + a3, c12 * d + a3]
                            cv[i, r12, c12] = fac * acc
        elif use_v == 2:
            for a1 in range(d):
                for a2 in range(d):
                    r12 = a1 * d + a2
                    for b1 in range(d):
                        for b2 in range(d):
                            c12 = b1 * d + b2
                            acc = 0.0 + 0.0j
                            for a3 in range(d):
                                for x in range(d):
                                    for z in range(d):
                                        acc += (
                                            v4[a1, a3, x, z]
                                            * q[(x * d + a2) * d + z, c12 * d + a3]
                                        )
                                        acc -= (
                                            q[r12 * d + a3, (x * d + b2) * d + z]
                                            * v4[x, z, b1, a3]
                                        )
                                        acc += (
                                            v4[a2, a3, x, z]
                                            * q[(a1 * d + x) * d + z, c12 * d + a3]
                                        )
                                        acc -= (
                                            q[r12 * d + a3, (b1 * d + x) * d + z]
                                            * v4[x, z, b2, a3]
                                        )
                            cv[i, r12, c12] = fac * acc

        if want_l[i]:
            for b in range(n_gb):
                for a1 in range(d):
                    for a2 in range(d):
                        r12 = a1 * d + a2
                        for b1 in range(d):
                            for b2 in range(d):
                                c12 = b1 * d + b2
                                accl = 0.0 + 0.0j
                                accld = 0.0 + 0.0j
                                for x in range(d):
                                    base_c = c12 * d + x
                                    for y in range(d):
                                        qv = q[r12 * d + y, base_c]
                                        accl += l_ops[b, x, y] * qv
                                        accld += ld_ops[b, x, y] * qv
                                cl[b, i, r12, c12] = fac * accl
                                cld[b, i, r12, c12] = fac * accld
