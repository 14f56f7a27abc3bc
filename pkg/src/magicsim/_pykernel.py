"""Pure-Python nodal solver and event-driven stepping loop.

Mirrors ``_kernel.pyx`` line for line; used when the compiled extension is
unavailable or ``MAGICSIM_PURE=1`` is set.

Node numbering: SL ``i`` is node ``i``, BL ``j`` is node ``n_rows + j``.
Branch ``i * n_cols + j`` joins BL ``j`` to SL ``i``; positive current
flows BL -> SL (TE above BE, the SET direction).
"""
import math

import numpy as np

SET = 1
RESET = 2
CLAMP_TOL = 1e-12  # relative overshoot before a branch counts as over compliance


def solve(n_rows, n_cols, fixed, vfix, gate, imax, res, r_on, swap, swap_r, v_out, i_out, dv_out):
    n = n_rows + n_cols
    nb = n_rows * n_cols
    clamped = np.zeros(nb, dtype=bool)
    isrc = np.zeros(nb)
    on = [j for j in range(n_cols) if gate[j]]
    branches = [(i * n_cols + j, i, n_rows + j) for j in on for i in range(n_rows)]
    g = {}
    for b, _, _ in branches:
        r = swap_r if b == swap else res[b]
        g[b] = 1.0 / (r + r_on)

    for _ in range(nb + 1):
        # floating nodes reachable from a fixed node through conductances
        reach = [bool(fixed[k]) for k in range(n)]
        changed = True
        while changed:
            changed = False
            for b, sl, bl in branches:
                if not clamped[b] and reach[sl] != reach[bl]:
                    reach[sl] = reach[bl] = True
                    changed = True
        idx = {}
        for k in range(n):
            if reach[k] and not fixed[k]:
                idx[k] = len(idx)
        m = len(idx)
        A = np.zeros((m, m))
        rhs = np.zeros(m)
        for b, sl, bl in branches:
            if clamped[b]:
                if bl in idx:
                    rhs[idx[bl]] -= isrc[b]
                if sl in idx:
                    rhs[idx[sl]] += isrc[b]
                continue
            gb = g[b]
            p = idx.get(sl)
            q = idx.get(bl)
            if p is not None:
                A[p, p] += gb
                if q is not None:
                    A[p, q] -= gb
                elif fixed[bl]:
                    rhs[p] += gb * vfix[bl]
            if q is not None:
                A[q, q] += gb
                if p is not None:
                    A[q, p] -= gb
                elif fixed[sl]:
                    rhs[q] += gb * vfix[sl]
        x = np.linalg.solve(A, rhs) if m else rhs
        for k in range(n):
            if fixed[k]:
                v_out[k] = vfix[k]
            elif k in idx:
                v_out[k] = x[idx[k]]
            else:
                v_out[k] = math.nan
        i_out[:] = 0.0
        worst, worst_ratio = -1, 1.0 + CLAMP_TOL
        for b, sl, bl in branches:
            if not (reach[sl] and reach[bl]):
                continue
            if clamped[b]:
                i_out[b] = isrc[b]
                continue
            ib = g[b] * (v_out[bl] - v_out[sl])
            i_out[b] = ib
            ratio = abs(ib) / imax[b % n_cols]
            if ratio > worst_ratio:
                worst, worst_ratio = b, ratio
        if worst < 0:
            break
        # one branch at a time: clamping a series pair together would leave
        # the node between them undetermined
        clamped[worst] = True
        isrc[worst] = math.copysign(imax[worst % n_cols], i_out[worst])
    for b in range(nb):
        r = swap_r if b == swap else res[b]
        dv_out[b] = i_out[b] * r


def advance(k_start, check_first, n_rows, n_cols, fixed, drive, gate, imax, res, is_lrs,
            r_lrs, v_set, v_reset, i_hold, i_reset, r_on, out_v, out_i, out_dv):
    """Step from ``k_start`` until the first switching candidate or the end.

    Returns ``(step, branch, kind, margin, i_post)``; ``branch == -1`` means
    the trace ran to completion.
    """
    n_steps = drive.shape[0]
    nb = n_rows * n_cols
    tmp_v = np.empty(n_rows + n_cols)
    tmp_i = np.empty(nb)
    tmp_dv = np.empty(nb)
    for k in range(k_start, n_steps):
        solve(n_rows, n_cols, fixed, drive[k], gate[k], imax[k], res, r_on, -1, 0.0,
              out_v[k], out_i[k], out_dv[k])
        if k == k_start and not check_first:
            continue
        best, best_kind, best_margin, best_ip = -1, 0, -math.inf, 0.0
        for b in range(nb):
            if not gate[k, b % n_cols]:
                continue
            dv = out_dv[k, b]
            ib = out_i[k, b]
            if not is_lrs[b]:
                if dv >= v_set[b]:
                    solve(n_rows, n_cols, fixed, drive[k], gate[k], imax[k], res, r_on, b, r_lrs[b],
                          tmp_v, tmp_i, tmp_dv)
                    ip = tmp_i[b]
                    if ip >= i_hold[b]:
                        margin = min((dv - v_set[b]) / v_set[b], (ip - i_hold[b]) / i_hold[b])
                        if margin > best_margin:
                            best, best_kind, best_margin, best_ip = b, SET, margin, ip
            elif -dv >= v_reset[b] and -ib >= i_reset[b]:
                margin = min((-dv - v_reset[b]) / v_reset[b], (-ib - i_reset[b]) / i_reset[b])
                if margin > best_margin:
                    best, best_kind, best_margin, best_ip = b, RESET, margin, ib
        if best >= 0:
            return k, best, best_kind, best_margin, best_ip
    return n_steps, -1, 0, 0.0, 0.0
