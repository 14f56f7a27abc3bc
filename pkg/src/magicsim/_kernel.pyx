# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nodal solver and event-driven stepping loop (see _pykernel.py)."""
from libc.math cimport fabs, copysign, NAN, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np

cdef enum:
    SET = 1
    RESET = 2

cdef double CLAMP_TOL = 1e-12


cdef struct Work:
    int n
    int nb
    int m
    bint valid           # cached topology and LU factors match key_*
    bint dirty           # clamp buffers hold state from the last solve
    int key_swap
    double key_swap_r
    unsigned char* key_gate
    unsigned char* reach
    unsigned char* clamped
    double* isrc
    int* idx
    int* piv
    double* A
    double* rhs


cdef int _work_alloc(Work* w, int n, int nb, int n_cols) except -1:
    w.n = n
    w.nb = nb
    w.m = 0
    w.valid = False
    w.dirty = True
    w.key_gate = <unsigned char*> malloc(n_cols)
    w.reach = <unsigned char*> malloc(n)
    w.clamped = <unsigned char*> malloc(nb)
    w.isrc = <double*> malloc(nb * sizeof(double))
    w.idx = <int*> malloc(n * sizeof(int))
    w.piv = <int*> malloc(n * sizeof(int))
    w.A = <double*> malloc(n * n * sizeof(double))
    w.rhs = <double*> malloc(n * sizeof(double))
    if not (w.key_gate and w.reach and w.clamped and w.isrc and w.idx and w.piv and w.A and w.rhs):
        _work_free(w)
        raise MemoryError()
    return 0


cdef void _work_free(Work* w) noexcept:
    free(w.key_gate)
    free(w.reach)
    free(w.clamped)
    free(w.isrc)
    free(w.idx)
    free(w.piv)
    free(w.A)
    free(w.rhs)


cdef void _lu(double* A, int* piv, int m) noexcept nogil:
    """In-place LU with partial pivoting; multipliers are kept below the diagonal."""
    cdef int c, r, p, k
    cdef double best, f, tmp
    for c in range(m):
        p = c
        best = fabs(A[c * m + c])
        for r in range(c + 1, m):
            if fabs(A[r * m + c]) > best:
                best = fabs(A[r * m + c])
                p = r
        piv[c] = p
        if p != c:
            for k in range(m):
                tmp = A[c * m + k]
                A[c * m + k] = A[p * m + k]
                A[p * m + k] = tmp
        for r in range(c + 1, m):
            f = A[r * m + c] / A[c * m + c]
            A[r * m + c] = f
            if f != 0.0:
                for k in range(c + 1, m):
                    A[r * m + k] -= f * A[c * m + k]


cdef void _lu_solve(const double* A, const int* piv, double* b, int m) noexcept nogil:
    cdef int c, r, k
    cdef double tmp, f
    for c in range(m):
        if piv[c] != c:
            tmp = b[c]
            b[c] = b[piv[c]]
            b[piv[c]] = tmp
        for r in range(c + 1, m):
            f = A[r * m + c]
            if f != 0.0:
                b[r] -= f * b[c]
    for c in range(m - 1, -1, -1):
        tmp = b[c]
        for k in range(c + 1, m):
            tmp -= A[c * m + k] * b[k]
        b[c] = tmp / A[c * m + c]


cdef bint _key_matches(Work* w, int n_cols, const unsigned char* gate, int swap, double swap_r) noexcept nogil:
    cdef int j
    if not w.valid or w.key_swap != swap or (swap >= 0 and w.key_swap_r != swap_r):
        return False
    for j in range(n_cols):
        if w.key_gate[j] != gate[j]:
            return False
    return True


cdef void _factor(Work* w, int n_rows, int n_cols, const unsigned char* fixed,
                  const unsigned char* gate, const double* res, double r_on,
                  int swap, double swap_r) noexcept nogil:
    """Reachability, unknown numbering and LU of the conductance matrix."""
    cdef int n = n_rows + n_cols
    cdef int k, i, j, b, bl, m, p, q
    cdef bint changed
    cdef double gb, r
    for k in range(n):
        w.reach[k] = fixed[k]
    changed = True
    while changed:
        changed = False
        for j in range(n_cols):
            if not gate[j]:
                continue
            bl = n_rows + j
            for i in range(n_rows):
                b = i * n_cols + j
                if not w.clamped[b] and w.reach[i] != w.reach[bl]:
                    w.reach[i] = 1
                    w.reach[bl] = 1
                    changed = True
    m = 0
    for k in range(n):
        if w.reach[k] and not fixed[k]:
            w.idx[k] = m
            m += 1
        else:
            w.idx[k] = -1
    w.m = m
    for k in range(m * m):
        w.A[k] = 0.0
    for j in range(n_cols):
        if not gate[j]:
            continue
        bl = n_rows + j
        for i in range(n_rows):
            b = i * n_cols + j
            if w.clamped[b]:
                continue
            p = w.idx[i]
            q = w.idx[bl]
            r = swap_r if b == swap else res[b]
            gb = 1.0 / (r + r_on)
            if p >= 0:
                w.A[p * m + p] += gb
                if q >= 0:
                    w.A[p * m + q] -= gb
            if q >= 0:
                w.A[q * m + q] += gb
                if p >= 0:
                    w.A[q * m + p] -= gb
    if m:
        _lu(w.A, w.piv, m)


cdef void _solve(Work* w, int n_rows, int n_cols, const unsigned char* fixed, const double* vfix,
                 const unsigned char* gate, const double* imax, const double* res, double r_on,
                 int swap, double swap_r, double* v_out, double* i_out, double* dv_out) noexcept nogil:
    """Nodal solve with compliance clamping.

    The unclamped factorization is cached on ``w`` keyed by the gate pattern
    and swap; callers must drop ``w.valid`` whenever ``res`` changes.
    """
    cdef int n = n_rows + n_cols
    cdef int nb = n_rows * n_cols
    cdef int it, k, i, j, b, sl, bl, m, p, q
    cdef bint any_clamp = False
    cdef int worst
    cdef double ratio, worst_ratio
    cdef double gb, r, ib, lim
    if w.dirty:
        for b in range(nb):
            w.clamped[b] = 0
            w.isrc[b] = 0.0
        w.dirty = False
    for it in range(nb + 1):
        if any_clamp:
            w.valid = False
            _factor(w, n_rows, n_cols, fixed, gate, res, r_on, swap, swap_r)
        elif not _key_matches(w, n_cols, gate, swap, swap_r):
            _factor(w, n_rows, n_cols, fixed, gate, res, r_on, swap, swap_r)
            for j in range(n_cols):
                w.key_gate[j] = gate[j]
            w.key_swap = swap
            w.key_swap_r = swap_r
            w.valid = True
        m = w.m
        for k in range(m):
            w.rhs[k] = 0.0
        for j in range(n_cols):
            if not gate[j]:
                continue
            bl = n_rows + j
            for i in range(n_rows):
                b = i * n_cols + j
                sl = i
                p = w.idx[sl]
                q = w.idx[bl]
                if w.clamped[b]:
                    if q >= 0:
                        w.rhs[q] -= w.isrc[b]
                    if p >= 0:
                        w.rhs[p] += w.isrc[b]
                    continue
                r = swap_r if b == swap else res[b]
                gb = 1.0 / (r + r_on)
                if p >= 0 and q < 0 and fixed[bl]:
                    w.rhs[p] += gb * vfix[bl]
                if q >= 0 and p < 0 and fixed[sl]:
                    w.rhs[q] += gb * vfix[sl]
        if m:
            _lu_solve(w.A, w.piv, w.rhs, m)
        for k in range(n):
            if fixed[k]:
                v_out[k] = vfix[k]
            elif w.idx[k] >= 0:
                v_out[k] = w.rhs[w.idx[k]]
            else:
                v_out[k] = NAN
        for b in range(nb):
            i_out[b] = 0.0
        worst = -1
        worst_ratio = 1.0 + CLAMP_TOL
        for j in range(n_cols):
            if not gate[j]:
                continue
            bl = n_rows + j
            lim = imax[j]
            for i in range(n_rows):
                b = i * n_cols + j
                if not (w.reach[i] and w.reach[bl]):
                    continue
                if w.clamped[b]:
                    i_out[b] = w.isrc[b]
                    continue
                r = swap_r if b == swap else res[b]
                ib = (v_out[bl] - v_out[i]) / (r + r_on)
                i_out[b] = ib
                ratio = fabs(ib) / lim
                if ratio > worst_ratio:
                    worst = b
                    worst_ratio = ratio
        if worst < 0:
            break
        # one branch at a time (see _pykernel)
        w.clamped[worst] = 1
        w.isrc[worst] = copysign(imax[worst % n_cols], i_out[worst])
        any_clamp = True
    if any_clamp:
        w.valid = False
        w.dirty = True
    for b in range(nb):
        r = swap_r if b == swap else res[b]
        dv_out[b] = i_out[b] * r


def solve(int n_rows, int n_cols, const unsigned char[::1] fixed, const double[::1] vfix,
          const unsigned char[::1] gate, const double[::1] imax, const double[::1] res, double r_on,
          int swap, double swap_r, double[::1] v_out, double[::1] i_out, double[::1] dv_out):
    cdef Work w
    _work_alloc(&w, n_rows + n_cols, n_rows * n_cols, n_cols)
    try:
        _solve(&w, n_rows, n_cols, &fixed[0], &vfix[0], &gate[0], &imax[0], &res[0], r_on, swap, swap_r,
               &v_out[0], &i_out[0], &dv_out[0])
    finally:
        _work_free(&w)


def advance(int k_start, bint check_first, int n_rows, int n_cols, const unsigned char[::1] fixed,
            const double[:, ::1] drive, const unsigned char[:, ::1] gate, const double[:, ::1] imax,
            const double[::1] res, const unsigned char[::1] is_lrs, const double[::1] r_lrs,
            const double[::1] v_set, const double[::1] v_reset, const double[::1] i_hold,
            const double[::1] i_reset, double r_on,
            double[:, ::1] out_v, double[:, ::1] out_i, double[:, ::1] out_dv):
    cdef int n_steps = drive.shape[0]
    cdef int n = n_rows + n_cols
    cdef int nb = n_rows * n_cols
    cdef int k, i, j, b, best = -1, best_kind = 0, found_step = n_steps
    cdef double dv, ib, ip, margin, m2, best_margin = -INFINITY, best_ip = 0.0
    cdef Work w
    cdef Work ws
    cdef double[::1] tmp_v = np.empty(n)
    cdef double[::1] tmp_i = np.empty(nb)
    cdef double[::1] tmp_dv = np.empty(nb)
    cdef const unsigned char* g
    cdef const double* dk
    cdef const double* ik
    cdef double* vk
    cdef double* ck
    cdef double* dvk
    if n_steps == 0 or k_start >= n_steps:
        return n_steps, -1, 0, 0.0, 0.0
    _work_alloc(&w, n, nb, n_cols)
    try:
        _work_alloc(&ws, n, nb, n_cols)
    except MemoryError:
        _work_free(&w)
        raise
    try:
        with nogil:
            for k in range(k_start, n_steps):
                g = &gate[k, 0]
                dk = &drive[k, 0]
                ik = &imax[k, 0]
                vk = &out_v[k, 0]
                ck = &out_i[k, 0]
                dvk = &out_dv[k, 0]
                _solve(&w, n_rows, n_cols, &fixed[0], dk, g, ik, &res[0], r_on, -1, 0.0, vk, ck, dvk)
                if k == k_start and not check_first:
                    continue
                for j in range(n_cols):
                    if not g[j]:
                        continue
                    for i in range(n_rows):
                        b = i * n_cols + j
                        dv = dvk[b]
                        ib = ck[b]
                        if not is_lrs[b]:
                            if dv >= v_set[b]:
                                _solve(&ws, n_rows, n_cols, &fixed[0], dk, g, ik, &res[0], r_on,
                                       b, r_lrs[b], &tmp_v[0], &tmp_i[0], &tmp_dv[0])
                                ip = tmp_i[b]
                                if ip >= i_hold[b]:
                                    margin = (dv - v_set[b]) / v_set[b]
                                    m2 = (ip - i_hold[b]) / i_hold[b]
                                    if m2 < margin:
                                        margin = m2
                                    if margin > best_margin or (margin == best_margin and b < best):
                                        best = b
                                        best_kind = SET
                                        best_margin = margin
                                        best_ip = ip
                        elif -dv >= v_reset[b] and -ib >= i_reset[b]:
                            margin = (-dv - v_reset[b]) / v_reset[b]
                            m2 = (-ib - i_reset[b]) / i_reset[b]
                            if m2 < margin:
                                margin = m2
                            if margin > best_margin or (margin == best_margin and b < best):
                                best = b
                                best_kind = RESET
                                best_margin = margin
                                best_ip = ib
                if best >= 0:
                    found_step = k
                    break
    finally:
        _work_free(&w)
        _work_free(&ws)
    if best < 0:
        return n_steps, -1, 0, 0.0, 0.0
    return found_step, best, best_kind, best_margin, best_ip
