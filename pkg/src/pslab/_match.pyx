# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled greedy 1:1 caliper matching. Mirrors ``_match_py.greedy_match``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t root = j, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[j] != root:
        nxt = parent[j]
        parent[j] = root
        j = nxt
    return root


def greedy_match(double[::1] treated_ps, Py_ssize_t[::1] pos,
                 double[::1] control_ps, Py_ssize_t[::1] control_idx,
                 Py_ssize_t[::1] group_start, double caliper):
    cdef Py_ssize_t nt = treated_ps.shape[0], m = control_ps.shape[0]
    cdef Py_ssize_t i, R, L, Lg, c
    cdef double p, dR, dL, d, inf = float("inf")
    out_np = np.full(nt, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] out = out_np
    # right[j]: first unmatched position >= j (m = none)
    # left[j + 1]: last unmatched position <= j, stored shifted by one (0 = none)
    right_np = np.arange(m + 1, dtype=np.intp)
    left_np = np.arange(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] right = right_np
    cdef Py_ssize_t[::1] left = left_np
    with nogil:
        for i in range(nt):
            p = treated_ps[i]
            R = _find(right, pos[i])
            L = _find(left, pos[i]) - 1
            dR = control_ps[R] - p if R < m else inf
            dL = p - control_ps[L] if L >= 0 else inf
            Lg = -1
            if L >= 0:
                Lg = _find(right, group_start[L])
            if dL < dR:
                c = Lg
                d = dL
            elif dR < dL:
                c = R
                d = dR
            elif dR == inf:
                continue
            else:
                d = dR
                c = Lg if control_idx[Lg] < control_idx[R] else R
            if d > caliper:
                continue
            out[i] = c
            right[c] = c + 1
            left[c + 1] = c
    return out_np
