"""Pure-Python greedy 1:1 caliper matching.

Same contract as the compiled ``_match.greedy_match``; used when the extension
is not built or ``PSLAB_PURE_PYTHON`` is set.
"""

import numpy as np


def _find(parent, j):
    root = j
    while parent[root] != root:
        root = parent[root]
    while parent[j] != root:
        parent[j], j = root, parent[j]
    return root


def greedy_match(treated_ps, pos, control_ps, control_idx, group_start, caliper):
    """Match each treated subject, in the given order, to its nearest free control.

    Parameters
    ----------
    treated_ps : PS of treated subjects in processing order
    pos : for each treated subject, ``searchsorted(control_ps, ps, "left")``
    control_ps : control PS sorted ascending (ties ordered by ``control_idx``)
    control_idx : original index of each sorted control
    group_start : first sorted position sharing the same PS value
    caliper : maximum accepted absolute PS difference

    Returns
    -------
    ndarray of sorted-control positions, -1 where no match was made.
    """
    tps = treated_ps.tolist()
    pos = pos.tolist()
    cps = control_ps.tolist()
    cidx = control_idx.tolist()
    gstart = group_start.tolist()
    m = len(cps)
    inf = float("inf")
    right = list(range(m + 1))
    left = list(range(m + 1))
    out = [-1] * len(tps)
    for i, p in enumerate(tps):
        R = _find(right, pos[i])
        L = _find(left, pos[i]) - 1
        dR = cps[R] - p if R < m else inf
        dL = p - cps[L] if L >= 0 else inf
        Lg = _find(right, gstart[L]) if L >= 0 else -1
        if dL < dR:
            c, d = Lg, dL
        elif dR < dL:
            c, d = R, dR
        elif dR == inf:
            continue
        else:
            d = dR
            c = Lg if cidx[Lg] < cidx[R] else R
        if d > caliper:
            continue
        out[i] = c
        right[c] = c + 1
        left[c + 1] = c
    return np.array(out, dtype=np.intp)
