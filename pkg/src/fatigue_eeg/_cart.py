"""Compiled CART growth kernel (binary labels, Gini impurity)."""
import numpy as np
from numba import njit

# weighted impurities closer than this (times node size) count as equal, so
# rounding cannot override the lowest-feature / lowest-threshold tie rule
_TIE_TOL = 1e-12


@njit(cache=True)
def grow_tree(X, y, max_depth, min_leaf):
    """Grow one tree depth-first; returns flat node arrays.

    Rows with ``X[:, f] < threshold`` go left. Among equally good splits the
    lowest feature index wins, then the lowest threshold. ``max_depth < 0``
    means unlimited.
    """
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, 2), np.int64)

    # sorted_rows[f, lo:hi] lists the rows of a node in increasing order of feature f
    sorted_rows = np.empty((p, n), np.int64)
    for f in range(p):
        sorted_rows[f] = np.argsort(X[:, f], kind="mergesort")
    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int64)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        m = hi - lo
        c1 = 0
        for i in range(lo, hi):
            c1 += y[sorted_rows[0, i]]
        c0 = m - c1
        counts[node, 0] = c0
        counts[node, 1] = c1
        if c0 == 0 or c1 == 0:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m < 2 * min_leaf:
            continue

        parent = m - (c0 * c0 + c1 * c1) / m
        tol = _TIE_TOL * m
        best = parent - tol
        best_f = -1
        best_t = 0.0
        for f in range(p):
            l1 = 0
            for i in range(lo, hi - 1):
                r = sorted_rows[f, i]
                l1 += y[r]
                v = X[r, f]
                vn = X[sorted_rows[f, i + 1], f]
                if not v < vn:
                    continue
                nl = i + 1 - lo
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                l0 = nl - l1
                r1 = c1 - l1
                r0 = nr - r1
                imp = nl - (l0 * l0 + l1 * l1) / nl + nr - (r0 * r0 + r1 * r1) / nr
                if imp < best:
                    best = imp - tol
                    best_f = f
                    mid = 0.5 * v + 0.5 * vn
                    if not v < mid:
                        mid = vn
                    best_t = mid
        if best_f < 0:
            continue

        n_left = 0
        for i in range(lo, hi):
            r = sorted_rows[0, i]
            goes_left[r] = X[r, best_f] < best_t
            if goes_left[r]:
                n_left += 1
        # stable partition keeps every feature's segment sorted
        for f in range(p):
            a = 0
            b = n_left
            for i in range(lo, hi):
                r = sorted_rows[f, i]
                if goes_left[r]:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(m):
                sorted_rows[f, lo + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_t
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        left[node] = li
        right[node] = ri
        # push right first so the left subtree is expanded first
        st_node[sp] = ri
        st_lo[sp] = lo + n_left
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = li
        st_lo[sp] = lo
        st_hi[sp] = lo + n_left
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())
