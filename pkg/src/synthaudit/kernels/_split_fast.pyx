# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled twin of _split_np.build_tree.

Same contract, same outputs bit for bit: split quality is an int64 rational
cast to float64 exactly as the numpy path does, traversal and node numbering
follow the same explicit-stack preorder, and feature subsets come from the
same splitmix64 Fisher-Yates stream. Exactness of the cross-implementation
match is guaranteed for node sizes up to ~3e5 rows (numerator < 2**53).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t MIX1 = <uint64_t>0xBF58476D1CE4E5B9
cdef uint64_t MIX2 = <uint64_t>0x94D049BB133111EB


cdef inline uint64_t _splitmix_next(uint64_t* state) nogil:
    state[0] = state[0] + GOLDEN
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef void _sort_pairs(double* v, int64_t* lab, Py_ssize_t lo, Py_ssize_t hi) nogil:
    """In-place ascending sort of v[lo..hi] with lab permuted in tandem.

    Tie order among equal values is unspecified; the scan's result does not
    depend on it because split candidates exist only at value boundaries.
    """
    cdef Py_ssize_t i, j, l, r, mid, sp
    cdef double tv, pivot
    cdef int64_t tl
    cdef Py_ssize_t stack_lo[64]
    cdef Py_ssize_t stack_hi[64]
    sp = 0
    while True:
        if hi - lo < 16:
            for i in range(lo + 1, hi + 1):
                tv = v[i]
                tl = lab[i]
                j = i - 1
                while j >= lo and v[j] > tv:
                    v[j + 1] = v[j]
                    lab[j + 1] = lab[j]
                    j -= 1
                v[j + 1] = tv
                lab[j + 1] = tl
            if sp == 0:
                break
            sp -= 1
            lo = stack_lo[sp]
            hi = stack_hi[sp]
            continue
        mid = lo + (hi - lo) // 2
        if v[mid] < v[lo]:
            tv = v[lo]; v[lo] = v[mid]; v[mid] = tv
            tl = lab[lo]; lab[lo] = lab[mid]; lab[mid] = tl
        if v[hi] < v[lo]:
            tv = v[lo]; v[lo] = v[hi]; v[hi] = tv
            tl = lab[lo]; lab[lo] = lab[hi]; lab[hi] = tl
        if v[hi] < v[mid]:
            tv = v[mid]; v[mid] = v[hi]; v[hi] = tv
            tl = lab[mid]; lab[mid] = lab[hi]; lab[hi] = tl
        pivot = v[mid]
        l = lo
        r = hi
        while l <= r:
            while v[l] < pivot:
                l += 1
            while v[r] > pivot:
                r -= 1
            if l <= r:
                tv = v[l]; v[l] = v[r]; v[r] = tv
                tl = lab[l]; lab[l] = lab[r]; lab[r] = tl
                l += 1
                r -= 1
        # iterate the smaller side, push the larger: depth stays O(log n)
        if r - lo < hi - l:
            if l < hi:
                stack_lo[sp] = l
                stack_hi[sp] = hi
                sp += 1
            hi = r
        else:
            if lo < r:
                stack_lo[sp] = lo
                stack_hi[sp] = r
                sp += 1
            lo = l


def build_tree(X, y, int n_classes, int mtry, int min_leaf, feature_seed):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    cdef double[:, ::1] Xv = X
    cdef int64_t[::1] yv = y
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t d = Xv.shape[1]
    if n < 1:
        raise ValueError("build_tree needs at least one row")
    if not (1 <= mtry <= d):
        raise ValueError("mtry out of range")
    cdef uint64_t fseed = <uint64_t>(int(feature_seed) & 0xFFFFFFFFFFFFFFFF)

    cdef Py_ssize_t max_nodes = 2 * n + 1
    feature_np = np.full(max_nodes, -1, dtype=np.int32)
    threshold_np = np.zeros(max_nodes, dtype=np.float64)
    left_np = np.full(max_nodes, -1, dtype=np.int32)
    right_np = np.full(max_nodes, -1, dtype=np.int32)
    pred_np = np.zeros(max_nodes, dtype=np.int32)
    cdef int32_t[::1] feature = feature_np
    cdef double[::1] threshold = threshold_np
    cdef int32_t[::1] left_child = left_np
    cdef int32_t[::1] right_child = right_np
    cdef int32_t[::1] pred = pred_np

    cdef Py_ssize_t* ind = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_s = <Py_ssize_t*>malloc((2 * n + 4) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* st_e = <Py_ssize_t*>malloc((2 * n + 4) * sizeof(Py_ssize_t))
    cdef int32_t* st_parent = <int32_t*>malloc((2 * n + 4) * sizeof(int32_t))
    cdef int32_t* st_left = <int32_t*>malloc((2 * n + 4) * sizeof(int32_t))
    cdef double* colbuf = <double*>malloc(n * sizeof(double))
    cdef int64_t* labbuf = <int64_t*>malloc(n * sizeof(int64_t))
    cdef Py_ssize_t* fidx = <Py_ssize_t*>malloc(d * sizeof(Py_ssize_t))
    cdef int64_t* counts = <int64_t*>malloc(n_classes * sizeof(int64_t))
    cdef int64_t* lc = <int64_t*>malloc(n_classes * sizeof(int64_t))
    cdef int64_t* rc = <int64_t*>malloc(n_classes * sizeof(int64_t))
    if (ind == NULL or st_s == NULL or st_e == NULL or st_parent == NULL
            or st_left == NULL or colbuf == NULL or labbuf == NULL
            or fidx == NULL or counts == NULL or lc == NULL or rc == NULL):
        free(ind); free(st_s); free(st_e); free(st_parent); free(st_left)
        free(colbuf); free(labbuf); free(fidx); free(counts); free(lc); free(rc)
        raise MemoryError()

    cdef Py_ssize_t top, node_count, attempt
    cdef Py_ssize_t s, e, m, i, j, c, f, fi, swap_t, nl, nr, best_f
    cdef int32_t parent, is_left, node, best_c
    cdef int64_t maxc, al, ar, num, den
    cdef uint64_t state, z
    cdef double h, best_h, thr, best_thr
    cdef Py_ssize_t wl, wr

    with nogil:
        for i in range(n):
            ind[i] = i
        top = 0
        st_s[top] = 0
        st_e[top] = n
        st_parent[top] = -1
        st_left[top] = 0
        top += 1
        node_count = 0
        attempt = 0
        while top > 0:
            top -= 1
            s = st_s[top]
            e = st_e[top]
            parent = st_parent[top]
            is_left = st_left[top]
            node = <int32_t>node_count
            node_count += 1
            if parent >= 0:
                if is_left:
                    left_child[parent] = node
                else:
                    right_child[parent] = node
            m = e - s
            for c in range(n_classes):
                counts[c] = 0
            for i in range(s, e):
                counts[yv[ind[i]]] += 1
            best_c = 0
            maxc = counts[0]
            for c in range(1, n_classes):
                if counts[c] > maxc:
                    maxc = counts[c]
                    best_c = <int32_t>c
            pred[node] = best_c
            if maxc == m or m < 2 * min_leaf:
                continue
            state = fseed ^ ((<uint64_t>(attempt + 1)) * GOLDEN)
            attempt += 1
            for j in range(d):
                fidx[j] = j
            for i in range(mtry):
                z = _splitmix_next(&state)
                j = i + <Py_ssize_t>(z % <uint64_t>(d - i))
                swap_t = fidx[i]
                fidx[i] = fidx[j]
                fidx[j] = swap_t
            best_h = -INFINITY
            best_f = -1
            best_thr = 0.0
            for fi in range(mtry):
                f = fidx[fi]
                for i in range(m):
                    colbuf[i] = Xv[ind[s + i], f]
                    labbuf[i] = yv[ind[s + i]]
                _sort_pairs(colbuf, labbuf, 0, m - 1)
                for c in range(n_classes):
                    lc[c] = 0
                    rc[c] = counts[c]
                al = 0
                ar = 0
                for c in range(n_classes):
                    ar += counts[c] * counts[c]
                for i in range(m - 1):
                    c = labbuf[i]
                    al += 2 * lc[c] + 1
                    lc[c] += 1
                    ar += 1 - 2 * rc[c]
                    rc[c] -= 1
                    nl = i + 1
                    nr = m - nl
                    if colbuf[i] < colbuf[i + 1] and nl >= min_leaf and nr >= min_leaf:
                        num = al * <int64_t>nr + ar * <int64_t>nl
                        den = <int64_t>nl * <int64_t>nr
                        h = <double>num / <double>den
                        if h > best_h:
                            best_h = h
                            best_f = f
                            thr = (colbuf[i] + colbuf[i + 1]) / 2.0
                            if thr == colbuf[i + 1]:
                                thr = colbuf[i]
                            best_thr = thr
            if best_f < 0:
                continue
            feature[node] = <int32_t>best_f
            threshold[node] = best_thr
            # in-place partition of ind[s:e]: X[., best_f] <= thr to the front
            wl = s
            wr = e - 1
            while wl <= wr:
                if Xv[ind[wl], best_f] <= best_thr:
                    wl += 1
                else:
                    swap_t = ind[wl]
                    ind[wl] = ind[wr]
                    ind[wr] = swap_t
                    wr -= 1
            # right block first so the left subtree pops (and numbers) first
            st_s[top] = wl
            st_e[top] = e
            st_parent[top] = node
            st_left[top] = 0
            top += 1
            st_s[top] = s
            st_e[top] = wl
            st_parent[top] = node
            st_left[top] = 1
            top += 1

    free(ind); free(st_s); free(st_e); free(st_parent); free(st_left)
    free(colbuf); free(labbuf); free(fidx); free(counts); free(lc); free(rc)
    return (
        feature_np[:node_count].copy(),
        threshold_np[:node_count].copy(),
        left_np[:node_count].copy(),
        right_np[:node_count].copy(),
        pred_np[:node_count].copy(),
    )
