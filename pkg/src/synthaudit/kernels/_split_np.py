"""Reference implementation of the tree-growing kernel (numpy).

Contract shared with the compiled twin in _split_fast.pyx:

    build_tree(X, y, n_classes, mtry, min_leaf, feature_seed)
        -> (feature, threshold, left, right, pred)   five parallel arrays

Nodes are numbered in creation order under an explicit-stack preorder
traversal (left subtree fully before right). Leaves have feature == -1.
Internal node semantics: sample goes left iff value <= threshold.

Split quality is compared through H = (Al*nr + Ar*nl) / (nl*nr) where
Al/Ar are sums of squared class counts on each side; maximising H is
equivalent to minimising weighted Gini impurity. All counts are int64 and
the numerator stays below 2**53 for node sizes up to ~3e5 rows, so H is a
correctly rounded float64 in both implementations and comparisons agree
bit for bit. Ties keep the earliest candidate: lowest split position within
a feature, earliest feature in subset order across features.

Feature subsets come from a splitmix64-driven partial Fisher-Yates shuffle
keyed by (feature_seed, attempt index), so no Python-level RNG is consulted
during growth and both implementations consume identical randomness.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def feature_subset(seed: int, attempt: int, d: int, mtry: int) -> list[int]:
    """First mtry entries of a keyed Fisher-Yates shuffle of range(d)."""
    state = (seed ^ ((attempt + 1) * _GOLDEN)) & _MASK64
    idx = list(range(d))
    for i in range(mtry):
        state, z = _splitmix64(state)
        j = i + z % (d - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:mtry]


def _scan(sv: np.ndarray, sy: np.ndarray, n_classes: int, min_leaf: int):
    """Best split position in a value-sorted column, or (-1, -inf)."""
    n = sv.size
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), sy] = 1
    cum = np.cumsum(onehot, axis=0)
    tot = cum[-1]
    left = cum[:-1]
    al = np.sum(left * left, axis=1)
    right = tot[None, :] - left
    ar = np.sum(right * right, axis=1)
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    num = al * nr + ar * nl
    den = nl * nr
    h = num.astype(np.float64) / den.astype(np.float64)
    valid = (sv[:-1] < sv[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return -1, -np.inf
    h = np.where(valid, h, -np.inf)
    pos = int(np.argmax(h))
    return pos, float(h[pos])


def build_tree(X, y, n_classes: int, mtry: int, min_leaf: int, feature_seed: int):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n, d = X.shape
    feature: list[int] = []
    threshold: list[float] = []
    left_child: list[int] = []
    right_child: list[int] = []
    pred: list[int] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left_child.append(-1)
        right_child.append(-1)
        pred.append(0)
        return len(feature) - 1

    attempt = 0
    # Work items: (row indices, parent node, is_left). Right is pushed first
    # so the left subtree is built (and numbered) first.
    stack = [(np.arange(n, dtype=np.intp), -1, False)]
    while stack:
        idx, parent, is_left = stack.pop()
        node = new_node()
        if parent >= 0:
            if is_left:
                left_child[parent] = node
            else:
                right_child[parent] = node
        yv = y[idx]
        counts = np.bincount(yv, minlength=n_classes)
        pred[node] = int(np.argmax(counts))
        if counts.max() == idx.size or idx.size < 2 * min_leaf:
            continue
        subset = feature_subset(feature_seed, attempt, d, mtry)
        attempt += 1
        best_h = -np.inf
        best_f = -1
        best_thr = 0.0
        for f in subset:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            sv = col[order]
            pos, h = _scan(sv, yv[order], n_classes, min_leaf)
            if pos >= 0 and h > best_h:
                thr = (sv[pos] + sv[pos + 1]) / 2.0
                if thr == sv[pos + 1]:
                    thr = sv[pos]
                best_h = h
                best_f = f
                best_thr = thr
        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        mask = X[idx, best_f] <= best_thr
        stack.append((idx[~mask], node, False))
        stack.append((idx[mask], node, True))

    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left_child, dtype=np.int32),
        np.asarray(right_child, dtype=np.int32),
        np.asarray(pred, dtype=np.int32),
    )
