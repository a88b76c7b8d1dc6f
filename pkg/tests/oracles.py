"""Reference implementations used as test oracles.

Written with explicit loops and dense matrices, sharing no code with the
package, so agreement between the two is meaningful.
"""

import math
from itertools import combinations

import numpy as np


def dense_incidence(n, m, hyperedges):
    H = np.zeros((n, m))
    for j, e in enumerate(hyperedges):
        for i in e:
            H[i, j] = 1.0
    return H


def _prelu(x, a):
    return np.where(x > 0, x, a * x)


def _safe_inv(v):
    out = np.zeros_like(v, dtype=np.float64)
    out[v > 0] = 1.0 / v[v > 0]
    return out


def mean_pool_dense(X, H, layers, w=None, act=True):
    """layers: list of dicts with theta_e, theta_v, bias_e, bias_v, slope_e, slope_v."""
    n, m = H.shape
    w = np.ones(m) if w is None else w
    de = _safe_inv(H.sum(0))
    dv = _safe_inv(H @ w)
    P, Q = X.astype(np.float64), None
    for L in layers:
        Q = np.diag(de) @ H.T @ P @ L["theta_e"] + L["bias_e"]
        if act:
            Q = _prelu(Q, L["slope_e"])
        P = np.diag(dv) @ H @ np.diag(w) @ Q @ L["theta_v"] + L["bias_v"]
        if act:
            P = _prelu(P, L["slope_v"])
    return P, Q


def hgnn_dense(X, H, layers, w=None, act=True):
    """layers: list of dicts with theta, bias, slope."""
    n, m = H.shape
    w = np.ones(m) if w is None else w
    d = H @ w
    isd = np.zeros(n)
    isd[d > 0] = 1.0 / np.sqrt(d[d > 0])
    inv_delta = _safe_inv(H.sum(0))
    P, Q = X.astype(np.float64), None
    for L in layers:
        Q = H.T @ np.diag(isd) @ P
        P = np.diag(isd) @ H @ np.diag(w * inv_delta) @ Q @ L["theta"] + L["bias"]
        if act:
            P = _prelu(P, L["slope"])
    return P, Q


def cosine(u, v):
    nu = max(math.sqrt(sum(a * a for a in u)), 1e-12)
    nv = max(math.sqrt(sum(b * b for b in v)), 1e-12)
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def infonce_loop(A, B, tau):
    """Symmetrised InfoNCE: denominators over every row of the other view."""
    n = len(A)
    total = 0.0
    for X, Y in ((A, B), (B, A)):
        for i in range(n):
            num = math.exp(cosine(X[i], Y[i]) / tau)
            den = sum(math.exp(cosine(X[i], Y[k]) / tau) for k in range(n))
            total += -math.log(num / den)
    return total / (2 * n)


def subsampled_expectation(A, B, tau, k):
    """Exact expectation of the k-negative loss by enumerating all subsets."""
    n = len(A)
    total = 0.0
    for X, Y in ((A, B), (B, A)):
        for i in range(n):
            others = [j for j in range(n) if j != i]
            subsets = list(combinations(others, k))
            acc = 0.0
            for sub in subsets:
                num = math.exp(cosine(X[i], Y[i]) / tau)
                den = num + sum(math.exp(cosine(X[i], Y[j]) / tau) for j in sub)
                acc += -math.log(num / den)
            total += acc / len(subsets)
    return total / (2 * n)


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def membership_loop(pairs, Z1, Y2, Z2, Y1, S, tau, negs):
    """``negs[(view, t)] = (neg_edge, neg_node)`` for membership t in pairing view."""
    total = 0.0
    for view, (Z, Y) in enumerate(((Z1, Y2), (Z2, Y1))):
        for t, (i, j) in enumerate(pairs):
            ne, nv = negs[(view, t)]
            pos = _sig(Z[i] @ S @ Y[j]) / tau
            ng_e = _sig(Z[i] @ S @ Y[ne]) / tau
            ng_v = _sig(Z[nv] @ S @ Y[j]) / tau
            total += -math.log(math.exp(pos) / (math.exp(pos) + math.exp(ng_e)))
            total += -math.log(math.exp(pos) / (math.exp(pos) + math.exp(ng_v)))
    return total / (2 * len(pairs))


def adamw_scalar(theta, grads, lr, wd, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, 1):
        theta = theta - lr * wd * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
        out.append(theta)
    return out


def pair_f1(truth, pred):
    tp = fp = fn = 0
    n = len(truth)
    for a in range(n):
        for b in range(a + 1, n):
            same_t = truth[a] == truth[b]
            same_p = pred[a] == pred[b]
            tp += same_t and same_p
            fp += same_p and not same_t
            fn += same_t and not same_p
    if tp + fp == 0 or tp + fn == 0 or tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2 * p * r / (p + r)


def contingency_nmi(truth, pred):
    n = len(truth)
    cells, rows, cols = {}, {}, {}
    for a, b in zip(truth, pred):
        cells[(a, b)] = cells.get((a, b), 0) + 1
        rows[a] = rows.get(a, 0) + 1
        cols[b] = cols.get(b, 0) + 1
    hu = -sum(c / n * math.log(c / n) for c in rows.values())
    hv = -sum(c / n * math.log(c / n) for c in cols.values())
    if hu == 0 or hv == 0:
        return 1.0 if hu == hv else 0.0
    mi = sum(c / n * math.log((c / n) / (rows[a] / n * cols[b] / n)) for (a, b), c in cells.items())
    return mi / ((hu + hv) / 2)


def silhouette_loop(X, labels):
    n = len(X)
    dist = lambda a, b: math.sqrt(sum((p - q) ** 2 for p, q in zip(X[a], X[b])))
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(dist(i, j) for j in own) / len(own)
        b = min(
            sum(dist(i, j) for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in set(labels) if c != labels[i]
        )
        scores.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(scores) / n
