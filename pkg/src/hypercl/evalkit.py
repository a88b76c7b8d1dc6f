"""Evaluation of frozen embeddings: linear probe, k-means and clustering metrics."""

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax

from .errors import ConfigurationError, ShapeError
from .rng import as_rng, child_rng

KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ProbeConfig:
    l2_coefficient: float = 1e-3
    probe_lr: float = 0.01
    probe_epochs: int = 2000

    def __post_init__(self):
        if self.l2_coefficient < 0:
            raise ConfigurationError("l2_coefficient must be >= 0")
        if self.probe_lr <= 0:
            raise ConfigurationError("probe_lr must be positive")
        if self.probe_epochs < 1:
            raise ConfigurationError("probe_epochs must be >= 1")


def fit_softmax_regression(x, y, num_classes, cfg):
    """Full-batch Adam on mean cross-entropy + (l2/2)||W||^2.

    Returns (W, b). Analytic gradients; the bias is not penalised.
    """
    n, f = x.shape
    w = np.zeros((f, num_classes))
    b = np.zeros(num_classes)
    onehot = np.eye(num_classes)[y]
    mw, vw, mb, vb = (np.zeros_like(w), np.zeros_like(w), np.zeros_like(b), np.zeros_like(b))
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, cfg.probe_epochs + 1):
        prob = np.exp(log_softmax(x @ w + b, axis=1))
        err = (prob - onehot) / n
        gw = x.T @ err + cfg.l2_coefficient * w
        gb = err.sum(axis=0)
        for p, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= cfg.probe_lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return w, b


def linear_probe(emb, labels, split, cfg=None, num_classes=None):
    """Test accuracy of a softmax classifier trained on the frozen embeddings.

    Classes absent from the training set can still appear in the test
    set; they are simply never predicted.
    """
    cfg = cfg or ProbeConfig()
    emb = np.asarray(emb, np.float64)
    labels = np.asarray(labels, np.int64)
    if emb.shape[0] != labels.shape[0]:
        raise ShapeError("embedding rows and labels differ in count")
    if len(split.test) == 0:
        raise ConfigurationError("empty test set")
    if len(split.train) == 0:
        raise ConfigurationError("empty train set")
    k = int(num_classes or labels.max() + 1)
    x = emb
    w, b = fit_softmax_regression(x[split.train], labels[split.train], k, cfg)
    pred = np.argmax(x[split.test] @ w + b, axis=1)
    return float(np.mean(pred == labels[split.test]))


def evaluate_classification(emb, labels, splits, cfg=None, num_classes=None):
    """Mean and (population) standard deviation of probe accuracy over splits."""
    accs = [linear_probe(emb, labels, s, cfg, num_classes) for s in splits]
    return float(np.mean(accs)), float(np.std(accs)), accs


# ------------------------------------------------------------ clustering


@dataclass(frozen=True, eq=False)
class ClusterResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_trace: tuple = ()


def _sq_dists(x, c):
    d = (x * x).sum(1)[:, None] - 2 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp_init(x, k, rng):
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    closest = _sq_dists(x, x[centers[0]][None])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            rest = np.setdiff1d(np.arange(n), centers)
            nxt = int(rest[rng.integers(rest.size)])
        else:
            nxt = int(rng.choice(n, p=closest / total))
        centers.append(nxt)
        closest = np.minimum(closest, _sq_dists(x, x[nxt][None])[:, 0])
    return x[centers].copy()


def kmeans(points, k, seed=0, max_iter=KMEANS_MAX_ITER):
    """k-means++ seeding followed by Lloyd iterations.

    Ties go to the lowest center index (argmin). An empty cluster is
    re-seeded with the point farthest from its current center.
    """
    x = np.asarray(points, np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConfigurationError(f"k must lie in [1, {n}], got {k}")
    rng = as_rng(seed)
    c = kmeans_pp_init(x, k, rng)
    assign, trace = None, []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, c)
        new = np.argmin(d, axis=1)
        trace.append(float(d[np.arange(n), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(d[np.arange(n), assign]))
            assign[far] = j
            d[far, :] = 0.0
            counts = np.bincount(assign, minlength=k)
        c = np.zeros_like(c)
        np.add.at(c, assign, x)
        c /= counts[:, None]
    d = _sq_dists(x, c)
    assign = np.argmin(d, axis=1)
    inertia = float(d[np.arange(n), assign].sum())
    return ClusterResult(assign, c, inertia, it, tuple(trace))


def _contingency(a, b):
    a = np.unique(np.asarray(a), return_inverse=True)[1]
    b = np.unique(np.asarray(b), return_inverse=True)[1]
    t = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(t, (a, b), 1)
    return t


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(true_labels, assignments):
    """Mutual information over the arithmetic mean of the two entropies."""
    true_labels, assignments = np.asarray(true_labels), np.asarray(assignments)
    if true_labels.shape != assignments.shape:
        raise ShapeError("label arrays differ in length")
    n = true_labels.size
    if n == 0:
        raise ShapeError("empty label arrays")
    t = _contingency(true_labels, assignments)
    hu, hv = _entropy(t.sum(1), n), _entropy(t.sum(0), n)
    if hu == 0 or hv == 0:
        return 1.0 if hu == hv else 0.0
    nz = t > 0
    pij = t[nz] / n
    outer = (t.sum(1)[:, None] * t.sum(0)[None, :])[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return max(0.0, min(1.0, mi / ((hu + hv) / 2)))


def _pairs(counts):
    return float((counts * (counts - 1) / 2).sum())


def pairwise_f1(true_labels, assignments):
    """F1 over unordered point pairs (same cluster vs same class)."""
    true_labels, assignments = np.asarray(true_labels), np.asarray(assignments)
    if true_labels.shape != assignments.shape:
        raise ShapeError("label arrays differ in length")
    if true_labels.size < 2:
        raise ShapeError("need at least two points")
    t = _contingency(true_labels, assignments)
    tp = _pairs(t)
    pred_pos = _pairs(t.sum(0))
    true_pos = _pairs(t.sum(1))
    if pred_pos == 0 or true_pos == 0 or tp == 0:
        return 0.0
    p, r = tp / pred_pos, tp / true_pos
    return 2 * p * r / (p + r)


def silhouette(points, assignments):
    """Mean silhouette with Euclidean distances; singleton clusters score 0."""
    x = np.asarray(points, np.float64)
    a_ = np.unique(np.asarray(assignments), return_inverse=True)[1]
    k = a_.max() + 1 if a_.size else 0
    if k < 2:
        raise ConfigurationError("silhouette needs at least two clusters")
    d = np.sqrt(_sq_dists(x, x))
    np.fill_diagonal(d, 0.0)
    sizes = np.bincount(a_, minlength=k)
    sums = d @ np.eye(k)[a_]
    own = sizes[a_]
    a = sums[np.arange(len(a_)), a_] / np.maximum(own - 1, 1)
    means = sums / sizes[None, :]
    means[np.arange(len(a_)), a_] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def evaluate_clustering(emb, labels, k=None, runs=5, seed=0):
    """Mean NMI and pairwise F1 of ``runs`` k-means runs with derived seeds."""
    labels = np.asarray(labels)
    k = int(k or np.unique(labels).size)
    scores = []
    for r in range(runs):
        res = kmeans(emb, k, seed=child_rng(seed, r))
        scores.append((nmi(labels, res.assignments), pairwise_f1(labels, res.assignments)))
    scores = np.array(scores)
    return float(scores[:, 0].mean()), float(scores[:, 1].mean()), scores
