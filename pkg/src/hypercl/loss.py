"""Node-, group- and membership-level InfoNCE objectives."""

import logging
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .errors import ConfigurationError, DegenerateInputError
from .rng import as_rng

log = logging.getLogger(__name__)

# masked-out logits in the full membership denominator
_NEG_FILL = -1e30


@dataclass(frozen=True)
class LossConfig:
    tau_n: float = 0.5
    tau_g: float = 0.5
    tau_m: float = 1.0
    w_g: float = 1.0
    w_m: float = 1.0
    negatives_k: int = None  # subsampled negatives for node/group contrast
    use_node: bool = True
    use_group: bool = True
    use_membership: bool = True
    membership_mode: str = "sampled"  # or "full"

    def __post_init__(self):
        for name in ("tau_n", "tau_g", "tau_m"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.w_g < 0 or self.w_m < 0:
            raise ConfigurationError("loss weights must be non-negative")
        if not (self.use_node or self.use_group or self.use_membership):
            raise ConfigurationError("at least one loss component must be enabled")
        if self.negatives_k is not None and self.negatives_k < 1:
            raise ConfigurationError("negatives_k must be >= 1")
        if self.membership_mode not in ("sampled", "full"):
            raise ConfigurationError(f"unknown membership_mode {self.membership_mode!r}")


def cosine_similarity(u, v, eps=dc.NORM_EPS):
    u, v = np.asarray(u, float), np.asarray(v, float)
    return float(u @ v / (max(np.linalg.norm(u), eps) * max(np.linalg.norm(v), eps)))


def _symmetric_infonce(a, b, tau):
    n = a.shape[0]
    if n < 2:
        raise DegenerateInputError(f"contrast needs at least 2 rows, got {n}")
    na, nb = dc.row_normalize(a), dc.row_normalize(b)
    sim = na @ nb.T / tau
    pos = dc.row_dot(na, nb) / tau
    l_ab = dc.logsumexp(sim, axis=1) - pos
    l_ba = dc.logsumexp(sim.T, axis=1) - pos
    return (dc.sum_all(l_ab) + dc.sum_all(l_ba)) / (2 * n)


def node_loss(z1, z2, tau):
    """Symmetrised node-level InfoNCE with a cosine critic.

    Each row of one view is contrasted against every row of the other view;
    the denominator includes the positive.
    """
    return _symmetric_infonce(dc.as_tensor(z1), dc.as_tensor(z2), tau)


def group_loss(y1, y2, tau, eligible=None):
    """Hyperedge-level InfoNCE over the ``eligible`` hyperedge rows."""
    y1, y2 = dc.as_tensor(y1), dc.as_tensor(y2)
    if eligible is not None:
        idx = np.flatnonzero(eligible)
        if idx.size < 2:
            raise DegenerateInputError(f"need at least 2 eligible hyperedges, got {idx.size}")
        y1, y2 = dc.gather_rows(y1, idx), dc.gather_rows(y2, idx)
    return _symmetric_infonce(y1, y2, tau)


def sample_negatives(n, k, rng):
    """For each of n anchors, k distinct indices from the other n - 1 rows."""
    if not 1 <= k <= n - 1:
        raise ConfigurationError(f"k must lie in [1, {n - 1}], got {k}")
    keys = as_rng(rng).random((n, n))
    np.fill_diagonal(keys, np.inf)
    if k == n - 1:
        idx = np.argsort(keys, axis=1)[:, :k]
    else:
        idx = np.argpartition(keys, k, axis=1)[:, :k]
    return idx


def _subsampled_direction(sim, pos, k, rng):
    n = sim.shape[0]
    neg = sample_negatives(n, k, rng)
    cols = np.sort(np.concatenate([np.arange(n)[:, None], neg], axis=1), axis=1)
    return dc.logsumexp(dc.gather_elements(sim, cols), axis=1) - pos


def subsampled_contrast(a, b, tau, k, rng, eligible=None):
    """InfoNCE whose denominators hold the positive plus k random negatives.

    Negatives are drawn fresh for each anchor and each direction. With
    k = n - 1 every negative is used, column order is preserved, and the
    value matches the full loss exactly.
    """
    a, b = dc.as_tensor(a), dc.as_tensor(b)
    if eligible is not None:
        idx = np.flatnonzero(eligible)
        a, b = dc.gather_rows(a, idx), dc.gather_rows(b, idx)
    n = a.shape[0]
    if n < 2:
        raise DegenerateInputError(f"contrast needs at least 2 rows, got {n}")
    rng = as_rng(rng)
    na, nb = dc.row_normalize(a), dc.row_normalize(b)
    sim = na @ nb.T / tau
    pos = dc.row_dot(na, nb) / tau
    l_ab = _subsampled_direction(sim, pos, k, rng)
    l_ba = _subsampled_direction(sim.T, pos, k, rng)
    return (dc.sum_all(l_ab) + dc.sum_all(l_ba)) / (2 * n)


# ------------------------------------------------------------ membership


def default_eligible_edges(h):
    """Non-empty hyperedges that are not self-loops."""
    size = np.bincount(h.edges, minlength=h.num_hyperedges)
    return (size > 0) & ~h.self_loops


def membership_pairs(h, eligible_edges=None):
    """(node, hyperedge) arrays of memberships that take part in the loss.

    Self-loops are always dropped; ``eligible_edges`` (bool per hyperedge)
    further restricts the hyperedge side.
    """
    keep = ~h.self_loops[h.edges]
    if eligible_edges is not None:
        keep &= np.asarray(eligible_edges, bool)[h.edges]
    return h.nodes[keep], h.edges[keep]


def _resample(rng, anchors, pool, forbidden_keys, key_fn, max_rounds=64):
    """Uniform draw from ``pool`` avoiding forbidden (anchor, pick) keys."""
    out = np.full(anchors.size, -1, np.int64)
    todo = np.arange(anchors.size)
    for _ in range(max_rounds):
        if todo.size == 0:
            break
        pick = pool[rng.integers(0, pool.size, size=todo.size)]
        bad = np.isin(key_fn(anchors[todo], pick), forbidden_keys)
        out[todo[~bad]] = pick[~bad]
        todo = todo[bad]
    return out, todo


def sample_membership_negatives(h, nodes, edges, rng, eligible_edges=None):
    """One negative per membership on each side.

    Returns ``(neg_edge, neg_node, valid)``: a hyperedge that does not
    contain the node, a node outside the hyperedge, and a mask of
    memberships for which both negatives exist.
    """
    rng = as_rng(rng)
    n, m = h.num_nodes, h.num_hyperedges
    real = (~h.self_loops[h.edges])
    all_keys = np.unique(h.nodes[real] * m + h.edges[real])
    if eligible_edges is None:
        eligible_edges = default_eligible_edges(h)
    edge_pool = np.flatnonzero(eligible_edges)
    node_pool = np.arange(n)

    # which anchors have any admissible negative at all
    node_deg = np.bincount(h.nodes[real & np.asarray(eligible_edges)[h.edges]], minlength=n)
    edge_size = np.bincount(h.edges[real], minlength=m)
    has_edge_neg = node_deg[nodes] < edge_pool.size
    has_node_neg = edge_size[edges] < n
    valid = has_edge_neg & has_node_neg

    neg_edge = np.full(nodes.size, -1, np.int64)
    neg_node = np.full(nodes.size, -1, np.int64)
    v = np.flatnonzero(valid)
    if v.size and edge_pool.size:
        picks, left = _resample(rng, nodes[v], edge_pool, all_keys, lambda a, b: a * m + b)
        if left.size:
            # rare: anchors incident to almost every hyperedge, fall back to enumeration
            for t in left:
                i = nodes[v[t]]
                mine = set(h.edges[(h.nodes == i) & real].tolist())
                cand = [e for e in edge_pool.tolist() if e not in mine]
                picks[t] = cand[rng.integers(len(cand))]
        neg_edge[v] = picks
        picks, left = _resample(rng, edges[v], node_pool, all_keys, lambda a, b: b * m + a)
        if left.size:
            for t in left:
                j = edges[v[t]]
                mine = set(h.nodes[(h.edges == j) & real].tolist())
                cand = [i for i in range(n) if i not in mine]
                picks[t] = cand[rng.integers(len(cand))]
        neg_node[v] = picks
    skipped = int((~valid).sum())
    if skipped:
        log.warning("skipped %d memberships without a valid negative", skipped)
    return neg_edge, neg_node, valid


def membership_terms(z, y, s, nodes, edges, neg_edge, neg_node, tau):
    """Per-membership node-anchored and hyperedge-anchored InfoNCE terms.

    Each term contrasts the real pair against its single sampled fake pair:
    -log(e^{D+/tau} / (e^{D+/tau} + e^{D-/tau})) with D = sigmoid(z^T S y).
    """
    z, y = dc.as_tensor(z), dc.as_tensor(y)
    zs = z @ s
    zs_i = dc.gather_rows(zs, nodes)
    y_j = dc.gather_rows(y, edges)
    d_pos = dc.sigmoid(dc.row_dot(zs_i, y_j)) / tau
    d_neg_e = dc.sigmoid(dc.row_dot(zs_i, dc.gather_rows(y, neg_edge))) / tau
    d_neg_v = dc.sigmoid(dc.row_dot(dc.gather_rows(zs, neg_node), y_j)) / tau
    k = nodes.size

    def pair(a, b):
        return dc.concat([_col(a), _col(b)], axis=1)

    node_term = dc.logsumexp(pair(d_pos, d_neg_e), axis=1) - d_pos
    edge_term = dc.logsumexp(pair(d_pos, d_neg_v), axis=1) - d_pos
    assert node_term.shape == (k,)
    return node_term, edge_term


def _col(v):
    """(n,) -> (n, 1) as a differentiable reshape."""
    v = dc.as_tensor(v)
    n = v.shape[0]
    return dc._record(v.value.reshape(n, 1), (v,), lambda g: (g.reshape(n),))


def _full_terms(z, y, s, h, nodes, edges, eligible_edges, tau):
    """Membership terms whose denominators hold every admissible negative."""
    n, m = h.num_nodes, h.num_hyperedges
    real = ~h.self_loops[h.edges]
    inc = np.zeros((n, m), bool)
    inc[h.nodes[real], h.edges[real]] = True
    z, y = dc.as_tensor(z), dc.as_tensor(y)
    scores = dc.sigmoid(z @ s @ y.T) / tau  # n x m
    # node-anchored: other eligible hyperedges not containing the node
    allow_e = ~inc[nodes] & np.asarray(eligible_edges, bool)[None, :]
    allow_e[np.arange(nodes.size), edges] = True
    rows = dc.gather_rows(scores, nodes)
    fill = np.where(allow_e, 0.0, _NEG_FILL).astype(rows.dtype)
    pos = dc.row_dot(rows, dc.Tensor(np.eye(m, dtype=rows.dtype)[edges]))
    node_term = dc.logsumexp(rows + fill, axis=1) - pos
    # hyperedge-anchored: nodes outside the hyperedge
    allow_v = ~inc[:, edges].T
    allow_v[np.arange(edges.size), nodes] = True
    cols = dc.gather_rows(scores.T, edges)
    fill = np.where(allow_v, 0.0, _NEG_FILL).astype(cols.dtype)
    edge_term = dc.logsumexp(cols + fill, axis=1) - pos
    return node_term, edge_term


def membership_loss(z1, y2, z2, y1, h, s, tau, rng, eligible_edges=None,
                    mode="sampled", batch=None):
    """Membership-level contrast averaged over both view pairings.

    ``h`` holds the original memberships. ``batch`` optionally restricts the
    loss to a subset of membership positions (already drawn by the caller).
    Returns a scalar Tensor equal to (1 / 2K) sum over memberships of the
    node- and hyperedge-anchored terms of both pairings.
    """
    rng = as_rng(rng)
    if eligible_edges is None:
        eligible_edges = default_eligible_edges(h)
    nodes, edges = membership_pairs(h, eligible_edges)
    if batch is not None:
        nodes, edges = nodes[batch], edges[batch]
    if mode == "full":
        total = None
        for z, y in ((z1, y2), (z2, y1)):
            a, b = _full_terms(z, y, s, h, nodes, edges, eligible_edges, tau)
            part = dc.sum_all(a) + dc.sum_all(b)
            total = part if total is None else total + part
        return total / (2 * max(nodes.size, 1))
    total, count = None, 0
    for z, y in ((z1, y2), (z2, y1)):
        neg_e, neg_v, valid = sample_membership_negatives(h, nodes, edges, rng, eligible_edges)
        if not valid.any():
            continue
        a, b = membership_terms(z, y, s, nodes[valid], edges[valid],
                                neg_e[valid], neg_v[valid], tau)
        part = dc.sum_all(a) + dc.sum_all(b)
        total = part if total is None else total + part
        count = int(valid.sum())
    if total is None:
        raise DegenerateInputError("no membership has an admissible negative")
    return total / (2 * count)


def total_loss(l_n=None, l_g=None, l_m=None, cfg=None):
    """L = L_n + w_g L_g + w_m L_m, skipping disabled or missing terms."""
    cfg = cfg or LossConfig()
    parts = []
    if cfg.use_node and l_n is not None:
        parts.append(l_n)
    if cfg.use_group and l_g is not None:
        parts.append(l_g * cfg.w_g if isinstance(l_g, dc.Tensor) else cfg.w_g * l_g)
    if cfg.use_membership and l_m is not None:
        parts.append(l_m * cfg.w_m if isinstance(l_m, dc.Tensor) else cfg.w_m * l_m)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out
