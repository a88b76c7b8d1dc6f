"""Stochastic masking augmentations that produce contrastive views."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .rng import as_rng


@dataclass(frozen=True)
class AugmentConfig:
    p_f: float = 0.0  # feature-column mask rate
    p_m: float = 0.0  # membership mask rate
    p_n: float = 0.0  # node mask rate
    p_e: float = 0.0  # hyperedge mask rate

    def __post_init__(self):
        for name in ("p_f", "p_m", "p_n", "p_e"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True, eq=False)
class View:
    features: np.ndarray
    hypergraph: object


def _keep(rng, size, p):
    # Bernoulli(1 - p) keep mask
    return rng.random(size) >= p


def mask_features(x, p_f, rng):
    """Zero the same randomly chosen feature columns in every row."""
    if p_f == 0:
        return x
    keep = _keep(as_rng(rng), x.shape[1], p_f)
    return np.where(keep, x, 0).astype(x.dtype, copy=False)


def mask_memberships(h, p_m, rng):
    """Drop each membership independently with probability ``p_m``."""
    if p_m == 0:
        return h
    return h.with_memberships(_keep(as_rng(rng), h.num_memberships, p_m))


def mask_nodes(h, p_n, rng):
    """Remove every membership of each node masked with probability ``p_n``."""
    if p_n == 0:
        return h
    keep_node = _keep(as_rng(rng), h.num_nodes, p_n)
    return h.with_memberships(keep_node[h.nodes])


def mask_hyperedges(h, p_e, rng):
    """Remove every membership of each hyperedge masked with probability ``p_e``."""
    if p_e == 0:
        return h
    keep_edge = _keep(as_rng(rng), h.num_hyperedges, p_e)
    return h.with_memberships(keep_edge[h.edges])


def make_view(d, cfg, rng):
    rng = as_rng(rng)
    x = mask_features(d.features, cfg.p_f, rng)
    h = mask_memberships(d.hypergraph, cfg.p_m, rng)
    h = mask_nodes(h, cfg.p_n, rng)
    h = mask_hyperedges(h, cfg.p_e, rng)
    return View(x, h)


def make_views(d, cfg, rng):
    """Two independently corrupted views of ``d`` with the same rates.

    ``rng`` is either one generator, drawn from sequentially, or a pair of
    generators, one per view.
    """
    if isinstance(rng, (tuple, list)):
        r1, r2 = (as_rng(r) for r in rng)
    else:
        r1 = r2 = as_rng(rng)
    return make_view(d, cfg, r1), make_view(d, cfg, r2)
