"""Full-batch self-supervised training loop and embedding extraction."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from . import loss as L
from .augment import AugmentConfig, make_view
from .errors import ConfigurationError, NumericalError
from .hgraph import add_self_loops
from .model import Model, encode, project
from .optim import AdamW
from .rng import INIT, MEMBERSHIP_BATCH, NEGATIVES, VIEW_1, VIEW_2, child_rng

log = logging.getLogger(__name__)

_DTYPES = {32: np.float32, 64: np.float64}


@dataclass(frozen=True)
class TrainConfig:
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    loss: L.LossConfig = field(default_factory=L.LossConfig)
    learning_rate: float = 1e-3
    epochs: int = 100
    node_emb_dim: int = 128
    hyperedge_emb_dim: int = 128
    projection_hidden_dim: int = 128
    encoder_kind: str = "mean_pool"
    encoder_layers: int = 1
    add_self_loops: bool = True
    seed: int = 0
    precision: int = 32
    membership_batch: int = None
    weight_decay: float = 1e-5

    def __post_init__(self):
        for name in ("node_emb_dim", "hyperedge_emb_dim", "projection_hidden_dim",
                     "encoder_layers", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.encoder_kind not in ("mean_pool", "hgnn"):
            raise ConfigurationError(f"unknown encoder_kind {self.encoder_kind!r}")
        if self.precision not in _DTYPES:
            raise ConfigurationError("precision must be 32 or 64")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if self.membership_batch is not None and self.membership_batch < 1:
            raise ConfigurationError("membership_batch must be >= 1")

    @property
    def dtype(self):
        return _DTYPES[self.precision]


@dataclass(eq=False)
class TrainedModel:
    model: Model
    config: TrainConfig
    loss_trace: list = field(default_factory=list)
    component_trace: dict = field(default_factory=dict)
    epoch_ms: list = field(default_factory=list)

    @property
    def mean_epoch_ms(self):
        return epoch_timer(self.epoch_ms)


def epoch_timer(samples):
    """Mean of per-epoch wall-clock samples in milliseconds (0 if none)."""
    return float(np.mean(samples)) if len(samples) else 0.0


def _init_model(in_dim, cfg):
    return Model.init(in_dim, cfg.node_emb_dim, cfg.hyperedge_emb_dim,
                      cfg.projection_hidden_dim, cfg.encoder_kind, cfg.encoder_layers,
                      rng=child_rng(cfg.seed, 0, INIT), dtype=cfg.dtype)


def random_init(d, cfg):
    """An untrained model, the Random-Init baseline."""
    return TrainedModel(_init_model(d.features.shape[1], cfg), cfg)


def _encoder_graph(h, cfg):
    return add_self_loops(h) if cfg.add_self_loops else h


def _nonempty(h):
    return np.bincount(h.edges, minlength=h.num_hyperedges) > 0


def loss_components(model, d, cfg, epoch):
    """Forward pass of one epoch. Returns a dict of scalar Tensors."""
    lc = cfg.loss
    x = d.features.astype(cfg.dtype, copy=False)
    base = type(d)(d.hypergraph, x, d.labels, d.num_classes, d.class_names, d.name)
    v1 = make_view(base, cfg.augment, child_rng(cfg.seed, epoch, VIEW_1))
    v2 = make_view(base, cfg.augment, child_rng(cfg.seed, epoch, VIEW_2))
    h1, h2 = _encoder_graph(v1.hypergraph, cfg), _encoder_graph(v2.hypergraph, cfg)
    p1, q1 = encode(model.encoder, v1.features, h1)
    p2, q2 = encode(model.encoder, v2.features, h2)
    z1, y1 = project(model.projection, p1, q1)
    z2, y2 = project(model.projection, p2, q2)
    rng = child_rng(cfg.seed, epoch, NEGATIVES)

    out = {}
    if lc.use_node:
        if lc.negatives_k is None:
            out["node"] = L.node_loss(z1, z2, lc.tau_n)
        else:
            out["node"] = L.subsampled_contrast(z1, z2, lc.tau_n, lc.negatives_k, rng)
    if lc.use_group:
        eligible = _nonempty(h1) & _nonempty(h2) & ~h1.self_loops
        if lc.negatives_k is None:
            out["group"] = L.group_loss(y1, y2, lc.tau_g, eligible)
        else:
            k = min(lc.negatives_k, int(eligible.sum()) - 1)
            out["group"] = L.subsampled_contrast(y1, y2, lc.tau_g, k, rng, eligible)
    if lc.use_membership:
        h = d.hypergraph
        batch = None
        if cfg.membership_batch is not None:
            nodes, _ = L.membership_pairs(h, L.default_eligible_edges(h))
            if cfg.membership_batch < nodes.size:
                brng = child_rng(cfg.seed, epoch, MEMBERSHIP_BATCH)
                batch = np.sort(brng.choice(nodes.size, cfg.membership_batch, replace=False))
        out["membership"] = L.membership_loss(
            z1, y2, z2, y1, h, model.discriminator.s, lc.tau_m, rng,
            mode=lc.membership_mode, batch=batch)
    out["total"] = L.total_loss(out.get("node"), out.get("group"), out.get("membership"), lc)
    return out


def train(d, cfg, model=None):
    """Train on the whole hypergraph, one AdamW step per epoch.

    Every random draw of epoch ``t`` comes from a stream keyed by
    ``(seed, t, purpose)``, so a run is reproducible from its config.
    """
    if model is None:
        model = _init_model(d.features.shape[1], cfg)
    params = model.parameters()
    opt = AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay,
                decay=model.decay_mask())
    result = TrainedModel(model, cfg)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        opt.zero_grad()
        with dc.Tape(check_finite=False) as tape:
            parts = loss_components(model, d, cfg, epoch)
        values = {k: float(v.value) for k, v in parts.items()}
        if not all(np.isfinite(list(values.values()))):
            raise NumericalError(f"non-finite loss at epoch {epoch}: {values}")
        tape.backward(parts["total"])
        opt.step()
        result.epoch_ms.append((time.perf_counter() - t0) * 1e3)
        result.loss_trace.append(values["total"])
        for k, v in values.items():
            if k != "total":
                result.component_trace.setdefault(k, []).append(v)
        log.debug("epoch %d loss %.6f", epoch, values["total"])
    return result


def embed(m, d):
    """Node embeddings P from the encoder on the unaugmented hypergraph."""
    cfg = m.config
    h = _encoder_graph(d.hypergraph, cfg)
    x = d.features.astype(cfg.dtype, copy=False)
    p, _ = encode(m.model.encoder, x, h)
    return np.array(p.value, copy=True)
