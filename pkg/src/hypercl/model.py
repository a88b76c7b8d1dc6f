"""Hypergraph encoders, projection heads and the membership discriminator.

Parameter containers are plain dataclasses of :class:`Tensor` leaves; the
forward passes are functions over them so the same code serves training
(inside a tape) and inference (outside one).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import diffcore as dc
from .diffcore import Tensor
from .errors import ShapeError
from .rng import as_rng

PRELU_INIT = 0.25


def glorot_init(shape, rng, dtype=np.float32):
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ShapeError(f"glorot_init needs positive dims, got {shape}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return as_rng(rng).uniform(-bound, bound, size=shape).astype(dtype)


def _weight(shape, rng, dtype, name):
    return Tensor(glorot_init(shape, rng, dtype), requires_grad=True, name=name)


def _bias(n, dtype, name):
    return Tensor(np.zeros(n, dtype=dtype), requires_grad=True, name=name)


def _slope(dtype, name):
    return Tensor(np.full(1, PRELU_INIT, dtype=dtype), requires_grad=True, name=name)


class _Params:
    """Mixin: collect Tensor leaves into a flat name -> Tensor dict."""

    def parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            if isinstance(val, Tensor):
                out[prefix + key] = val
            elif isinstance(val, _Params):
                out.update(val.parameters(f"{prefix}{key}."))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    out.update(item.parameters(f"{prefix}{key}.{i}."))
        return out


# ------------------------------------------------------------ mean pooling


@dataclass(eq=False)
class MeanPoolLayer(_Params):
    theta_e: Tensor
    theta_v: Tensor
    bias_e: Tensor
    bias_v: Tensor
    slope_e: Tensor
    slope_v: Tensor


@dataclass(eq=False)
class MeanPoolEncoderParams(_Params):
    layers: list = field(default_factory=list)
    kind = "mean_pool"

    @classmethod
    def init(cls, in_dim, node_dim, edge_dim, num_layers=1, rng=None, dtype=np.float32):
        rng = as_rng(rng)
        layers, f_in = [], in_dim
        for _ in range(num_layers):
            layers.append(MeanPoolLayer(
                _weight((f_in, edge_dim), rng, dtype, "theta_e"),
                _weight((edge_dim, node_dim), rng, dtype, "theta_v"),
                _bias(edge_dim, dtype, "bias_e"), _bias(node_dim, dtype, "bias_v"),
                _slope(dtype, "slope_e"), _slope(dtype, "slope_v")))
            f_in = node_dim
        return cls(layers)

    @property
    def in_dim(self):
        return self.layers[0].theta_e.shape[0]

    @property
    def node_dim(self):
        return self.layers[-1].theta_v.shape[1]

    @property
    def edge_dim(self):
        return self.layers[-1].theta_e.shape[1]


def encode_mean_pool(params, x, h, activation=True):
    """Returns (P, Q): node and hyperedge embeddings of the last layer.

    Per layer, Q = act(D_E^-1 H^T P Theta_E + b_E) and then
    P = act(D_V^-1 H W Q Theta_V + b_V), starting from P = X.
    ``activation=False`` replaces both PReLUs with the identity.
    """
    p = dc.as_tensor(x)
    if p.shape[1] != params.in_dim:
        raise ShapeError(f"features have {p.shape[1]} columns, encoder expects {params.in_dim}")
    q = None
    for layer in params.layers:
        # aggregation is linear, so apply the weight on the side with fewer rows
        q = dc.incidence_aggregate(p @ layer.theta_e, h, "node_to_edge") + layer.bias_e
        if activation:
            q = dc.prelu(q, layer.slope_e)
        p = dc.incidence_aggregate(q, h, "edge_to_node") @ layer.theta_v + layer.bias_v
        if activation:
            p = dc.prelu(p, layer.slope_v)
    return p, q


# ------------------------------------------------------------ HGNN


@dataclass(eq=False)
class HgnnLayer(_Params):
    theta: Tensor
    bias: Tensor
    slope: Tensor


@dataclass(eq=False)
class HgnnEncoderParams(_Params):
    layers: list = field(default_factory=list)
    kind = "hgnn"

    @classmethod
    def init(cls, in_dim, node_dim, num_layers=1, rng=None, dtype=np.float32):
        rng = as_rng(rng)
        layers, f_in = [], in_dim
        for _ in range(num_layers):
            layers.append(HgnnLayer(_weight((f_in, node_dim), rng, dtype, "theta"),
                                    _bias(node_dim, dtype, "bias"),
                                    _slope(dtype, "slope")))
            f_in = node_dim
        return cls(layers)

    @property
    def in_dim(self):
        return self.layers[0].theta.shape[0]

    @property
    def node_dim(self):
        return self.layers[-1].theta.shape[1]

    @property
    def edge_dim(self):
        # hyperedge rows carry the input width of the last layer
        return self.layers[-1].theta.shape[0]


def _hgnn_operators(h):
    deg = h.degrees
    d = deg.node_degrees
    inv_sqrt_d = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    delta = deg.hyperedge_degrees.astype(np.float64)
    inv_delta = np.where(delta > 0, 1.0 / np.where(delta > 0, delta, 1.0), 0.0)
    gather = (h.node_to_edge @ sp.diags(inv_sqrt_d)).tocsr()
    scatter = (sp.diags(inv_sqrt_d) @ h.edge_to_node @ sp.diags(inv_delta)).tocsr()
    gather.sort_indices()
    scatter.sort_indices()
    return gather, scatter


def encode_hgnn(params, x, h, activation=True):
    """HGNN layers: q_j = sum_{i in e_j} p_i / sqrt(d_i), then
    p_i = act(d_i^-1/2 sum_{j ni i} w_j q_j Theta / delta_j + b).

    Zero-degree nodes get zero aggregates. Returns (P, Q) of the last layer.
    """
    p = dc.as_tensor(x)
    if p.shape[1] != params.in_dim:
        raise ShapeError(f"features have {p.shape[1]} columns, encoder expects {params.in_dim}")
    gather, scatter = _hgnn_operators(h)
    q = None
    for layer in params.layers:
        q = dc.spmm(gather, p)
        p = dc.spmm(scatter, q) @ layer.theta + layer.bias
        if activation:
            p = dc.prelu(p, layer.slope)
    return p, q


def encode(params, x, h):
    if params.kind == "hgnn":
        return encode_hgnn(params, x, h)
    return encode_mean_pool(params, x, h)


# ------------------------------------------------------------ heads


@dataclass(eq=False)
class Head(_Params):
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, dim, hidden, rng, dtype=np.float32):
        return cls(_weight((dim, hidden), rng, dtype, "w1"), _bias(hidden, dtype, "b1"),
                   _weight((hidden, dim), rng, dtype, "w2"), _bias(dim, dtype, "b2"))

    def __call__(self, x):
        return dc.elu(x @ self.w1 + self.b1) @ self.w2 + self.b2


@dataclass(eq=False)
class ProjectionParams(_Params):
    node: Head
    edge: Head

    @classmethod
    def init(cls, node_dim, edge_dim, hidden, rng=None, dtype=np.float32):
        rng = as_rng(rng)
        return cls(Head.init(node_dim, hidden, rng, dtype), Head.init(edge_dim, hidden, rng, dtype))


def project(params, p, q):
    """Two-layer ELU MLP heads: Z from node rows, Y from hyperedge rows."""
    return params.node(p), params.edge(q)


@dataclass(eq=False)
class DiscriminatorParams(_Params):
    s: Tensor

    @classmethod
    def init(cls, node_dim, edge_dim, rng=None, dtype=np.float32):
        return cls(_weight((node_dim, edge_dim), as_rng(rng), dtype, "s"))


def discriminate(params, z, y):
    """sigmoid(z^T S y) for one pair of rows, or row-paired matrices."""
    z, y = np.asarray(z), np.asarray(y)
    s = params.s.value if isinstance(params, DiscriminatorParams) else np.asarray(params)
    if z.ndim == 1:
        return float(dc.sigmoid(z @ s @ y).value)
    return dc.sigmoid(dc.bilinear(z, s, y)).value


# ------------------------------------------------------------ bundle


@dataclass(eq=False)
class Model(_Params):
    encoder: object
    projection: ProjectionParams
    discriminator: DiscriminatorParams

    @classmethod
    def init(cls, in_dim, node_dim, edge_dim, hidden, encoder_kind="mean_pool",
             num_layers=1, rng=None, dtype=np.float32):
        rng = as_rng(rng)
        if encoder_kind == "hgnn":
            enc = HgnnEncoderParams.init(in_dim, node_dim, num_layers, rng, dtype)
        elif encoder_kind == "mean_pool":
            enc = MeanPoolEncoderParams.init(in_dim, node_dim, edge_dim, num_layers, rng, dtype)
        else:
            raise ValueError(f"unknown encoder kind {encoder_kind!r}")
        proj = ProjectionParams.init(enc.node_dim, enc.edge_dim, hidden, rng, dtype)
        disc = DiscriminatorParams.init(enc.node_dim, enc.edge_dim, rng, dtype)
        return cls(enc, proj, disc)

    def decay_mask(self):
        """Names of parameters that receive weight decay (matrices only)."""
        return {k for k, v in self.parameters().items() if v.value.ndim == 2}
