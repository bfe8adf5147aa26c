"""Label graph layers: a learnable adjacency over the label set, multi-head
attention aggregation, and a plain graph-convolution variant for ablations.

The graph is dense: with the adjacency itself learnable there is no sparsity
structure to exploit, so every label attends over all labels and the
adjacency acts as a multiplicative gate on the normalized attention weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .corpus import CooccurrenceStats

ADJACENCY_SCHEMES = ("identity", "xavier", "cooccurrence")


@dataclass
class AdjacencyMatrix:
    matrix: dc.Tensor  # n x n
    init_scheme: str

    @property
    def n(self) -> int:
        return self.matrix.data.shape[0]

    @property
    def trainable(self) -> bool:
        return self.matrix.requires_grad


def init_adjacency(
    scheme: str,
    n: int,
    stats: CooccurrenceStats | None = None,
    rng: np.random.Generator | None = None,
    trainable: bool = True,
) -> AdjacencyMatrix:
    """identity -> I; xavier -> uniform within +-sqrt(6)/sqrt(2n);
    cooccurrence -> pair counts row-normalized by label frequency (diagonal 1)."""
    if scheme == "identity":
        a = np.eye(n)
    elif scheme == "xavier":
        if rng is None:
            raise ValueError("xavier adjacency initialization needs an rng")
        limit = np.sqrt(6.0) / np.sqrt(n + n)
        a = rng.uniform(-limit, limit, (n, n))
    elif scheme == "cooccurrence":
        if stats is None:
            raise ValueError("cooccurrence adjacency initialization needs corpus statistics")
        if stats.n != n:
            raise ValueError(f"statistics cover {stats.n} labels, adjacency needs {n}")
        a = stats.counts.astype(np.float64) / stats.freq.astype(np.float64)[:, None]
    else:
        raise ValueError(f"unknown adjacency scheme {scheme!r}, expected one of {ADJACENCY_SCHEMES}")
    t = dc.param(a) if trainable else dc.tensor(a)
    return AdjacencyMatrix(t, scheme)


@dataclass
class GatHeadParams:
    w: dc.Tensor  # d_in x d_head projection
    a: dc.Tensor  # 2*d_head x 1 attention vector (source half, target half)


@dataclass
class GatLayerParams:
    heads: list[GatHeadParams]
    d_in: int
    d_out: int  # equals d_head: head messages are averaged, not concatenated

    @property
    def n_heads(self) -> int:
        return len(self.heads)


@dataclass
class GcnLayerParams:
    w: dc.Tensor  # d_in x d_out
    d_in: int
    d_out: int


def _xavier(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0) / np.sqrt(fan_in + fan_out)
    return rng.uniform(-limit, limit, shape)


def init_gat_stack(dims, n_heads: int, rng: np.random.Generator) -> list[GatLayerParams]:
    """Layer dims chain d0 -> d1 -> ... -> dL; per-layer, per-head parameters."""
    if n_heads < 1:
        raise ValueError(f"need at least one attention head, got {n_heads}")
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        heads = [
            GatHeadParams(
                w=dc.param(_xavier(rng, d_in, d_out, (d_in, d_out))),
                a=dc.param(_xavier(rng, 2 * d_out, 1, (2 * d_out, 1))),
            )
            for _ in range(n_heads)
        ]
        layers.append(GatLayerParams(heads, d_in, d_out))
    return layers


def init_gcn_stack(dims, rng: np.random.Generator) -> list[GcnLayerParams]:
    return [
        GcnLayerParams(dc.param(_xavier(rng, d_in, d_out, (d_in, d_out))), d_in, d_out)
        for d_in, d_out in zip(dims[:-1], dims[1:])
    ]


def _scores_from_projection(hw: dc.Tensor, a: dc.Tensor) -> dc.Tensor:
    """Pairwise raw scores e[i][j] = relu(a . [hw_i || hw_j]) for all pairs.

    The concatenated form splits into a source term and a target term, so the
    full matrix is a column of source scores plus a row of target scores.
    """
    n, d_head = hw.data.shape
    u = dc.matmul(hw, dc.slice_range(a, 0, d_head))  # n x 1
    v = dc.matmul(hw, dc.slice_range(a, d_head, 2 * d_head))  # n x 1
    ones_row = dc.tensor(np.ones((1, n)))
    ones_col = dc.tensor(np.ones((n, 1)))
    raw = dc.add(dc.matmul(u, ones_row), dc.matmul(ones_col, dc.transpose(v)))
    return dc.relu(raw)


def attention_scores(h: dc.Tensor, layer: GatLayerParams, head: int) -> dc.Tensor:
    """Raw n x n scores for one head over node features h."""
    p = layer.heads[head]
    return _scores_from_projection(dc.matmul(h, p.w), p.a)


def normalize_and_mask(e: dc.Tensor, adjacency: dc.Tensor, use_softmax: bool = True) -> dc.Tensor:
    """Softmax the raw scores over each row's support (the adjacency's nonzero
    pattern), then scale elementwise by the adjacency values. With the softmax
    disabled the raw relu scores are gated directly."""
    if use_softmax:
        weights = dc.softmax_rows(e, mask=adjacency.data != 0)
    else:
        weights = e
    return dc.mul(adjacency, weights)


def gat_layer_forward(
    h: dc.Tensor,
    adjacency: dc.Tensor,
    layer: GatLayerParams,
    use_softmax: bool = True,
) -> dc.Tensor:
    """Mean over heads of attention-weighted neighbor messages, tanh output."""
    total = None
    for p in layer.heads:
        hw = dc.matmul(h, p.w)
        alpha = normalize_and_mask(_scores_from_projection(hw, p.a), adjacency, use_softmax)
        msg = dc.matmul(alpha, hw)
        total = msg if total is None else dc.add(total, msg)
    return dc.tanh(dc.mul(total, 1.0 / layer.n_heads))


def gcn_layer_forward(h: dc.Tensor, adjacency: dc.Tensor, w: dc.Tensor) -> dc.Tensor:
    """Adjacency-weighted sum of projected neighbors: tanh(A h w)."""
    return dc.tanh(dc.matmul(dc.matmul(adjacency, h), w))


def stack_forward(
    m: dc.Tensor,
    adjacency: dc.Tensor,
    layers,
    mode: str = "gat",
    use_softmax: bool = True,
) -> dc.Tensor:
    """Apply the layer cascade to the label embedding matrix; weights unshared."""
    h = m
    for layer in layers:
        if h.data.shape[1] != layer.d_in:
            raise ValueError(
                f"layer expects input dim {layer.d_in}, got features of dim {h.data.shape[1]}"
            )
        if mode == "gat":
            h = gat_layer_forward(h, adjacency, layer, use_softmax)
        elif mode == "gcn":
            h = gcn_layer_forward(h, adjacency, layer.w)
        else:
            raise ValueError(f"unknown layer mode {mode!r}")
    return h
