"""Bidirectional LSTM sentence encoder.

Two equivalent execution paths exist. The "fused" path runs each direction
as a single graph node backed by the kernel backend and is the default; the
"composed" path chains per-timestep primitive ops and serves as the slow,
independently differentiated reference. Their agreement is asserted in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc

GATE_ORDER = "ifgo"  # input, forget, candidate, output along the 4h axis


@dataclass
class DirectionParams:
    wx: dc.Tensor  # 4h x d_in
    wh: dc.Tensor  # 4h x h
    b: dc.Tensor  # 4h

    @property
    def hidden_size(self) -> int:
        return self.wh.data.shape[1]


@dataclass
class EncoderParams:
    fwd: DirectionParams
    bwd: DirectionParams
    input_dim: int
    hidden_size: int

    def named_tensors(self) -> dict[str, dc.Tensor]:
        return {
            "encoder.fwd.wx": self.fwd.wx,
            "encoder.fwd.wh": self.fwd.wh,
            "encoder.fwd.b": self.fwd.b,
            "encoder.bwd.wx": self.bwd.wx,
            "encoder.bwd.wh": self.bwd.wh,
            "encoder.bwd.b": self.bwd.b,
        }


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0) / np.sqrt(fan_in + fan_out)
    return rng.uniform(-limit, limit, shape)


def _init_direction(d_in: int, h: int, rng: np.random.Generator) -> DirectionParams:
    wx = _xavier(rng, d_in, 4 * h, (4 * h, d_in))
    wh = _xavier(rng, h, 4 * h, (4 * h, h))
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0  # forget-gate bias
    return DirectionParams(dc.param(wx), dc.param(wh), dc.param(b))


def init_encoder_params(input_dim: int, hidden_size: int, rng: np.random.Generator) -> EncoderParams:
    """Independent forward/backward parameter sets, Xavier weights, forget bias 1."""
    return EncoderParams(
        fwd=_init_direction(input_dim, hidden_size, rng),
        bwd=_init_direction(input_dim, hidden_size, rng),
        input_dim=input_dim,
        hidden_size=hidden_size,
    )


def lstm_step(
    x_t: dc.Tensor, h_prev: dc.Tensor, c_prev: dc.Tensor, p: DirectionParams
) -> tuple[dc.Tensor, dc.Tensor]:
    """One cell update from primitive ops: sigmoid gates, tanh squashing."""
    h = p.hidden_size
    z = dc.add(dc.add(dc.matmul(p.wx, x_t), dc.matmul(p.wh, h_prev)), p.b)
    gate_i = dc.sigmoid(dc.slice_range(z, 0, h))
    gate_f = dc.sigmoid(dc.slice_range(z, h, 2 * h))
    cand = dc.tanh(dc.slice_range(z, 2 * h, 3 * h))
    gate_o = dc.sigmoid(dc.slice_range(z, 3 * h, 4 * h))
    c_t = dc.add(dc.mul(gate_f, c_prev), dc.mul(gate_i, cand))
    h_t = dc.mul(gate_o, dc.tanh(c_t))
    return h_t, c_t


@dataclass
class EncodedSequence:
    feature: dc.Tensor  # length 2h
    token_states: np.ndarray  # T x 2h concatenated per-token states (diagnostics)


def _composed_direction(x: dc.Tensor, p: DirectionParams, reverse: bool) -> list[dc.Tensor]:
    T = x.data.shape[0]
    h = p.hidden_size
    h_t = dc.tensor(np.zeros(h))
    c_t = dc.tensor(np.zeros(h))
    states: list[dc.Tensor | None] = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h_t, c_t = lstm_step(dc.row(x, t), h_t, c_t, p)
        states[t] = h_t
    return states  # type: ignore[return-value]


def encode_sequence(
    x: dc.Tensor,
    params: EncoderParams,
    pooling: str = "last",
    backend: str = "fused",
) -> EncodedSequence:
    """Run both directions over a T x d_in sequence and pool a feature vector.

    pooling "last" concatenates the two final hidden states (dimension 2h);
    pooling "mean" averages the per-token concatenated states instead.
    """
    T = x.data.shape[0]
    if T < 1:
        raise ValueError("encode_sequence: empty sequence")
    if pooling not in ("last", "mean"):
        raise ValueError(f"unknown pooling mode {pooling!r}")
    if backend == "fused":
        h_fwd = dc.lstm_seq(x, params.fwd.wx, params.fwd.wh, params.fwd.b, reverse=False)
        h_bwd = dc.lstm_seq(x, params.bwd.wx, params.bwd.wh, params.bwd.b, reverse=True)
        cat = dc.concat([h_fwd, h_bwd], axis=1)
        if pooling == "last":
            feature = dc.concat([dc.row(h_fwd, T - 1), dc.row(h_bwd, 0)])
        else:
            feature = dc.reduce_mean(cat, axis=0)
        return EncodedSequence(feature, cat.data.copy())
    if backend == "composed":
        states_f = _composed_direction(x, params.fwd, reverse=False)
        states_b = _composed_direction(x, params.bwd, reverse=True)
        if pooling == "last":
            feature = dc.concat([states_f[T - 1], states_b[0]])
        else:
            acc = dc.concat([states_f[0], states_b[0]])
            for t in range(1, T):
                acc = dc.add(acc, dc.concat([states_f[t], states_b[t]]))
            feature = dc.mul(acc, 1.0 / T)
        token_states = np.stack(
            [np.concatenate([states_f[t].data, states_b[t].data]) for t in range(T)]
        )
        return EncodedSequence(feature, token_states)
    raise ValueError(f"unknown encoder backend {backend!r}")
