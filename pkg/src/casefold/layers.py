"""Layers for the truecaser and tagger models: embedding lookup, LSTM cell,
stacked bidirectional LSTM, dense projection, inverted dropout.

Gate order inside every 4H-wide LSTM weight block is (input, forget,
cell-candidate, output). Parameter init is uniform in
[-sqrt(1/fan_in), +sqrt(1/fan_in)] except the forget-gate bias, which starts
at 1.0. All batched sequence ops take a [B, T] float mask; padded steps keep
the previous hidden/cell state so batch size never changes a live position's
result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from casefold import autodiff as ad
from casefold.autodiff import Parameter, ShapeMismatch, Value


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(1.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class LstmCellParams:
    """One direction of one LSTM layer: [4H x I] input weights, [4H x H]
    recurrent weights, [4H] biases."""

    w_x: Parameter
    w_h: Parameter
    b: Parameter

    @property
    def hidden_size(self) -> int:
        return self.w_h.data.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_x.data.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, input_size: int, hidden_size: int, name: str) -> "LstmCellParams":
        h = hidden_size
        w_x = uniform_init(rng, (4 * h, input_size), input_size)
        w_h = uniform_init(rng, (4 * h, h), h)
        b = np.zeros(4 * h)
        b[h: 2 * h] = 1.0  # forget gate
        return cls(
            w_x=Parameter(w_x, f"{name}.w_x"),
            w_h=Parameter(w_h, f"{name}.w_h"),
            b=Parameter(b, f"{name}.b"),
        )

    def parameters(self) -> list[Parameter]:
        return [self.w_x, self.w_h, self.b]


def lstm_cell(x: Value, h_prev: Value, c_prev: Value, p: LstmCellParams) -> tuple[Value, Value]:
    """One LSTM step. Accepts [I]/[H] vectors or [B, I]/[B, H] batches."""
    h = p.hidden_size
    if x.shape[-1] != p.input_size or h_prev.shape[-1] != h or c_prev.shape[-1] != h:
        raise ShapeMismatch(
            f"lstm_cell: x{x.shape} h{h_prev.shape} c{c_prev.shape} vs "
            f"I={p.input_size} H={h}"
        )
    z = ad.matmul(x, ad.transpose(p.w_x)) + ad.matmul(h_prev, ad.transpose(p.w_h)) + p.b
    return _gates_step(z, c_prev, h)


def _gates_step(z: Value, c_prev: Value, h: int) -> tuple[Value, Value]:
    pre = (slice(None),) * (z.ndim - 1)
    i = ad.sigmoid(z[pre + (slice(0, h),)])
    f = ad.sigmoid(z[pre + (slice(h, 2 * h),)])
    g = ad.tanh(z[pre + (slice(2 * h, 3 * h),)])
    o = ad.sigmoid(z[pre + (slice(3 * h, 4 * h),)])
    c = f * c_prev + i * g
    h_out = o * ad.tanh(c)
    return h_out, c


def dropout(x: Value, rate: float, train: bool, rng: np.random.Generator | None) -> Value:
    """Inverted dropout: identity in eval mode, expectation-preserving in train."""
    if not train or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return x * keep


def _direction_pass(
    x_proj: Value,
    p: LstmCellParams,
    mask: np.ndarray,
    reverse: bool,
    recurrent_dropout: float,
    train: bool,
    rng: np.random.Generator | None,
) -> list[Value]:
    """Scan one direction. x_proj is the precomputed [B, T, 4H] input
    projection; returns per-timestep hidden states in original order."""
    b, t_max, _ = x_proj.shape
    h = p.hidden_size
    w_h_t = ad.transpose(p.w_h)
    h_t = Value(np.zeros((b, h)))
    c_t = Value(np.zeros((b, h)))
    steps = range(t_max - 1, -1, -1) if reverse else range(t_max)
    outputs: dict[int, Value] = {}
    for t in steps:
        h_in = h_t
        if train and recurrent_dropout > 0.0:
            keep = (rng.random((b, h)) >= recurrent_dropout).astype(np.float64)
            h_in = h_t * (keep / (1.0 - recurrent_dropout))
        z = x_proj[:, t, :] + ad.matmul(h_in, w_h_t) + p.b
        h_new, c_new = _gates_step(z, c_t, h)
        m = mask[:, t:t + 1]
        if m.all():
            h_t, c_t = h_new, c_new
        else:
            h_t = h_new * m + h_t * (1.0 - m)
            c_t = c_new * m + c_t * (1.0 - m)
        outputs[t] = h_t
    return [outputs[t] for t in range(t_max)]


def bilstm(
    seq: Value,
    layers: list[tuple[LstmCellParams, LstmCellParams]],
    dropout_rate: float = 0.0,
    recurrent_dropout_rate: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> Value:
    """Stacked bidirectional LSTM.

    seq is [T, I] or [B, T, I]; each layer is a (forward, backward) parameter
    pair and emits concat(h_fwd, h_bwd) per step, which feeds the next layer.
    Dropout hits layer inputs, recurrent dropout hits h_prev with a fresh
    mask per timestep; both only in train mode.
    """
    if not layers:
        raise ValueError("bilstm needs at least one layer")
    if not (0.0 <= dropout_rate < 1.0 and 0.0 <= recurrent_dropout_rate < 1.0):
        raise ValueError("dropout rates must be in [0, 1)")
    squeeze = seq.ndim == 2
    if squeeze:
        seq = ad.reshape(seq, (1,) + seq.shape)
    b, t_max, _ = seq.shape
    if mask is None:
        mask = np.ones((b, t_max))
    mask = np.asarray(mask, dtype=np.float64)

    out = seq
    for fwd, bwd in layers:
        out = dropout(out, dropout_rate, train, rng)
        i_size = fwd.input_size
        if out.shape[-1] != i_size:
            raise ShapeMismatch(f"bilstm layer expects input {i_size}, got {out.shape[-1]}")
        flat = ad.reshape(out, (b * t_max, i_size))
        proj_f = ad.reshape(ad.matmul(flat, ad.transpose(fwd.w_x)), (b, t_max, 4 * fwd.hidden_size))
        proj_b = ad.reshape(ad.matmul(flat, ad.transpose(bwd.w_x)), (b, t_max, 4 * bwd.hidden_size))
        hs_f = _direction_pass(proj_f, fwd, mask, False, recurrent_dropout_rate, train, rng)
        hs_b = _direction_pass(proj_b, bwd, mask, True, recurrent_dropout_rate, train, rng)
        per_step = [ad.concat([hf, hb], axis=-1) for hf, hb in zip(hs_f, hs_b)]
        out = ad.stack(per_step, axis=1)
    if squeeze:
        out = ad.reshape(out, out.shape[1:])
    return out


def embedding_lookup(table: Value, ids: np.ndarray) -> Value:
    """Rows of the embedding table selected by integer ids."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.min() < 0 or ids.max() >= table.shape[0]:
        raise IndexError(f"embedding ids outside [0, {table.shape[0]})")
    return table[ids]


def dense(x: Value, w: Parameter, b: Parameter) -> Value:
    """Affine map on the last axis: x [..., D] @ w [D, C] + b [C]."""
    lead = x.shape[:-1]
    d = x.shape[-1]
    if w.shape[0] != d:
        raise ShapeMismatch(f"dense: input {d} vs weight {w.shape}")
    flat = ad.reshape(x, (int(np.prod(lead)) if lead else 1, d))
    out = ad.matmul(flat, w) + b
    return ad.reshape(out, lead + (w.shape[1],))
