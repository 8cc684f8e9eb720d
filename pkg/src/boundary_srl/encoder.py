"""Stacked BiLSTM encoder with multi-hop self-attention and fusion.

The token matrix runs through L bidirectional LSTM layers (zero initial
states, forget-gate bias 1.0). Attention computes r softmax-normalized
weightings over the positions, each yielding one weighted sum of hidden
states; fusion appends the flattened attention summary to every position.

Dropout placement in training mode: each layer's input matrix (a fresh mask
per element, hence per timestep) and each layer's output matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import numerics
from .errors import ShapeError
from .numerics import GradientTape, Tensor

# gate column order inside the fused (in, 4d) projections
_GATES = ("input", "forget", "cell", "output")


@dataclass
class LstmDirection:
    wx: Tensor  # (input_width, 4d)
    wh: Tensor  # (d, 4d)
    b: Tensor  # (1, 4d)


@dataclass
class LstmLayer:
    fwd: LstmDirection
    bwd: LstmDirection


@dataclass
class BiLstmStack:
    layers: list
    hidden: int
    keep_prob: float


@dataclass
class AttentionParams:
    w1: Tensor  # (k, 2d)
    w2: Tensor  # (r, k)

    @property
    def hops(self) -> int:
        return self.w2.shape[0]


@dataclass
class EncodedSequence:
    hidden: Tensor  # (n, 2d)
    weights: Tensor | None  # (r, n), rows sum to 1
    summary: Tensor | None  # (r, 2d)
    fused: Tensor  # (n, 2d) or (n, 2d(1+r))


def _init_direction(input_width: int, hidden: int, rng) -> LstmDirection:
    wx = numerics.uniform((input_width, 4 * hidden), rng)
    wh = numerics.uniform((hidden, 4 * hidden), rng)
    b = numerics.uniform((1, 4 * hidden), rng)
    b.data[:, hidden : 2 * hidden] = 1.0  # forget gate opens by default
    return LstmDirection(wx=wx, wh=wh, b=b)


def init_stack(input_width: int, hidden: int, num_layers: int, keep_prob: float, rng) -> BiLstmStack:
    layers = []
    width = input_width
    for _ in range(num_layers):
        layers.append(
            LstmLayer(
                fwd=_init_direction(width, hidden, rng),
                bwd=_init_direction(width, hidden, rng),
            )
        )
        width = 2 * hidden
    return BiLstmStack(layers=layers, hidden=hidden, keep_prob=keep_prob)


def init_attention(hidden: int, attn_dim: int, hops: int, rng) -> AttentionParams:
    return AttentionParams(
        w1=numerics.uniform((attn_dim, 2 * hidden), rng),
        w2=numerics.uniform((hops, attn_dim), rng),
    )


def bilstm_encode(
    embeddings: Tensor,
    stack: BiLstmStack,
    rng=None,
    training: bool = False,
    tape: GradientTape | None = None,
) -> Tensor:
    """Encode an (n, D) token matrix into (n, 2d) contextual states."""
    x = embeddings
    if x.shape[0] < 1:
        raise ShapeError("cannot encode an empty sequence")
    for layer in stack.layers:
        if x.shape[1] != layer.fwd.wx.shape[0]:
            raise ShapeError(
                f"layer expects input width {layer.fwd.wx.shape[0]}, got {x.shape[1]}"
            )
        x = numerics.dropout(x, stack.keep_prob, rng, training, tape)
        halves = []
        for direction, reverse in ((layer.fwd, False), (layer.bwd, True)):
            pre = numerics.add(numerics.matmul(x, direction.wx, tape), direction.b, tape)
            halves.append(
                numerics.lstm_sequence(pre, direction.wh, stack.hidden, reverse=reverse, tape=tape)
            )
        x = numerics.concat(halves, axis=1, tape=tape)
        x = numerics.dropout(x, stack.keep_prob, rng, training, tape)
    return x


def attend(hidden: Tensor, params: AttentionParams, tape: GradientTape | None = None):
    """Multi-hop attention: weights (r, n) via softmax of W2 tanh(W1 H^T),
    summary (r, 2d) as the weighted sums of hidden states."""
    if hidden.shape[0] < 1:
        raise ShapeError("attention needs at least one position")
    scores = numerics.matmul(
        params.w2,
        numerics.tanh_elem(numerics.matmul(params.w1, numerics.transpose(hidden, tape), tape), tape),
        tape,
    )
    weights = numerics.softmax_rows(scores, tape)
    summary = numerics.matmul(weights, hidden, tape)
    return weights, summary


def fuse(hidden: Tensor, summary: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Append the flattened (hop-major) summary to every position's state."""
    n = hidden.shape[0]
    flat = numerics.reshape(summary, (1, summary.shape[0] * summary.shape[1]), tape)
    return numerics.concat([hidden, numerics.repeat_row(flat, n, tape)], axis=1, tape=tape)


def encode(
    embeddings: Tensor,
    stack: BiLstmStack,
    attention: AttentionParams | None,
    rng=None,
    training: bool = False,
    tape: GradientTape | None = None,
) -> EncodedSequence:
    """Full encoder pass; attention=None yields fused == hidden exactly."""
    hidden = bilstm_encode(embeddings, stack, rng=rng, training=training, tape=tape)
    if attention is None:
        return EncodedSequence(hidden=hidden, weights=None, summary=None, fused=hidden)
    weights, summary = attend(hidden, attention, tape)
    return EncodedSequence(
        hidden=hidden,
        weights=weights,
        summary=summary,
        fused=fuse(hidden, summary, tape),
    )
