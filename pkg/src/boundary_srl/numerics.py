"""Dense float64 tensors with taped reverse-mode gradients.

Storage and arithmetic are numpy; the differentiation logic is local. Every
operation takes an optional GradientTape: with a tape the op registers a
backward rule, without one it is a plain forward computation (the evaluation
path). Forward outputs are checked for NaN/Inf and refused. Tensors are
treated as immutable during the forward pass; only ``grad`` buffers and
optimizer state mutate, so the caller must serialize those.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ConfigError, DataError, ShapeError

LOG_FLOOR = 1e-12


class Tensor:
    """A dense row-major float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class GradientTape:
    """Execution-ordered op record; backward() replays it in reverse."""

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def record(self, out: Tensor, inputs, backward_fn) -> None:
        self.entries.append((out, tuple(inputs), backward_fn))

    def __len__(self) -> int:
        return len(self.entries)


def _emit(name, out_data, inputs, backward_fn, tape):
    if not np.all(np.isfinite(out_data)):
        raise DataError(f"{name} produced non-finite values")
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires)
    if tape is not None and requires:
        tape.record(out, inputs, backward_fn)
    return out


def tensor(data, requires_grad: bool = False) -> Tensor:
    t = Tensor(data, requires_grad=requires_grad)
    if not np.all(np.isfinite(t.data)):
        raise DataError("tensor created from non-finite values")
    return t


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def uniform(shape, rng, scale: float = 0.1, requires_grad: bool = True) -> Tensor:
    """Uniform [-scale, scale] initializer."""
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=requires_grad)


def rng_for(*keys) -> np.random.Generator:
    """Deterministic generator derived from a tuple of non-negative ints.

    Used to thread explicit, splittable randomness through every stochastic
    code path: each (seed, role, epoch, instance...) tuple yields an
    independent stream.
    """
    entropy = [int(k) for k in keys]
    if any(k < 0 for k in entropy):
        raise ConfigError("rng keys must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def matmul(a: Tensor, b: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Matrix product. Gradients: dA = dC @ B^T, dB = A^T @ dC."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects rank-2 tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(d_out):
        da = d_out @ b.data.T if a.requires_grad else None
        db = a.data.T @ d_out if b.requires_grad else None
        return da, db

    return _emit("matmul", out, (a, b), backward, tape)


def add(a: Tensor, b: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Elementwise sum; ``b`` may be a single row broadcast over a's rows."""
    if a.shape == b.shape:
        broadcast = False
    elif b.data.ndim == 2 and b.shape == (1, a.shape[1]) and a.data.ndim == 2:
        broadcast = True
    else:
        raise ShapeError(f"add shapes incompatible: {a.shape} + {b.shape}")
    out = a.data + b.data

    def backward(d_out):
        db = d_out.sum(axis=0, keepdims=True) if broadcast else d_out
        return d_out, db

    return _emit("add", out, (a, b), backward, tape)


def mul(a: Tensor, b: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes differ: {a.shape} vs {b.shape}")
    out = a.data * b.data

    def backward(d_out):
        return d_out * b.data, d_out * a.data

    return _emit("mul", out, (a, b), backward, tape)


def transpose(x: Tensor, tape: GradientTape | None = None) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeError("transpose expects a rank-2 tensor")

    def backward(d_out):
        return (d_out.T,)

    return _emit("transpose", x.data.T, (x,), backward, tape)


def reshape(x: Tensor, shape, tape: GradientTape | None = None) -> Tensor:
    in_shape = x.data.shape

    def backward(d_out):
        return (d_out.reshape(in_shape),)

    return _emit("reshape", x.data.reshape(shape), (x,), backward, tape)


def concat(tensors, axis: int, tape: GradientTape | None = None) -> Tensor:
    """Concatenate along axis 0 or 1; zero-size parts are allowed."""
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    if axis not in (0, 1):
        raise ShapeError("concat supports axis 0 or 1")
    other = 1 - axis
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.data.ndim != 2 or len(base) != 2 or t.shape[other] != base[other]:
            raise ShapeError("concat off-axis dimensions must match")
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum(sizes)[:-1]

    def backward(d_out):
        return tuple(np.split(d_out, offsets, axis=axis))

    return _emit("concat", out, tensors, backward, tape)


def slice_rows(x: Tensor, start: int, stop: int, tape: GradientTape | None = None) -> Tensor:
    out = x.data[start:stop].copy()

    def backward(d_out):
        dx = np.zeros_like(x.data)
        dx[start:stop] = d_out
        return (dx,)

    return _emit("slice_rows", out, (x,), backward, tape)


def slice_cols(x: Tensor, start: int, stop: int, tape: GradientTape | None = None) -> Tensor:
    out = x.data[:, start:stop].copy()

    def backward(d_out):
        dx = np.zeros_like(x.data)
        dx[:, start:stop] = d_out
        return (dx,)

    return _emit("slice_cols", out, (x,), backward, tape)


def rows(table: Tensor, indices, tape: GradientTape | None = None) -> Tensor:
    """Gather table rows by index; gradients scatter-add back into the table."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or table.data.ndim != 2:
        raise ShapeError("rows expects a rank-2 table and a flat index list")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError("row index out of range")
    out = table.data[idx]

    def backward(d_out):
        dt = np.zeros_like(table.data)
        np.add.at(dt, idx, d_out)
        return (dt,)

    return _emit("rows", out, (table,), backward, tape)


def repeat_row(x: Tensor, count: int, tape: GradientTape | None = None) -> Tensor:
    """Stack ``count`` copies of a single-row tensor."""
    if x.data.ndim != 2 or x.shape[0] != 1:
        raise ShapeError("repeat_row expects a 1-row tensor")
    out = np.repeat(x.data, count, axis=0)

    def backward(d_out):
        return (d_out.sum(axis=0, keepdims=True),)

    return _emit("repeat_row", out, (x,), backward, tape)


def tanh_elem(x: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Elementwise tanh. Gradient: 1 - y^2."""
    out = np.tanh(x.data)

    def backward(d_out):
        return (d_out * (1.0 - out * out),)

    return _emit("tanh_elem", out, (x,), backward, tape)


def sigmoid(x: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Numerically stable logistic function. Gradient: y (1 - y)."""
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(d_out):
        return (d_out * out * (1.0 - out),)

    return _emit("sigmoid", out, (x,), backward, tape)


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_sequence(
    pre: Tensor,
    wh: Tensor,
    hidden: int,
    reverse: bool = False,
    tape: GradientTape | None = None,
) -> Tensor:
    """One unidirectional LSTM pass as a single taped op.

    ``pre`` is (n, 4d): input projections plus bias, gate columns ordered
    input/forget/cell/output. ``wh`` is the (d, 4d) recurrent weight. States
    start at zero; rows come back in sentence order regardless of direction.
    The backward rule replays the cached gates step by step in reverse, which
    is algebraically identical to backpropagating the unrolled primitive ops.
    """
    n = pre.shape[0]
    d = hidden
    if pre.shape[1] != 4 * d or wh.shape != (d, 4 * d):
        raise ShapeError("lstm_sequence: projection/recurrent widths disagree")
    p = pre.data
    w = wh.data
    gate_i = np.empty((n, d))
    gate_f = np.empty((n, d))
    gate_u = np.empty((n, d))
    gate_o = np.empty((n, d))
    cell_tanh = np.empty((n, d))
    prev_h = np.empty((n, d))
    prev_c = np.empty((n, d))
    states = np.empty((n, d))
    h = np.zeros((1, d))
    c = np.zeros((1, d))
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        prev_h[t] = h
        prev_c[t] = c
        g = p[t : t + 1] + h @ w
        gate_i[t] = _sigmoid_array(g[:, :d])
        gate_f[t] = _sigmoid_array(g[:, d : 2 * d])
        gate_u[t] = np.tanh(g[:, 2 * d : 3 * d])
        gate_o[t] = _sigmoid_array(g[:, 3 * d :])
        c = gate_f[t] * c + gate_i[t] * gate_u[t]
        cell_tanh[t] = np.tanh(c)
        h = gate_o[t] * cell_tanh[t]
        states[t] = h

    def backward(d_out):
        dp = np.zeros_like(p)
        dw = np.zeros_like(w) if wh.requires_grad else None
        dh_carry = np.zeros(d)
        dc_carry = np.zeros(d)
        for t in reversed(list(order)):
            dh = d_out[t] + dh_carry
            dog = dh * cell_tanh[t] * gate_o[t] * (1.0 - gate_o[t])
            dc = dc_carry + dh * gate_o[t] * (1.0 - cell_tanh[t] ** 2)
            dig = dc * gate_u[t] * gate_i[t] * (1.0 - gate_i[t])
            dfg = dc * prev_c[t] * gate_f[t] * (1.0 - gate_f[t])
            dug = dc * gate_i[t] * (1.0 - gate_u[t] ** 2)
            dg = np.concatenate([dig, dfg, dug, dog])
            dp[t] = dg
            if dw is not None:
                dw += np.outer(prev_h[t], dg)
            dh_carry = w @ dg
            dc_carry = dc * gate_f[t]
        return dp, dw

    return _emit("lstm_sequence", states, (pre, wh), backward, tape)


def softmax_rows(x: Tensor, tape: GradientTape | None = None) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    if x.data.ndim != 2 or x.shape[1] < 1:
        raise ShapeError("softmax_rows expects a rank-2 tensor with non-empty rows")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(d_out):
        inner = (d_out * out).sum(axis=1, keepdims=True)
        return (out * (d_out - inner),)

    return _emit("softmax_rows", out, (x,), backward, tape)


def dropout(
    x: Tensor,
    keep_prob: float,
    rng,
    training: bool,
    tape: GradientTape | None = None,
) -> Tensor:
    """Inverted dropout: kept elements are scaled by 1/keep_prob at train time.

    Evaluation mode is an exact identity regardless of keep_prob.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if not training or keep_prob == 1.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    mask = (rng.random(x.data.shape) < keep_prob) / keep_prob

    def backward(d_out):
        return (d_out * mask,)

    return _emit("dropout", x.data * mask, (x,), backward, tape)


def cross_entropy(
    logits: Tensor,
    targets,
    mask=None,
    tape: GradientTape | None = None,
) -> Tensor:
    """Mean negative log-likelihood of the target label per row.

    ``mask[i]`` true drops row i from the loss. Post-softmax probabilities are
    clamped at 1e-12 before the log. Gradient: (softmax - onehot) / count on
    the rows that stay in, zero elsewhere.
    """
    n, num_labels = logits.shape
    idx = np.asarray(targets, dtype=np.intp)
    if idx.shape != (n,):
        raise ShapeError("targets must hold one label index per row")
    if idx.size and (idx.min() < 0 or idx.max() >= num_labels):
        raise DataError("target label index out of range")
    if mask is None:
        kept = np.ones(n, dtype=bool)
    else:
        dropped = np.asarray(mask, dtype=bool)
        if dropped.shape != (n,):
            raise ShapeError("mask must hold one flag per row")
        kept = ~dropped
    count = int(kept.sum())
    if count == 0:
        raise DataError("cross_entropy: every position is masked out")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    picked = np.clip(probs[np.arange(n), idx], LOG_FLOOR, None)
    loss = -(np.log(picked) * kept).sum() / count

    def backward(d_out):
        d = probs.copy()
        d[np.arange(n), idx] -= 1.0
        d *= kept[:, None] / count
        return (d * float(d_out),)

    return _emit("cross_entropy", np.float64(loss), (logits,), backward, tape)


def sum_all(x: Tensor, tape: GradientTape | None = None) -> Tensor:
    out = np.float64(x.data.sum())

    def backward(d_out):
        return (np.full_like(x.data, float(d_out)),)

    return _emit("sum_all", out, (x,), backward, tape)


def backward(loss: Tensor, tape: GradientTape) -> None:
    """Accumulate gradients of ``loss`` into every tensor on the tape.

    Gradients of tensors used more than once add up. Deterministic for a
    given tape.
    """
    if loss.data.shape != ():
        raise ShapeError("backward expects a scalar loss")
    if not any(out is loss for out, _, _ in tape.entries):
        raise DataError("loss tensor is not an output recorded on this tape")
    if loss.grad is None:
        loss.grad = np.ones((), dtype=np.float64)
    for out, inputs, backward_fn in reversed(tape.entries):
        if out.grad is None:
            continue
        grads = backward_fn(out.grad)
        for t, g in zip(inputs, grads):
            if g is None or not t.requires_grad:
                continue
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self, params):
        self.step = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(
    params,
    grads,
    state: AdamState,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place."""
    params = list(params)
    grads = list(grads)
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("params/grads/state lengths disagree")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape or m.shape != p.data.shape:
            raise ShapeError("param/grad/state shape mismatch")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def clip_global_norm(grads, max_norm: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


CHECKPOINT_MAGIC = b"TNSBANK1"
CHECKPOINT_VERSION = 1


def save_tensors(path, named_tensors: dict) -> None:
    """Versioned binary dump of named tensors; write-temp-then-rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(CHECKPOINT_MAGIC)
            handle.write(struct.pack("<II", CHECKPOINT_VERSION, len(named_tensors)))
            for name, t in named_tensors.items():
                encoded = name.encode("utf-8")
                arr = np.ascontiguousarray(t.data, dtype="<f8")
                handle.write(struct.pack("<I", len(encoded)))
                handle.write(encoded)
                handle.write(struct.pack("<I", arr.ndim))
                handle.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                handle.write(arr.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_tensors(path) -> dict:
    """Read a save_tensors file back into name -> numpy array."""
    with open(path, "rb") as handle:
        magic = handle.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a tensor checkpoint")
        version, count = struct.unpack("<II", handle.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", handle.read(4))
            name = handle.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", handle.read(4))
            dims = struct.unpack(f"<{rank}I", handle.read(4 * rank))
            size = int(np.prod(dims)) if rank else 1
            raw = handle.read(8 * size)
            if len(raw) != 8 * size:
                raise DataError(f"{path}: truncated tensor {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
        return out
