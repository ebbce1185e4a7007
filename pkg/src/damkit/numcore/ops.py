"""Forward + backward rules for every operation the encoders and decoder need.

All tensors are rank 1 or 2; the only broadcasting allowed is a bias add
over the last dimension. Sequence ops work on axis 0 (rows), column ops on
axis 1, which is all a (tokens, dim) layout requires.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .tensor import ShapeMismatchError, Tensor, accumulate, result

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def constant(data) -> Tensor:
    """A leaf tensor that takes no gradient (attention masks, fixed inputs)."""
    return Tensor(data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def bw(g):
        accumulate(a, g @ b.data.T)
        accumulate(b, a.data.T @ g)

    return result(out_data, (a, b), bw, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also accepts a (n,) bias against a (m, n) left operand."""
    if a.shape == b.shape:
        def bw(g):
            accumulate(a, g)
            accumulate(b, g)
    elif a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        def bw(g):
            accumulate(a, g)
            accumulate(b, g.sum(axis=0))
    else:
        raise ShapeMismatchError(f"add: {a.shape} + {b.shape}")
    return result(a.data + b.data, (a, b), bw, "add")


def mul_scalar(a: Tensor, s) -> Tensor:
    """Multiply by a python scalar or a single-element tensor (gate values)."""
    if isinstance(s, Tensor):
        if s.size != 1:
            raise ShapeMismatchError(f"mul_scalar: scalar operand has shape {s.shape}")
        sval = float(s.data.reshape(()))

        def bw(g):
            accumulate(a, g * sval)
            accumulate(s, np.asarray(np.sum(g * a.data)).reshape(s.shape))

        return result(a.data * sval, (a, s), bw, "mul_scalar")

    sval = float(s)

    def bw(g):
        accumulate(a, g * sval)

    return result(a.data * sval, (a,), bw, "mul_scalar")


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)

    def bw(g):
        accumulate(a, g * (1.0 - t * t))

    return result(t, (a,), bw, "tanh")


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out_data = x * cdf

    def bw(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        accumulate(a, g * (cdf + x * pdf))

    return result(out_data, (a,), bw, "gelu")


def softmax_lastdim(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        accumulate(a, s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return result(s, (a,), bw, "softmax_lastdim")


def layer_norm_lastdim(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize each row to zero mean / unit variance, then apply gain and bias."""
    n = a.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeMismatchError(f"layer_norm: input {a.shape}, gain {gain.shape}, bias {bias.shape}")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = ((a.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (a.data - mu) * inv
    out_data = y * gain.data + bias.data

    def bw(g):
        accumulate(bias, g.sum(axis=0) if g.ndim == 2 else g)
        accumulate(gain, (g * y).sum(axis=0) if g.ndim == 2 else g * y)
        gy = g * gain.data
        accumulate(
            a,
            inv * (gy - gy.mean(axis=-1, keepdims=True) - y * (gy * y).mean(axis=-1, keepdims=True)),
        )

    return result(out_data, (a, gain, bias), bw, "layer_norm_lastdim")


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeMismatchError(f"embedding_lookup: ids must be rank 1, got {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeMismatchError(
            f"embedding_lookup: id out of range for table {table.shape}"
        )
    out_data = table.data[ids]

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        accumulate(table, gt)

    return result(out_data, (table,), bw, "embedding_lookup")


def concat_seq(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise ShapeMismatchError("concat_seq: empty input")
    widths = {p.shape[1:] for p in parts}
    if len(widths) != 1:
        raise ShapeMismatchError(f"concat_seq: mismatched trailing dims {sorted(widths)}")
    lengths = [p.shape[0] for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=0)

    def bw(g):
        ofs = 0
        for p, n in zip(parts, lengths):
            accumulate(p, g[ofs:ofs + n])
            ofs += n

    return result(out_data, tuple(parts), bw, "concat_seq")


def slice_seq(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[0]):
        raise ShapeMismatchError(f"slice_seq: [{start}:{stop}] out of range for {a.shape}")

    def bw(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        accumulate(a, ga)

    return result(a.data[start:stop].copy(), (a,), bw, "slice_seq")


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise ShapeMismatchError("concat_cols: empty input")
    heights = {p.shape[0] for p in parts}
    if len(heights) != 1 or any(p.ndim != 2 for p in parts):
        raise ShapeMismatchError(f"concat_cols: mismatched shapes {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=1)

    def bw(g):
        ofs = 0
        for p, n in zip(parts, widths):
            accumulate(p, g[:, ofs:ofs + n])
            ofs += n

    return result(out_data, tuple(parts), bw, "concat_cols")


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.ndim != 2 or not (0 <= start < stop <= a.shape[1]):
        raise ShapeMismatchError(f"slice_cols: [{start}:{stop}] out of range for {a.shape}")

    def bw(g):
        ga = np.zeros_like(a.data)
        ga[:, start:stop] = g
        accumulate(a, ga)

    return result(a.data[:, start:stop].copy(), (a,), bw, "slice_cols")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeMismatchError(f"transpose: rank-2 input required, got {a.shape}")

    def bw(g):
        accumulate(a, g.T)

    return result(a.data.T.copy(), (a,), bw, "transpose")


def cross_entropy_lastdim(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer targets under row-wise softmax."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"cross_entropy: logits {logits.shape}, targets {targets.shape}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ShapeMismatchError(f"cross_entropy: target id out of range for {logits.shape}")
    m = logits.shape[0]
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    nll = lse - z[np.arange(m), targets]
    out_data = np.asarray(nll.mean())

    def bw(g):
        p = np.exp(z) / np.exp(z).sum(axis=-1, keepdims=True)
        p[np.arange(m), targets] -= 1.0
        accumulate(logits, float(g) * p / m)

    return result(out_data, (logits,), bw, "cross_entropy_lastdim")
