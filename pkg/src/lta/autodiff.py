"""Reverse-mode automatic differentiation over dense float tensors.

A thread-local tape records every differentiable operation whose output needs
a gradient; :func:`backward` replays it in reverse and frees it. The attack
and training loops rebuild the graph on every iteration, so tapes are short
lived by design. Gradients accumulate across backward calls until the caller
resets them (``Tensor.zero_grad`` / assigning ``grad = None``).

All ops run on numpy arrays in float64 or float32. Gradient checks and tests
use float64; float32 is for production speed.
"""

from __future__ import annotations

import functools
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, ConfigurationError, NumericsError, UsageError

_FLOAT_DTYPES = (np.float32, np.float64)

_state = threading.local()


def _tape() -> list:
    if not hasattr(_state, "entries"):
        _state.entries = []
    return _state.entries


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that suspends taping (eval / off-tape state edits)."""

    def __enter__(self):
        self.prev = _grad_enabled()
        _state.grad_enabled = False

    def __exit__(self, *exc):
        _state.grad_enabled = self.prev
        return False


class Tensor:
    """Dense float tensor, optionally participating in the gradient tape."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericsError("tensor construction with NaN/Inf values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        # internal fast path: ops trust their own arithmetic, finite-ness is
        # enforced at the loss/update boundaries instead of per-op
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, False)

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and ndarrays become constant tensors
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other, self.dtype))


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out: Tensor, inputs: Sequence[Tensor], backward_fn: Callable):
    """Tape an op whose output requires grad. ``backward_fn(grad_out)`` must
    return one gradient array (or None) per input, in order."""
    if out.requires_grad and _grad_enabled():
        _tape().append((out, tuple(inputs), backward_fn))


def _needs_grad(*inputs: Tensor) -> bool:
    return _grad_enabled() and any(t.requires_grad for t in inputs)


def clear_tape():
    _tape().clear()


def backward(loss: Tensor):
    """Backpropagate from a scalar loss through the recorded tape.

    Populates ``grad`` on every participating tensor with requires_grad, then
    frees the tape. Calling again after another forward pass accumulates.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data).all():
        raise NumericsError("backward from non-finite loss")
    if not loss.requires_grad:
        clear_tape()
        raise UsageError("loss does not require grad (nothing on the tape)")
    entries = _tape()
    loss.accumulate_grad(np.ones_like(loss.data))
    try:
        for out, inputs, backward_fn in reversed(entries):
            if out.grad is None:
                continue
            grads = backward_fn(out.grad)
            for t, g in zip(inputs, grads):
                if g is not None and t.requires_grad:
                    t.accumulate_grad(g)
    finally:
        entries.clear()


# ---------------------------------------------------------------------------
# elementwise and reduction ops


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (adjoint of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data + b.data, _needs_grad(a, b))
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data - b.data, _needs_grad(a, b))
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._wrap(a.data * b.data, _needs_grad(a, b))
    _record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor._wrap(-a.data, _needs_grad(a))
    _record(out, (a,), lambda g: (-g,))
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor._wrap(np.maximum(a.data, 0), _needs_grad(a))
    _record(out, (a,), lambda g: (g * (a.data > 0),))
    return out


def exp(a: Tensor) -> Tensor:
    out = Tensor._wrap(np.exp(a.data), _needs_grad(a))
    _record(out, (a,), lambda g: (g * out.data,))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor._wrap(np.log(a.data), _needs_grad(a))
    _record(out, (a,), lambda g: (g / a.data,))
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    s = s.astype(x.dtype, copy=False)
    out = Tensor._wrap(s, _needs_grad(a))
    _record(out, (a,), lambda g: (g * s * (1.0 - s),))
    return out


def abs_(a: Tensor) -> Tensor:
    """|a|; subgradient at 0 is 0."""
    out = Tensor._wrap(np.abs(a.data), _needs_grad(a))
    _record(out, (a,), lambda g: (g * np.sign(a.data),))
    return out


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient is zero exactly where clipping changed the value."""
    out = Tensor._wrap(np.clip(a.data, lo, hi), _needs_grad(a))
    mask = (a.data >= lo) & (a.data <= hi)
    _record(out, (a,), lambda g: (g * mask,))
    return out


def sum_(a: Tensor, axis=None) -> Tensor:
    out = Tensor._wrap(a.data.sum(axis=axis), _needs_grad(a))

    def bwd(g):
        if axis is None:
            return (np.full(a.shape, g, dtype=a.dtype),)
        gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    _record(out, (a,), bwd)
    return out


def mean(a: Tensor, axis=None) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    out = Tensor._wrap(a.data.mean(axis=axis), _needs_grad(a))

    def bwd(g):
        if axis is None:
            return (np.full(a.shape, g / count, dtype=a.dtype),)
        gg = np.expand_dims(g, axis) / count
        return (np.broadcast_to(gg, a.shape).copy(),)

    _record(out, (a,), bwd)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor._wrap(a.data.reshape(shape), _needs_grad(a))
    _record(out, (a,), lambda g: (g.reshape(a.shape),))
    return out


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    out = Tensor._wrap(np.ascontiguousarray(a.data.transpose(axes)), _needs_grad(a))
    _record(out, (a,), lambda g: (np.ascontiguousarray(g.transpose(inv)),))
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor._wrap(np.concatenate([t.data for t in tensors], axis=axis), _needs_grad(*tensors))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    _record(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = Tensor._wrap(a.data @ b.data, _needs_grad(a, b))
    _record(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))
    return out


# ---------------------------------------------------------------------------
# convolution family


def _pad2d(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with OIHW kernel."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise DimensionError(f"conv2d expects NCHW x OIHW, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv2d channel mismatch: input C={x.shape[1]}, kernel I={w.shape[1]}")
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv2d stride={stride} padding={padding} out of range")
    N, C, H, W = x.shape
    O, _, kH, kW = w.shape
    Ho = (H + 2 * padding - kH) // stride + 1
    Wo = (W + 2 * padding - kW) // stride + 1
    if Ho < 1 or Wo < 1:
        raise DimensionError(f"conv2d kernel {kH}x{kW} larger than padded input {H}x{W}")
    xp = _pad2d(x.data, padding)
    acc = np.zeros((N, Ho, Wo, O), dtype=x.dtype)
    for i in range(kH):
        for j in range(kW):
            xs = xp[:, :, i : i + stride * (Ho - 1) + 1 : stride, j : j + stride * (Wo - 1) + 1 : stride]
            acc += np.tensordot(xs, w.data[:, :, i, j], axes=([1], [1]))
    out = Tensor._wrap(np.ascontiguousarray(acc.transpose(0, 3, 1, 2)), _needs_grad(x, w))

    def bwd(g):
        gt = np.ascontiguousarray(g.transpose(0, 2, 3, 1))  # (N,Ho,Wo,O)
        gx = gw = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kH):
                for j in range(kW):
                    gslice = np.tensordot(gt, w.data[:, :, i, j], axes=([3], [0]))  # (N,Ho,Wo,C)
                    gxp[:, :, i : i + stride * (Ho - 1) + 1 : stride, j : j + stride * (Wo - 1) + 1 : stride] += (
                        gslice.transpose(0, 3, 1, 2)
                    )
            gx = gxp if padding == 0 else gxp[:, :, padding : padding + H, padding : padding + W]
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for i in range(kH):
                for j in range(kW):
                    xs = xp[:, :, i : i + stride * (Ho - 1) + 1 : stride, j : j + stride * (Wo - 1) + 1 : stride]
                    gw[:, :, i, j] = np.tensordot(gt, xs, axes=([0, 1, 2], [0, 2, 3]))
        return gx, gw

    _record(out, (x, w), bwd)
    return out


def conv_transpose2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution (adjoint of conv2d) with IOHW kernel layout."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise DimensionError(f"conv_transpose2d expects NCHW x IOHW, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"conv_transpose2d channel mismatch: input C={x.shape[1]}, kernel I={w.shape[0]}")
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv_transpose2d stride={stride} padding={padding} out of range")
    N, C, H, W = x.shape
    _, O, kH, kW = w.shape
    Hf = (H - 1) * stride + kH
    Wf = (W - 1) * stride + kW
    Ho, Wo = Hf - 2 * padding, Wf - 2 * padding
    if Ho < 1 or Wo < 1:
        raise DimensionError("conv_transpose2d output collapsed by padding")
    xt = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1))  # (N,H,W,C)
    full = np.zeros((N, Hf, Wf, O), dtype=x.dtype)
    for i in range(kH):
        for j in range(kW):
            full[:, i : i + stride * (H - 1) + 1 : stride, j : j + stride * (W - 1) + 1 : stride, :] += (
                xt @ w.data[:, :, i, j]
            )
    cropped = full[:, padding : padding + Ho, padding : padding + Wo, :]
    out = Tensor._wrap(np.ascontiguousarray(cropped.transpose(0, 3, 1, 2)), _needs_grad(x, w))

    def bwd(g):
        gfull = np.zeros((N, Hf, Wf, O), dtype=g.dtype)
        gfull[:, padding : padding + Ho, padding : padding + Wo, :] = g.transpose(0, 2, 3, 1)
        gx = gw = None
        if x.requires_grad:
            gxt = np.zeros_like(xt)
            for i in range(kH):
                for j in range(kW):
                    gs = gfull[:, i : i + stride * (H - 1) + 1 : stride, j : j + stride * (W - 1) + 1 : stride, :]
                    gxt += gs @ w.data[:, :, i, j].T
            gx = np.ascontiguousarray(gxt.transpose(0, 3, 1, 2))
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for i in range(kH):
                for j in range(kW):
                    gs = gfull[:, i : i + stride * (H - 1) + 1 : stride, j : j + stride * (W - 1) + 1 : stride, :]
                    gw[:, :, i, j] = np.tensordot(xt, gs, axes=([0, 1, 2], [0, 1, 2]))
        return gx, gw

    _record(out, (x, w), bwd)
    return out


def depthwise_conv2d(x: Tensor, k: Tensor, padding: int = 0) -> Tensor:
    """Per-channel 2-D cross-correlation with one (kH,kW) kernel per channel.

    ``k`` has shape (C,kH,kW) or (kH,kW) to share a single kernel across all
    channels. Stride 1, zero padding.
    """
    if x.data.ndim != 4:
        raise DimensionError(f"depthwise_conv2d expects NCHW input, got {x.shape}")
    kd = k.data
    shared = kd.ndim == 2
    if not shared and (kd.ndim != 3 or kd.shape[0] != x.shape[1]):
        raise DimensionError(f"depthwise kernel {k.shape} does not match channels C={x.shape[1]}")
    N, C, H, W = x.shape
    kH, kW = kd.shape[-2:]
    Ho = H + 2 * padding - kH + 1
    Wo = W + 2 * padding - kW + 1
    if Ho < 1 or Wo < 1:
        raise DimensionError(f"depthwise kernel {kH}x{kW} larger than padded input {H}x{W}")
    xp = _pad2d(x.data, padding)
    acc = np.zeros((N, C, Ho, Wo), dtype=x.dtype)
    for i in range(kH):
        for j in range(kW):
            wij = kd[i, j] if shared else kd[:, i, j][None, :, None, None]
            acc += xp[:, :, i : i + Ho, j : j + Wo] * wij
    out = Tensor._wrap(acc, _needs_grad(x, k))

    def bwd(g):
        gx = gk = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kH):
                for j in range(kW):
                    wij = kd[i, j] if shared else kd[:, i, j][None, :, None, None]
                    gxp[:, :, i : i + Ho, j : j + Wo] += g * wij
            gx = gxp if padding == 0 else gxp[:, :, padding : padding + H, padding : padding + W]
        if k.requires_grad:
            gk = np.empty_like(kd)
            for i in range(kH):
                for j in range(kW):
                    prod = g * xp[:, :, i : i + Ho, j : j + Wo]
                    if shared:
                        gk[i, j] = prod.sum()
                    else:
                        gk[:, i, j] = prod.sum(axis=(0, 2, 3))
        return gx, gk

    _record(out, (x, k), bwd)
    return out


# ---------------------------------------------------------------------------
# resize / crop

RESIZE_MODES = ("nearest", "bilinear", "bicubic")


def _cubic_weight(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Catmull-Rom cubic convolution kernel (a = -0.5)."""
    at = np.abs(t)
    w = np.where(
        at <= 1.0,
        (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0,
        np.where(at < 2.0, a * at**3 - 5.0 * a * at**2 + 8.0 * a * at - 4.0 * a, 0.0),
    )
    return w


@functools.lru_cache(maxsize=256)
def _resize_matrix(in_size: int, out_size: int, mode: str) -> np.ndarray:
    """(out_size, in_size) interpolation weights; half-pixel centers, edges
    clamped, rows normalized to sum to one."""
    M = np.zeros((out_size, in_size), dtype=np.float64)
    scale = in_size / out_size
    centers = (np.arange(out_size) + 0.5) * scale - 0.5
    if mode == "nearest":
        idx = np.clip(np.floor((np.arange(out_size) + 0.5) * scale).astype(int), 0, in_size - 1)
        M[np.arange(out_size), idx] = 1.0
        return M
    if mode == "bilinear":
        i0 = np.floor(centers).astype(int)
        t = centers - i0
        for d in range(out_size):
            M[d, np.clip(i0[d], 0, in_size - 1)] += 1.0 - t[d]
            M[d, np.clip(i0[d] + 1, 0, in_size - 1)] += t[d]
        return M
    if mode == "bicubic":
        i0 = np.floor(centers).astype(int)
        t = centers - i0
        for d in range(out_size):
            offs = np.array([-1, 0, 1, 2])
            w = _cubic_weight(offs - t[d])
            for o, wv in zip(offs, w):
                M[d, np.clip(i0[d] + o, 0, in_size - 1)] += wv
        M /= M.sum(axis=1, keepdims=True)
        return M
    raise ConfigurationError(f"unsupported resize mode {mode!r} (expected one of {RESIZE_MODES})")


@functools.lru_cache(maxsize=512)
def _resize_matrices(in_h: int, in_w: int, out_h: int, out_w: int, mode: str, dtype_name: str):
    R = _resize_matrix(in_h, out_h, mode).astype(dtype_name)
    Ct = np.ascontiguousarray(_resize_matrix(in_w, out_w, mode).astype(dtype_name).T)
    return R, Ct


def resize(x: Tensor, target_hw, mode: str) -> Tensor:
    """Separable resampling of NCHW images; differentiable w.r.t. x."""
    if mode not in RESIZE_MODES:
        raise ConfigurationError(f"unsupported resize mode {mode!r} (expected one of {RESIZE_MODES})")
    if x.data.ndim != 4:
        raise DimensionError(f"resize expects NCHW input, got {x.shape}")
    Ho, Wo = int(target_hw[0]), int(target_hw[1])
    if Ho < 1 or Wo < 1:
        raise ConfigurationError(f"resize target {Ho}x{Wo} must be >= 1")
    N, C, H, W = x.shape
    R, Ct = _resize_matrices(H, W, Ho, Wo, mode, x.dtype.name)
    out = Tensor._wrap(np.matmul(np.matmul(R, x.data), Ct), _needs_grad(x))
    _record(out, (x,), lambda g: (np.matmul(np.matmul(R.T, g), Ct.T),))
    return out


def crop2d(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    """Spatial crop of NCHW images; the gradient scatters back into the source."""
    if x.data.ndim != 4:
        raise DimensionError(f"crop2d expects NCHW input, got {x.shape}")
    N, C, H, W = x.shape
    if top < 0 or left < 0 or top + height > H or left + width > W:
        raise UsageError(f"crop [{top}:{top + height}, {left}:{left + width}] outside {H}x{W} input")
    out = Tensor._wrap(np.ascontiguousarray(x.data[:, :, top : top + height, left : left + width]), _needs_grad(x))

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, :, top : top + height, left : left + width] = g
        return (gx,)

    _record(out, (x,), bwd)
    return out


# ---------------------------------------------------------------------------
# loss


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy, stabilized by max subtraction.

    ``logits`` is (C,) with an int label, or (N,C) with a length-N label
    sequence; returns a scalar tensor (mean over the batch).
    """
    single = logits.data.ndim == 1
    L = logits.data[None, :] if single else logits.data
    if L.ndim != 2:
        raise DimensionError(f"cross_entropy expects (C,) or (N,C) logits, got {logits.shape}")
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != L.shape[0]:
        raise DimensionError(f"{L.shape[0]} logit rows but {y.shape[0]} labels")
    C = L.shape[1]
    if np.any(y < 0) or np.any(y >= C):
        raise IndexError(f"label out of range for {C} classes: {y}")
    m = L.max(axis=1, keepdims=True)
    shifted = L - m
    e = np.exp(shifted)
    Z = e.sum(axis=1, keepdims=True)
    logp = shifted - np.log(Z)
    N = L.shape[0]
    loss_val = -logp[np.arange(N), y].mean()
    out = Tensor._wrap(np.asarray(loss_val, dtype=logits.dtype), _needs_grad(logits))

    def bwd(g):
        p = e / Z
        p[np.arange(N), y] -= 1.0
        gl = p * (g / N)
        return ((gl[0] if single else gl).astype(logits.dtype, copy=False),)

    _record(out, (logits,), bwd)
    return out
