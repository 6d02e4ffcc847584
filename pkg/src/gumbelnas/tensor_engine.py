"""Minimal reverse-mode autodiff over dense numpy arrays.

Just enough machinery to build and train the toy supernetwork: tensors with
recorded backward closures, grouped/dilated/strided conv2d, batch norm,
bilinear upsampling, a 2-d cross-entropy loss, and SGD with momentum.
Feature maps are laid out (batch, channel, row, column). Forward passes are
deterministic; reductions use numpy's fixed summation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tensor",
    "EngineError",
    "conv2d",
    "batchnorm2d",
    "BatchNormState",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "add",
    "mul",
    "gather1d",
    "tsum",
    "mean",
    "global_avg_pool",
    "bilinear_upsample",
    "concat",
    "mix",
    "masked_softmax",
    "cross_entropy_2d",
    "sgd_step",
    "SGD",
]


class EngineError(ValueError):
    pass


class Tensor:
    """A dense array plus an optional gradient and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad: np.ndarray):
        if self.grad is None:
            # Copy: backward closures may hand us a view of a shared buffer.
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def backward(self, grad=None):
        """Reverse-mode sweep from this tensor through its recorded graph."""
        if grad is None:
            if self.data.size != 1:
                raise EngineError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Small arithmetic conveniences; heavy ops live as module functions.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _make(data, parents, backward_fn, requires_grad=None) -> Tensor:
    out = Tensor(data)
    if requires_grad is None:
        requires_grad = any(p.requires_grad for p in parents)
    out.requires_grad = requires_grad
    if requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    out_data = a.data + b.data

    def backward(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad, a.data.shape).astype(a.data.dtype))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad, b.data.shape).astype(b.data.dtype))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    out_data = a.data * b.data

    def backward(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad * b.data, a.data.shape).astype(a.data.dtype))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad * a.data, b.data.shape).astype(b.data.dtype))

    return _make(out_data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * (x.data > 0))

    return _make(out_data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * out_data * (1.0 - out_data))

    return _make(out_data, (x,), backward)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * out_data)

    return _make(out_data, (x,), backward)


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad / x.data)

    return _make(out_data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    out_data = x.data.sum()

    def backward(grad):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(grad, x.data.shape).astype(x.data.dtype))

    return _make(out_data, (x,), backward)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    out_data = x.data.mean()

    def backward(grad):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(grad / n, x.data.shape).astype(x.data.dtype))

    return _make(out_data, (x,), backward)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * grad.ndim
                sl[axis] = slice(lo, hi)
                t.accumulate(grad[tuple(sl)])

    return _make(out_data, tuple(tensors), backward)


def mix(tensors: list[Tensor], weights: Tensor) -> Tensor:
    """Weighted sum of same-shape tensors with a 1-d weight vector."""
    if weights.data.ndim != 1 or len(tensors) != weights.data.shape[0]:
        raise EngineError("mix needs one weight per tensor")
    out_data = sum(w * t.data for w, t in zip(weights.data, tensors))

    def backward(grad):
        if weights.requires_grad:
            wgrad = np.array(
                [np.sum(grad * t.data) for t in tensors], dtype=weights.data.dtype
            )
            weights.accumulate(wgrad)
        for w, t in zip(weights.data, tensors):
            if t.requires_grad:
                t.accumulate((grad * w).astype(t.data.dtype))

    return _make(out_data, tuple(tensors) + (weights,), backward)


def gather1d(x: Tensor, indices) -> Tensor:
    """Select entries of a 1-d tensor; backward scatter-adds into place."""
    idx = np.asarray(indices, dtype=np.int64)
    if x.data.ndim != 1:
        raise EngineError("gather1d expects a 1-d tensor")
    out_data = x.data[idx]

    def backward(grad):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, grad)
            x.accumulate(gx)

    return _make(out_data, (x,), backward)


def masked_softmax(x: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax of a 1-d tensor over active entries; masked entries output 0."""
    mask = np.asarray(mask, dtype=bool)
    if x.data.ndim != 1 or mask.shape != x.data.shape:
        raise EngineError("masked_softmax needs a 1-d tensor and matching mask")
    if not mask.any():
        raise EngineError("all entries masked out")
    shifted = x.data - x.data[mask].max()
    e = np.where(mask, np.exp(shifted), 0.0)
    out_data = e / e.sum()

    def backward(grad):
        if x.requires_grad:
            inner = np.sum(grad * out_data)
            x.accumulate((out_data * (grad - inner)).astype(x.data.dtype))

    return _make(out_data, (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial dims of a (B, C, H, W) tensor, kept as (B, C, 1, 1)."""
    if x.data.ndim != 4:
        raise EngineError("global_avg_pool expects a 4-d tensor")
    B, C, H, W = x.data.shape
    out_data = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(grad):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(grad / (H * W), x.data.shape).astype(x.data.dtype))

    return _make(out_data, (x,), backward)


def _upsample_indices(n_out: int, n_in: int, factor: float):
    """Half-pixel source indices and lerp weights for one spatial axis."""
    src = (np.arange(n_out) + 0.5) / factor - 0.5
    i0 = np.floor(src).astype(np.int64)
    frac = src - i0
    i1 = np.clip(i0 + 1, 0, n_in - 1)
    i0 = np.clip(i0, 0, n_in - 1)
    return i0, i1, frac


def bilinear_upsample(x: Tensor, factor: int) -> Tensor:
    """Upsample (B, C, H, W) by an integer factor with half-pixel sampling."""
    if x.data.ndim != 4:
        raise EngineError("bilinear_upsample expects a 4-d tensor")
    if factor < 1:
        raise EngineError("factor must be >= 1")
    if factor == 1:
        return add(x, 0.0) if x.requires_grad else x
    B, C, H, W = x.data.shape
    r0, r1, fr = _upsample_indices(H * factor, H, factor)
    c0, c1, fc = _upsample_indices(W * factor, W, factor)
    wr0 = (1.0 - fr)[:, None]
    wr1 = fr[:, None]
    wc0 = (1.0 - fc)[None, :]
    wc1 = fc[None, :]
    out_data = (
        x.data[:, :, r0[:, None], c0[None, :]] * (wr0 * wc0)
        + x.data[:, :, r0[:, None], c1[None, :]] * (wr0 * wc1)
        + x.data[:, :, r1[:, None], c0[None, :]] * (wr1 * wc0)
        + x.data[:, :, r1[:, None], c1[None, :]] * (wr1 * wc1)
    ).astype(x.data.dtype)

    def backward(grad):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        for ri, ci, wgt in (
            (r0, c0, wr0 * wc0),
            (r0, c1, wr0 * wc1),
            (r1, c0, wr1 * wc0),
            (r1, c1, wr1 * wc1),
        ):
            np.add.at(
                gx,
                (slice(None), slice(None), ri[:, None], ci[None, :]),
                (grad * wgt).astype(x.data.dtype),
            )
        x.accumulate(gx)

    return _make(out_data, (x,), backward)


def conv2d(
    x: Tensor,
    w: Tensor,
    stride: int = 1,
    dilation: int = 1,
    groups: int = 1,
) -> Tensor:
    """Grouped, dilated, strided cross-correlation with same-style padding.

    ``x`` is (B, Cin, H, W); ``w`` is (Cout, Cin/groups, kh, kw). Padding is
    dilation * (k - 1) / 2 per side so stride-1 convs preserve spatial dims.
    Depthwise convolution is groups == Cin with one filter per channel.
    """
    B, Cin, H, W = x.data.shape
    Cout, Cin_g, kh, kw = w.data.shape
    if Cin % groups or Cout % groups:
        raise EngineError(f"channels ({Cin}->{Cout}) not divisible by groups {groups}")
    if Cin_g != Cin // groups:
        raise EngineError(f"weight fan-in {Cin_g} != Cin/groups = {Cin // groups}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise EngineError("only odd kernels supported")
    ph = dilation * (kh - 1) // 2
    pw = dilation * (kw - 1) // 2
    Ho = (H + 2 * ph - dilation * (kh - 1) - 1) // stride + 1
    Wo = (W + 2 * pw - dilation * (kw - 1) - 1) // stride + 1
    Cout_g = Cout // groups
    if kh == 1 and kw == 1:
        return _conv1x1(x, w, stride, groups, (B, Cin, H, W, Cout, Cin_g, Cout_g, Ho, Wo))
    if Cin_g == 1 and Cout_g == 1:
        return _conv_depthwise(x, w, stride, dilation, (B, Cin, H, W, ph, pw, Ho, Wo))
    return _conv_im2col(
        x, w, stride, dilation, groups,
        (B, Cin, H, W, Cout, Cin_g, Cout_g, ph, pw, Ho, Wo),
    )


def _conv1x1(x, w, stride, groups, dims):
    B, Cin, H, W, Cout, Cin_g, Cout_g, Ho, Wo = dims
    xs = x.data[:, :, ::stride, ::stride] if stride > 1 else x.data
    # (B, g, Cin_g, Ho*Wo) -> (g, Cin_g, B*Ho*Wo)
    xt = np.ascontiguousarray(
        xs.reshape(B, groups, Cin_g, Ho * Wo).transpose(1, 2, 0, 3)
    ).reshape(groups, Cin_g, B * Ho * Wo)
    w2 = w.data.reshape(groups, Cout_g, Cin_g)
    out_data = np.ascontiguousarray(
        np.matmul(w2, xt).reshape(groups, Cout_g, B, Ho * Wo).transpose(2, 0, 1, 3)
    ).reshape(B, Cout, Ho, Wo)

    def backward(grad):
        gflat = np.ascontiguousarray(
            grad.reshape(B, groups, Cout_g, Ho * Wo).transpose(1, 2, 0, 3)
        ).reshape(groups, Cout_g, B * Ho * Wo)
        if w.requires_grad:
            w.accumulate(np.matmul(gflat, xt.transpose(0, 2, 1)).reshape(w.data.shape))
        if x.requires_grad:
            gxs = np.ascontiguousarray(
                np.matmul(w2.transpose(0, 2, 1), gflat)
                .reshape(groups, Cin_g, B, Ho * Wo)
                .transpose(2, 0, 1, 3)
            ).reshape(B, Cin, Ho, Wo)
            if stride > 1:
                gx = np.zeros_like(x.data)
                gx[:, :, ::stride, ::stride] = gxs
                x.accumulate(gx)
            else:
                x.accumulate(gxs)

    return _make(out_data, (x, w), backward)


def _conv_depthwise(x, w, stride, dilation, dims):
    B, C, H, W, ph, pw, Ho, Wo = dims
    kh, kw = w.data.shape[2:]
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    span_h = dilation * (kh - 1) + 1
    span_w = dilation * (kw - 1) + 1
    # Windows are a zero-copy view: (B, C, Ho, Wo, kh, kw) after subsampling
    # the window grid by the stride and the taps by the dilation.
    win = np.lib.stride_tricks.sliding_window_view(xp, (span_h, span_w), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, ::dilation, ::dilation]
    out_data = np.einsum("bchwij,cij->bchw", win, w.data[:, 0], optimize=True)

    def backward(grad):
        if w.requires_grad:
            gw = np.einsum("bchw,bchwij->cij", grad, win, optimize=True)
            w.accumulate(gw.reshape(w.data.shape))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for ki in range(kh):
                for kj in range(kw):
                    rs, cs = ki * dilation, kj * dilation
                    gxp[
                        :, :, rs : rs + (Ho - 1) * stride + 1 : stride,
                        cs : cs + (Wo - 1) * stride + 1 : stride,
                    ] += w.data[None, :, 0, ki, kj, None, None] * grad
            x.accumulate(np.ascontiguousarray(gxp[:, :, ph : ph + H, pw : pw + W]))

    return _make(out_data, (x, w), backward)


def _conv_im2col(x, w, stride, dilation, groups, dims):
    B, Cin, H, W, Cout, Cin_g, Cout_g, ph, pw, Ho, Wo = dims
    kh, kw = w.data.shape[2:]
    Hp, Wp = H + 2 * ph, W + 2 * pw
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    xt = np.ascontiguousarray(
        xp.reshape(B, groups, Cin_g, Hp, Wp).transpose(1, 2, 0, 3, 4)
    )
    w2 = w.data.reshape(groups, Cout_g, Cin_g * kh * kw)
    taps = [(ki, kj) for ki in range(kh) for kj in range(kw)]

    def build_cols():
        cols = np.empty((groups, Cin_g, kh * kw, B, Ho, Wo), dtype=x.data.dtype)
        for t, (ki, kj) in enumerate(taps):
            rs, cs = ki * dilation, kj * dilation
            cols[:, :, t] = xt[
                :, :, :, rs : rs + (Ho - 1) * stride + 1 : stride,
                cs : cs + (Wo - 1) * stride + 1 : stride,
            ]
        return cols.reshape(groups, Cin_g * kh * kw, B * Ho * Wo)

    out_data = np.matmul(w2, build_cols())
    out_data = np.ascontiguousarray(
        out_data.reshape(groups, Cout_g, B, Ho, Wo).transpose(2, 0, 1, 3, 4)
    ).reshape(B, Cout, Ho, Wo)

    def backward(grad):
        gflat = np.ascontiguousarray(
            grad.reshape(B, groups, Cout_g, Ho, Wo).transpose(1, 2, 0, 3, 4)
        ).reshape(groups, Cout_g, B * Ho * Wo)
        if w.requires_grad:
            gw = np.matmul(gflat, build_cols().transpose(0, 2, 1))
            w.accumulate(gw.reshape(w.data.shape))
        if x.requires_grad:
            gcols = np.matmul(w2.transpose(0, 2, 1), gflat).reshape(
                groups, Cin_g, kh * kw, B, Ho, Wo
            )
            gxt = np.zeros_like(xt)
            for t, (ki, kj) in enumerate(taps):
                rs, cs = ki * dilation, kj * dilation
                gxt[
                    :, :, :, rs : rs + (Ho - 1) * stride + 1 : stride,
                    cs : cs + (Wo - 1) * stride + 1 : stride,
                ] += gcols[:, :, t]
            gx = gxt.transpose(2, 0, 1, 3, 4).reshape(B, Cin, Hp, Wp)[
                :, :, ph : ph + H, pw : pw + W
            ]
            x.accumulate(np.ascontiguousarray(gx))

    return _make(out_data, (x, w), backward)


@dataclass
class BatchNormState:
    """Running statistics for one batch-norm layer; mutated during training."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def for_channels(cls, channels: int, dtype=np.float32) -> "BatchNormState":
        return cls(
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )


def batchnorm2d(
    x: Tensor, scale: Tensor, shift: Tensor, state: BatchNormState, training: bool
) -> Tensor:
    """Per-channel batch normalization over (B, H, W) with affine parameters.

    Training mode normalizes by biased batch statistics and updates the
    running averages in place; eval mode normalizes by the running stats.
    """
    B, C, H, W = x.data.shape
    if scale.data.shape != (C,) or shift.data.shape != (C,):
        raise EngineError(f"affine parameters must have shape ({C},)")
    eps = state.eps
    if training:
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        m = state.momentum
        state.running_mean += m * (mu - state.running_mean)
        state.running_var += m * (var - state.running_var)
    else:
        mu = state.running_mean
        var = state.running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None, None]) * inv_std[None, :, None, None]
    out_data = (
        scale.data[None, :, None, None] * xhat + shift.data[None, :, None, None]
    ).astype(x.data.dtype)
    n = B * H * W

    def backward(grad):
        if scale.requires_grad:
            scale.accumulate((grad * xhat).sum(axis=(0, 2, 3)).astype(scale.data.dtype))
        if shift.requires_grad:
            shift.accumulate(grad.sum(axis=(0, 2, 3)).astype(shift.data.dtype))
        if not x.requires_grad:
            return
        gxhat = grad * scale.data[None, :, None, None]
        if training:
            sum_g = gxhat.sum(axis=(0, 2, 3))
            sum_gx = (gxhat * xhat).sum(axis=(0, 2, 3))
            gx = (
                inv_std[None, :, None, None]
                * (gxhat - (sum_g[None, :, None, None] + xhat * sum_gx[None, :, None, None]) / n)
            )
        else:
            gx = gxhat * inv_std[None, :, None, None]
        x.accumulate(gx.astype(x.data.dtype))

    return _make(out_data, (x, scale, shift), backward)


def cross_entropy_2d(logits: Tensor, labels: np.ndarray, ignore_index: int = -1) -> Tensor:
    """Mean per-pixel negative log-softmax over non-ignored pixels.

    ``logits`` is (B, classes, H, W); ``labels`` is an integer (B, H, W) map.
    """
    B, C, H, W = logits.data.shape
    labels = np.asarray(labels)
    if labels.shape != (B, H, W):
        raise EngineError(f"labels shape {labels.shape} != {(B, H, W)}")
    valid = labels != ignore_index
    if np.any((labels < 0) & valid) or np.any(labels >= C):
        raise EngineError(f"labels out of range for {C} classes")
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EngineError("no valid pixels in batch")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z - zmax).sum(axis=1)) + zmax[:, 0]
    safe_labels = np.where(valid, labels, 0)
    true_logit = np.take_along_axis(z, safe_labels[:, None], axis=1)[:, 0]
    per_pixel = np.where(valid, logsumexp - true_logit, 0.0)
    out_data = np.asarray(per_pixel.sum() / n_valid, dtype=z.dtype)

    def backward(grad):
        if not logits.requires_grad:
            return
        softmax = np.exp(z - zmax)
        softmax /= softmax.sum(axis=1, keepdims=True)
        onehot = np.zeros_like(z)
        b_idx, h_idx, w_idx = np.nonzero(valid)
        onehot[b_idx, labels[b_idx, h_idx, w_idx], h_idx, w_idx] = 1.0
        g = (softmax - onehot) * valid[:, None] / n_valid
        logits.accumulate((g * grad).astype(z.dtype))

    return _make(out_data, (logits,), backward)


def sgd_step(
    param: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
):
    """Classical momentum update; returns (new_param, new_velocity).

    Weight decay adds decay * param to the gradient before the velocity
    update. Pure function, used by the in-place optimizer below.
    """
    if param.shape != grad.shape or param.shape != velocity.shape:
        raise EngineError("param/grad/velocity shapes must match")
    g = grad + weight_decay * param
    v = momentum * velocity + g
    return param - lr * v, v


class SGD:
    """SGD with momentum over a list of tensors.

    Parameters whose gradient is absent are left completely untouched
    (value and velocity), so frozen branches stay bit-identical.
    """

    def __init__(self, params: list[Tensor], lr: float, momentum: float = 0.9,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocities):
            if p.grad is None:
                continue
            new_p, new_v = sgd_step(
                p.data, p.grad, v, self.lr, self.momentum, self.weight_decay
            )
            p.data[...] = new_p
            v[...] = new_v

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def reset_velocity(self, param: Tensor):
        for p, v in zip(self.params, self.velocities):
            if p is param:
                v[...] = 0.0
