"""Neural-network layers with explicit forward and backward passes.

Everything is plain numpy, dtype-preserving, and deterministic: reductions
run in a fixed order, and max-pooling ties resolve to the first index.
Shapes follow the (batch, channels, height, width) convention.
"""

from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, ShapeMismatch


def conv_out_dim(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ShapeMismatch(
            f"kernel {kernel} stride {stride} padding {padding} "
            f"does not fit input size {size}"
        )
    return out


def _pad_hw(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int):
    b, c, _, _ = xp.shape
    cols = np.empty((b, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[
                :, :, i:i + stride * ho:stride, j:j + stride * wo:stride
            ]
    return cols.reshape(b, c * kh * kw, ho * wo)


def conv2d_forward(x, w, b, stride: int, padding: int):
    """Cross-correlation of x (B,C,H,W) with w (O,C,kh,kw) plus bias b (O,)."""
    bsz, c, h, width = x.shape
    out_ch, in_ch, kh, kw = w.shape
    if in_ch != c:
        raise ShapeMismatch(f"conv expects {in_ch} input channels, got {c}")
    ho = conv_out_dim(h, kh, stride, padding)
    wo = conv_out_dim(width, kw, stride, padding)
    xp = _pad_hw(x, padding)
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    w2 = w.reshape(out_ch, -1)
    y = np.matmul(w2, cols) + b[:, None]
    cache = (xp.shape, cols, w, stride, padding, ho, wo)
    return y.reshape(bsz, out_ch, ho, wo), cache


def conv2d_backward(dout, cache):
    xp_shape, cols, w, stride, padding, ho, wo = cache
    bsz = dout.shape[0]
    out_ch, in_ch, kh, kw = w.shape
    dout2 = dout.reshape(bsz, out_ch, ho * wo)
    db = dout2.sum(axis=(0, 2))
    dw = np.tensordot(dout2, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
    dcols = np.matmul(w.reshape(out_ch, -1).T, dout2)
    dcols = dcols.reshape(bsz, in_ch, kh, kw, ho, wo)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                dcols[:, :, i, j]
            )
    if padding:
        dx = dxp[:, :, padding:-padding, padding:-padding]
    else:
        dx = dxp
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var,
                      momentum: float, eps: float, train: bool):
    """Per-channel normalization over (batch, height, width).

    Train mode normalizes with batch statistics and returns updated running
    stats (running variance uses the unbiased estimate); eval mode uses the
    running stats unchanged.
    """
    if x.ndim != 4 or x.shape[1] != gamma.shape[0]:
        raise ShapeMismatch(
            f"batchnorm over {gamma.shape[0]} channels got input {x.shape}"
        )
    if train:
        if x.shape[0] < 2:
            raise BatchTooSmall("batchnorm training needs batch size >= 2")
        count = x.shape[0] * x.shape[2] * x.shape[3]
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
        unbiased = var * (count / (count - 1))
        new_mean = (1 - momentum) * running_mean + momentum * mean
        new_var = (1 - momentum) * running_var + momentum * unbiased
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - running_mean[:, None, None]) * inv_std[:, None, None]
        new_mean, new_var = running_mean, running_var
    y = gamma[:, None, None] * xhat + beta[:, None, None]
    cache = (xhat, inv_std, gamma, train)
    return y.astype(x.dtype, copy=False), cache, new_mean, new_var


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    if train:
        count = dout.shape[0] * dout.shape[2] * dout.shape[3]
        dx = (gamma * inv_std)[:, None, None] * (
            dout
            - dbeta[:, None, None] / count
            - xhat * dgamma[:, None, None] / count
        )
    else:
        dx = (gamma * inv_std)[:, None, None] * dout
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def maxpool_forward(x, kernel: int, stride: int):
    bsz, c, h, w = x.shape
    ho = conv_out_dim(h, kernel, stride, 0)
    wo = conv_out_dim(w, kernel, stride, 0)
    stack = np.empty((bsz, c, kernel * kernel, ho, wo), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            stack[:, :, i * kernel + j] = x[
                :, :, i:i + stride * ho:stride, j:j + stride * wo:stride
            ]
    idx = stack.argmax(axis=2)  # first maximum wins ties
    y = np.take_along_axis(stack, idx[:, :, None], axis=2)[:, :, 0]
    cache = (x.shape, idx, kernel, stride, ho, wo)
    return y, cache


def maxpool_backward(dout, cache):
    x_shape, idx, kernel, stride, ho, wo = cache
    dstack = np.zeros((*x_shape[:2], kernel * kernel, ho, wo), dtype=dout.dtype)
    np.put_along_axis(dstack, idx[:, :, None], dout[:, :, None], axis=2)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(kernel):
        for j in range(kernel):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                dstack[:, :, i * kernel + j]
            )
    return dx


def upsample_forward(x, scale: int):
    return x.repeat(scale, axis=2).repeat(scale, axis=3)


def upsample_backward(dout, scale: int):
    b, c, h, w = dout.shape
    return dout.reshape(b, c, h // scale, scale, w // scale, scale).sum(axis=(3, 5))


def linear_forward(x, w, b):
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(
            f"linear expects {w.shape[1]} input features, got {x.shape}"
        )
    return x @ w.T + b, x


def linear_backward(dout, cache, w):
    x = cache
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ w
    return dx, dw, db


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    Stabilized with log-sum-exp, so arbitrary logit offsets are safe.
    """
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeMismatch(
            f"logits {logits.shape} do not match {labels.shape[0]} labels"
        )
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = float(-log_probs[np.arange(n), labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits.astype(logits.dtype, copy=False)
