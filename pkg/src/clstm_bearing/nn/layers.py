"""Forward and backward passes for every layer type in the network.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache and returns gradients with
respect to the inputs and parameters. Spatial tensors are laid out
``(batch, height, width, channels)``; everything is float64.
"""
import numpy as np

from .. import kernels
from ..errors import (
    BadRateError,
    BadTargetError,
    OddWidthError,
    ShapeMismatchError,
    TinyBatchError,
)

TRAIN = "train"
INFER = "infer"


def _check_mode(mode):
    if mode not in (TRAIN, INFER):
        raise ValueError(f"mode must be {TRAIN!r} or {INFER!r}, got {mode!r}")


def same_padding(k):
    """Left/right zero padding that keeps the width for a stride-1 kernel of width k."""
    left = (k - 1) // 2
    return left, k - 1 - left


# -- convolution ------------------------------------------------------------

def conv1xk_forward(x, weights, bias):
    """1xK cross-correlation along the width axis with 'same' padding.

    ``weights`` has shape (1, K, Cin, Cout) and ``bias`` any shape with Cout
    elements. Each height row is processed independently.
    """
    if x.ndim != 4:
        raise ShapeMismatchError(f"conv input must be (B, H, W, C), got {x.shape}")
    if weights.ndim != 4 or weights.shape[0] != 1:
        raise ShapeMismatchError(f"conv weights must be (1, K, Cin, Cout), got {weights.shape}")
    if x.shape[3] != weights.shape[2]:
        raise ShapeMismatchError(f"input has {x.shape[3]} channels, kernel expects {weights.shape[2]}")
    w = weights[0]
    b = bias.reshape(-1)
    if b.size != w.shape[2]:
        raise ShapeMismatchError(f"bias has {b.size} entries for {w.shape[2]} output channels")
    x = np.ascontiguousarray(x)
    return kernels.conv1xk_forward(x, w, b), (x, weights, bias.shape)


def conv1xk_backward(dy, cache):
    x, weights, bias_shape = cache
    dx, dw, db = kernels.conv1xk_backward(np.ascontiguousarray(dy), x, weights[0])
    return dx, dw[None], db.reshape(bias_shape)


# -- batch normalization ----------------------------------------------------

def batchnorm_forward(x, scale, offset, running_mean, running_var, mode,
                      eps=1e-5, momentum=0.1):
    """Per-channel normalization over every axis except the last.

    In train mode the batch statistics are used and the running statistics
    are updated in place; in infer mode the running statistics are used.
    The biased batch variance serves for both normalization and the
    running-variance update.
    """
    _check_mode(mode)
    c = x.shape[-1]
    gamma = scale.reshape(-1)
    beta = offset.reshape(-1)
    if gamma.size != c or beta.size != c:
        raise ShapeMismatchError(f"batch norm over {c} channels got scale/offset of {gamma.size}/{beta.size}")
    axes = tuple(range(x.ndim - 1))
    if mode == TRAIN:
        if x.shape[0] < 2:
            raise TinyBatchError("batch normalization in train mode needs a batch of at least 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.reshape(running_mean.shape)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(running_var.shape)
    else:
        mean = running_mean.reshape(-1)
        var = running_var.reshape(-1)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    y = xhat * gamma + beta
    return y, (xhat, inv_std, gamma, scale.shape, mode)


def batchnorm_backward(dy, cache):
    xhat, inv_std, gamma, param_shape, mode = cache
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    if mode == TRAIN:
        m = dy.size // dy.shape[-1]
        dxhat = dy * gamma
        dx = inv_std / m * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
    else:
        dx = dy * gamma * inv_std
    return dx, dgamma.reshape(param_shape), dbeta.reshape(param_shape)


# -- pointwise and reshaping ------------------------------------------------

def relu_forward(x):
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(dy, mask):
    return np.where(mask, dy, 0.0)


def maxpool1x2_forward(x):
    """1x2 max pooling with stride 2 along the width; ties go to the left element."""
    if x.shape[2] % 2:
        raise OddWidthError(f"max pooling needs an even width, got {x.shape[2]}")
    return kernels.maxpool1x2_forward(np.ascontiguousarray(x))


def maxpool1x2_backward(dy, arg):
    return kernels.maxpool1x2_backward(np.ascontiguousarray(dy), arg)


def flatten_forward(x):
    """(B, H, W, C) -> (B, H*W*C) with index (h*W + w)*C + c."""
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dy, shape):
    return dy.reshape(shape)


# -- LSTM -------------------------------------------------------------------

def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(seq, input_weights, recurrent_weights, bias, h0=None, c0=None):
    """Run an LSTM over ``seq`` of shape (B, T, D) and return the last hidden state.

    Gate rows are stacked (input, forget, cell candidate, output), each H
    rows tall.
    """
    if seq.ndim != 3:
        raise ShapeMismatchError(f"LSTM input must be (B, T, D), got {seq.shape}")
    bsz, steps, d = seq.shape
    four_h = input_weights.shape[0]
    hidden = four_h // 4
    if input_weights.shape != (four_h, d) or four_h % 4:
        raise ShapeMismatchError(f"input weights {input_weights.shape} do not fit input dim {d}")
    if recurrent_weights.shape != (four_h, hidden) or bias.size != four_h:
        raise ShapeMismatchError("recurrent weights / bias do not match the input weights")
    if steps < 1:
        raise ShapeMismatchError("LSTM needs at least one time step")
    b = bias.reshape(-1)
    h = np.zeros((bsz, hidden)) if h0 is None else h0
    c = np.zeros((bsz, hidden)) if c0 is None else c0
    proj = (seq.reshape(bsz * steps, d) @ input_weights.T).reshape(bsz, steps, four_h)
    steps_cache = []
    for t in range(steps):
        z = proj[:, t] + h @ recurrent_weights.T + b
        i = sigmoid(z[:, :hidden])
        f = sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = sigmoid(z[:, 3 * hidden:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        steps_cache.append((i, f, g, o, c_prev, h_prev, tc))
    return h, (seq, input_weights, recurrent_weights, bias.shape, steps_cache, c)


def lstm_backward(dh, cache):
    seq, input_weights, recurrent_weights, bias_shape, steps_cache, _ = cache
    bsz, steps, d = seq.shape
    hidden = recurrent_weights.shape[1]
    dz_all = np.empty((bsz, steps, 4 * hidden))
    dw_rec = np.zeros_like(recurrent_weights)
    dc = np.zeros((bsz, hidden))
    for t in reversed(range(steps)):
        i, f, g, o, c_prev, h_prev, tc = steps_cache[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
            axis=1,
        )
        dz_all[:, t] = dz
        dw_rec += dz.T @ h_prev
        dh = dz @ recurrent_weights
        dc = dc * f
    flat_dz = dz_all.reshape(bsz * steps, 4 * hidden)
    dw_in = flat_dz.T @ seq.reshape(bsz * steps, d)
    dseq = (flat_dz @ input_weights).reshape(seq.shape)
    db = flat_dz.sum(axis=0).reshape(bias_shape)
    return dseq, dw_in, dw_rec, db


# -- dropout ----------------------------------------------------------------

def dropout_forward(x, rate, mode, rng=None):
    """Inverted dropout: identity in infer mode, survivors scaled by 1/(1-rate) in train mode."""
    _check_mode(mode)
    if not 0 <= rate < 1:
        raise BadRateError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == INFER:
        return x, None
    if rate == 0:
        return x.copy(), np.ones(x.shape, dtype=bool)
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return np.where(mask, x / (1.0 - rate), 0.0), mask


def dropout_backward(dy, mask, rate):
    if mask is None:
        return dy
    return np.where(mask, dy / (1.0 - rate), 0.0)


# -- fully connected and loss -----------------------------------------------

def fc_forward(x, weights, bias):
    if x.shape[-1] != weights.shape[1]:
        raise ShapeMismatchError(f"FC expects {weights.shape[1]} inputs, got {x.shape[-1]}")
    return x @ weights.T + bias.reshape(-1), (x, weights, bias.shape)


def fc_backward(dy, cache):
    x, weights, bias_shape = cache
    return dy @ weights, dy.T @ x, dy.sum(axis=0).reshape(bias_shape)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_crossentropy(logits, target):
    """Mean cross-entropy of softmax(logits) against integer targets.

    Accepts a single logit vector with a scalar target, or a (B, classes)
    batch with B targets. Returns ``(loss, dlogits, probs)``; for a batch the
    gradient is of the mean loss.
    """
    single = logits.ndim == 1
    logits2 = np.atleast_2d(logits)
    target = np.atleast_1d(np.asarray(target))
    n_classes = logits2.shape[1]
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if target.shape != (logits2.shape[0],):
        raise ShapeMismatchError(f"{target.size} targets for {logits2.shape[0]} logit rows")
    if np.any((target < 0) | (target >= n_classes)) or not np.issubdtype(target.dtype, np.integer):
        raise BadTargetError(f"targets must be class indices in [0, {n_classes})")
    z = logits2 - logits2.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(logits2.shape[0])
    loss = float(np.mean(log_norm - z[rows, target]))
    probs = np.exp(z - log_norm[:, None])
    grad = probs.copy()
    grad[rows, target] -= 1.0
    grad /= logits2.shape[0]
    if single:
        return loss, grad[0], probs[0]
    return loss, grad, probs
