"""Pure numpy implementations of the hot kernels.

These are the fallback used when the compiled ``_kernels`` extension is not
built. The compiled module exposes the same functions with the same
signatures; see ``clstm_bearing.kernels`` for selection.
"""
from functools import lru_cache

import numpy as np

BACKEND = "python"


@lru_cache(maxsize=None)
def _twiddles(n, r):
    m = n // r
    tw = np.exp(-2j * np.pi * np.outer(np.arange(r), np.arange(m)) / n)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(r), np.arange(r)) / r)
    tw.setflags(write=False)
    dft.setflags(write=False)
    return tw, dft


def _fft_rec(x, radices):
    b, n = x.shape
    if n == 1:
        return x.copy()
    r = radices[0]
    m = n // r
    # row j of the sub-problem holds x[j::r]
    sub = x.reshape(b, m, r).transpose(0, 2, 1).reshape(b * r, m)
    y = _fft_rec(sub, radices[1:]).reshape(b, r, m)
    tw, dft = _twiddles(n, r)
    out = np.einsum("qj,bjk->bqk", dft, y * tw)
    return out.reshape(b, n)


def fft_rows(x, radices):
    """Mixed-radix decimation-in-time FFT of every row of a 2-D complex array.

    ``radices`` must multiply to the row length.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    return _fft_rec(x, tuple(radices))


def _same_pad(k):
    left = (k - 1) // 2
    return left, k - 1 - left


def conv1xk_forward(x, w, b):
    """x: (B, H, W, Cin), w: (K, Cin, Cout), b: (Cout,) -> (B, H, W, Cout)."""
    k = w.shape[0]
    width = x.shape[2]
    left, right = _same_pad(k)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right), (0, 0)))
    y = np.empty(x.shape[:3] + (w.shape[2],))
    y[...] = b
    for t in range(k):
        y += xp[:, :, t:t + width, :] @ w[t]
    return y


def conv1xk_backward(dy, x, w):
    """Returns (dx, dw, db) for ``conv1xk_forward``."""
    k = w.shape[0]
    width = x.shape[2]
    left, right = _same_pad(k)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.empty_like(w)
    cin, cout = w.shape[1], w.shape[2]
    dy2 = dy.reshape(-1, cout)
    for t in range(k):
        win = xp[:, :, t:t + width, :]
        dw[t] = win.reshape(-1, cin).T @ dy2
        dxp[:, :, t:t + width, :] += dy @ w[t].T
    db = dy2.sum(axis=0)
    return np.ascontiguousarray(dxp[:, :, left:left + width, :]), dw, db


def maxpool1x2_forward(x):
    """Returns pooled output and a uint8 mask that is 1 where the right element won."""
    if x.shape[2] % 2:
        raise ValueError(f"max pooling needs an even width, got {x.shape[2]}")
    a = x[:, :, 0::2, :]
    b = x[:, :, 1::2, :]
    arg = b > a
    return np.where(arg, b, a), arg.astype(np.uint8)


def maxpool1x2_backward(dy, arg):
    bsz, h, half, c = dy.shape
    dx = np.zeros((bsz, h, 2 * half, c))
    right = arg.astype(bool)
    dx[:, :, 0::2, :] = np.where(right, 0.0, dy)
    dx[:, :, 1::2, :] = np.where(right, dy, 0.0)
    return dx
