"""Discrete Fourier transform: mixed-radix Cooley-Tukey for 2-3-5-smooth
lengths, direct O(N^2) evaluation otherwise."""
import numpy as np

from . import kernels
from .errors import EmptyInputError

FAST_RADICES = (2, 3, 5)


def smooth_radices(n):
    """Factor ``n`` over {2, 3, 5}; ``None`` if another prime divides it."""
    if n < 1:
        return None
    radices = []
    for r in FAST_RADICES:
        while n % r == 0:
            radices.append(r)
            n //= r
    return radices if n == 1 else None


def direct_dft(x):
    """Row-wise direct-sum DFT, used for lengths with a prime factor above 5."""
    x = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    n = x.shape[-1]
    idx = np.arange(n)
    out = np.empty_like(x)
    block = max(1, 2**22 // max(n, 1))
    for k0 in range(0, n, block):
        k = idx[k0:k0 + block]
        # reduce kn mod n before scaling to keep the phase argument small
        basis = np.exp(-2j * np.pi * (np.outer(k, idx) % n) / n)
        out[:, k0:k0 + block] = x @ basis.T
    return out


def fft_batch(x):
    """Unnormalized DFT of each row of a 2-D array."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("fft_batch expects a 2-D array")
    if x.shape[1] == 0:
        raise EmptyInputError("cannot transform an empty sequence")
    radices = smooth_radices(x.shape[1])
    if radices is None:
        return direct_dft(x)
    return kernels.fft_rows(x, radices)


def fft(x):
    """Unnormalized DFT ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)`` of a 1-D sequence."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("fft expects a 1-D sequence")
    if x.size == 0:
        raise EmptyInputError("cannot transform an empty sequence")
    return fft_batch(x[None, :])[0]
