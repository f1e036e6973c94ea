"""Kernel backend selection.

The compiled extension is used when it has been built; otherwise the numpy
fallback is imported. ``CLSTM_BEARING_KERNELS=python`` forces the fallback,
``CLSTM_BEARING_KERNELS=cython`` makes a missing extension an import error.

Routing with the compiled backend follows ``benchmarks/bench_kernels.py``:
FFT and max pooling always run compiled. The 1xK convolution runs compiled
only in the forward direction for narrow inputs; once there are enough input
channels the numpy path, which is one BLAS GEMM per kernel tap, wins.
"""
import os

from . import _kernels_py

# Input-channel count up to which the compiled forward convolution is faster.
CONV_COMPILED_MAX_CIN = 4

_forced = os.environ.get("CLSTM_BEARING_KERNELS", "").lower()

if _forced == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _kernels_py

BACKEND = _impl.BACKEND
fft_rows = _impl.fft_rows
maxpool1x2_forward = _impl.maxpool1x2_forward
maxpool1x2_backward = _impl.maxpool1x2_backward
conv1xk_backward = _kernels_py.conv1xk_backward


def conv1xk_forward(x, w, b):
    if w.shape[1] <= CONV_COMPILED_MAX_CIN:
        return _impl.conv1xk_forward(x, w, b)
    return _kernels_py.conv1xk_forward(x, w, b)


def available_backends():
    """Map backend name -> module for every backend importable here."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
