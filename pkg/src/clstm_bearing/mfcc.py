"""MFCC baseline: Hamming window, power spectrum, mel filterbank, log, DCT-II."""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .audio_io import Frame
from .errors import BadRangeError
from .fft import fft

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MfccConfig:
    n_fft: int = 512
    n_mels: int = 26
    n_coeffs: int = 13
    fmin_hz: float = 0.0
    fmax_hz: Optional[float] = None  # None -> Nyquist
    window: str = "hamming"

    def resolved_fmax(self, sample_rate_hz):
        return sample_rate_hz / 2 if self.fmax_hz is None else self.fmax_hz

    def validate(self, sample_rate_hz):
        fmax = self.resolved_fmax(sample_rate_hz)
        if not 0 <= self.fmin_hz < fmax:
            raise BadRangeError(f"need 0 <= fmin < fmax, got {self.fmin_hz}, {fmax}")
        if fmax > sample_rate_hz / 2:
            raise BadRangeError(f"fmax {fmax} exceeds Nyquist {sample_rate_hz / 2}")
        if self.n_fft < 2 or self.n_fft % 2:
            raise ValueError(f"n_fft must be even, got {self.n_fft}")
        if not 1 <= self.n_coeffs <= self.n_mels:
            raise ValueError("need 1 <= n_coeffs <= n_mels")
        if self.window != "hamming":
            raise ValueError(f"unsupported window {self.window!r}")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg, sample_rate_hz):
    """Triangular filters on FFT bins, centers equally spaced in mel.

    Edge and center frequencies are snapped to the nearest bin, so each row
    peaks at exactly 1 on its center bin.
    """
    cfg.validate(sample_rate_hz)
    n_bins = cfg.n_fft // 2 + 1
    mels = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.resolved_fmax(sample_rate_hz)), cfg.n_mels + 2)
    points = np.round(mel_to_hz(mels) * cfg.n_fft / sample_rate_hz).astype(int)
    points = np.clip(points, 0, n_bins - 1)
    bins = np.arange(n_bins)
    fb = np.zeros((cfg.n_mels, n_bins))
    for j in range(cfg.n_mels):
        lo, c, hi = points[j], points[j + 1], points[j + 2]
        if c > lo:
            rise = (bins > lo) & (bins < c)
            fb[j, rise] = (bins[rise] - lo) / (c - lo)
        if hi > c:
            fall = (bins > c) & (bins < hi)
            fb[j, fall] = (hi - bins[fall]) / (hi - c)
        fb[j, c] = 1.0
    return fb


@lru_cache(maxsize=32)
def _dct_matrix(m):
    k = np.arange(m)[:, None]
    n = np.arange(m)[None, :]
    mat = np.sqrt(2.0 / m) * np.cos(np.pi * (n + 0.5) * k / m)
    mat[0] /= np.sqrt(2.0)
    mat.setflags(write=False)
    return mat


def dct_ortho(v):
    """Orthonormal DCT-II along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    return v @ _dct_matrix(v.shape[-1]).T


def idct_ortho(c):
    """Inverse of :func:`dct_ortho` (orthonormal DCT-III)."""
    c = np.asarray(c, dtype=np.float64)
    return c @ _dct_matrix(c.shape[-1])


def mfcc(frame, cfg, sample_rate_hz):
    samples = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if samples.size > cfg.n_fft:
        raise ValueError(f"frame of {samples.size} samples exceeds n_fft={cfg.n_fft}")
    fb = mel_filterbank(cfg, sample_rate_hz)
    padded = np.zeros(cfg.n_fft)
    padded[:samples.size] = samples * np.hamming(samples.size)
    spectrum = fft(padded)[: cfg.n_fft // 2 + 1]
    power = np.abs(spectrum) ** 2 / cfg.n_fft
    log_mel = np.log(fb @ power + LOG_FLOOR)
    return dct_ortho(log_mel)[: cfg.n_coeffs]
