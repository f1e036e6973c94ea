"""Time/frequency features: each frame becomes a 2 x N matrix holding its
standardized samples (row 0) and standardized magnitude spectrum (row 1)."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audio_io import Frame
from .errors import EmptySetError
from .fft import fft_batch
from .labels import FaultLabel

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class StandardizationStats:
    mean_time: float = 0.0
    std_time: float = 1.0
    mean_freq: float = 0.0
    std_freq: float = 1.0

    def as_array(self):
        return np.array([self.mean_time, self.std_time, self.mean_freq, self.std_freq])

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))


@dataclass
class TimeFreqFeature:
    matrix: np.ndarray
    label: Optional[FaultLabel] = None
    source_id: str = ""


def _as_rows(frames):
    if isinstance(frames, np.ndarray):
        return np.atleast_2d(frames).astype(np.float64, copy=False)
    return np.stack([f.samples if isinstance(f, Frame) else np.asarray(f) for f in frames])


def magnitude_spectra(rows, chunk=512):
    """``|FFT|/N`` over all N bins for each row of a 2-D array, no window."""
    rows = np.atleast_2d(rows)
    n = rows.shape[1]
    out = np.empty(rows.shape)
    for start in range(0, rows.shape[0], chunk):
        out[start:start + chunk] = np.abs(fft_batch(rows[start:start + chunk])) / n
    return out


def magnitude_spectrum(frame):
    samples = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    return magnitude_spectra(samples[None, :])[0]


def standardization_from_rows(time_rows, spectra):
    """Global scalar mean/std of the time samples and of the spectrum values."""
    if time_rows.size == 0:
        raise EmptySetError("no training frames to standardize against")
    return StandardizationStats(
        mean_time=float(np.mean(time_rows)),
        std_time=max(float(np.std(time_rows)), STD_FLOOR),
        mean_freq=float(np.mean(spectra)),
        std_freq=max(float(np.std(spectra)), STD_FLOOR),
    )


def compute_standardization(frames):
    """Statistics over training frames (a sequence of Frame or a 2-D array)."""
    if len(frames) == 0:
        raise EmptySetError("no training frames to standardize against")
    rows = _as_rows(frames)
    return standardization_from_rows(rows, magnitude_spectra(rows))


def assemble_features(time_rows, spectra, stats):
    """Stack precomputed rows into a (F, 2, N) feature array."""
    out = np.empty((time_rows.shape[0], 2, time_rows.shape[1]))
    out[:, 0] = (time_rows - stats.mean_time) / stats.std_time
    out[:, 1] = (spectra - stats.mean_freq) / stats.std_freq
    return out


def build_features(frames, stats):
    rows = _as_rows(frames)
    return assemble_features(rows, magnitude_spectra(rows), stats)


def build_feature(frame, stats):
    matrix = build_features(frame.samples[None, :], stats)[0]
    return TimeFreqFeature(matrix=matrix, label=frame.label, source_id=frame.source_id)
