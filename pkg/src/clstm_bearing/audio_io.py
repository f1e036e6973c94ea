"""16-bit mono PCM WAV reading/writing and fixed-length framing."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
import struct

import numpy as np

from .errors import NotWavError, TruncatedFileError, UnsupportedFormatError
from .labels import FaultLabel

PCM_SCALE = 32768.0
DEFAULT_SAMPLE_RATE = 48000
DEFAULT_FRAME_LEN = 4800


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    source_id: str = ""
    label: Optional[FaultLabel] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip holds mono audio only")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("samples must lie in [-1, 1]")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass
class Frame:
    samples: np.ndarray
    frame_index: int
    source_id: str = ""
    label: Optional[FaultLabel] = None


def _parse_chunks(buf):
    if buf[:4] != b"RIFF":
        raise NotWavError("missing RIFF magic")
    if len(buf) < 12:
        raise TruncatedFileError("RIFF header cut short")
    if buf[8:12] != b"WAVE":
        raise NotWavError("RIFF file is not WAVE")
    chunks = {}
    pos = 12
    while pos + 8 <= len(buf):
        cid, size = struct.unpack_from("<4sI", buf, pos)
        body = buf[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise TruncatedFileError(f"chunk {cid!r} declares {size} bytes, {len(body)} present")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def read_wav(path, label=None, source_id=None):
    """Decode a mono 16-bit PCM WAV file into an :class:`AudioClip`.

    Samples are scaled as ``word / 32768`` so -32768 maps exactly to -1.0.
    """
    path = Path(path)
    chunks = _parse_chunks(path.read_bytes())
    fmt = chunks.get(b"fmt ")
    if fmt is None or len(fmt) < 16:
        raise TruncatedFileError("missing or short fmt chunk")
    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt)
    if audio_format != 1:
        raise UnsupportedFormatError(f"audio format {audio_format} is not PCM")
    if bits != 16:
        raise UnsupportedFormatError(f"{bits}-bit samples; only 16-bit is supported")
    if channels != 1:
        raise UnsupportedFormatError(f"{channels} channels; only mono is supported")
    data = chunks.get(b"data")
    if data is None:
        raise TruncatedFileError("no data chunk")
    if len(data) % 2:
        raise TruncatedFileError("odd number of bytes in 16-bit data chunk")
    words = np.frombuffer(data, dtype="<i2")
    return AudioClip(
        samples=words.astype(np.float64) / PCM_SCALE,
        sample_rate_hz=rate,
        source_id=source_id if source_id is not None else path.stem,
        label=label,
    )


def encode_pcm16(samples):
    words = np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    return np.clip(words, -32768, 32767).astype("<i2")


def write_wav(clip, path):
    data = encode_pcm16(clip.samples).tobytes()
    rate = int(clip.sample_rate_hz)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, 1, 1, rate, rate * 2, 2, 16,
        b"data", len(data),
    )
    # the 16-bit data chunk is always even-sized, so no pad byte is needed
    Path(path).write_bytes(header + data)


def frame_count(n_samples, frame_len, hop):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def frame_array(samples, frame_len=DEFAULT_FRAME_LEN, hop=None):
    """Stack consecutive windows of ``samples`` into a (frames, frame_len) array."""
    hop = frame_len if hop is None else hop
    if frame_len < 1 or hop < 1:
        raise ValueError("frame_len and hop must be positive")
    samples = np.asarray(samples, dtype=np.float64)
    n = frame_count(samples.size, frame_len, hop)
    if n == 0:
        return np.empty((0, frame_len))
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return np.array(windows[: (n - 1) * hop + 1 : hop])


def frame_signal(clip, frame_len=DEFAULT_FRAME_LEN, hop=None):
    """Split a clip into labeled frames; a trailing partial window is dropped."""
    rows = frame_array(clip.samples, frame_len, hop)
    return [
        Frame(samples=row, frame_index=i, source_id=clip.source_id, label=clip.label)
        for i, row in enumerate(rows)
    ]
