"""Synthetic bearing acoustics and the 25-clip, 8:1:1 dataset.

Each fault class is an impulse train at its own repetition rate; every
impulse rings a damped sinusoid at a structural resonance. Normal clips are
background noise only. Clip RNG streams come from numpy's counter-based
Philox generator keyed on ``(rng_seed, label code, position index)``, so
clips can be generated in any order or in parallel with identical results.
"""
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence
import csv
import zlib

import numpy as np

from .audio_io import AudioClip, frame_array, read_wav, write_wav
from .errors import BadConfigError, BadPositionError, EmptySetError, NonPositiveRpmError
from .features import StandardizationStats, magnitude_spectra, standardization_from_rows
from .labels import FaultLabel

# Characteristic impulse rates as multiples of the shaft frequency. Surrogate
# values: non-harmonic, inner race above outer race.
RATE_MULTIPLIERS = {
    FaultLabel.NORMAL: 0.0,
    FaultLabel.DRIVE_INNER_SPALL: 5.4,
    FaultLabel.NON_DRIVE_INNER_SPALL: 4.9,
    FaultLabel.DRIVE_OUTER_SPALL: 3.6,
    FaultLabel.NON_DRIVE_OUTER_SPALL: 3.1,
}

MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("filename", "label_code", "position_index", "distance_m")


class Split(IntEnum):
    TRAIN = 0
    VAL = 1
    TEST = 2


def default_class_rates(rpm):
    if rpm <= 0:
        raise NonPositiveRpmError(f"rpm must be positive, got {rpm}")
    shaft_hz = rpm / 60.0
    return {label: mult * shaft_hz for label, mult in RATE_MULTIPLIERS.items()}


def _rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass
class SynthConfig:
    rpm: float = 2000.0
    sample_rate_hz: int = 48000
    clip_seconds: float = 40.0
    positions: int = 5
    distances_m: Optional[Sequence[float]] = None  # None -> evenly spaced 0.5..1.5 m
    impulse_rate_hz: Optional[Dict[FaultLabel, float]] = None  # None -> default_class_rates(rpm)
    resonance_hz: float = 4000.0
    resonance_decay: float = 600.0  # 1/s, envelope exp(-decay * t)
    noise_rms: float = 0.1
    jitter: float = 0.01  # +/- fraction of each impulse period
    rng_seed: int = 0

    def __post_init__(self):
        if self.rpm <= 0:
            raise NonPositiveRpmError(f"rpm must be positive, got {self.rpm}")
        if self.clip_seconds <= 0:
            raise BadConfigError("clip_seconds must be positive")
        if self.sample_rate_hz <= 0 or self.positions < 1:
            raise BadConfigError("sample rate and position count must be positive")
        if self.noise_rms < 0 or self.resonance_decay <= 0:
            raise BadConfigError("noise_rms must be >= 0 and resonance_decay > 0")
        if not 0 < self.resonance_hz < self.sample_rate_hz / 2:
            raise BadConfigError(f"resonance {self.resonance_hz} Hz outside (0, Nyquist)")
        if self.distances_m is None:
            self.distances_m = tuple(np.linspace(0.5, 1.5, self.positions)) if self.positions > 1 else (1.0,)
        self.distances_m = tuple(float(d) for d in self.distances_m)
        if len(self.distances_m) != self.positions or min(self.distances_m) <= 0:
            raise BadConfigError("need one positive distance per position")
        if self.impulse_rate_hz is None:
            self.impulse_rate_hz = default_class_rates(self.rpm)
        self.impulse_rate_hz = {FaultLabel(k): float(v) for k, v in self.impulse_rate_hz.items()}
        if self.impulse_rate_hz.get(FaultLabel.NORMAL, 0.0) != 0.0:
            raise BadConfigError("the Normal class cannot carry impulses")

    @property
    def n_samples(self):
        return int(round(self.clip_seconds * self.sample_rate_hz))


def clip_name(label, position_index):
    return f"{FaultLabel(label).display}_{position_index}"


def impulse_times(rate_hz, duration_s, jitter, rng):
    """Onset times of a jittered periodic impulse train within [0, duration)."""
    period = 1.0 / rate_hz
    n = int(np.ceil(duration_s * rate_hz * (1 + jitter))) + 2
    steps = period * (1.0 + rng.uniform(-jitter, jitter, size=n))
    times = rng.uniform(0.0, period) + np.concatenate(([0.0], np.cumsum(steps[:-1])))
    return times[times < duration_s]


def gen_clip(label, position_index, cfg):
    label = FaultLabel(label)
    if not 0 <= position_index < cfg.positions:
        raise BadPositionError(f"position {position_index} not in [0, {cfg.positions})")
    rng = _rng(cfg.rng_seed, int(label), position_index)
    sr = cfg.sample_rate_hz
    n = cfg.n_samples
    signal = cfg.noise_rms * rng.standard_normal(n)
    rate = cfg.impulse_rate_hz.get(label, 0.0)
    if rate > 0:
        amp = 1.0 / cfg.distances_m[position_index]
        ring = int(np.ceil(8.0 / cfg.resonance_decay * sr))  # envelope down to e^-8
        offsets = np.arange(ring)
        omega = 2 * np.pi * cfg.resonance_hz
        for t0 in impulse_times(rate, n / sr, cfg.jitter, rng):
            first = int(np.floor(t0 * sr)) + 1
            idx = first + offsets
            idx = idx[idx < n]
            tau = idx / sr - t0
            signal[idx] += amp * np.exp(-cfg.resonance_decay * tau) * np.sin(omega * tau)
    peak = np.max(np.abs(signal)) if n else 0.0
    if peak > 0:
        signal *= 0.9 / peak
    return AudioClip(samples=signal, sample_rate_hz=sr, source_id=clip_name(label, position_index), label=label)


def iter_clips(cfg):
    for label in FaultLabel:
        for pos in range(cfg.positions):
            yield gen_clip(label, pos, cfg)


def split_counts(n_units):
    """Train/val/test sizes for one clip: round(0.8F), round(0.1F), remainder."""
    train = int(np.floor(0.8 * n_units + 0.5))
    val = min(int(np.floor(0.1 * n_units + 0.5)), n_units - train)
    return train, val, n_units - train - val


def assign_splits(source_id, n_units, split_seed):
    """Split code per unit of one clip; depends only on (source_id, index, seed)."""
    train, val, _ = split_counts(n_units)
    perm = _rng(split_seed, zlib.crc32(source_id.encode("utf-8"))).permutation(n_units)
    codes = np.full(n_units, Split.TEST, dtype=np.int8)
    codes[perm[:train]] = Split.TRAIN
    codes[perm[train:train + val]] = Split.VAL
    return codes


@dataclass
class SplitDataset:
    """Labeled samples of shape (T, 2, N) with a split code per sample."""

    x: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    source_ids: List[str]
    frame_index: np.ndarray
    stats: StandardizationStats
    sample_rate_hz: int = 48000
    clip_count: int = 0
    frames_per_clip: Dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return self.labels.size

    def indices(self, split):
        return np.flatnonzero(self.split == Split(split))

    def subset(self, split):
        idx = self.indices(split)
        return self.x[idx], self.labels[idx]

    def counts(self):
        return {s.name.lower(): int(np.sum(self.split == s)) for s in Split}


def dataset_from_clips(clips: Iterable[AudioClip], frame_len, split_seed, seq_len=1, stats=None):
    """Frame, split and featurize labeled clips.

    Units of ``seq_len`` consecutive frames are split 8:1:1 within each clip.
    Standardization statistics come from the training units unless ``stats``
    is given (inference/evaluation against a stored checkpoint).
    """
    raw, labels, splits, sources, starts = [], [], [], [], []
    per_clip = {}
    rate = None
    n_clips = 0
    for clip in clips:
        if clip.label is None:
            raise BadConfigError(f"clip {clip.source_id!r} has no label")
        rate = clip.sample_rate_hz if rate is None else rate
        n_clips += 1
        frames = frame_array(clip.samples, frame_len)
        per_clip[clip.source_id] = frames.shape[0]
        n_units = frames.shape[0] // seq_len
        if n_units == 0:
            continue
        frames = frames[: n_units * seq_len]
        block = np.empty((frames.shape[0], 2, frame_len))
        block[:, 0] = frames
        block[:, 1] = magnitude_spectra(frames)
        raw.append(block.reshape(n_units, seq_len, 2, frame_len))
        labels.append(np.full(n_units, int(clip.label), dtype=np.int64))
        splits.append(assign_splits(clip.source_id, n_units, split_seed))
        sources.extend([clip.source_id] * n_units)
        starts.append(np.arange(n_units) * seq_len)
    if not raw:
        raise EmptySetError("no complete frames in any clip")
    x = np.concatenate(raw)
    del raw
    labels = np.concatenate(labels)
    splits = np.concatenate(splits)
    if stats is None:
        mask = splits == Split.TRAIN
        stats = standardization_from_rows(x[mask, :, 0], x[mask, :, 1])
    x[:, :, 0] -= stats.mean_time
    x[:, :, 0] /= stats.std_time
    x[:, :, 1] -= stats.mean_freq
    x[:, :, 1] /= stats.std_freq
    return SplitDataset(
        x=x, labels=labels, split=splits, source_ids=sources,
        frame_index=np.concatenate(starts), stats=stats,
        sample_rate_hz=rate, clip_count=n_clips, frames_per_clip=per_clip,
    )


def build_dataset(cfg, frame_len=4800, split_seed=0, seq_len=1):
    return dataset_from_clips(iter_clips(cfg), frame_len, split_seed, seq_len)


def write_corpus(cfg, out_dir):
    """Write one WAV per (label, position) and the manifest CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for label in FaultLabel:
        for pos in range(cfg.positions):
            clip = gen_clip(label, pos, cfg)
            name = clip.source_id + ".wav"
            write_wav(clip, out_dir / name)
            rows.append((name, int(label), pos, repr(cfg.distances_m[pos])))
    path = out_dir / MANIFEST_NAME
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        writer.writerows(rows)
    return path


def read_manifest(data_dir):
    path = Path(data_dir) / MANIFEST_NAME
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise BadConfigError(f"manifest {path} lacks columns {sorted(missing)}")
        return [
            {
                "filename": row["filename"],
                "label": FaultLabel(int(row["label_code"])),
                "position_index": int(row["position_index"]),
                "distance_m": float(row["distance_m"]),
            }
            for row in reader
        ]


def iter_manifest_clips(data_dir):
    data_dir = Path(data_dir)
    for row in read_manifest(data_dir):
        yield read_wav(data_dir / row["filename"], label=row["label"])


def load_dataset(data_dir, frame_len, split_seed, seq_len=1, stats=None):
    """Dataset built from a ``synth`` output directory."""
    return dataset_from_clips(iter_manifest_clips(data_dir), frame_len, split_seed, seq_len, stats)
