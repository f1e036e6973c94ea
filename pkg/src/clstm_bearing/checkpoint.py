"""Binary checkpoint format.

Layout, all little-endian::

    magic         8 bytes   b"CLSTMCK1"
    version       u32
    config        7 x i64   frame_len, conv1_channels, conv2_channels,
                            kernel_width, lstm_hidden, classes, sequence_len
                  f64       dropout_rate
                  u8        freeze_bn_offset
    metadata      i64       epoch
                  f64       validation accuracy (NaN when unknown)
                  u64       rng seed
                  4 x f64   standardization mean_time, std_time, mean_freq, std_freq
                  i64       sample rate of the training audio
    tensor count  u32
    per tensor    u16 name length, UTF-8 name, u8 rank, rank x u64 dims,
                  f64 payload in row-major order

Tensors are the learnables followed by the batch-norm running statistics,
in model order, so save -> load -> save reproduces the same bytes.

The same tensor-record encoding is reused for feature files (magic
``b"CLSTMFT1"``; version, then tensor count and records only).
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
import io
import math
import struct

import numpy as np

from .errors import BadMagicError, ShapeMismatchError, TruncatedFileError, VersionMismatchError
from .features import StandardizationStats
from .model import Model, ModelConfig, param_shapes, state_shapes

MAGIC = b"CLSTMCK1"
FEATURE_MAGIC = b"CLSTMFT1"
VERSION = 1
_CONFIG_INTS = ("frame_len", "conv1_channels", "conv2_channels", "kernel_width",
                "lstm_hidden", "classes", "sequence_len")


@dataclass
class CheckpointMeta:
    epoch: int = 0
    val_accuracy: float = math.nan
    seed: int = 0
    stats: StandardizationStats = field(default_factory=StandardizationStats)
    sample_rate_hz: int = 48000


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"file ends at byte {len(self.data)}, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _write_tensor(buf, name, arr):
    raw = name.encode("utf-8")
    arr = np.asarray(arr, dtype="<f8")  # tobytes() is C-order; ascontiguousarray would lift 0-d to 1-d
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(arr.tobytes())


def _read_tensor(reader):
    (name_len,) = reader.unpack("<H")
    name = bytes(reader.take(name_len)).decode("utf-8")
    (rank,) = reader.unpack("<B")
    dims = reader.unpack(f"<{rank}Q")
    count = int(np.prod(dims)) if rank else 1
    payload = reader.take(8 * count)
    return name, np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)


def _check_header(reader, magic):
    head = bytes(reader.data[:len(magic)])
    if head != magic:
        if len(head) < len(magic) and magic.startswith(head):
            raise TruncatedFileError("file shorter than its magic number")
        raise BadMagicError(f"bad magic {head!r}, expected {magic!r}")
    reader.pos = len(magic)
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise VersionMismatchError(f"format version {version}, this reader supports {VERSION}")


def dumps(model, meta=None):
    meta = meta or CheckpointMeta()
    cfg = model.config
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<7q", *(getattr(cfg, k) for k in _CONFIG_INTS)))
    buf.write(struct.pack("<dB", cfg.dropout_rate, int(cfg.freeze_bn_offset)))
    buf.write(struct.pack("<qdQ", int(meta.epoch), float(meta.val_accuracy), int(meta.seed)))
    buf.write(struct.pack("<4d", *meta.stats.as_array()))
    buf.write(struct.pack("<q", int(meta.sample_rate_hz)))
    tensors = list(model.params.items()) + list(model.state.items())
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        _write_tensor(buf, name, arr)
    return buf.getvalue()


def loads(data):
    """Parse checkpoint bytes into ``(Model, CheckpointMeta)``, validating every shape."""
    reader = _Reader(memoryview(data))
    _check_header(reader, MAGIC)
    ints = reader.unpack("<7q")
    dropout, freeze = reader.unpack("<dB")
    cfg = ModelConfig(**dict(zip(_CONFIG_INTS, ints)), dropout_rate=dropout, freeze_bn_offset=bool(freeze))
    cfg.validate()
    epoch, val_acc, seed = reader.unpack("<qdQ")
    stats = StandardizationStats.from_array(reader.unpack("<4d"))
    (rate,) = reader.unpack("<q")
    meta = CheckpointMeta(epoch=epoch, val_accuracy=val_acc, seed=seed, stats=stats, sample_rate_hz=rate)
    expected = OrderedDict(list(param_shapes(cfg).items()) + list(state_shapes(cfg).items()))
    (count,) = reader.unpack("<I")
    if count != len(expected):
        raise ShapeMismatchError(f"checkpoint holds {count} tensors, config implies {len(expected)}")
    tensors = OrderedDict()
    for _ in range(count):
        name, arr = _read_tensor(reader)
        if name not in expected or name in tensors:
            raise ShapeMismatchError(f"unexpected tensor {name!r}")
        if arr.shape != expected[name]:
            raise ShapeMismatchError(f"{name}: stored shape {arr.shape}, config implies {expected[name]}")
        tensors[name] = arr
    if reader.pos != len(reader.data):
        raise ShapeMismatchError(f"{len(reader.data) - reader.pos} trailing bytes after last tensor")
    params = OrderedDict((k, tensors[k]) for k in param_shapes(cfg))
    state = OrderedDict((k, tensors[k]) for k in state_shapes(cfg))
    return Model(cfg, params, state), meta


def save_checkpoint(model, meta, path):
    Path(path).write_bytes(dumps(model, meta))


def load_checkpoint(path):
    return loads(Path(path).read_bytes())


def save_tensors(path, tensors):
    """Write named arrays with the checkpoint tensor-record encoding."""
    buf = io.BytesIO()
    buf.write(FEATURE_MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        _write_tensor(buf, name, arr)
    Path(path).write_bytes(buf.getvalue())


def load_tensors(path):
    reader = _Reader(memoryview(Path(path).read_bytes()))
    _check_header(reader, FEATURE_MAGIC)
    (count,) = reader.unpack("<I")
    out = OrderedDict()
    for _ in range(count):
        name, arr = _read_tensor(reader)
        out[name] = arr
    if reader.pos != len(reader.data):
        raise ShapeMismatchError("trailing bytes after last tensor")
    return out
