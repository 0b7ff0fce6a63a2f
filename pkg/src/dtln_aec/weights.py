"""Named-tensor container for all model parameters.

Binary layout (little-endian)::

    magic      8 bytes   b"DTLNAEC1"
    count      u32
    per tensor:
        name_len   u16
        name       name_len ASCII bytes
        rank       u8
        dims       rank * u32
        payload    prod(dims) * float32, row-major

Fused LSTM tensors use gate order [input, forget, cell, output] along the
last axis. Kernels multiply from the right (``x @ kernel``).
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    CorruptFile,
    IoFailure,
    InvalidUnits,
    MissingTensor,
    ShapeMismatch,
    TrailingBytes,
    UnexpectedTensor,
    VersionMismatch,
)

MAGIC = b"DTLNAEC1"
VALID_UNITS = (128, 256, 512)

FRAME_LEN = 512
SPEC_BINS = 257
FEATURE_SIZE = 512


def lstm_param_count(in_dim: int, units: int) -> int:
    return 4 * units * (in_dim + units + 1)


def dense_param_count(in_dim: int, out_dim: int) -> int:
    return in_dim * out_dim + out_dim


def _lstm(prefix: str, in_dim: int, units: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.kernel": (in_dim, 4 * units),
        f"{prefix}.recurrent": (units, 4 * units),
        f"{prefix}.bias": (4 * units,),
    }


def tensor_shapes(units: int) -> dict[str, tuple[int, ...]]:
    """Every tensor name and its shape for a model of the given LSTM width."""
    shapes: dict[str, tuple[int, ...]] = {}
    shapes["core1.iln_near.gain"] = (SPEC_BINS,)
    shapes["core1.iln_near.bias"] = (SPEC_BINS,)
    shapes["core1.iln_far.gain"] = (SPEC_BINS,)
    shapes["core1.iln_far.bias"] = (SPEC_BINS,)
    shapes.update(_lstm("core1.lstm1", 2 * SPEC_BINS, units))
    shapes.update(_lstm("core1.lstm2", units, units))
    shapes["core1.dense.kernel"] = (units, SPEC_BINS)
    shapes["core1.dense.bias"] = (SPEC_BINS,)
    shapes["core2.encoder.kernel"] = (FRAME_LEN, FEATURE_SIZE)
    shapes["core2.iln_main.gain"] = (FEATURE_SIZE,)
    shapes["core2.iln_main.bias"] = (FEATURE_SIZE,)
    shapes["core2.iln_far.gain"] = (FEATURE_SIZE,)
    shapes["core2.iln_far.bias"] = (FEATURE_SIZE,)
    shapes.update(_lstm("core2.lstm1", 2 * FEATURE_SIZE, units))
    shapes.update(_lstm("core2.lstm2", units, units))
    shapes["core2.dense.kernel"] = (units, FEATURE_SIZE)
    shapes["core2.dense.bias"] = (FEATURE_SIZE,)
    shapes["core2.decoder.kernel"] = (FEATURE_SIZE, FRAME_LEN)
    return shapes


@dataclass
class ModelWeights:
    units: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.tensors = {k: np.ascontiguousarray(v, dtype=np.float32) for k, v in self.tensors.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def validate(self) -> None:
        if self.units not in VALID_UNITS:
            raise InvalidUnits(f"units must be one of {VALID_UNITS}, got {self.units}")
        expected = tensor_shapes(self.units)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise MissingTensor(name)
            if self.tensors[name].shape != shape:
                raise ShapeMismatch(f"{name}: expected {shape}, got {self.tensors[name].shape}")
        extra = sorted(set(self.tensors) - set(expected))
        if extra:
            raise UnexpectedTensor(", ".join(extra))

    def equals(self, other: "ModelWeights") -> bool:
        """Bit-exact comparison."""
        if self.units != other.units or self.tensors.keys() != other.tensors.keys():
            return False
        return all(
            self.tensors[k].shape == other.tensors[k].shape
            and self.tensors[k].tobytes() == other.tensors[k].tobytes()
            for k in self.tensors
        )


def count_params(w: ModelWeights) -> int:
    return int(sum(int(np.prod(t.shape)) for t in w.tensors.values()))


def count_params_baseline(units: int = 512) -> int:
    """Parameter count of the four-layer LSTM mask baseline (514-dim input, 257-bin sigmoid mask)."""
    if units != 512:
        raise InvalidUnits("the baseline is only defined for 512 units")
    total = lstm_param_count(2 * SPEC_BINS, units)
    total += 3 * lstm_param_count(units, units)
    total += dense_param_count(units, SPEC_BINS)
    return total


def random_init(units: int, seed: int) -> ModelWeights:
    """Seeded random weights; matrices uniform in +-1/sqrt(fan_in)."""
    if units not in VALID_UNITS:
        raise InvalidUnits(f"units must be one of {VALID_UNITS}, got {units}")
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(units).items():
        kind = name.rsplit(".", 1)[1]
        if kind in ("kernel", "recurrent"):
            limit = 1.0 / np.sqrt(shape[0])
            tensors[name] = rng.uniform(-limit, limit, size=shape)
        elif kind == "gain":
            tensors[name] = np.ones(shape)
        elif kind == "bias" and ".lstm" in name:
            b = np.zeros(shape)
            b[units : 2 * units] = 1.0  # forget gate
            tensors[name] = b
        else:
            tensors[name] = np.zeros(shape)
    w = ModelWeights(units, tensors)
    w.validate()
    return w


# sigmoid(40) rounds to exactly 1.0 in float32 and float64
_SATURATING_BIAS = 40.0


def identity_weights(units: int = 128, seed: int = 0) -> ModelWeights:
    """Test weights whose forward pass reconstructs the near-end input.

    Both dense layers have zero kernels and a saturating bias, so every mask is
    exactly 1; encoder and decoder are identity matrices. The LSTMs keep
    random weights so they still run, but cannot influence the output.
    """
    w = random_init(units, seed)
    for core in ("core1", "core2"):
        w.tensors[f"{core}.dense.kernel"][:] = 0.0
        w.tensors[f"{core}.dense.bias"][:] = _SATURATING_BIAS
    w.tensors["core2.encoder.kernel"] = np.eye(FRAME_LEN, dtype=np.float32)
    w.tensors["core2.decoder.kernel"] = np.eye(FRAME_LEN, dtype=np.float32)
    return w


def save(path: str | os.PathLike, w: ModelWeights) -> None:
    w.validate()
    parts = [MAGIC, struct.pack("<I", len(w.tensors))]
    for name, arr in w.tensors.items():
        raw = name.encode("ascii")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFile(f"unexpected end of file at byte {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load(path: str | os.PathLike) -> ModelWeights:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    r = _Reader(data)
    magic = data[: len(MAGIC)]
    if len(magic) == len(MAGIC) and magic[:-1] == MAGIC[:-1] and magic != MAGIC:
        raise VersionMismatch(f"container version {magic[-1:]!r}, expected {MAGIC[-1:]!r}")
    if magic != MAGIC:
        raise BadMagic("not a DTLNAEC weight container")
    r.take(len(MAGIC))

    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("ascii")
        except UnicodeDecodeError as exc:
            raise CorruptFile("tensor name is not ASCII") from exc
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I")
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape)
        if name in tensors:
            raise CorruptFile(f"duplicate tensor {name}")
        tensors[name] = arr.astype(np.float32)
    if r.pos != len(data):
        raise TrailingBytes(f"{len(data) - r.pos} bytes after last tensor")

    if "core1.lstm1.recurrent" not in tensors:
        raise MissingTensor("core1.lstm1.recurrent")
    w = ModelWeights(int(tensors["core1.lstm1.recurrent"].shape[0]), tensors)
    w.validate()
    return w
