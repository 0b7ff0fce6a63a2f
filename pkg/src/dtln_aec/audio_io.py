"""WAV reading/writing and the in-memory signal container.

Only 16 kHz mono is accepted. PCM16 and IEEE float32 can be read; files are
always written as PCM16.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFile, IoFailure, UnsupportedFormat

SAMPLE_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioBuffer:
    """Mono signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate != SAMPLE_RATE:
            raise UnsupportedFormat(
                f"sample rate {self.sample_rate} Hz not supported, need {SAMPLE_RATE}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise UnsupportedFormat("samples contain NaN or Inf")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def as_samples(signal: AudioBuffer | np.ndarray) -> np.ndarray:
    """Return the sample array of a buffer or array-like (validated via AudioBuffer)."""
    if isinstance(signal, AudioBuffer):
        return signal.samples
    return AudioBuffer(signal).samples


def _chunks(data: bytes):
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise CorruptFile("truncated chunk header")
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise CorruptFile(f"chunk {cid!r} truncated ({len(body)} of {size} bytes)")
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    """Read a 16 kHz mono PCM16 or float32 RIFF/WAVE file.

    PCM16 samples are divided by 32768 so that -32768 maps to exactly -1.0.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 12:
        raise CorruptFile("file shorter than RIFF header")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise UnsupportedFormat("not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptFile("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
                # the sub-format GUID starts with the actual format tag
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None or payload is None:
        raise CorruptFile("missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels != 1:
        raise UnsupportedFormat(f"{channels} channels, need mono")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"sample rate {rate} Hz, need {SAMPLE_RATE}")
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormat(f"format tag {tag:#x} with {bits} bits not supported")
    if len(payload) % dtype.itemsize:
        raise CorruptFile("data chunk length is not a whole number of samples")

    samples = np.frombuffer(payload, dtype=dtype).astype(np.float64) * scale
    return AudioBuffer(samples, rate)


def write_wav(path: str | os.PathLike, buf: AudioBuffer | np.ndarray) -> None:
    """Write ``buf`` as 16 kHz mono PCM16, clipping to the int16 range."""
    samples = as_samples(buf)
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_PCM,
        1,
        SAMPLE_RATE,
        SAMPLE_RATE * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
