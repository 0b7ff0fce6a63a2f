"""Framing, spectral transforms, normalization and filtering primitives.

All functions are pure and operate on 1-D numpy arrays at 16 kHz.
Analysis uses a rectangular window with 75 % overlap; overlap-add rescales
by ``shift / frame_len`` so that segment -> overlap_add is the identity
away from the leading edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio_io import SAMPLE_RATE
from .errors import InvalidCutoffs

LOG_POWER_EPS = 1e-12
ILN_EPS = 1e-5


@dataclass(frozen=True)
class FrameConfig:
    frame_len: int = 512
    shift: int = 128

    def __post_init__(self) -> None:
        if self.frame_len % self.shift or self.frame_len // self.shift != 4:
            raise ValueError("frame_len must be exactly 4 * shift")

    @property
    def fft_size(self) -> int:
        return self.frame_len

    @property
    def spec_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def overlap(self) -> int:
        return self.frame_len // self.shift


DEFAULT_FRAMES = FrameConfig()


@dataclass
class ILnParams:
    gain: np.ndarray
    bias: np.ndarray
    epsilon: float = ILN_EPS


def num_frames(length: int, cfg: FrameConfig = DEFAULT_FRAMES) -> int:
    if length <= 0:
        return 0
    return -(-max(length - cfg.frame_len, 0) // cfg.shift) + 1


def segment(x: np.ndarray, cfg: FrameConfig = DEFAULT_FRAMES) -> np.ndarray:
    """Cut ``x`` into frames of ``frame_len`` every ``shift`` samples.

    The tail is zero-padded so every sample falls in at least one frame.
    Returns an array of shape ``(n_frames, frame_len)``.
    """
    x = np.asarray(x)
    n = num_frames(len(x), cfg)
    if n == 0:
        return np.zeros((0, cfg.frame_len), dtype=x.dtype)
    padded = np.zeros((n - 1) * cfg.shift + cfg.frame_len, dtype=x.dtype)
    padded[: len(x)] = x
    idx = np.arange(n)[:, None] * cfg.shift + np.arange(cfg.frame_len)[None, :]
    return padded[idx]


def rdft(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase of the real DFT (works on a frame or a stack of frames)."""
    spec = np.fft.rfft(frame, axis=-1)
    return np.abs(spec), np.angle(spec)


def irdft_with_phase(mag: np.ndarray, phase: np.ndarray) -> np.ndarray:
    return np.fft.irfft(mag * np.exp(1j * phase), axis=-1)


def log_power(mag: np.ndarray, floor_eps: float = LOG_POWER_EPS) -> np.ndarray:
    return np.log(mag * mag + floor_eps)


def instant_layer_norm(x: np.ndarray, p: ILnParams) -> np.ndarray:
    """Normalize each frame over its last axis; no statistics carried across frames."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + p.epsilon) * p.gain + p.bias


def overlap_add(frames: np.ndarray, cfg: FrameConfig = DEFAULT_FRAMES) -> np.ndarray:
    frames = np.asarray(frames)
    n = frames.shape[0]
    if n == 0:
        return np.zeros(0, dtype=frames.dtype)
    out = np.zeros((n - 1) * cfg.shift + cfg.frame_len, dtype=frames.dtype)
    for k in range(cfg.overlap):
        # frames k, k+4, k+8, ... never overlap each other
        sel = frames[k :: cfg.overlap]
        start = k * cfg.shift
        stop = start + sel.shape[0] * cfg.frame_len
        out[start:stop] += sel.reshape(-1)
    return out * (cfg.shift / cfg.frame_len)


def fir_convolve(x: np.ndarray, ir: np.ndarray) -> np.ndarray:
    """Causal linear convolution truncated to ``len(x)``."""
    ir = np.asarray(ir, dtype=np.float64)
    if ir.size == 0:
        raise ValueError("impulse response must be non-empty")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    return sps.oaconvolve(x, ir)[: len(x)]


def bandpass(
    x: np.ndarray, f_low: float, f_high: float, fs: int = SAMPLE_RATE
) -> np.ndarray:
    """Second-order Butterworth high-pass at ``f_low`` cascaded with a low-pass at ``f_high``."""
    if not 0 < f_low < f_high < fs / 2:
        raise InvalidCutoffs(f"need 0 < f_low < f_high < {fs / 2}, got {f_low}, {f_high}")
    hp = sps.butter(2, f_low, btype="highpass", fs=fs, output="sos")
    lp = sps.butter(2, f_high, btype="lowpass", fs=fs, output="sos")
    return sps.sosfilt(np.vstack([hp, lp]), np.asarray(x, dtype=np.float64))


def delay(x: np.ndarray, delay_ms: float, fs: int = SAMPLE_RATE) -> np.ndarray:
    if delay_ms < 0:
        raise ValueError("delay must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    n = int(round(delay_ms * fs / 1000.0))
    out = np.zeros_like(x)
    if n < len(x):
        out[n:] = x[: len(x) - n]
    return out


def db_to_gain(gain_db: float) -> float:
    return 10.0 ** (gain_db / 20.0)


def apply_gain_db(x: np.ndarray, gain_db: float) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * db_to_gain(gain_db)


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def rms_db(x: np.ndarray) -> float:
    return 20.0 * np.log10(max(rms(x), 1e-300))
