"""Objective evaluation: SI-SDR, time-domain SNR loss, ERLE and real-time factor."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .audio_io import AudioBuffer, as_samples
from .errors import EmptyMask, ZeroTarget

DB_CAP = 100.0
HOP = 128
HOP_MS = 8.0


def _pair(target, estimate) -> tuple[np.ndarray, np.ndarray]:
    t = as_samples(target)
    e = as_samples(estimate)
    if t.shape != e.shape:
        raise ValueError(f"length mismatch: {len(t)} vs {len(e)}")
    if not np.any(t):
        raise ZeroTarget("target signal is all zeros")
    return t, e


def si_sdr(target: AudioBuffer | np.ndarray, estimate: AudioBuffer | np.ndarray) -> float:
    """Scale-invariant SDR in dB, capped at +100 dB."""
    t, e = _pair(target, estimate)
    alpha = float(e @ t) / float(t @ t)
    proj = alpha * t
    noise = proj - e
    num = float(proj @ proj)
    den = float(noise @ noise)
    if den == 0.0:
        return DB_CAP
    if num == 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


def snr_loss(target: AudioBuffer | np.ndarray, estimate: AudioBuffer | np.ndarray) -> float:
    """Negative time-domain SNR in dB. Scale-dependent, floored at -100."""
    t, e = _pair(target, estimate)
    err = t - e
    den = float(err @ err)
    if den == 0.0:
        return -DB_CAP
    # + 0.0 turns -0.0 into 0.0 when error and target energy match
    return float(max(-10.0 * np.log10(float(t @ t) / den), -DB_CAP)) + 0.0


def erle(
    mic: AudioBuffer | np.ndarray,
    output: AudioBuffer | np.ndarray,
    active_mask: Optional[np.ndarray] = None,
) -> float:
    """Echo return loss enhancement in dB over the masked (far-end-only) region."""
    m = as_samples(mic)
    o = as_samples(output)
    if m.shape != o.shape:
        raise ValueError(f"length mismatch: {len(m)} vs {len(o)}")
    if active_mask is not None:
        sel = np.asarray(active_mask, dtype=bool).reshape(-1)
        if sel.shape != m.shape:
            raise ValueError("mask length differs from signal length")
        m, o = m[sel], o[sel]
    if m.size == 0:
        raise EmptyMask("mask selects no samples")
    num = float(m @ m)
    den = float(o @ o)
    if den == 0.0:
        return DB_CAP
    if num == 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


@dataclass
class RtfResult:
    hops: int
    mean_ms: float
    p99_ms: float

    @property
    def rtf(self) -> float:
        return self.mean_ms / HOP_MS

    @property
    def rtf_p99(self) -> float:
        return self.p99_ms / HOP_MS


def measure_rtf(
    processor: Callable[[np.ndarray, np.ndarray], np.ndarray],
    near: AudioBuffer | np.ndarray,
    far: AudioBuffer | np.ndarray,
) -> RtfResult:
    """Time ``processor(near_hop, far_hop)`` on every 128-sample hop, single stream."""
    near = np.asarray(as_samples(near), dtype=np.float32)
    far = np.asarray(as_samples(far), dtype=np.float32)
    hops = min(len(near), len(far)) // HOP
    if hops == 0:
        raise ValueError("need at least one full hop of input")
    times = np.empty(hops)
    clock = time.perf_counter
    for k in range(hops):
        nh = near[k * HOP : (k + 1) * HOP]
        fh = far[k * HOP : (k + 1) * HOP]
        t0 = clock()
        processor(nh, fh)
        times[k] = clock() - t0
    times *= 1e3
    return RtfResult(hops, float(times.mean()), float(np.percentile(times, 99)))


@dataclass
class MetricReport:
    si_sdr_db: Optional[float] = None
    snr_loss: Optional[float] = None
    erle_db: Optional[float] = None
    rtf_mean: Optional[float] = None
    rtf_p99: Optional[float] = None

    def to_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in asdict(self).items() if v is not None)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls(**json.loads(text))


def evaluate(
    target,
    processed,
    mic=None,
    mask: Optional[np.ndarray] = None,
    rtf: Optional[RtfResult] = None,
) -> MetricReport:
    report = MetricReport(si_sdr(target, processed), snr_loss(target, processed))
    if mic is not None:
        report.erle_db = erle(mic, processed, mask)
    if rtf is not None:
        report.rtf_mean, report.rtf_p99 = rtf.rtf, rtf.rtf_p99
    return report
