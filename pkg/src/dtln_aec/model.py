"""DTLN-aec forward pass.

Two stacked separation cores, both conditioned on the far-end reference:

* core 1 predicts a 257-bin mask from the normalized log-power spectra of
  the near-end and far-end frames and applies it to the near-end magnitude;
  the masked frame is resynthesized with the near-end phase.
* core 2 encodes that frame and the far-end frame with one shared linear
  encoder, predicts a mask in the 512-dim feature domain and decodes the
  masked features back to a time frame, which is overlap-added.

Two execution paths exist. ``DTLNAec`` / ``process_frame_pair`` run hop by
hop with persistent state (the real-time path). ``process_file`` runs the
same math batched over all frames of a file and serves as the offline
reference for the streaming path.

All forward math is float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import dsp
from .audio_io import AudioBuffer, as_samples
from .weights import FRAME_LEN, SPEC_BINS, ModelWeights

SHIFT = 128
LATENCY = FRAME_LEN - SHIFT
_F32 = np.float32


@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, units: int) -> "LstmState":
        return cls(np.zeros(units, _F32), np.zeros(units, _F32))


@dataclass
class CoreOutputs:
    mask_tf: np.ndarray
    mask_feat: np.ndarray


@dataclass
class StreamingState:
    units: int
    near_frame_buf: np.ndarray = field(init=False)
    far_frame_buf: np.ndarray = field(init=False)
    core1_lstm: list[LstmState] = field(init=False)
    core2_lstm: list[LstmState] = field(init=False)
    ola_accumulator: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        self.near_frame_buf = np.zeros(FRAME_LEN, _F32)
        self.far_frame_buf = np.zeros(FRAME_LEN, _F32)
        self.core1_lstm = [LstmState.zeros(self.units) for _ in range(2)]
        self.core2_lstm = [LstmState.zeros(self.units) for _ in range(2)]
        self.ola_accumulator = np.zeros(FRAME_LEN, _F32)


def _gates(z: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i, f, g, o = np.split(z, 4, axis=-1)
    c_new = expit(f) * c + expit(i) * np.tanh(g)
    h_new = expit(o) * np.tanh(c_new)
    return h_new, c_new


def lstm_step(
    x: np.ndarray,
    state: LstmState,
    kernel: np.ndarray,
    recurrent: np.ndarray,
    bias: np.ndarray,
) -> tuple[np.ndarray, LstmState]:
    """One step of a standard LSTM cell with fused [i, f, g, o] gates."""
    z = x @ kernel + state.hidden @ recurrent + bias
    h, c = _gates(z, state.cell)
    return h, LstmState(h, c)


def lstm_sequence(
    xs: np.ndarray, kernel: np.ndarray, recurrent: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """Run an LSTM from zero state over a ``(T, in_dim)`` sequence."""
    units = recurrent.shape[0]
    proj = xs @ kernel + bias
    h = np.zeros(units, _F32)
    c = np.zeros(units, _F32)
    out = np.empty((xs.shape[0], units), _F32)
    for t in range(xs.shape[0]):
        h, c = _gates(proj[t] + h @ recurrent, c)
        out[t] = h
    return out


def _iln(w: ModelWeights, prefix: str) -> dsp.ILnParams:
    return dsp.ILnParams(w[f"{prefix}.gain"], w[f"{prefix}.bias"], _F32(dsp.ILN_EPS))


def _lstm_pair(w: ModelWeights, core: str, x: np.ndarray, states: list[LstmState]) -> np.ndarray:
    for k in (0, 1):
        p = f"{core}.lstm{k + 1}"
        x, states[k] = lstm_step(x, states[k], w[f"{p}.kernel"], w[f"{p}.recurrent"], w[f"{p}.bias"])
    return x


def _mask(w: ModelWeights, core: str, h: np.ndarray) -> np.ndarray:
    return expit(h @ w[f"{core}.dense.kernel"] + w[f"{core}.dense.bias"])


def _core1_features(near_mag, far_mag, w: ModelWeights) -> np.ndarray:
    near_feat = dsp.instant_layer_norm(dsp.log_power(near_mag, _F32(dsp.LOG_POWER_EPS)), _iln(w, "core1.iln_near"))
    far_feat = dsp.instant_layer_norm(dsp.log_power(far_mag, _F32(dsp.LOG_POWER_EPS)), _iln(w, "core1.iln_far"))
    return np.concatenate([near_feat, far_feat], axis=-1)


def _core2_features(enc_main, enc_far, w: ModelWeights) -> np.ndarray:
    return np.concatenate(
        [
            dsp.instant_layer_norm(enc_main, _iln(w, "core2.iln_main")),
            dsp.instant_layer_norm(enc_far, _iln(w, "core2.iln_far")),
        ],
        axis=-1,
    )


def core1_step(
    near_frame: np.ndarray,
    far_frame: np.ndarray,
    w: ModelWeights,
    s: StreamingState,
    pinned_mask: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spectral masking core. Returns (masked magnitude, near phase, mask).

    ``pinned_mask`` replaces the predicted mask with a constant (test hook);
    the LSTM state still advances.
    """
    near_mag, near_phase = dsp.rdft(near_frame.astype(_F32))
    far_mag, _ = dsp.rdft(far_frame.astype(_F32))
    feats = _core1_features(near_mag, far_mag, w)
    mask = _mask(w, "core1", _lstm_pair(w, "core1", feats, s.core1_lstm))
    if pinned_mask is not None:
        mask = np.full(SPEC_BINS, pinned_mask, _F32)
    return mask * near_mag, near_phase, mask


def core2_step(
    est_frame: np.ndarray,
    far_frame: np.ndarray,
    w: ModelWeights,
    s: StreamingState,
    pinned_mask: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Learned-feature masking core. Returns (decoded time frame, mask)."""
    enc = np.stack([est_frame, far_frame]).astype(_F32) @ w["core2.encoder.kernel"]
    feats = _core2_features(enc[0], enc[1], w)
    mask = _mask(w, "core2", _lstm_pair(w, "core2", feats, s.core2_lstm))
    if pinned_mask is not None:
        mask = np.full(enc.shape[1], pinned_mask, _F32)
    return (mask * enc[0]) @ w["core2.decoder.kernel"], mask


def process_frame_pair(
    near_hop: np.ndarray,
    far_hop: np.ndarray,
    w: ModelWeights,
    s: StreamingState,
    pinned_mask: float | None = None,
    diagnostics: CoreOutputs | None = None,
) -> np.ndarray:
    """Advance the stream by one 128-sample hop and return 128 output samples."""
    for buf, hop in ((s.near_frame_buf, near_hop), (s.far_frame_buf, far_hop)):
        buf[:-SHIFT] = buf[SHIFT:]
        buf[-SHIFT:] = hop

    mag, phase, mask_tf = core1_step(s.near_frame_buf, s.far_frame_buf, w, s, pinned_mask)
    est = dsp.irdft_with_phase(mag, phase).astype(_F32)
    frame, mask_feat = core2_step(est, s.far_frame_buf, w, s, pinned_mask)
    if diagnostics is not None:
        diagnostics.mask_tf = mask_tf
        diagnostics.mask_feat = mask_feat

    acc = s.ola_accumulator
    acc[:-SHIFT] = acc[SHIFT:]
    acc[-SHIFT:] = 0.0
    acc += frame
    return acc[:SHIFT] * _F32(SHIFT / FRAME_LEN)


def _pair(near, far) -> tuple[np.ndarray, np.ndarray]:
    near = as_samples(near)
    far = as_samples(far)
    n = max(len(near), len(far))
    return np.pad(near, (0, n - len(near))), np.pad(far, (0, n - len(far)))


class DTLNAec:
    """Streaming echo canceller owning one ``StreamingState``.

    Not thread-safe; use one instance per stream. The weights may be shared.
    """

    def __init__(self, weights: ModelWeights, pinned_mask: float | None = None):
        weights.validate()
        self.weights = weights
        self.pinned_mask = pinned_mask
        self.state = StreamingState(weights.units)

    @property
    def latency(self) -> int:
        return LATENCY

    def reset(self) -> None:
        self.state.reset()

    def process_hop(self, near_hop: np.ndarray, far_hop: np.ndarray) -> np.ndarray:
        return process_frame_pair(
            np.asarray(near_hop, _F32), np.asarray(far_hop, _F32), self.weights, self.state, self.pinned_mask
        )

    __call__ = process_hop

    def process(self, near: AudioBuffer | np.ndarray, far: AudioBuffer | np.ndarray) -> np.ndarray:
        """Stream a whole signal through the current state, hop by hop."""
        near, far = _pair(near, far)
        n = len(near)
        hops = -(-n // SHIFT)
        pad = hops * SHIFT - n
        near = np.pad(near, (0, pad)).astype(_F32)
        far = np.pad(far, (0, pad)).astype(_F32)
        out = np.empty(hops * SHIFT, _F32)
        for k in range(hops):
            sl = slice(k * SHIFT, (k + 1) * SHIFT)
            out[sl] = self.process_hop(near[sl], far[sl])
        return out[:n].astype(np.float64)


def process_stream(near, far, w: ModelWeights, pinned_mask: float | None = None) -> np.ndarray:
    return DTLNAec(w, pinned_mask).process(near, far)


def process_file(
    near: AudioBuffer | np.ndarray, far: AudioBuffer | np.ndarray, w: ModelWeights
) -> np.ndarray:
    """Whole-signal forward pass with every frame-parallel stage batched.

    Output length equals input length; the output lags the input by
    ``LATENCY`` samples.
    """
    w.validate()
    near, far = _pair(near, far)
    n = len(near)
    if n == 0:
        return np.zeros(0)
    hops = -(-n // SHIFT)
    cfg = dsp.DEFAULT_FRAMES

    def frames_of(x):
        padded = np.zeros(LATENCY + hops * SHIFT, _F32)
        padded[LATENCY : LATENCY + n] = x
        return dsp.segment(padded, cfg)

    near_frames, far_frames = frames_of(near), frames_of(far)

    near_mag, near_phase = dsp.rdft(near_frames)
    far_mag, _ = dsp.rdft(far_frames)
    h = _core1_features(near_mag, far_mag, w)
    for k in (1, 2):
        p = f"core1.lstm{k}"
        h = lstm_sequence(h, w[f"{p}.kernel"], w[f"{p}.recurrent"], w[f"{p}.bias"])
    est = dsp.irdft_with_phase(_mask(w, "core1", h) * near_mag, near_phase).astype(_F32)

    enc_main = est @ w["core2.encoder.kernel"]
    enc_far = far_frames @ w["core2.encoder.kernel"]
    h = _core2_features(enc_main, enc_far, w)
    for k in (1, 2):
        p = f"core2.lstm{k}"
        h = lstm_sequence(h, w[f"{p}.kernel"], w[f"{p}.recurrent"], w[f"{p}.bias"])
    decoded = (_mask(w, "core2", h) * enc_main) @ w["core2.decoder.kernel"]

    return dsp.overlap_add(decoded, cfg)[:n].astype(np.float64)
