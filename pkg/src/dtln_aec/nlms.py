"""Sample-wise NLMS adaptive echo canceller (no double-talk detector)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioBuffer, as_samples


@dataclass(frozen=True)
class NlmsConfig:
    taps: int = 1600
    mu: float = 0.5
    eps_reg: float = 1e-6

    def __post_init__(self) -> None:
        if self.taps < 1:
            raise ValueError("taps must be >= 1")
        if not 0 <= self.mu < 2:
            # mu == 0 is allowed as a frozen filter
            raise ValueError("mu must lie in [0, 2)")
        if self.eps_reg <= 0:
            raise ValueError("eps_reg must be positive")


@dataclass
class NlmsState:
    taps: int
    coeffs: np.ndarray = field(init=False)
    _hist: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.coeffs = np.zeros(self.taps)
        # doubled buffer: the newest ``taps`` samples are always one contiguous slice
        self._hist = np.zeros(2 * self.taps)
        self._pos = self.taps

    def push(self, sample: float) -> None:
        self._pos -= 1
        if self._pos < 0:
            self._hist[self.taps :] = self._hist[: self.taps]
            self._pos = self.taps - 1
        self._hist[self._pos] = sample

    @property
    def far_history(self) -> np.ndarray:
        """Most recent far-end samples, newest first."""
        return self._hist[self._pos : self._pos + self.taps]


def nlms_step(near_sample: float, far_sample: float, cfg: NlmsConfig, state: NlmsState) -> float:
    """Filter one sample pair; returns the error (echo-cancelled) sample."""
    state.push(far_sample)
    x = state.far_history
    e = near_sample - float(state.coeffs @ x)
    if cfg.mu:
        state.coeffs += (cfg.mu * e / (float(x @ x) + cfg.eps_reg)) * x
    return e


def nlms_process(
    near: AudioBuffer | np.ndarray,
    far: AudioBuffer | np.ndarray,
    cfg: NlmsConfig = NlmsConfig(),
    state: NlmsState | None = None,
) -> np.ndarray:
    near = as_samples(near)
    far = as_samples(far)
    n = max(len(near), len(far))
    near = np.pad(near, (0, n - len(near)))
    far = np.pad(far, (0, n - len(far)))
    if state is None:
        state = NlmsState(cfg.taps)
    out = np.empty(n)
    for i in range(n):
        out[i] = nlms_step(near[i], far[i], cfg, state)
    return out


class NlmsCanceller:
    """Hop-based wrapper with the same call shape as the neural engine."""

    latency = 0

    def __init__(self, cfg: NlmsConfig = NlmsConfig()):
        self.cfg = cfg
        self.state = NlmsState(cfg.taps)

    def reset(self) -> None:
        self.state = NlmsState(self.cfg.taps)

    def process_hop(self, near_hop: np.ndarray, far_hop: np.ndarray) -> np.ndarray:
        return nlms_process(near_hop, far_hop, self.cfg, self.state)

    __call__ = process_hop
