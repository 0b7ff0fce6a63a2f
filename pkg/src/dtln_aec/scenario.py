"""Seeded synthesis of echo scenarios for training and evaluation.

A scenario is drawn as a fully resolved ``ScenarioSpec`` (every random
choice written down) and then rendered into aligned near-mic, far-end
reference and clean target signals. The mixture obeys
``near_mic == target + noise + echo`` exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal as sps

from . import dsp
from .audio_io import SAMPLE_RATE, AudioBuffer, read_wav, write_wav
from .errors import AllZeroIr, EmptyAssetPool, ZeroDirectPath

P_FAR_NOISE = 0.5
P_NEAR_NOISE = 0.7
P_GAP = 0.05
P_ECHO = 0.9
P_FAR_FLOOR_NOISE = 0.5

SNR_MEAN_DB, SNR_STD_DB = 5.0, 10.0
SER_MEAN_DB, SER_STD_DB = 0.0, 10.0
DELAY_MS = (10.0, 100.0)
BP_LOW_HZ = (100.0, 400.0)
BP_HIGH_HZ = (6000.0, 7500.0)
IR_GAIN_DB = (-25.0, 0.0)
INPUT_GAIN_DB = (-25.0, 0.0)
FAR_FLOOR_DB = (-120.0, -70.0)

SHELF_CORNER_HZ = (200.0, 4000.0)
SHELF_GAIN_DB = (-6.0, 6.0)

IR_ONSET_THRESHOLD = 0.3
ACTIVE_THRESHOLD_DB = -50.0
ACTIVE_FRAME = 160

ROLES = ("speech", "noise", "ir")


@dataclass
class NoiseSpec:
    asset: str
    snr_db: float


@dataclass
class GapSpec:
    start_s: float
    len_s: float


@dataclass
class ScenarioSpec:
    seed: int
    far_speech: str
    ir: str
    near_speech: Optional[str]
    duration_s: float = 4.0
    delay_ms: float = 50.0
    bp_low_hz: float = 200.0
    bp_high_hz: float = 7000.0
    ir_gain_db: float = 0.0
    far_noise: Optional[NoiseSpec] = None
    near_noise: Optional[NoiseSpec] = None
    ser_db: Optional[float] = None
    near_gap: Optional[GapSpec] = None
    # (near-mic, far-end reference), peak level relative to full scale
    input_gains_db: tuple[float, float] = (0.0, 0.0)
    # None means a digitally silent far end when there is no echo
    far_silence_floor_db: Optional[float] = None

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        checks = [
            ("delay_ms", self.delay_ms, DELAY_MS),
            ("bp_low_hz", self.bp_low_hz, BP_LOW_HZ),
            ("bp_high_hz", self.bp_high_hz, BP_HIGH_HZ),
            ("ir_gain_db", self.ir_gain_db, IR_GAIN_DB),
        ]
        checks += [("input_gains_db", g, INPUT_GAIN_DB) for g in self.input_gains_db]
        if self.far_silence_floor_db is not None:
            checks.append(("far_silence_floor_db", self.far_silence_floor_db, FAR_FLOOR_DB))
        for name, value, (lo, hi) in checks:
            if not lo <= value <= hi:
                raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
        if self.near_gap is not None:
            g = self.near_gap
            if g.start_s < 0 or g.len_s < 0 or g.start_s + g.len_s > self.duration_s + 1e-9:
                raise ValueError("near_gap outside the scenario")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_gains_db"] = list(self.input_gains_db)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        for key, typ in (("far_noise", NoiseSpec), ("near_noise", NoiseSpec), ("near_gap", GapSpec)):
            if d.get(key) is not None:
                d[key] = typ(**d[key])
        d["input_gains_db"] = tuple(d.get("input_gains_db", (0.0, 0.0)))
        return cls(**d)


@dataclass
class ScenarioBundle:
    near_mic: np.ndarray
    far_ref: np.ndarray
    target: np.ndarray
    echo: np.ndarray
    noise: np.ndarray

    def far_end_only_mask(self) -> np.ndarray:
        """Samples with echo but no near-end speech, for ERLE."""
        return (np.abs(self.target) == 0) & (np.abs(self.echo) > 0)


@dataclass
class AssetPool:
    """Named in-memory assets. Impulse responses are shifted to their direct-path onset."""

    speech: dict[str, np.ndarray] = field(default_factory=dict)
    noise: dict[str, np.ndarray] = field(default_factory=dict)
    irs: dict[str, np.ndarray] = field(default_factory=dict)

    def check(self) -> None:
        for role, pool in (("speech", self.speech), ("noise", self.noise), ("ir", self.irs)):
            if not pool:
                raise EmptyAssetPool(f"no {role} assets")

    @classmethod
    def from_manifest(cls, path: str | os.PathLike) -> "AssetPool":
        """Load a manifest with one ``<role> <path>`` pair per line (either order).

        Roles are ``speech``, ``noise`` and ``ir``; ``#`` starts a comment and
        relative paths resolve against the manifest's directory.
        """
        base = Path(path).parent
        pool = cls()
        target = {"speech": pool.speech, "noise": pool.noise, "ir": pool.irs}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<role> <path>'")
            if parts[0] in ROLES:
                role, rel = parts
            else:
                rel, role = line.rsplit(None, 1)
                if role not in ROLES:
                    raise ValueError(f"{path}:{lineno}: unknown role in {line!r}")
            p = Path(rel.strip())
            if not p.is_absolute():
                p = base / p
            samples = read_wav(p).samples
            target[role][str(rel.strip())] = shift_ir_onset(samples) if role == "ir" else samples
        return pool


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def draw_spec(seed: int, sources: AssetPool, duration_s: float = 4.0) -> ScenarioSpec:
    """Draw one scenario. Deterministic in ``seed`` for a given asset pool."""
    sources.check()
    rng = _rng(seed)
    speech = sorted(sources.speech)
    noise = sorted(sources.noise)
    irs = sorted(sources.irs)

    far_speech = speech[rng.integers(len(speech))]
    near_speech = speech[rng.integers(len(speech))]
    if len(speech) > 1:
        while near_speech == far_speech:
            near_speech = speech[rng.integers(len(speech))]
    ir = irs[rng.integers(len(irs))]

    far_noise = near_noise = None
    if rng.random() < P_FAR_NOISE:
        far_noise = NoiseSpec(noise[rng.integers(len(noise))], float(rng.normal(SNR_MEAN_DB, SNR_STD_DB)))
    if rng.random() < P_NEAR_NOISE:
        near_noise = NoiseSpec(noise[rng.integers(len(noise))], float(rng.normal(SNR_MEAN_DB, SNR_STD_DB)))

    near_gap = None
    if rng.random() < P_GAP:
        glen = float(rng.uniform(0.5, duration_s / 2)) if duration_s > 1.0 else duration_s / 2
        near_gap = GapSpec(float(rng.uniform(0.0, duration_s - glen)), glen)

    ser_db = None
    far_floor = None
    if rng.random() < P_ECHO:
        ser_db = float(rng.normal(SER_MEAN_DB, SER_STD_DB))
    elif rng.random() < P_FAR_FLOOR_NOISE:
        far_floor = float(rng.uniform(*FAR_FLOOR_DB))

    spec = ScenarioSpec(
        seed=int(seed),
        far_speech=far_speech,
        near_speech=near_speech,
        ir=ir,
        duration_s=float(duration_s),
        delay_ms=float(rng.uniform(*DELAY_MS)),
        bp_low_hz=float(rng.uniform(*BP_LOW_HZ)),
        bp_high_hz=float(rng.uniform(*BP_HIGH_HZ)),
        ir_gain_db=float(rng.uniform(*IR_GAIN_DB)),
        far_noise=far_noise,
        near_noise=near_noise,
        ser_db=ser_db,
        near_gap=near_gap,
        input_gains_db=(float(rng.uniform(*INPUT_GAIN_DB)), float(rng.uniform(*INPUT_GAIN_DB))),
        far_silence_floor_db=far_floor,
    )
    spec.validate()
    return spec


def shift_ir_onset(ir: np.ndarray, threshold_rel: float = IR_ONSET_THRESHOLD) -> np.ndarray:
    """Drop everything before the first sample reaching ``threshold_rel * max|ir|``."""
    ir = np.asarray(ir, dtype=np.float64)
    if ir.size == 0:
        raise ValueError("impulse response must be non-empty")
    peak = np.max(np.abs(ir))
    if peak == 0:
        raise AllZeroIr("impulse response is all zeros")
    onset = int(np.argmax(np.abs(ir) >= threshold_rel * peak))
    return ir[onset:].copy()


def augment_ir(ir: np.ndarray, tail_gain_db: float) -> np.ndarray:
    """Normalize by the direct-path sample, then scale the tail by ``tail_gain_db``."""
    ir = np.asarray(ir, dtype=np.float64)
    if ir.size == 0:
        raise ValueError("impulse response must be non-empty")
    if ir[0] == 0:
        raise ZeroDirectPath("first IR sample is zero")
    out = ir / abs(ir[0])
    out[1:] *= dsp.db_to_gain(tail_gain_db)
    return out


def _shelf(corner_hz: float, gain_db: float, kind: str, fs: int = SAMPLE_RATE):
    """First-order shelving filter via the bilinear transform with pre-warping."""
    g = dsp.db_to_gain(gain_db)
    wc = 2 * fs * np.tan(np.pi * corner_hz / fs)
    if kind == "low":
        b, a = [1.0, g * wc], [1.0, wc]
    else:
        b, a = [g, wc], [1.0, wc]
    return sps.bilinear(b, a, fs)


def spectral_shape(x: np.ndarray, seed: int) -> np.ndarray:
    """Random low-shelf + high-shelf coloration, RMS-matched to the input."""
    x = np.asarray(x, dtype=np.float64)
    level = dsp.rms(x)
    if level == 0:
        return np.zeros_like(x)
    rng = _rng(seed, 0x5EED)
    y = x
    for kind in ("low", "high"):
        b, a = _shelf(rng.uniform(*SHELF_CORNER_HZ), rng.uniform(*SHELF_GAIN_DB), kind)
        y = sps.lfilter(b, a, y)
    return y * (level / dsp.rms(y))


def active_rms(x: np.ndarray, threshold_db: float = ACTIVE_THRESHOLD_DB) -> float:
    """RMS over 10 ms frames within ``threshold_db`` of the loudest frame."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x) // ACTIVE_FRAME
    if n == 0:
        return dsp.rms(x)
    power = np.mean(x[: n * ACTIVE_FRAME].reshape(n, ACTIVE_FRAME) ** 2, axis=1)
    peak = power.max()
    if peak == 0:
        return 0.0
    active = power >= peak * 10.0 ** (threshold_db / 10.0)
    return float(np.sqrt(power[active].mean()))


def level_ratio_db(a: np.ndarray, b: np.ndarray) -> float:
    return 20.0 * np.log10(active_rms(a) / active_rms(b))


def _fit(x: np.ndarray, n: int) -> np.ndarray:
    if len(x) == 0:
        return np.zeros(n)
    if len(x) < n:
        x = np.tile(x, -(-n // len(x)))
    return np.asarray(x[:n], dtype=np.float64)


def scale_to_ratio(reference: np.ndarray, other: np.ndarray, ratio_db: float) -> np.ndarray:
    """Scale ``other`` so that ``reference`` sits ``ratio_db`` above it."""
    ref, oth = active_rms(reference), active_rms(other)
    if ref == 0 or oth == 0:
        return other
    return other * (ref / oth) * 10.0 ** (-ratio_db / 20.0)


def _peak_normalize(x: np.ndarray, gain_db: float) -> float:
    peak = np.max(np.abs(x)) if x.size else 0.0
    return dsp.db_to_gain(gain_db) / peak if peak > 0 else 1.0


def _shape_seed(seed: int, role: int) -> int:
    return int(np.random.SeedSequence([seed, role]).generate_state(1)[0])


def synthesize(spec: ScenarioSpec, assets: AssetPool) -> ScenarioBundle:
    """Render ``spec`` into (near_mic, far_ref, target) plus the echo and noise stems."""
    spec.validate()
    n = int(round(spec.duration_s * SAMPLE_RATE))

    ir = augment_ir(shift_ir_onset(assets.irs[spec.ir]), spec.ir_gain_db)

    far = spectral_shape(_fit(assets.speech[spec.far_speech], n), _shape_seed(spec.seed, 1))
    if spec.far_noise is not None:
        fn = spectral_shape(_fit(assets.noise[spec.far_noise.asset], n), _shape_seed(spec.seed, 2))
        far = far + scale_to_ratio(far, fn, spec.far_noise.snr_db)

    if spec.near_speech is not None:
        target = dsp.fir_convolve(_fit(assets.speech[spec.near_speech], n), ir)
        target = spectral_shape(target, _shape_seed(spec.seed, 3))
        if spec.near_gap is not None:
            a = int(round(spec.near_gap.start_s * SAMPLE_RATE))
            b = int(round((spec.near_gap.start_s + spec.near_gap.len_s) * SAMPLE_RATE))
            target[a:b] = 0.0
    else:
        target = np.zeros(n)

    if spec.ser_db is not None:
        echo = dsp.delay(far, spec.delay_ms)
        echo = dsp.bandpass(echo, spec.bp_low_hz, spec.bp_high_hz)
        echo = spectral_shape(dsp.fir_convolve(echo, ir), _shape_seed(spec.seed, 4))
        echo = scale_to_ratio(target, echo, spec.ser_db)
        far_ref = far
    else:
        echo = np.zeros(n)
        if spec.far_silence_floor_db is not None:
            floor = spectral_shape(_rng(spec.seed, 5).standard_normal(n), _shape_seed(spec.seed, 6))
            far_ref = floor * dsp.db_to_gain(spec.far_silence_floor_db) / dsp.rms(floor)
        else:
            far_ref = np.zeros(n)

    noise = np.zeros(n)
    if spec.near_noise is not None:
        nn = spectral_shape(_fit(assets.noise[spec.near_noise.asset], n), _shape_seed(spec.seed, 7))
        reference = target if np.any(target) else echo
        if np.any(reference):
            noise = scale_to_ratio(reference, nn, spec.near_noise.snr_db)
        else:
            noise = nn * dsp.db_to_gain(-30.0) / max(dsp.rms(nn), 1e-12)

    mic_gain = _peak_normalize(target + noise + echo, spec.input_gains_db[0])
    target, noise, echo = target * mic_gain, noise * mic_gain, echo * mic_gain
    if spec.ser_db is not None:
        far_ref = far_ref * _peak_normalize(far_ref, spec.input_gains_db[1])

    return ScenarioBundle(target + noise + echo, far_ref, target, echo, noise)


def write_bundle(stem: str | os.PathLike, bundle: ScenarioBundle) -> None:
    stem = str(stem)
    write_wav(stem + ".mic.wav", AudioBuffer(bundle.near_mic))
    write_wav(stem + ".lpb.wav", AudioBuffer(bundle.far_ref))
    write_wav(stem + ".target.wav", AudioBuffer(bundle.target))


def item_seed(base_seed: int, index: int) -> int:
    """Independent per-item seed for a dataset generated from ``base_seed``."""
    return int(np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(1)[0])
