import numpy as np
import pytest

from dtln_aec import weights as wfmt
from dtln_aec.scenario import AssetPool

FS = 16000


def speech_like(rng, seconds, fs=FS):
    """Noise bursts with syllable-rate envelope and pauses."""
    n = int(seconds * fs)
    t = np.arange(n) / fs
    env = np.clip(np.sin(2 * np.pi * rng.uniform(2, 5) * t + rng.uniform(0, 6)), 0, None) ** 2
    carrier = np.convolve(rng.standard_normal(n), np.hanning(9), mode="same")
    x = env * carrier
    return 0.3 * x / np.max(np.abs(x))


def synthetic_ir(rng, length=800, onset=20):
    ir = np.zeros(length)
    tail = rng.standard_normal(length - onset) * np.exp(-np.arange(length - onset) / 120.0)
    tail[0] = 1.0
    ir[onset:] = tail
    return ir


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def asset_pool():
    rng = np.random.default_rng(7)
    return AssetPool(
        speech={f"spk{i}": speech_like(rng, 3.0) for i in range(4)},
        noise={f"noise{i}": 0.1 * rng.standard_normal(FS * 2) for i in range(3)},
        irs={f"ir{i}": synthetic_ir(rng) for i in range(3)},
    )


@pytest.fixture(scope="session")
def weights_128():
    return wfmt.random_init(128, 11)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion, ok, detail):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        return ok

    return record


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
