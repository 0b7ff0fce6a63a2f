import numpy as np
import pytest

from dtln_aec import dsp
from dtln_aec.metrics import erle, si_sdr
from dtln_aec.nlms import NlmsCanceller, NlmsConfig, NlmsState, nlms_process, nlms_step


def misalignment(h, coeffs):
    return np.linalg.norm(h - coeffs[: len(h)]) / np.linalg.norm(h)


def test_config_validation():
    for bad in (dict(taps=0), dict(mu=2.0), dict(mu=-0.1), dict(eps_reg=0.0)):
        with pytest.raises(ValueError):
            NlmsConfig(**bad)


def test_history_is_newest_first():
    s = NlmsState(3)
    for v in range(1, 9):
        s.push(float(v))
    assert s.far_history.tolist() == [8.0, 7.0, 6.0]


def test_silent_far_end_passes_near(rng):
    near = rng.standard_normal(500)
    cfg = NlmsConfig(taps=16)
    state = NlmsState(16)
    out = nlms_process(near, np.zeros(500), cfg, state)
    np.testing.assert_array_equal(out, near)
    assert not state.coeffs.any()


def test_step_by_hand():
    cfg = NlmsConfig(taps=2, mu=0.5, eps_reg=1e-6)
    s = NlmsState(2)
    e = nlms_step(1.0, 2.0, cfg, s)
    # history [2, 0], prediction 0, error 1, update 0.5 * 1 * [2, 0] / (4 + 1e-6)
    assert e == 1.0
    np.testing.assert_allclose(s.coeffs, [0.5 * 2 / (4 + 1e-6), 0.0])
    c0 = s.coeffs[0]
    # history [1, 2], prediction c0 * 1
    assert nlms_step(0.0, 1.0, cfg, s) == pytest.approx(-c0)


def test_mu_zero_freezes_coefficients(rng):
    s = NlmsState(8)
    nlms_process(rng.standard_normal(300), rng.standard_normal(300), NlmsConfig(taps=8, mu=0.0), s)
    assert not s.coeffs.any()


def test_four_tap_convergence(rng):
    h = np.array([0.8, -0.4, 0.2, 0.1])
    far = rng.standard_normal(5000)
    s = NlmsState(4)
    nlms_process(dsp.fir_convolve(far, h), far, NlmsConfig(taps=4, mu=0.5), s)
    assert misalignment(h, s.coeffs) < 0.01


def test_far_end_only_erle(rng):
    h = rng.standard_normal(32) * np.exp(-np.arange(32) / 8)
    far = rng.standard_normal(3 * 16000)
    echo = dsp.fir_convolve(far, h)
    out = nlms_process(echo, far, NlmsConfig(taps=48, mu=0.5))
    assert erle(echo[-16000:], out[-16000:]) >= 30.0


def test_double_talk_keeps_near_speech(rng):
    n = 3 * 16000
    h = rng.standard_normal(32) * np.exp(-np.arange(32) / 8)
    far = rng.standard_normal(n)
    echo = dsp.fir_convolve(far, h)
    near_speech = np.zeros(n)
    near_speech[n // 2 :] = np.sin(2 * np.pi * 300 * np.arange(n - n // 2) / 16000) * np.std(echo)
    mic = near_speech + echo
    out = nlms_process(mic, far, NlmsConfig(taps=48, mu=0.5))
    region = slice(n // 2, n)
    assert si_sdr(near_speech[region], out[region]) > si_sdr(near_speech[region], mic[region])


def test_zero_inputs():
    assert not nlms_process(np.zeros(100), np.zeros(100), NlmsConfig(taps=8)).any()


def test_pads_shorter_input(rng):
    out = nlms_process(rng.standard_normal(100), rng.standard_normal(60), NlmsConfig(taps=8))
    assert out.shape == (100,)


def test_misalignment_non_increasing(rng):
    """Window-averaged misalignment decays on white-noise excitation."""
    taps = 128
    h = rng.standard_normal(taps) * np.exp(-np.arange(taps) / 30)
    far = rng.standard_normal(3000)
    near = dsp.fir_convolve(far, h)
    cfg = NlmsConfig(taps=taps, mu=0.5)
    s = NlmsState(taps)
    track = np.empty(len(far))
    for i in range(len(far)):
        nlms_step(near[i], far[i], cfg, s)
        track[i] = misalignment(h, s.coeffs)
    windows = track.reshape(-1, 100).mean(axis=1)[10:]
    assert np.all(np.diff(windows) <= 0)


def test_hop_wrapper_matches_whole_run(rng):
    far = rng.standard_normal(1280)
    near = dsp.fir_convolve(far, [0.5, 0.25])
    cfg = NlmsConfig(taps=16)
    canceller = NlmsCanceller(cfg)
    hops = np.concatenate([canceller(near[k : k + 128], far[k : k + 128]) for k in range(0, 1280, 128)])
    np.testing.assert_allclose(hops, nlms_process(near, far, cfg))


@pytest.mark.slow
def test_stability_million_samples():
    rng = np.random.default_rng(99)
    n = 1_000_000
    far = rng.uniform(-1, 1, n)
    near = np.clip(dsp.fir_convolve(far, [0.6, -0.3, 0.2]) + 0.5 * rng.uniform(-1, 1, n), -1, 1)
    state = NlmsState(8)
    out = nlms_process(near, far, NlmsConfig(taps=8, mu=1.9), state)
    assert np.all(np.isfinite(out))
    # start-up transients aside, the error stays on the order of the input
    assert np.max(np.abs(out[10_000:])) < 10
    assert np.max(np.abs(state.coeffs)) < 10
