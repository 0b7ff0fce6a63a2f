import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtln_aec import dsp, model
from dtln_aec import weights as wfmt
from dtln_aec.model import LATENCY, CoreOutputs, DTLNAec, LstmState, StreamingState


def sig(v):
    return 1.0 / (1.0 + math.exp(-v))


class TestLstmStep:
    def test_all_zero(self):
        h, s = model.lstm_step(
            np.zeros(3, np.float32), LstmState.zeros(2), np.zeros((3, 8), np.float32),
            np.zeros((2, 8), np.float32), np.zeros(8, np.float32),
        )
        assert not h.any() and not s.cell.any() and not s.hidden.any()

    def test_scalar_by_hand(self):
        # one unit, one input; gate order i, f, g, o
        kernel = np.array([[0.5, -0.3, 0.8, 0.2]], np.float32)
        recurrent = np.array([[0.1, 0.4, -0.6, 0.7]], np.float32)
        bias = np.array([0.05, 1.0, -0.1, 0.0], np.float32)
        x, h0, c0 = 0.9, -0.4, 0.3
        i = sig(0.5 * x + 0.1 * h0 + 0.05)
        f = sig(-0.3 * x + 0.4 * h0 + 1.0)
        g = math.tanh(0.8 * x - 0.6 * h0 - 0.1)
        o = sig(0.2 * x + 0.7 * h0)
        c1 = f * c0 + i * g
        h1 = o * math.tanh(c1)
        h, s = model.lstm_step(
            np.array([x], np.float32), LstmState(np.array([h0], np.float32), np.array([c0], np.float32)),
            kernel, recurrent, bias,
        )
        assert h[0] == pytest.approx(h1, abs=1e-6)
        assert s.cell[0] == pytest.approx(c1, abs=1e-6)
        assert s.hidden[0] == h[0]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 50))
    def test_output_bounded(self, seed, scale):
        rng = np.random.default_rng(seed)
        u, d = 8, 5
        f32 = lambda *shape: (scale * rng.standard_normal(shape)).astype(np.float32)
        h, s = model.lstm_step(f32(d), LstmState(f32(u), f32(u)), f32(d, 4 * u), f32(u, 4 * u), f32(4 * u))
        assert np.all(np.abs(h) <= 1.0) and np.all(np.isfinite(s.cell))

    def test_sequence_matches_steps(self, rng):
        u, d = 16, 10
        k = rng.standard_normal((d, 4 * u)).astype(np.float32) * 0.3
        r = rng.standard_normal((u, 4 * u)).astype(np.float32) * 0.3
        b = rng.standard_normal(4 * u).astype(np.float32)
        xs = rng.standard_normal((20, d)).astype(np.float32)
        state = LstmState.zeros(u)
        steps = []
        for x in xs:
            h, state = model.lstm_step(x, state, k, r, b)
            steps.append(h)
        np.testing.assert_allclose(model.lstm_sequence(xs, k, r, b), np.array(steps), atol=1e-6)


def _frames(rng):
    return (0.1 * rng.standard_normal(512)).astype(np.float32), (0.1 * rng.standard_normal(512)).astype(np.float32)


class TestCores:
    def test_core1_identity_mask(self, rng, weights_128):
        near, far = _frames(rng)
        mag, phase, mask = model.core1_step(near, far, weights_128, StreamingState(128), pinned_mask=1.0)
        ref_mag, ref_phase = dsp.rdft(near)
        np.testing.assert_array_equal(mag, ref_mag)
        np.testing.assert_array_equal(phase, ref_phase)

    def test_core1_zero_mask(self, rng, weights_128):
        near, far = _frames(rng)
        mag, _, _ = model.core1_step(near, far, weights_128, StreamingState(128), pinned_mask=0.0)
        assert not mag.any()

    def test_core1_mask_range(self, rng, weights_128):
        s = StreamingState(128)
        for _ in range(20):
            near, far = _frames(rng)
            _, _, mask = model.core1_step(near, far, weights_128, s)
            assert mask.shape == (257,) and np.all((mask >= 0) & (mask <= 1))

    def test_core1_advances_state(self, rng, weights_128):
        s = StreamingState(128)
        model.core1_step(*_frames(rng), weights_128, s)
        assert s.core1_lstm[0].hidden.any() and s.core1_lstm[1].hidden.any()
        assert not s.core2_lstm[0].hidden.any()

    def test_core2_identity(self, rng):
        w = wfmt.identity_weights(128)
        est, far = _frames(rng)
        out, mask = model.core2_step(est, far, w, StreamingState(128))
        assert (mask == 1.0).all()
        np.testing.assert_allclose(out, est, atol=1e-7)

    def test_core2_zero_mask(self, rng, weights_128):
        out, _ = model.core2_step(*_frames(rng), weights_128, StreamingState(128), pinned_mask=0.0)
        assert not out.any()

    def test_core2_shared_encoder_separate_norms(self, rng, weights_128):
        # swapping the far-end normalization parameters must change the result
        est, far = _frames(rng)
        a, _ = model.core2_step(est, far, weights_128, StreamingState(128))
        w = wfmt.ModelWeights(128, dict(weights_128.tensors))
        w.tensors["core2.iln_far.gain"] = np.full(512, 0.5, np.float32)
        b, _ = model.core2_step(est, far, w, StreamingState(128))
        assert not np.allclose(a, b)


class TestStreaming:
    def test_zero_in_zero_out(self, weights_128):
        eng = DTLNAec(weights_128)
        z = np.zeros(128, np.float32)
        for _ in range(50):
            assert not eng.process_hop(z, z).any()

    def test_file_length_and_zeros(self, weights_128):
        out = model.process_file(np.zeros(16000), np.zeros(16000), weights_128)
        assert out.shape == (16000,) and not out.any()
        assert model.process_file(np.zeros(1000), np.zeros(700), weights_128).shape == (1000,)

    @pytest.mark.parametrize("n", [1, 127, 128, 129, 1000, 4000])
    def test_stream_equals_offline_odd_lengths(self, rng, weights_128, n):
        near, far = rng.standard_normal(n) * 0.2, rng.standard_normal(n) * 0.2
        a = model.process_stream(near, far, weights_128)
        b = model.process_file(near, far, weights_128)
        assert a.shape == b.shape == (n,)
        assert np.max(np.abs(a - b)) < 1e-5

    def test_reset_gives_identical_output(self, rng, weights_128):
        near, far = rng.standard_normal(3000) * 0.2, rng.standard_normal(3000) * 0.2
        eng = DTLNAec(weights_128)
        a = eng.process(near, far)
        eng.reset()
        b = eng.process(near, far)
        np.testing.assert_array_equal(a, b)

    def test_no_state_leakage(self, rng, weights_128):
        a_near, a_far = rng.standard_normal(2000) * 0.2, rng.standard_normal(2000) * 0.2
        b_near, b_far = rng.standard_normal(2000) * 0.2, rng.standard_normal(2000) * 0.2
        eng = DTLNAec(weights_128)
        eng.process(a_near, a_far)
        eng.reset()
        np.testing.assert_array_equal(eng.process(b_near, b_far), DTLNAec(weights_128).process(b_near, b_far))

    def test_state_carries_across_calls(self, rng, weights_128):
        near, far = rng.standard_normal(2048) * 0.2, rng.standard_normal(2048) * 0.2
        eng = DTLNAec(weights_128)
        split = np.r_[eng.process(near[:1024], far[:1024]), eng.process(near[1024:], far[1024:])]
        np.testing.assert_array_equal(split, DTLNAec(weights_128).process(near, far))

    def test_identity_weights_delay(self, rng):
        x = rng.uniform(-0.5, 0.5, 8000)
        out = model.process_file(x, rng.standard_normal(8000) * 0.1, wfmt.identity_weights(128))
        assert np.max(np.abs(out[LATENCY:] - x[:-LATENCY])) < 1e-5
        assert np.max(np.abs(out[:LATENCY])) < 1e-5

    def test_latency_from_cross_correlation(self, rng):
        x = rng.standard_normal(6000) * 0.2
        out = model.process_stream(x, np.zeros_like(x), wfmt.identity_weights(128))
        xc = np.correlate(out, x, mode="full")[len(x) - 1 :]
        assert int(np.argmax(xc)) == 384

    def test_diagnostics(self, rng, weights_128):
        diag = CoreOutputs(None, None)
        s = StreamingState(128)
        model.process_frame_pair(np.ones(128, np.float32) * 0.1, np.zeros(128, np.float32), weights_128, s, diagnostics=diag)
        assert diag.mask_tf.shape == (257,) and diag.mask_feat.shape == (512,)

    def test_every_tensor_influences_output(self, rng):
        """Perturbing any single tensor changes the streamed output."""
        w = wfmt.random_init(128, 4)
        near, far = rng.standard_normal(1024) * 0.3, rng.standard_normal(1024) * 0.3
        base = model.process_stream(near, far, w)
        for name, arr in w.tensors.items():
            t = dict(w.tensors)
            t[name] = arr + np.float32(0.05) * rng.standard_normal(arr.shape).astype(np.float32)
            perturbed = model.process_stream(near, far, wfmt.ModelWeights(128, t))
            assert np.max(np.abs(perturbed - base)) > 1e-7, name
