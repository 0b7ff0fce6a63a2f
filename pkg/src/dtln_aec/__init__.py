"""Streaming DTLN-aec acoustic echo cancellation with an NLMS baseline,
echo-scenario synthesis and objective metrics."""

from .audio_io import SAMPLE_RATE, AudioBuffer, read_wav, write_wav
from .metrics import MetricReport, erle, measure_rtf, si_sdr, snr_loss
from .model import LATENCY, DTLNAec, StreamingState, process_file, process_frame_pair
from .nlms import NlmsCanceller, NlmsConfig, NlmsState, nlms_process, nlms_step
from .scenario import AssetPool, ScenarioBundle, ScenarioSpec, draw_spec, synthesize
from .weights import ModelWeights, count_params, count_params_baseline, load, random_init, save

__all__ = [
    "SAMPLE_RATE",
    "AudioBuffer",
    "read_wav",
    "write_wav",
    "MetricReport",
    "erle",
    "measure_rtf",
    "si_sdr",
    "snr_loss",
    "LATENCY",
    "DTLNAec",
    "StreamingState",
    "process_file",
    "process_frame_pair",
    "NlmsCanceller",
    "NlmsConfig",
    "NlmsState",
    "nlms_process",
    "nlms_step",
    "AssetPool",
    "ScenarioBundle",
    "ScenarioSpec",
    "draw_spec",
    "synthesize",
    "ModelWeights",
    "count_params",
    "count_params_baseline",
    "load",
    "random_init",
    "save",
]
