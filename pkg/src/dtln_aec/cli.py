"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error
(including a real-time budget violation in ``bench``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import weights as wfmt
from .audio_io import AudioBuffer, read_wav, write_wav
from .errors import AecError, DataError, IoFailure
from .metrics import HOP, HOP_MS, evaluate, measure_rtf
from .model import DTLNAec
from .nlms import NlmsCanceller, NlmsConfig
from .scenario import AssetPool, draw_spec, item_seed, synthesize, write_bundle

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which means "data error" here
        raise UsageError(f"{self.prog}: error: {message}")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} not found: {path}")
    return p


def _run_engine(engine, near: np.ndarray, far: np.ndarray):
    """Stream through ``engine`` hop by hop, timing each hop."""
    n = len(near)
    hops = -(-n // HOP)
    near = np.pad(near, (0, hops * HOP - n)).astype(np.float32)
    far = np.pad(far, (0, hops * HOP - n)).astype(np.float32)
    out = np.empty(hops * HOP)
    chunks = []

    def step(nh, fh):
        chunks.append(engine(nh, fh))

    rtf = measure_rtf(step, near, far) if hops else None
    if hops:
        out[:] = np.concatenate(chunks)
    return out[:n], hops, rtf


def cmd_process(args) -> int:
    near = read_wav(_require_file(args.near, "near-end file")).samples
    far = read_wav(_require_file(args.far, "far-end file")).samples
    if args.engine == "dtln":
        if args.weights is None:
            raise UsageError("--weights is required for --engine dtln")
        engine = DTLNAec(wfmt.load(_require_file(args.weights, "weights file")))
    else:
        engine = NlmsCanceller(NlmsConfig(taps=args.taps, mu=args.mu))
    n = max(len(near), len(far))
    near = np.pad(near, (0, n - len(near)))
    far = np.pad(far, (0, n - len(far)))
    out, hops, rtf = _run_engine(engine, near, far)
    write_wav(args.out, AudioBuffer(np.clip(out, -1.0, 1.0)))
    print(f"engine={args.engine}")
    print(f"frames={hops}")
    if rtf is not None:
        print(f"mean_ms={rtf.mean_ms:.4f}")
        print(f"p99_ms={rtf.p99_ms:.4f}")
        print(f"rtf_mean={rtf.rtf:.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    pool = AssetPool.from_manifest(_require_file(args.manifest, "manifest"))
    pool.check()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(args.count):
        spec = draw_spec(item_seed(args.seed, i), pool, args.duration)
        stem = f"scenario_{i:05d}"
        write_bundle(out / stem, synthesize(spec, pool))
        lines.append(json.dumps({"id": stem, **spec.to_dict()}))
    (out / "scenarios.jsonl").write_text("".join(line + "\n" for line in lines))
    print(f"wrote {args.count} scenarios to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    processed = read_wav(_require_file(args.processed, "processed file")).samples
    target = read_wav(_require_file(args.target, "target file")).samples
    mic = read_wav(_require_file(args.mic, "mic file")).samples if args.mic else None
    mask = None
    if args.mask:
        if mic is None:
            raise UsageError("--mask requires --mic")
        mask = read_wav(_require_file(args.mask, "mask file")).samples != 0
    lengths = {len(processed), len(target)} | ({len(mic)} if mic is not None else set())
    if mask is not None:
        lengths.add(len(mask))
    if len(lengths) != 1:
        raise DataError(f"input lengths differ: {sorted(lengths)}")
    report = evaluate(target, processed, mic=mic, mask=mask)
    print(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.weights:
        w = wfmt.load(_require_file(args.weights, "weights file"))
    elif args.random_weights is not None:
        w = wfmt.random_init(args.units, args.random_weights)
    else:
        raise UsageError("give --weights or --random-weights SEED")
    if args.seconds <= 0:
        raise UsageError("--seconds must be positive")
    rng = np.random.default_rng(0)
    n = int(args.seconds * 16000)
    near = (0.1 * rng.standard_normal(n)).astype(np.float32)
    far = (0.1 * rng.standard_normal(n)).astype(np.float32)
    engine = DTLNAec(w)
    rtf = measure_rtf(engine, near, far)
    budget = args.budget_ms
    result = {
        "units": w.units,
        "hops": rtf.hops,
        "mean_ms": rtf.mean_ms,
        "p99_ms": rtf.p99_ms,
        "rtf_mean": rtf.rtf,
        "rtf_p99": rtf.rtf_p99,
        "budget_ms": budget,
        "realtime": rtf.mean_ms < budget,
    }
    if args.json:
        print(json.dumps(result))
    else:
        for k, v in result.items():
            print(f"{k}={v}")
    return EXIT_OK if rtf.mean_ms < budget else EXIT_RUNTIME


def cmd_inspect_weights(args) -> int:
    w = wfmt.load(_require_file(args.weights, "weights file"))
    width = max(len(k) for k in w.tensors)
    for name, arr in w.tensors.items():
        shape = "x".join(str(d) for d in arr.shape)
        print(f"{name:<{width}}  {shape:>10}  {arr.size:>9}")
    print(f"units={w.units}")
    print(f"total={wfmt.count_params(w)}")
    return EXIT_OK


def cmd_init_weights(args) -> int:
    w = wfmt.random_init(args.units, args.seed)
    wfmt.save(args.out, w)
    digest = hashlib.sha256(Path(args.out).read_bytes()).hexdigest()[:16]
    print(f"wrote {args.out} units={w.units} params={wfmt.count_params(w)} sha256={digest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtln-aec", description="Streaming acoustic echo cancellation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("process", help="cancel echo in a near-end recording")
    p.add_argument("--near", required=True, help="near-end microphone WAV")
    p.add_argument("--far", required=True, help="far-end loop-back WAV")
    p.add_argument("--weights", help="weight container (dtln engine)")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--engine", choices=("dtln", "nlms"), default="dtln")
    p.add_argument("--taps", type=int, default=NlmsConfig.taps, help="NLMS filter length")
    p.add_argument("--mu", type=float, default=NlmsConfig.mu, help="NLMS step size")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("synth", help="synthesize echo scenarios")
    p.add_argument("--manifest", required=True, help="asset manifest ('<role> <path>' per line)")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--duration", type=float, default=4.0, help="scenario length in seconds")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="compute objective metrics")
    p.add_argument("--processed", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--mic", help="unprocessed microphone WAV, enables ERLE")
    p.add_argument("--mask", help="WAV whose nonzero samples select the ERLE region")
    p.add_argument("--json", action="store_true", help="print JSON instead of key=value lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure per-frame execution time")
    p.add_argument("--weights")
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--units", type=int, choices=wfmt.VALID_UNITS, default=512)
    p.add_argument("--random-weights", type=int, metavar="SEED")
    p.add_argument("--json", action="store_true")
    p.add_argument("--budget-ms", type=float, default=HOP_MS, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect-weights", help="print the tensor table of a weight container")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_inspect_weights)

    p = sub.add_parser("init-weights", help="write a seeded random weight container")
    p.add_argument("--units", type=int, choices=wfmt.VALID_UNITS, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IoFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
