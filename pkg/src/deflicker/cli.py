"""Command-line pipeline: train on a video pair, synthesize test data,
compute metrics, and run the training-dynamics toy.

Every command honors --seed end to end; identical invocations produce
byte-identical CSV traces and output frames.  The run manifest records the
resolved configuration (plus wall-clock timings, which naturally vary).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as metrics_mod
from .flow import FlowSet, read_flow_file, synth_translation_flows, write_flow_file
from .network import Generator, GeneratorConfig, _tensor_to_frame, _frame_to_tensor
from .reweight import compute_confidence, save_confidence_maps
from .synth import (
    ModeTransform,
    SynthSpec,
    apply_multimodal_flicker,
    apply_unimodal_flicker,
    default_mode_pair,
    make_moving_clip,
    toy_experiment,
    write_toy_csv,
)
from .training import (
    TrainConfig,
    TrainingDivergedError,
    infer_clip,
    train,
    write_trace_csv,
)
from .video import VideoClip, load_clip, save_clip

FLOW_NAME_FORMATS = {
    "short_fwd": "short_fwd_%06d.flo",
    "short_bwd": "short_bwd_%06d.flo",
    "long_fwd": "long_fwd_%06d.flo",
    "long_bwd": "long_bwd_%06d.flo",
}


def _parse_size(text: str):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"--size expects HxW, got {text!r}") from None
    return h, w


def _parse_motion(text: str):
    try:
        dx, dy = (float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"expected dx,dy - got {text!r}") from None
    return dx, dy


def write_flow_dir(flows: FlowSet, dir_path: Path) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    for name in FLOW_NAME_FORMATS:
        for k, field in enumerate(getattr(flows, name)):
            write_flow_file(field, dir_path / (FLOW_NAME_FORMATS[name] % (k + 1)))


def read_flow_dir(dir_path: Path, t_count: int) -> FlowSet:
    fields = {}
    for name, fmt in FLOW_NAME_FORMATS.items():
        entries = []
        for t in range(1, t_count):
            path = dir_path / (fmt % t)
            if not path.exists():
                raise ValueError(f"missing flow file {path}")
            entries.append(read_flow_file(path))
        fields[name] = tuple(entries)
    return FlowSet(**fields)


def _write_manifest(path: Path, payload: dict) -> None:
    payload = dict(payload, tool_version=__version__)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_modes(path) -> list:
    raw = json.loads(Path(path).read_text())
    return [
        ModeTransform(np.asarray(m["gain"], dtype=np.float64),
                      np.asarray(m["bias"], dtype=np.float64))
        for m in raw
    ]


def cmd_run(args) -> int:
    start = time.perf_counter()
    if args.save_confidence and not args.irt:
        raise ValueError("--save-confidence needs the dual-head --irt mode")
    input_clip = load_clip(args.input)
    processed = load_clip(args.processed)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    flows = None
    if args.flow_dir is not None:
        flows = read_flow_dir(Path(args.flow_dir), len(input_clip))

    net_cfg = GeneratorConfig(
        in_channels=input_clip.channels,
        out_heads=2 if args.irt else 1,
        seed=args.seed,
    )
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        irt_enabled=args.irt,
        delta=args.delta,
        anchor_iterations=args.anchor,
        seed=args.seed,
        snapshot_every=args.snapshot_every,
    )
    result = train(
        input_clip, processed, net_cfg, train_cfg, flows=flows, checkpoint_dir=out_dir
    )

    out = infer_clip(result.generator, input_clip)
    if args.irt:
        main, minor = out
        save_clip(minor, out_dir / "minor")
    else:
        main = out
    save_clip(main, out_dir / "frames")
    write_trace_csv(result.trace, out_dir / "trace.csv")

    if args.save_confidence:
        gen = result.generator
        maps = []
        for t in range(len(input_clip)):
            main_t, minor_t = gen(_frame_to_tensor(gen, input_clip[t]))
            maps.append(
                compute_confidence(
                    _tensor_to_frame(main_t),
                    _tensor_to_frame(minor_t),
                    processed[t],
                    args.delta,
                )
            )
        save_confidence_maps(maps, out_dir / "confidence")

    _write_manifest(
        out_dir / "run_manifest.json",
        {
            "command": "run",
            "input": str(args.input),
            "processed": str(args.processed),
            "output": str(out_dir),
            "flow_dir": None if args.flow_dir is None else str(args.flow_dir),
            "save_confidence": args.save_confidence,
            "seed": args.seed,
            "generator_config": asdict(net_cfg),
            "train_config": {
                k: v for k, v in vars(train_cfg).items() if not callable(v)
            },
            "epoch_seconds": result.wall_seconds / train_cfg.epochs,
            "wall_seconds": time.perf_counter() - start,
        },
    )
    return 0


def cmd_synth(args) -> int:
    start = time.perf_counter()
    h, w = _parse_size(args.size)
    dx, dy = _parse_motion(args.motion)
    out_dir = Path(args.out)
    clean, flows = make_moving_clip(args.frames, h, w, dx, dy, seed=args.seed)

    manifest = {
        "command": "synth",
        "kind": args.kind,
        "frames": args.frames,
        "size": [h, w],
        "motion": [dx, dy],
        "seed": args.seed,
        "out": str(out_dir),
    }
    if args.kind == "unimodal":
        processed = apply_unimodal_flicker(clean, args.sigma, seed=args.seed + 1)
        manifest["sigma"] = args.sigma
    else:
        modes = _load_modes(args.modes) if args.modes else list(default_mode_pair())
        if args.pattern:
            pattern = [int(v) for v in args.pattern.split(",")]
        else:
            pattern = [t % len(modes) for t in range(args.frames)]
        spec = SynthSpec(
            kind="multimodal",
            sigma=args.sigma,
            modes=modes,
            switch_pattern=pattern,
            seed=args.seed + 1,
        )
        processed, labels = apply_multimodal_flicker(clean, spec)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "labels.csv", "w", newline="") as f:
            f.write("t,mode\n")
            for t, m in enumerate(labels):
                f.write(f"{t + 1},{m}\n")
        manifest["sigma"] = args.sigma
        manifest["pattern"] = pattern
        manifest["modes"] = [
            {"gain": m.gain.tolist(), "bias": m.bias.tolist()} for m in modes
        ]

    save_clip(clean, out_dir / "clean")
    save_clip(processed, out_dir / "processed")
    write_flow_dir(flows, out_dir / "flow")
    manifest["wall_seconds"] = time.perf_counter() - start
    _write_manifest(out_dir / "run_manifest.json", manifest)
    return 0


def cmd_metrics(args) -> int:
    clip = load_clip(args.clip)
    if args.flow_dir is None and args.synthetic_flow is None:
        raise ValueError("need --flow-dir or --synthetic-flow to evaluate warping")
    if args.flow_dir is not None:
        flows = read_flow_dir(Path(args.flow_dir), len(clip))
    else:
        dx, dy = _parse_motion(args.synthetic_flow)
        flows = synth_translation_flows(len(clip), dx, dy, clip.height, clip.width)
    masks_short, masks_long = flows.masks()
    reference = load_clip(args.ref) if args.ref else None
    report = metrics_mod.evaluate_clip(
        clip, flows.short_fwd, flows.long_fwd, masks_short, masks_long, reference
    )
    metrics_mod.write_metrics_csv(report, args.out)
    if report.f_data is None:
        print(f"E_warp={report.e_warp!r}")
    else:
        print(f"E_warp={report.e_warp!r} F_data={report.f_data!r}")
    return 0


def cmd_toy(args) -> int:
    result = toy_experiment(
        args.mode,
        iterations=args.iterations,
        record_every=args.record_every,
        irt=args.irt,
        seed=args.seed,
    )
    write_toy_csv(result, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deflicker",
        description="Fit a per-video generator that removes temporal flicker "
        "from per-frame-processed clips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train on an (input, processed) clip pair")
    run.add_argument("--input", required=True, help="original frame directory")
    run.add_argument("--processed", required=True, help="processed frame directory")
    run.add_argument("--output", required=True, help="output directory")
    run.add_argument("--epochs", type=int, default=25)
    run.add_argument("--lr", type=float, default=1e-4)
    run.add_argument("--irt", action="store_true", help="dual-head reweighted training")
    run.add_argument("--delta", type=float, default=0.02)
    run.add_argument("--anchor", type=int, default=None, help="anchor iterations (default: one epoch)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--snapshot-every", type=int, default=5)
    run.add_argument("--flow-dir", default=None, help="enables in-training warping error")
    run.add_argument("--save-confidence", action="store_true")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="generate a synthetic degraded clip pair")
    synth.add_argument("--kind", choices=["unimodal", "multimodal"], required=True)
    synth.add_argument("--frames", type=int, default=10)
    synth.add_argument("--size", default="64x64", help="HxW")
    synth.add_argument("--motion", default="1,0", help="dx,dy per frame")
    synth.add_argument("--sigma", type=float, default=0.1)
    synth.add_argument("--modes", default=None, help="JSON file of gain/bias transforms")
    synth.add_argument("--pattern", default=None, help="comma-separated mode indices")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    met = sub.add_parser("metrics", help="evaluate warping error / fidelity of a clip")
    met.add_argument("--clip", required=True)
    met.add_argument("--flow-dir", default=None)
    met.add_argument("--synthetic-flow", default=None, help="dx,dy translation flow")
    met.add_argument("--ref", default=None, help="reference clip for fidelity")
    met.add_argument("--out", default="metrics.csv")
    met.set_defaults(func=cmd_metrics)

    toy = sub.add_parser("toy", help="small-scale training-dynamics experiment")
    toy.add_argument("--mode", choices=["unimodal", "multimodal"], required=True)
    toy.add_argument("--iterations", type=int, default=2500)
    toy.add_argument("--record-every", type=int, default=50)
    irt_group = toy.add_mutually_exclusive_group()
    irt_group.add_argument("--irt", action="store_true", default=None)
    irt_group.add_argument(
        "--no-irt", dest="irt", action="store_false",
        help="plain training even in multimodal mode",
    )
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--out", default="toy_trace.csv")
    toy.set_defaults(func=cmd_toy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # single-threaded torch keeps every artifact bit-identical across runs
    import torch

    torch.set_num_threads(1)
    try:
        return args.func(args)
    except (ValueError, OSError, TrainingDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
