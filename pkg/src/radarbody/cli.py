"""Command-line entry point: simulate | train | eval | inspect.

Every command resolves its settings from an optional JSON config file (with
"network" / "train" / "simulate" sections) overridden by command-line flags,
writes the fully-resolved configuration next to its outputs, and is
reproducible from that file alone.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, net, sim
from .errors import ConfigurationError, ContractError, FormatError, RadarBodyError
from .harness import TrainConfig
from .net import NetworkConfig

log = logging.getLogger("radarbody")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
_SIM_KEYS = {"kind", "seconds", "frames", "frame_rate", "sequences", "speed", "start",
             "noise", "radar_origin"}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    unknown = set(doc) - {"network", "train", "simulate", "seed"}
    if unknown:
        raise ConfigurationError(f"unknown top-level config section(s) {sorted(unknown)}")
    return doc


def _write_resolved(out_dir: Path, name: str, doc: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _dataset_paths(data: str) -> list[Path]:
    p = Path(data)
    if p.is_dir():
        paths = sorted(p.glob("*.mmrd"))
    else:
        paths = [p]
    if not paths or not all(q.exists() for q in paths):
        raise ConfigurationError(f"no dataset files at {data}")
    return paths


def _network_config(args, file_cfg: dict) -> NetworkConfig:
    section = dict(file_cfg.get("network", {}))
    return NetworkConfig.from_dict(section) if section else NetworkConfig()


def _train_config(args, file_cfg: dict) -> TrainConfig:
    section = dict(file_cfg.get("train", {}))
    for flag in ("epochs", "batch_size", "learning_rate", "seed", "max_steps"):
        value = getattr(args, flag, None)
        if value is not None:
            section[flag] = value
    if "seed" not in section and file_cfg.get("seed") is not None:
        section["seed"] = file_cfg["seed"]
    return TrainConfig.from_dict(section)


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    file_cfg = _load_config_file(args.config)
    section = dict(file_cfg.get("simulate", {}))
    unknown = set(section) - _SIM_KEYS
    if unknown:
        raise ConfigurationError(f"unknown simulate config key(s) {sorted(unknown)}")

    kind = args.kind or section.get("kind", "walk_line")
    frame_rate = args.frame_rate or section.get("frame_rate", 10.0)
    if args.frames is not None:
        n_frames = args.frames
    elif args.seconds is not None:
        n_frames = int(round(args.seconds * frame_rate))
    else:
        n_frames = int(round(section.get("seconds", 6.4) * frame_rate))
    if n_frames < 1:
        raise ConfigurationError(f"need at least 1 frame, got {n_frames}")
    seed = args.seed if args.seed is not None else section.get("seed", file_cfg.get("seed", 0))
    sequences = args.sequences or section.get("sequences", 1)

    noise_doc = dict(section.get("noise", {}))
    for flag, key in (("clutter", "clutter_points_per_frame"),
                      ("ghosts", "ghost_probability"),
                      ("jitter", "position_jitter_sigma"),
                      ("doppler_noise", "doppler_noise_sigma"),
                      ("body_points", "body_points_per_frame")):
        value = getattr(args, flag)
        if value is not None:
            noise_doc[key] = value
    try:
        noise = sim.NoiseConfig(**noise_doc)
    except TypeError as exc:
        raise ConfigurationError(f"bad noise config: {exc}")

    net_cfg = _network_config(args, file_cfg)
    t = net_cfg.template
    template = harness.build_template(net_cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    motion_kwargs = {}
    if args.speed is not None or "speed" in section:
        motion_kwargs["speed"] = args.speed if args.speed is not None else section["speed"]
    if "start" in section:
        motion_kwargs["start"] = tuple(section["start"])

    import dataclasses
    duration = n_frames / frame_rate
    resolved = {"command": "simulate", "kind": kind, "frames": n_frames,
                "frame_rate": frame_rate, "sequences": sequences, "seed": seed,
                "noise": json.loads(json.dumps(dataclasses.asdict(noise), default=list)),
                "motion": motion_kwargs,
                "template": {"n_joints": t.n_joints, "n_vertices": t.n_vertices,
                             "n_shape": t.n_shape, "seed": t.seed}}
    _write_resolved(out_dir, "simulate_config.json", resolved)

    for i in range(sequences):
        seq = sim.simulate_sequence(template, kind, duration, frame_rate, noise,
                                    seed=seed + i, **motion_kwargs)
        path = out_dir / f"seq_{i:03d}.mmrd"
        sim.write_dataset(seq, path)
        (out_dir / f"seq_{i:03d}.json").write_text(
            json.dumps(resolved | {"sequence_index": i, "seed": seed + i},
                       sort_keys=True, indent=2) + "\n")
        counts = [f.count for f in seq.frames]
        print(f"{path}: {len(seq.frames)} frames, points/frame "
              f"min={min(counts)} mean={np.mean(counts):.1f} max={max(counts)}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    net_cfg = _network_config(args, file_cfg)
    train_cfg = _train_config(args, file_cfg)
    dataset = [sim.read_dataset(p) for p in _dataset_paths(args.data)]
    for i, seq in enumerate(dataset):
        if seq.ground_truth is None:
            raise ContractError(f"dataset file #{i} carries no ground truth; cannot train")

    out_dir = Path(args.out)
    _write_resolved(out_dir, "train_config.json",
                    {"command": "train", "network": net_cfg.to_dict(),
                     "train": train_cfg.to_dict(), "data": args.data})
    resume = harness.load_checkpoint(args.resume) if args.resume else None
    result = harness.train(net_cfg, train_cfg, dataset, resume_from=resume)
    harness.save_checkpoint(result.checkpoint, out_dir / "checkpoint.mmbt")
    harness.write_loss_csv(result.loss_rows, out_dir / "loss.csv")
    last = result.loss_rows[-1]["l_total"] if result.loss_rows else float("nan")
    print(f"trained {len(result.loss_rows)} steps "
          f"(epoch {result.checkpoint.epoch}); final l_total={last:.6g}")
    for epoch, val in result.validation:
        log.info("epoch %d validation l_total=%.6g", epoch, val)
    print(f"wrote {out_dir / 'checkpoint.mmbt'}, {out_dir / 'loss.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    ckpt = harness.load_checkpoint(args.checkpoint)
    file_cfg = _load_config_file(args.config)
    if file_cfg.get("network"):
        wanted = NetworkConfig.from_dict(file_cfg["network"])
        if wanted.fingerprint() != ckpt.fingerprint() and not args.force:
            raise ConfigurationError(
                f"config fingerprint {wanted.fingerprint()} != checkpoint "
                f"{ckpt.fingerprint()}; pass --force to evaluate anyway")
    dataset = [sim.read_dataset(p) for p in _dataset_paths(args.data)]
    out_dir = Path(args.out)
    _write_resolved(out_dir, "eval_config.json",
                    {"command": "eval", "checkpoint": args.checkpoint, "data": args.data,
                     "oracle_crop": args.oracle_crop, "skip_vertices": args.skip_vertices,
                     "network": ckpt.network_config.to_dict()})
    report, frames = harness.evaluate(
        ckpt, dataset, oracle_crop=args.oracle_crop,
        compute_vertices=not args.skip_vertices, collect_frames=args.dump_frames)
    (out_dir / "metrics.json").write_text(report.to_json() + "\n")
    if args.dump_frames:
        with open(out_dir / "frames.jsonl", "w") as fh:
            for row in frames:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    mpvpe = f"{report.mpvpe_cm:.2f}" if report.mpvpe_cm is not None else "n/a"
    mpte = f"{report.mpte_cm:.2f}" if report.mpte_cm is not None else "n/a"
    print(f"MPJRE {report.mpjre_deg:.2f} deg | MPJPE {report.mpjpe_cm:.2f} cm | "
          f"MPVPE {mpvpe} cm | MTE {report.mte_cm:.2f} cm | MPTE {mpte} cm")
    print(f"wrote {out_dir / 'metrics.json'}")
    return EXIT_OK


# ---------------------------------------------------------------- inspect

def cmd_inspect(args) -> int:
    rows = []
    for path in _dataset_paths(args.data):
        seq = sim.read_dataset(path)
        gt = seq.ground_truth
        half = np.array([0.5, 0.5, 1.5])
        for i, frame in enumerate(seq.frames):
            doppler = frame.points[:, 3] if frame.count else np.zeros(0)
            if gt is not None and frame.count:
                inside = np.all(np.abs(frame.points[:, :3] - gt.gamma[i]) <= half, axis=1)
                in_box = float(np.mean(inside))
            else:
                in_box = None
            rows.append({"file": path.name, "frame": i, "points": frame.count,
                         "doppler_mean": float(doppler.mean()) if frame.count else 0.0,
                         "doppler_abs_max": float(np.abs(doppler).max()) if frame.count else 0.0,
                         "in_box_fraction": in_box})
        counts = [f.count for f in seq.frames]
        print(f"{path.name}: {len(seq.frames)} frames, "
              f"{'with' if gt is not None else 'no'} ground truth")
        if counts:
            print(f"  points/frame min={min(counts)} mean={np.mean(counts):.1f} "
                  f"max={max(counts)}")
            all_doppler = np.concatenate([f.points[:, 3] for f in seq.frames if f.count]
                                         or [np.zeros(0)])
            if all_doppler.size:
                hist, edges = np.histogram(all_doppler, bins=8)
                span = ", ".join(f"[{edges[i]:+.2f},{edges[i+1]:+.2f}):{hist[i]}"
                                 for i in range(len(hist)))
                print(f"  doppler histogram: {span}")
            fractions = [r["in_box_fraction"] for r in rows
                         if r["file"] == path.name and r["in_box_fraction"] is not None]
            if fractions:
                print(f"  in-ground-truth-box fraction: mean={np.mean(fractions):.3f}")
        else:
            print("  0 frames")
    if args.csv:
        import csv as csv_mod
        with open(args.csv, "w", newline="") as fh:
            writer = csv_mod.DictWriter(fh, fieldnames=["file", "frame", "points",
                                                        "doppler_mean", "doppler_abs_max",
                                                        "in_box_fraction"])
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarbody",
        description="Body reconstruction from mmWave radar point clouds: data simulation, "
                    "training, evaluation, and dataset inspection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic radar sequences")
    p_sim.add_argument("--config", help="JSON config file")
    p_sim.add_argument("--kind", choices=sim.MOTION_KINDS)
    p_sim.add_argument("--seconds", type=float)
    p_sim.add_argument("--frames", type=int)
    p_sim.add_argument("--frame-rate", dest="frame_rate", type=float)
    p_sim.add_argument("--sequences", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--speed", type=float)
    p_sim.add_argument("--clutter", type=float, help="mean clutter points per frame")
    p_sim.add_argument("--ghosts", type=float, help="ghost probability per body point")
    p_sim.add_argument("--jitter", type=float, help="position jitter sigma (m)")
    p_sim.add_argument("--doppler-noise", dest="doppler_noise", type=float)
    p_sim.add_argument("--body-points", dest="body_points", type=float)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(fn=cmd_simulate)

    p_train = sub.add_parser("train", help="train on simulated datasets")
    p_train.add_argument("--config", help="JSON config file")
    p_train.add_argument("--data", required=True, help="dataset file or directory")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--lr", dest="learning_rate", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--max-steps", dest="max_steps", type=int)
    p_train.add_argument("--resume", help="checkpoint to continue from")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--config", help="JSON config file (fingerprint-checked)")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--oracle-crop", dest="oracle_crop", action="store_true",
                        help="crop with ground-truth translations (known-box condition)")
    p_eval.add_argument("--dump-frames", dest="dump_frames", action="store_true")
    p_eval.add_argument("--skip-vertices", dest="skip_vertices", action="store_true")
    p_eval.add_argument("--force", action="store_true")
    p_eval.set_defaults(fn=cmd_eval)

    p_ins = sub.add_parser("inspect", help="summarize a dataset")
    p_ins.add_argument("--data", required=True)
    p_ins.add_argument("--csv", help="also write a per-frame CSV")
    p_ins.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, FormatError, RadarBodyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
