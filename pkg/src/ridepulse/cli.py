"""Command-line entry point wiring the pipeline into reproducible subcommands.

Subcommands: synth, clean, train, eval, trace, embed, metrics. Data outputs
are files under --out (stdout for eval/metrics when --out is omitted);
progress and diagnostics go to stderr so the tool composes in scripts.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

The train subcommand reads a single JSON config (all TrainConfig fields
plus session_dir / profiles_file / embedding_mode), lets flags override
individual values, and copies the resolved config into the output directory
so every run records its own provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import evaluate, metrics, synth
from .cleanse import clean_dataset
from .features import TooShortSessionError
from .ingest import ParseError, load_dataset
from .lstm import NumericsError
from .train import (
    CheckpointError,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_model,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DOWNSAMPLE_FACTOR = 0.3  # fixed by the feature pipeline; configs must agree


class DataError(ValueError):
    """Bad inputs discovered while running a subcommand."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the contract here is 1
    def error(self, message):
        raise _UsageError(message)


@dataclass(frozen=True)
class PipelineConfig:
    """Train subcommand configuration: training knobs plus pipeline paths."""

    train: TrainConfig
    session_dir: str
    profiles_file: str
    out_dir: str
    embedding_mode: str = "final"

    def to_dict(self) -> dict:
        d = self.train.to_dict()
        d.update(
            {
                "session_dir": self.session_dir,
                "profiles_file": self.profiles_file,
                "out_dir": self.out_dir,
                "embedding_mode": self.embedding_mode,
                "downsample_factor": DOWNSAMPLE_FACTOR,
            }
        )
        return d


_TRAIN_FIELD_NAMES = {f.name for f in dataclasses.fields(TrainConfig)}


def _load_pipeline_config(args) -> PipelineConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise DataError("config file must hold a JSON object")
    factor = raw.pop("downsample_factor", DOWNSAMPLE_FACTOR)
    if factor != DOWNSAMPLE_FACTOR:
        raise DataError(
            f"downsample_factor is fixed at {DOWNSAMPLE_FACTOR}; got {factor}"
        )
    session_dir = args.sessions or raw.pop("session_dir", None)
    profiles_file = args.profiles or raw.pop("profiles_file", None)
    out_dir = args.out or raw.pop("out_dir", None)
    embedding_mode = raw.pop("embedding_mode", "final")
    if not session_dir or not profiles_file or not out_dir:
        raise _UsageError("session_dir, profiles_file and --out are required (config or flags)")

    unknown = set(raw) - _TRAIN_FIELD_NAMES
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    for name in _TRAIN_FIELD_NAMES:
        override = getattr(args, name, None)
        if override is not None:
            raw[name] = override
    try:
        train_cfg = TrainConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid training config: {exc}") from None
    return PipelineConfig(
        train=train_cfg,
        session_dir=str(session_dir),
        profiles_file=str(profiles_file),
        out_dir=str(out_dir),
        embedding_mode=embedding_mode,
    )


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_cleaned(session_dir, profiles_file, hr_threshold):
    if not Path(session_dir).is_dir():
        raise DataError(f"session directory {session_dir} does not exist")
    if not Path(profiles_file).is_file():
        raise DataError(f"profiles file {profiles_file} does not exist")
    pairs, skipped = load_dataset(session_dir, profiles_file)
    for name, reason in skipped:
        _info(f"skipped {name}: {reason}")
    profile_by_rider = {p.rider_id: p for _, p in pairs}
    kept, report = clean_dataset([s for s, _ in pairs], hr_threshold)
    for sid, reason in report.rejected:
        _info(f"rejected {sid}: {reason}")
    return [(s, profile_by_rider[s.rider_id]) for s in kept], report


def _write_run_config(out: Path, payload: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _cmd_synth(args) -> int:
    out = Path(args.out)
    _write_run_config(
        out,
        {
            "command": "synth",
            "riders": args.riders,
            "sessions_per_rider": args.sessions_per_rider,
            "regime_mix": args.regime_mix,
            "noise_std": args.noise_std,
            "seed": args.seed,
        },
    )
    paths, profiles_path = synth.generate_corpus(
        out,
        n_riders=args.riders,
        sessions_per_rider=args.sessions_per_rider,
        regime_mix=args.regime_mix,
        seed=args.seed,
        noise_std=args.noise_std,
    )
    _info(f"wrote {len(paths)} session files and {profiles_path}")
    return EXIT_OK


def _cmd_clean(args) -> int:
    _, report = _load_cleaned(args.sessions, args.profiles, args.hr_threshold)
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        _write_run_config(
            out,
            {"command": "clean", "sessions": args.sessions, "profiles": args.profiles,
             "hr_threshold": args.hr_threshold},
        )
        (out / "clean_report.json").write_text(payload, encoding="utf-8")
        _info(f"wrote {out / 'clean_report.json'}")
    if args.report or not args.out:
        print(payload, end="")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _load_pipeline_config(args)
    out = Path(config.out_dir)
    _write_run_config(out, config.to_dict())
    pairs, _ = _load_cleaned(
        config.session_dir, config.profiles_file, config.train.spurious_hr_threshold
    )
    if not pairs:
        raise DataError("no usable sessions after cleaning")
    _info(f"training on {len(pairs)} cleaned sessions")
    checkpoint, report = train_model(pairs, config.train)
    save_checkpoint(checkpoint, out / "model.ckpt")
    (out / "train_report.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
    best = checkpoint.epoch
    _info(f"wrote {out / 'model.ckpt'} (best epoch {best}) and train_report.jsonl")
    return EXIT_OK


def _cmd_eval(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    pairs, _ = _load_cleaned(
        args.sessions, args.profiles, checkpoint.config.spurious_hr_threshold
    )
    if not pairs:
        raise DataError("no usable sessions after cleaning")
    try:
        report = evaluate.evaluate_dataset(checkpoint, pairs)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    payload = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        _write_run_config(
            out, {"command": "eval", "checkpoint": args.checkpoint, "sessions": args.sessions}
        )
        (out / "eval_report.json").write_text(payload, encoding="utf-8")
        _info(f"wrote {out / 'eval_report.json'}")
    else:
        print(payload, end="")
    return EXIT_OK


def _find_session_pair(args, checkpoint):
    pairs, _ = _load_cleaned(
        args.sessions, args.profiles, checkpoint.config.spurious_hr_threshold
    )
    for session, profile in pairs:
        if session.session_id == args.session_id:
            return session, profile
    raise DataError(f"session {args.session_id!r} not found or not clean")


def _cmd_trace(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    session, profile = _find_session_pair(args, checkpoint)
    try:
        trace = evaluate.predict_trace(checkpoint, session, profile)
    except TooShortSessionError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    _write_run_config(
        out,
        {"command": "trace", "checkpoint": args.checkpoint, "session_id": args.session_id},
    )
    path = out / f"trace_{session.session_id}.csv"
    path.write_text(evaluate.trace_to_csv(trace), encoding="utf-8")
    _info(f"wrote {path}")
    return EXIT_OK


def _cmd_embed(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    pairs, _ = _load_cleaned(
        args.sessions, args.profiles, checkpoint.config.spurious_hr_threshold
    )
    embeddings = []
    for session, profile in sorted(pairs, key=lambda sp: sp[0].session_id):
        try:
            embeddings.append(
                evaluate.extract_embedding(checkpoint, session, profile, mode=args.mode)
            )
        except TooShortSessionError as exc:
            _info(f"skipped {session.session_id}: {exc}")
    if not embeddings:
        raise DataError("no embeddable sessions")
    out = Path(args.out)
    _write_run_config(
        out,
        {"command": "embed", "checkpoint": args.checkpoint, "mode": args.mode,
         "pca": bool(args.pca)},
    )
    path = out / "embeddings.csv"
    path.write_text(evaluate.embeddings_to_csv(embeddings, include_pca=args.pca), "utf-8")
    _info(f"wrote {path} ({len(embeddings)} sessions)")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    pairs, _ = _load_cleaned(args.sessions, args.profiles, args.hr_threshold)
    lines = []
    for session, profile in sorted(pairs, key=lambda sp: sp[0].session_id):
        if profile.ftp is None:
            _info(f"skipped {session.session_id}: rider {profile.rider_id} has no ftp_w")
            continue
        power = [s.power if s.power is not None else 0.0 for s in session.samples]
        try:
            load = metrics.tss(power, profile.ftp)
        except ValueError as exc:
            _info(f"skipped {session.session_id}: {exc}")
            continue
        lines.append(
            json.dumps(
                {
                    "session_id": session.session_id,
                    "np_w": load.normalized_power,
                    "if": load.intensity_factor,
                    "tss": load.tss,
                    "duration_s": load.duration_s,
                },
                sort_keys=True,
            )
        )
    payload = "".join(line + "\n" for line in lines)
    if args.out:
        out = Path(args.out)
        _write_run_config(
            out, {"command": "metrics", "sessions": args.sessions, "profiles": args.profiles}
        )
        (out / "metrics.jsonl").write_text(payload, encoding="utf-8")
        _info(f"wrote {out / 'metrics.jsonl'} ({len(lines)} sessions)")
    else:
        print(payload, end="")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ridepulse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--riders", type=int, default=15)
    p.add_argument("--sessions-per-rider", type=int, default=20)
    p.add_argument("--regime-mix", type=float, default=0.5)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("clean", help="run the cleaning rules, emit the report")
    p.add_argument("--sessions", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--out")
    p.add_argument("--report", action="store_true", help="also print the report to stdout")
    p.add_argument("--hr-threshold", type=float, default=220.0)
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("train", help="full pipeline to checkpoint + report")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--sessions", help="session directory (overrides config)")
    p.add_argument("--profiles", help="profiles file (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--window", dest="window", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", dest="epochs", type=int)
    p.add_argument("--seed", dest="seed", type=int)
    p.add_argument(
        "--validation-rider-fraction", dest="validation_rider_fraction", type=float
    )
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a session directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("trace", help="export one session's prediction trace CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--session-id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("embed", help="export session embeddings CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("final", "mean"), default="final")
    p.add_argument("--pca", action="store_true", help="append a 2-component projection")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("metrics", help="normalized power / TSS per session")
    p.add_argument("--sessions", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--out")
    p.add_argument("--hr-threshold", type=float, default=220.0)
    p.set_defaults(func=_cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


run = main  # alias: run(argv) -> exit code

if __name__ == "__main__":
    sys.exit(main())
