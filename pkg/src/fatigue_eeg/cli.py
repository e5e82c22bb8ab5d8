"""Command-line entry point: ``fatigue-eeg <subcommand> ...``.

Exit codes: 0 success, 1 data error (bad file, channel mismatch, malformed
model), 2 bad arguments.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .ensemble import ModelFormatError, TreeLimits, load_model, predict_rows, save_model, train_ensemble
from .evaluation import EnsembleConfig, FoldError, cross_validate
from .features import (
    LabeledDataset,
    WindowingConfig,
    build_labeled_dataset,
    read_features_csv,
    recording_features,
    select_channel_across,
    select_max_variance_channel,
    write_features_csv,
)
from .mcd import MCDConfig
from .signal_io import (
    RecordingError,
    SynthSpec,
    channel,
    generate_synthetic,
    load_recording_csv,
    read_labels_csv,
    write_labels_csv,
    write_recording_csv,
)
from .stream import stream_recording


class UsageError(Exception):
    """Arguments are individually valid but inconsistent."""


def _shared_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--rate-hz", type=float, default=1000.0, help="sampling rate of CSV recordings (default 1000)")
    p.add_argument("--window-s", type=float, default=2.0, help="window length in seconds (default 2.0)")
    p.add_argument("--step-s", type=float, default=0.5, help="window step in seconds (default 0.5)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="MCD coverage h/n; 0.5 is the half-sample boundary (default 0.5)")
    p.add_argument("--quantile-level", type=float, default=None,
                   help="chi-square level inside the consistency factor (default: realized h/n)")
    p.add_argument("--trees", type=int, default=30, help="ensemble size (default 30)")
    p.add_argument("--max-depth", type=int, default=None, help="tree depth limit (default unlimited)")
    p.add_argument("--min-leaf", type=int, default=1, help="minimum rows per leaf (default 1)")
    p.add_argument("--k", type=int, default=10, help="cross-validation folds (default 10)")
    p.add_argument("--seed", type=int, default=42, help="seed for every random draw (default 42)")
    p.add_argument("--split", choices=("row", "recording"), default="recording",
                   help="fold grouping (default recording)")
    p.add_argument("--tie", choices=("alert", "fatigue"), default="alert",
                   help="label for an exact vote tie (default alert)")
    p.add_argument("--channel", default=None, help="channel to analyse (default: max-variance vote)")
    return p


def _data_flags(p: argparse.ArgumentParser, features: bool = True) -> None:
    p.add_argument("recordings", nargs="*", help="recording CSVs (default: every entry of --labels)")
    p.add_argument("--labels", help="manifest CSV with header 'recording,label'")
    if features:
        p.add_argument("--features", help="precomputed feature CSV instead of recordings")


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(prog="fatigue-eeg", description="Single-channel EEG fatigue detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", parents=[shared], help="write a synthetic alert/fatigue corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--duration-s", type=float, default=300.0)
    p.add_argument("--alert-std", type=float, default=10.0)
    p.add_argument("--fatigue-std", type=float, default=40.0)
    p.add_argument("--outlier-rate", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select-channel", parents=[shared], help="print the max-variance channel")
    _data_flags(p, features=False)
    p.add_argument("--verbose", action="store_true", help="also print the mean variance rank per channel")
    p.set_defaults(func=cmd_select_channel)

    p = sub.add_parser("extract", parents=[shared], help="write the window feature CSV")
    _data_flags(p, features=False)
    p.add_argument("--out", required=True, help="feature CSV path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[shared], help="train a bagged-tree model")
    _data_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[shared], help="k-fold cross-validation report")
    _data_flags(p)
    p.add_argument("--out-dir", required=True, help="directory for report.json, report.txt, roc.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[shared], help="batch decisions for one recording")
    p.add_argument("recording")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="decision CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stream", parents=[shared], help="replay a recording window by window")
    p.add_argument("recording")
    p.add_argument("--model", required=True)
    p.add_argument("--realtime", action="store_true", help="pace the replay at the recording's rate")
    p.add_argument("--out", help="decision CSV (default stdout)")
    p.add_argument("--summary", help="write the latency summary JSON here")
    p.set_defaults(func=cmd_stream)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _flags(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _write_meta(path: str, args, extra: Optional[dict] = None) -> None:
    doc = {"command": args.command, "version": __version__, "flags": _flags(args)}
    if extra:
        doc.update(extra)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _configs(args) -> tuple[WindowingConfig, MCDConfig, TreeLimits]:
    try:
        return (
            WindowingConfig(args.window_s, args.step_s),
            MCDConfig(args.alpha, args.quantile_level),
            TreeLimits(args.max_depth, args.min_leaf),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _recording_ids(paths: Sequence[str]) -> list[str]:
    stems = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    return stems if len(set(stems)) == len(stems) else list(paths)


def _load_labeled(args) -> list:
    if not args.labels:
        raise UsageError("--labels is required to label recordings")
    entries = read_labels_csv(args.labels)
    if args.recordings:
        table = {os.path.abspath(p): lab for p, lab in entries}
        chosen = []
        for p in args.recordings:
            key = os.path.abspath(p)
            if key not in table:
                raise RecordingError(f"{p}: not listed in labels file {args.labels}")
            chosen.append((key, table[key]))
        entries = chosen
    ids = _recording_ids([p for p, _ in entries])
    out = []
    for (path, lab), rid in zip(entries, ids):
        rec = load_recording_csv(path, args.rate_hz)
        out.append((_renamed(rec, rid), lab))
    return out


def _renamed(rec, name):
    return replace(rec, source=name)


def _choose_channel(args, recordings) -> str:
    if args.channel:
        return args.channel
    if len(recordings) == 1:
        return select_max_variance_channel(recordings[0])[1]
    return select_channel_across(recordings)[0]


def _dataset(args) -> tuple[LabeledDataset, str]:
    windowing, mcd_cfg, _ = _configs(args)
    if getattr(args, "features", None):
        if args.recordings or args.labels:
            raise UsageError("--features excludes recordings and --labels")
        if not args.channel:
            raise UsageError("--features needs --channel to record which channel the rows came from")
        return read_features_csv(args.features), args.channel
    labeled = _load_labeled(args)
    name = _choose_channel(args, [r for r, _ in labeled])
    return build_labeled_dataset(labeled, name, windowing, mcd_cfg), name


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_subjects=args.subjects,
        duration_s=args.duration_s,
        sample_rate_hz=args.rate_hz,
        alert_std_uv=args.alert_std,
        fatigue_std_uv=args.fatigue_std,
        fatigue_outlier_rate=args.outlier_rate,
        seed=args.seed,
        channel_name=args.channel or "TP7",
    )
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for rec, label in generate_synthetic(spec):
        name = f"{rec.source}.csv"
        write_recording_csv(rec, os.path.join(args.out, name))
        entries.append((name, label))
    labels_path = os.path.join(args.out, "labels.csv")
    write_labels_csv(labels_path, entries)
    _write_meta(labels_path, args, {"n_recordings": len(entries)})
    print(f"wrote {len(entries)} recordings and {labels_path}")
    return 0


def cmd_select_channel(args) -> int:
    if args.recordings:
        recs = [load_recording_csv(p, args.rate_hz) for p in args.recordings]
    else:
        recs = [r for r, _ in _load_labeled(args)]
    if len(recs) == 1:
        _, name, var = select_max_variance_channel(recs[0])
        ranks = {name: 1.0}
    else:
        name, ranks = select_channel_across(recs)
    print(name)
    if args.verbose:
        for ch, r in sorted(ranks.items(), key=lambda kv: kv[1]):
            print(f"  {ch}\tmean rank {r:.3f}", file=sys.stderr)
    return 0


def cmd_extract(args) -> int:
    ds, name = _dataset(args)
    write_features_csv(ds, args.out)
    _write_meta(args.out, args, {"channel": name, "n_rows": len(ds)})
    print(f"{len(ds)} feature rows from channel {name} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    windowing, mcd_cfg, limits = _configs(args)
    ds, name = _dataset(args)
    if np.unique(ds.labels).size < 2:
        raise RecordingError("training data must contain both alert and fatigue windows")
    model = train_ensemble(ds, args.trees, args.seed, limits, channel_name=name,
                           windowing=windowing, mcd=mcd_cfg, tie=args.tie)
    save_model(model, args.out)
    _write_meta(args.out, args, {"channel": name, "n_rows": len(ds)})
    print(f"trained {model.ensemble_size} trees on {len(ds)} rows (channel {name}) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    _, _, limits = _configs(args)
    if args.k < 2:
        raise UsageError("--k must be at least 2")
    if args.split == "recording" and args.labels and not args.features:
        n_groups = len(args.recordings) if args.recordings else len(read_labels_csv(args.labels))
        if args.k > n_groups:
            raise UsageError(f"k exceeds group count: --k {args.k} with {n_groups} recordings")
    ds, name = _dataset(args)
    report = cross_validate(ds, EnsembleConfig(args.trees, limits, args.tie), args.k, args.seed, args.split)
    os.makedirs(args.out_dir, exist_ok=True)
    doc = report.to_dict()
    doc["channel"] = name
    doc["flags"] = _flags(args)
    with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    text = report.to_text()
    with open(os.path.join(args.out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"channel {name}\n" + text)
    fpr, tpr, thr = report.roc()
    with open(os.path.join(args.out_dir, "roc.csv"), "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for a, b, c in zip(fpr, tpr, thr):
            fh.write(f"{a:.17g},{b:.17g},{c:.17g}\n")
    sys.stdout.write(text)
    return 0


def _model_and_channel(args):
    model = load_model(args.model)
    rec = load_recording_csv(args.recording, args.rate_hz)
    if model.channel_name not in rec.channel_names:
        raise RecordingError(
            f"channel mismatch: model {args.model} expects {model.channel_name!r}, "
            f"{args.recording} has {', '.join(rec.channel_names)}"
        )
    return model, rec


def _decision_sink(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


DECISION_HEADER = "window_end_time_s,label,vote_fraction"


def cmd_predict(args) -> int:
    model, rec = _model_and_channel(args)
    ch = channel(rec, model.channel_name)
    ds = recording_features(ch, 0, rec.source, model.windowing, model.mcd)
    labels, frac = predict_rows(model, ds.features)
    w = model.windowing.lengths(rec.sample_rate_hz)[0] / rec.sample_rate_hz
    out = _decision_sink(args.out)
    try:
        out.write(DECISION_HEADER + "\n")
        for t, lab, f in zip(ds.window_start_s, labels, frac):
            out.write(f"{t + w:.17g},{int(lab)},{f:.17g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_stream(args) -> int:
    model, rec = _model_and_channel(args)
    out = _decision_sink(args.out)
    try:
        out.write(DECISION_HEADER + ",processing_wall_time_s\n")

        def emit(d):
            out.write(f"{d.window_end_time_s:.17g},{d.label},{d.vote_fraction:.17g},"
                      f"{d.processing_wall_time_s:.6e}\n")
            if args.realtime:
                out.flush()

        report = stream_recording(rec, model, realtime=args.realtime, on_decision=emit)
    finally:
        if out is not sys.stdout:
            out.close()
    summary = report.summary()
    summary["flags"] = _flags(args)
    text = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text, file=sys.stderr)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FoldError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (RecordingError, ModelFormatError, OSError, ValueError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
