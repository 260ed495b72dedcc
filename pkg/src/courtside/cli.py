"""Command-line interface.

Subcommands
-----------
extract         keyframes for one clip (or a directory of clips with --batch)
masks           multi-block token masks for the pretraining grid
evaluate        caption metric report for a JSON Lines file of pairs
compare         rank metric reports and compute pairwise statistics
dataset ...     split / strip-names / build-lexicon on annotation files

Exit codes: 0 success, 2 usage or input error, 3 pipeline failure. Every
command writes ``run_config.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import dataset as ds
from . import errors
from . import keyframes as kf
from . import masks as mk
from . import metrics as mt
from . import stats
from .features import BuiltinDescriptor, PrecomputedBackbone
from .ingest import IngestConfig, load_frame_sequence, save_frame_images
from .text import (HashEmbedding, PrecomputedEmbedding, SportsLexicon, build_lexicon,
                   load_stopwords)

log = logging.getLogger("courtside")

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3

INPUT_ERRORS = (
    errors.EmptyInput, errors.DecodeError, errors.DimensionMismatch, errors.InvalidTarget,
    errors.InvalidGeometry, errors.ParseError, errors.DuplicateClip, errors.TooFewClips,
    FileNotFoundError, NotADirectoryError, ValueError,
)


class InputError(Exception):
    pass


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_run_config(out: Path, args, command: str) -> None:
    # output location is left out: it does not affect results, and leaving it
    # out keeps reruns into different directories byte-identical
    skip = ("func", "verbose", "out", "output")
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    _write_atomic(out / "run_config.json",
                  _dump_json({"command": command, "version": __version__, "args": cfg}))


def _csv_floats(text, cast=float):
    try:
        return [cast(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad comma-separated value list {text!r}") from exc


def _output_dir(args, positional=None) -> Path:
    out = positional or args.output
    if out is None:
        raise InputError("an output directory is required (positional or --output)")
    return Path(out)


# ---------------------------------------------------------------- extract


def _backbones(args):
    if args.features:
        app = PrecomputedBackbone.from_file(args.features)
        if not args.motion_features:
            raise InputError("--features needs --motion-features as well")
        return app, PrecomputedBackbone.from_file(args.motion_features)
    b = BuiltinDescriptor(args.grid)
    return b, b


def _extract_one(src: Path, out: Path, args) -> dict:
    if not src.exists():
        raise InputError(f"input {src} does not exist")
    cfg = IngestConfig(target_width=args.width, target_height=args.height,
                       stride=args.stride, target_fps=args.target_fps,
                       source_fps=args.source_fps)
    seq = load_frame_sequence(src, cfg)
    try:
        if args.method == kf.DWT_LDA:
            app, mot = _backbones(args)
            res = kf.extract_keyframes(seq, args.k, app, args.seed, args.shrinkage,
                                       motion_backbone=mot, scaling=args.scaling)
            ks = res.keyframes
            rows = kf.emit_pca_projection(res.standardized, res.clusters.assignments, ks,
                                          res.fused.frame_indices)
            _write_atomic(out / "pca.csv", kf.pca_csv(rows))
        elif args.method == kf.UNIFORM:
            ks = kf.uniform_sample(len(seq), args.k, seq.indices)
            ks.clip_id = seq.clip_id
        else:
            ks = kf.color_histogram_sample(seq, args.k, args.bins, args.seed)
    except errors.TooFewSamples as exc:
        raise InputError(f"sampling stage: {exc}") from exc
    except errors.CourtsideError as exc:
        raise errors.CourtsideError(f"{args.method} stage failed: {exc}") from exc
    _write_atomic(out / "keyframes.json", ks.to_json())
    if args.dump_frames:
        save_frame_images(seq, out / "frames", ks.indices)
    return ks.to_dict()


def cmd_extract(args):
    out = _output_dir(args, args.out)
    src = Path(args.input)
    if args.batch:
        if not src.is_dir():
            raise InputError(f"--batch needs a directory of clips, got {src}")
        clips = sorted(p for p in src.iterdir() if not p.name.startswith("."))
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            results = list(pool.map(lambda p: _extract_one(p, out / p.stem, args), clips))
        _write_atomic(out / "summary.json", _dump_json(results))
    else:
        _extract_one(src, out, args)
    _write_run_config(out, args, "extract")


# ---------------------------------------------------------------- masks


def cmd_masks(args):
    out = _output_dir(args, args.out)
    grid = mk.token_grid(args.frames, args.height, args.width, args.patch, args.tubelet)
    blocks = _csv_floats(args.blocks, int)
    scales = _csv_floats(args.scale)
    aspect = _csv_floats(args.aspect)
    temporal = _csv_floats(args.temporal)
    if len(blocks) != len(scales):
        raise InputError("--blocks and --scale need the same number of entries")
    if len(aspect) != 2 or len(temporal) not in (1, 2):
        raise InputError("--aspect takes lo,hi and --temporal takes lo[,hi]")
    t_lo, t_hi = temporal[0], temporal[-1]
    configs = [mk.MaskConfig(b, (s, s), (t_lo, t_hi), (aspect[0], aspect[1]))
               for b, s in zip(blocks, scales)]
    result = mk.generate_masks(grid, configs, args.seed, combined=args.combined)
    sets = [result] if args.combined else result
    doc = {
        "grid": list(grid.shape),
        "seed": args.seed,
        "combined": bool(args.combined),
        "masks": [m.to_dict() for m in sets],
        "stats": [mk.mask_stats(m) for m in sets],
    }
    _write_atomic(out / "masks.json", _dump_json(doc))
    _write_run_config(out, args, "masks")


# ---------------------------------------------------------------- evaluate


def _read_pairs(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((str(obj.get("clip_id", no)), obj["candidate"], obj["reference"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise errors.ParseError(f"{path}: bad pair ({exc})", line=no) from exc
    if not pairs:
        raise errors.EmptyInput(f"{path} holds no pairs")
    return pairs


def cmd_evaluate(args):
    out = _output_dir(args, args.out)
    pairs = _read_pairs(args.pairs)
    stop = load_stopwords(args.stopwords) if args.stopwords else None
    if args.lexicon == "auto":
        lexicon = build_lexicon([p[2] for p in pairs], stop)
        out.mkdir(parents=True, exist_ok=True)
        lexicon.to_json(out / "lexicon.json")
    else:
        if not Path(args.lexicon).is_file():
            raise InputError(f"lexicon {args.lexicon} not found")
        lexicon = SportsLexicon.from_json(args.lexicon)
    if args.embeddings:
        provider = PrecomputedEmbedding.from_file(args.embeddings)
    else:
        # fixed embedding so scores stay comparable across runs and seeds
        provider = HashEmbedding(64, seed=0)
    report = mt.evaluate_corpus(pairs, lexicon, provider, stop,
                                model=args.model or Path(args.pairs).stem)
    _write_atomic(out / "report.json", report.to_json())
    _write_atomic(out / "report.csv", report.to_csv())
    _write_run_config(out, args, "evaluate")


# ---------------------------------------------------------------- compare


COMPARE_FIELDS = ("comparison", "gt_delta", "cohens_d", "ci95_lower", "ci95_upper")


def compare_reports(reports) -> dict:
    """Rank reports by combined score and compare the leader with each other model."""
    ranked = sorted(reports, key=lambda r: (-r.composites["combined"], r.model))
    ranking = [
        {"rank": i + 1, "model": r.model, **{k: r.composites[k] for k in
                                             ("gt_validation", "info_richness", "combined")}}
        for i, r in enumerate(ranked)
    ]
    pairwise = []
    if ranked:
        best = ranked[0]
        a = best.gt_scores()
        for other in ranked[1:]:
            b = other.gt_scores()
            row = {
                "comparison": f"{best.model} vs {other.model}",
                "gt_delta": best.composites["gt_validation"] - other.composites["gt_validation"],
                "cohens_d": None, "ci95_lower": None, "ci95_upper": None,
            }
            if len(a) >= 2 and len(b) >= 2:
                try:
                    row["cohens_d"] = stats.cohens_d(a, b)
                except errors.DegenerateVariance:
                    pass
                lo, hi = stats.ci95_mean_diff(a, b)
                row["ci95_lower"], row["ci95_upper"] = lo, hi
            pairwise.append(row)
    return {"ranking": ranking, "pairwise": pairwise}


def cmd_compare(args):
    out = _output_dir(args)
    reports = []
    for p in args.reports:
        path = Path(p)
        if not path.is_file():
            raise InputError(f"report {p} not found")
        try:
            rep = mt.MetricReport.from_dict(json.loads(path.read_text("utf-8")))
        except (json.JSONDecodeError, KeyError) as exc:
            raise errors.ParseError(f"{p}: not a metric report ({exc})") from exc
        rep.model = rep.model or path.stem
        reports.append(rep)
    result = compare_reports(reports)
    _write_atomic(out / "comparison.json", _dump_json(result))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("rank", "model", "gt_validation", "info_richness", "combined"))
    for r in result["ranking"]:
        w.writerow([r["rank"], r["model"], repr(r["gt_validation"]),
                    repr(r["info_richness"]), repr(r["combined"])])
    w.writerow(())
    w.writerow(COMPARE_FIELDS)
    for r in result["pairwise"]:
        w.writerow(["" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k])
                    for k in COMPARE_FIELDS])
    _write_atomic(out / "comparison.csv", buf.getvalue())
    _write_run_config(out, args, "compare")


# ---------------------------------------------------------------- dataset


def cmd_dataset_split(args):
    out = _output_dir(args)
    clips = ds.load_annotations(args.annotations)
    train, val = ds.split(clips, args.train_fraction, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    ds.write_annotations(out / "train.jsonl", train)
    ds.write_annotations(out / "val.jsonl", val)
    _write_atomic(out / "split.json", _dump_json(
        {"train": len(train), "val": len(val), "seed": args.seed,
         "train_ids": [c.clip_id for c in train], "val_ids": [c.clip_id for c in val]}))
    _write_run_config(out, args, "dataset split")


def cmd_dataset_strip(args):
    out = _output_dir(args)
    clips = ds.load_annotations(args.annotations)
    names = ds.load_names(args.names)
    stripped = ds.strip_clips(clips, names)
    out.mkdir(parents=True, exist_ok=True)
    ds.write_annotations(out / "stripped.jsonl", stripped)
    flagged = [c.clip_id for c in stripped if c.strip_failed]
    _write_atomic(out / "strip_report.json", _dump_json({"n": len(stripped), "empty_after_strip": flagged}))
    _write_run_config(out, args, "dataset strip-names")


def cmd_dataset_lexicon(args):
    out = _output_dir(args)
    clips = ds.load_annotations(args.annotations)
    stop = load_stopwords(args.stopwords) if args.stopwords else None
    lex = build_lexicon([c.caption for c in clips], stop)
    out.mkdir(parents=True, exist_ok=True)
    lex.to_json(out / "lexicon.json")
    _write_run_config(out, args, "dataset build-lexicon")


# ---------------------------------------------------------------- parser


GLOBAL_DEFAULTS = {"seed": 0, "jobs": 1, "output": None}


def _common(p: argparse.ArgumentParser):
    # SUPPRESS so a subcommand does not overwrite a value given before it
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master RNG seed (default 0)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    p.add_argument("--output", default=argparse.SUPPRESS, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="courtside", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    _common(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="select keyframes")
    _common(p)
    p.add_argument("input", help="frame directory or raw planar file")
    p.add_argument("out", nargs="?", help="output directory")
    p.add_argument("--method", choices=kf.METHODS, default=kf.DWT_LDA)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--stride", type=int)
    p.add_argument("--target-fps", type=float)
    p.add_argument("--source-fps", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--grid", type=int, default=4, help="builtin descriptor grid size")
    p.add_argument("--features", help="precomputed appearance feature file")
    p.add_argument("--motion-features", help="precomputed motion feature file")
    p.add_argument("--shrinkage", type=float, default=0.1)
    p.add_argument("--scaling", choices=("robust", "zscore", "none"), default="robust")
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--dump-frames", action="store_true")
    p.add_argument("--batch", action="store_true", help="input is a directory of clips")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("masks", help="generate multi-block masks")
    _common(p)
    p.add_argument("out", nargs="?")
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--tubelet", type=int, default=2)
    p.add_argument("--blocks", default="8,2")
    p.add_argument("--scale", default="0.15,0.7")
    p.add_argument("--aspect", default="0.75,1.5")
    p.add_argument("--temporal", default="1.0,1.0")
    p.add_argument("--combined", action="store_true", help="emit one union mask")
    p.set_defaults(func=cmd_masks)

    p = sub.add_parser("evaluate", help="score caption pairs")
    _common(p)
    p.add_argument("pairs", help="JSON Lines {clip_id, candidate, reference}")
    p.add_argument("out", nargs="?")
    p.add_argument("--lexicon", required=True, help="lexicon JSON, or 'auto' to derive from references")
    p.add_argument("--embeddings", help="precomputed token embedding file")
    p.add_argument("--stopwords")
    p.add_argument("--model", help="model name stored in the report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="rank metric reports")
    _common(p)
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dataset", help="annotation utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    q = dsub.add_parser("split")
    _common(q)
    q.add_argument("annotations")
    q.add_argument("--train-fraction", type=float, default=1050 / 1315)
    q.set_defaults(func=cmd_dataset_split)
    q = dsub.add_parser("strip-names")
    _common(q)
    q.add_argument("annotations")
    q.add_argument("--names", required=True)
    q.set_defaults(func=cmd_dataset_strip)
    q = dsub.add_parser("build-lexicon")
    _common(q)
    q.add_argument("annotations")
    q.add_argument("--stopwords")
    q.set_defaults(func=cmd_dataset_lexicon)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"courtside {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (errors.CourtsideError, ArithmeticError, RuntimeError) as exc:
        print(f"courtside {args.command}: pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
