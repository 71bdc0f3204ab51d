"""Command-line entry point: ingest, train, generate, evaluate, show-config.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from . import checkpoint, hrnn
from .codec import CodecError, LeadSheet, MeterError, concatenate, dumps, parse_generated, parse_lead_sheet, \
    to_document, transpose_to_c
from .generator import DEFAULT_SEED_EVENTS, GenerationError, SamplingConfig, generate
from .hrnn import TierConfig
from .metrics import evaluate_corpus
from .metrics.tension import DEFAULT_WINDOW
from .midi import export_midi
from .trainer import TrainHyper, Trainer, split_dataset

log = logging.getLogger("cmhrnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
TIER_PRESETS = {2: (16, 16), 3: (2, 2, 16)}
# sidecar files written next to lead sheets; never read back as inputs
ARTIFACT_SUFFIXES = (".manifest.json", ".summary.json", ".rejects.json")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --- configuration --------------------------------------------------------


@dataclass
class RunConfig:
    model: TierConfig = field(default_factory=TierConfig)
    train: TrainHyper = field(default_factory=TrainHyper)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    window: int = DEFAULT_WINDOW
    seed_events: int = DEFAULT_SEED_EVENTS

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "train": asdict(self.train), "sampling": asdict(self.sampling),
                "window": self.window, "seed_events": self.seed_events}

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _merge(cls, base, overrides: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise UsageError(f"unknown {section} option(s): {', '.join(sorted(unknown))}")
    values = asdict(base) if not isinstance(base, TierConfig) else base.to_dict()
    values.update(overrides)
    if cls is TierConfig:
        return TierConfig.from_dict(values)
    return cls(**values)


def resolve_config(args) -> RunConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = RunConfig()
    layers = [{}]
    if getattr(args, "config", None):
        try:
            layers.append(json.loads(Path(args.config).read_text()))
        except FileNotFoundError:
            raise DataError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {args.config} is not valid JSON: {exc}") from None
    layers.append(_flag_overrides(args))
    for layer in layers:
        unknown = set(layer) - {"model", "train", "sampling", "window", "seed_events"}
        if unknown:
            raise UsageError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        try:
            cfg.model = _merge(TierConfig, cfg.model, layer.get("model", {}), "model")
            cfg.train = _merge(TrainHyper, cfg.train, layer.get("train", {}), "train")
            cfg.sampling = _merge(SamplingConfig, cfg.sampling, layer.get("sampling", {}), "sampling")
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        cfg.window = int(layer.get("window", cfg.window))
        cfg.seed_events = int(layer.get("seed_events", cfg.seed_events))
    try:
        hrnn.validate_config(cfg.model)
    except hrnn.ConfigError as exc:
        raise UsageError(str(exc)) from None
    if cfg.window < 1:
        raise UsageError("window must be at least 1")
    return cfg


def _flag_overrides(args) -> dict:
    out: dict = {"model": {}, "train": {}, "sampling": {}}
    g = lambda name: getattr(args, name, None)  # noqa: E731
    if g("tiers") is not None:
        out["model"]["frame_sizes"] = list(TIER_PRESETS[args.tiers])
    if g("frame_sizes") is not None:
        out["model"]["frame_sizes"] = args.frame_sizes
    for flag, key in (("hidden", "hidden"), ("layers", "lstm_layers")):
        if g(flag) is not None:
            out["model"][key] = g(flag)
    if g("no_acc_t"):
        out["model"]["use_acc_t"] = False
    if g("no_residual"):
        out["model"]["residual"] = False
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "learning_rate"),
                      ("seed", "seed"), ("patience", "patience"), ("bptt", "bptt")):
        if g(flag) is not None:
            out["train"][key] = g(flag)
    for flag in ("temp_pitch", "temp_duration", "temp_bar", "max_events"):
        if g(flag) is not None:
            out["sampling"][flag] = g(flag)
    if g("rng_seed") is not None:
        out["sampling"]["seed"] = args.rng_seed
    if g("window") is not None:
        out["window"] = args.window
    if g("seed_events") is not None:
        out["seed_events"] = args.seed_events
    return {k: v for k, v in out.items() if v != {}}


# --- manifests ------------------------------------------------------------


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: Path, command: str, cfg: RunConfig, inputs: dict, outputs: dict, seeds: dict,
                   started: str, argv: list[str]) -> Path:
    manifest = {
        "command": command,
        "argv": argv,
        "config": cfg.to_dict(),
        "config_fingerprint": cfg.fingerprint(),
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "seeds": seeds,
        "tool_version": tool_version(),
        "started": started,
        "finished": _now(),
    }
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


# --- commands -------------------------------------------------------------


def _json_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir()
                   if p.suffix == ".json" and p.is_file() and not p.name.endswith(ARTIFACT_SUFFIXES))
    if not files:
        raise DataError(f"no .json lead sheets in {directory}")
    return files


def ingest_files(files: list[Path]) -> tuple[list[dict], list[dict]]:
    """Corpus items (one per 4/4 song, sections merged, in C) plus a rejects list."""
    songs: dict[str, list[tuple[str, LeadSheet]]] = {}
    rejects = []
    bad_songs: set[str] = set()
    for f in files:
        try:
            doc = json.loads(f.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            rejects.append({"file": f.name, "reason": f"invalid JSON: {exc}"})
            continue
        song = (doc.get("song") or doc.get("title") or f.stem) if isinstance(doc, dict) else f.stem
        try:
            ls = parse_lead_sheet(doc)
        except CodecError as exc:
            kind = "meter" if isinstance(exc, MeterError) else "parse"
            rejects.append({"file": f.name, "reason": f"{kind}: {exc}"})
            bad_songs.add(song)
            continue
        songs.setdefault(song, []).append((f.name, ls))
    items = []
    for song in sorted(songs):
        if song in bad_songs:
            for name, _ in songs[song]:
                rejects.append({"file": name, "reason": "another section of this song was rejected"})
            continue
        parts = songs[song]
        try:
            merged = concatenate([ls for _, ls in parts], title=song)
            merged = transpose_to_c(merged)
        except CodecError as exc:
            rejects.extend({"file": name, "reason": f"merge: {exc}"} for name, _ in parts)
            continue
        doc = to_document(merged)
        doc["song"] = song
        doc["provenance"] = {"files": [name for name, _ in parts], "original_key": to_document(parts[0][1])["key"]}
        items.append(doc)
    return items, sorted(rejects, key=lambda r: r["file"])


def read_corpus(path: Path) -> list[LeadSheet]:
    if not path.is_file():
        raise DataError(f"corpus not found: {path}")
    out = []
    for i, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(parse_lead_sheet(json.loads(line)))
        except (json.JSONDecodeError, CodecError) as exc:
            raise DataError(f"{path}:{i}: {exc}") from None
    if not out:
        raise DataError(f"corpus {path} is empty")
    return out


def cmd_ingest(args, argv) -> int:
    started = _now()
    cfg = resolve_config(args)
    items, rejects = ingest_files(_json_files(Path(args.in_dir)))
    out = Path(args.out_corpus)
    rejects_path = Path(args.rejects) if args.rejects else out.with_suffix(".rejects.json")
    rejects_path.write_text(json.dumps(rejects, indent=1) + "\n")
    if not items:
        log.error("no lead sheets survived ingestion; see %s", rejects_path)
        return EXIT_DATA
    out.write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in items))
    write_manifest(out.with_suffix(".manifest.json"), "ingest", cfg, {"in_dir": args.in_dir},
                   {"corpus": out, "rejects": rejects_path}, {}, started, argv)
    print(f"{len(items)} songs written to {out}; {len(rejects)} rejected")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    started = _now()
    cfg = resolve_config(args)
    corpus = read_corpus(Path(args.corpus))
    split = split_dataset(corpus, cfg.train.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = hrnn.init_params(cfg.model, cfg.train.seed)
    trainer = Trainer(cfg.model, params, split, cfg.train)
    report = trainer.run()
    ckpt = checkpoint.save_params(out / "model.ckpt", cfg.model, trainer.best_params,
                                  {"fingerprint": report.fingerprint, "best_epoch": report.best_epoch})
    (out / "train_report.jsonl").write_text(report.jsonl())
    (out / "train_summary.json").write_text(json.dumps(report.summary(), indent=1) + "\n")
    trainer.save_state(out / "train_state.npz")
    write_manifest(out / "manifest.json", "train", cfg, {"corpus": args.corpus},
                   {"checkpoint": ckpt, "report": out / "train_report.jsonl", "state": out / "train_state.npz"},
                   {"train": cfg.train.seed, "init": cfg.train.seed, "split": cfg.train.seed}, started, argv)
    print(f"trained {len(report.records)} epochs; best epoch {report.best_epoch} "
          f"(score {report.best_val:.4f}); checkpoint {ckpt}")
    return EXIT_OK


def _load_sheet(path: str) -> LeadSheet:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"file not found: {path}")
    return parse_lead_sheet(p.read_text())


def cmd_generate(args, argv) -> int:
    started = _now()
    cfg = resolve_config(args)
    try:
        model_cfg, params, _ = checkpoint.load_params(args.checkpoint)
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {args.checkpoint}") from None
    chords = _load_sheet(args.chords)
    seed_sheet = _load_sheet(args.seed_file) if args.seed_file else chords
    seed = seed_sheet.events[: cfg.seed_events]
    if len(seed) < cfg.seed_events:
        raise DataError(f"seed file has only {len(seed_sheet.events)} events, need {cfg.seed_events}")
    out = generate(params, model_cfg, chords.timeline, seed, cfg.sampling, key=chords.key,
                   title=args.title or f"generated from {Path(args.chords).stem}")
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_suffix(".json")
    midi_path = prefix.with_suffix(".mid")
    json_path.write_text(dumps(out) + "\n")
    export_midi(out, midi_path)
    write_manifest(prefix.with_suffix(".manifest.json"), "generate", cfg,
                   {"checkpoint": args.checkpoint, "chords": args.chords, "seed_file": args.seed_file or args.chords},
                   {"leadsheet": json_path, "midi": midi_path}, {"sampling": cfg.sampling.seed}, started, argv)
    g = out.meta["generation"]
    print(f"generated {g['generated_events']} events ({g['bar_mismatches']} bar-flag mismatches) -> {json_path}")
    return EXIT_OK


def cmd_evaluate(args, argv) -> int:
    started = _now()
    cfg = resolve_config(args)
    pieces = []
    for f in _json_files(Path(args.melody_dir)):
        try:
            pieces.append((f.stem, parse_generated(f.read_text())))
        except CodecError as exc:
            raise DataError(f"{f}: {exc}") from None
    report = evaluate_corpus(pieces, window=cfg.window)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    tsv = prefix.with_suffix(".tsv")
    summary = prefix.with_suffix(".summary.json")
    tsv.write_text(report.to_tsv())
    summary.write_text(json.dumps({"pieces": len(pieces), "window": cfg.window, "columns": report.summary()},
                                  indent=1) + "\n")
    write_manifest(prefix.with_suffix(".manifest.json"), "evaluate", cfg, {"melody_dir": args.melody_dir},
                   {"table": tsv, "summary": summary}, {}, started, argv)
    sys.stdout.write(report.to_tsv())
    return EXIT_OK


def cmd_show_config(args, argv) -> int:
    print(json.dumps(resolve_config(args).to_dict(), indent=1, sort_keys=True))
    return EXIT_OK


# --- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _frame_sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _model_flags(p):
    p.add_argument("--tiers", type=int, choices=sorted(TIER_PRESETS), help="2: FS=(16,16); 3: FS=(2,2,16)")
    p.add_argument("--frame-sizes", type=_frame_sizes, help="explicit frame sizes, bottom tier first, e.g. 2,2,16")
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--no-acc-t", action="store_true")
    p.add_argument("--no-residual", action="store_true")


def _train_flags(p):
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--bptt", type=int)


def _sampling_flags(p):
    p.add_argument("--temp-pitch", type=float)
    p.add_argument("--temp-duration", type=float)
    p.add_argument("--temp-bar", type=float)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--max-events", type=int)
    p.add_argument("--seed-events", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmhrnn", description="Chord-conditioned hierarchical melody generation.")
    parser.add_argument("--version", action="version", version=tool_version())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse, filter and merge lead sheets into a corpus")
    p.add_argument("in_dir")
    p.add_argument("out_corpus")
    p.add_argument("--rejects")
    p.add_argument("--config")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("corpus")
    p.add_argument("out_dir")
    p.add_argument("--config")
    _model_flags(p)
    _train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate a melody over a chord progression")
    p.add_argument("checkpoint")
    p.add_argument("chords", help="lead sheet whose chord track conditions generation")
    p.add_argument("out", help="output prefix; writes .json, .mid and .manifest.json")
    p.add_argument("--seed-file", help="lead sheet supplying the seed events (default: the chords file)")
    p.add_argument("--title")
    p.add_argument("--config")
    _sampling_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="SBR, CPR and tension over a directory of lead sheets")
    p.add_argument("melody_dir")
    p.add_argument("out", help="output prefix; writes .tsv, .summary.json and .manifest.json")
    p.add_argument("--window", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("show-config", help="print the resolved configuration")
    p.add_argument("--config")
    _model_flags(p)
    _train_flags(p)
    _sampling_flags(p)
    p.add_argument("--window", type=int)
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"cmhrnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"cmhrnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CodecError, checkpoint.CheckpointError, GenerationError, hrnn.InsufficientLengthError) as exc:
        print(f"cmhrnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"cmhrnn: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
