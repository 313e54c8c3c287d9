"""Command-line entry point: ``sictag <command> ...``.

Global options come before the command::

    sictag --config run.ini --set rf.n_trees=50 --jobs 4 train-frame

Failures print one line on stderr, ``error: <category>: <message>``, and exit
with status 1 (argument errors exit with 2).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import baselines
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .corpus import CorpusError, Label, Split, load_manifest
from .dsp import FeatureError, cache_path, read_feature_hash
from .evaluation import EvalError, ExperimentPlan, PlanKind, run_experiment
from .frame_model import ModelError, RandomForestModel
from .pipeline import MODEL_NAMES, GaClassifier, ProposedPipeline, VqmmClassifier, load_tracks, make_model
from .playlist import DEFAULT_CAP, generate_playlist
from .synth import SynthConfig, generate_synthetic_corpus
from .track_model import AdaBoostModel, BoostError, TrackPrediction

log = logging.getLogger("sictag")

PREDICTIONS_HEADER = ["isrc", "predicted_label", "margin", "score_song", "score_instrumental"]
MODEL_FILES = {
    "frame": "frame_model.json",
    "track": "track_model.json",
    "ga": "ga_model.json",
    "vqmm": "vqmm_model.json",
}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# -- helpers ----------------------------------------------------------------------

def _provenance(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "config_hash": cfg.hash(), "feature_hash": cfg.feature_hash}


def _model_path(paths, key: str) -> Path:
    return Path(paths.model_dir) / MODEL_FILES[key]


def _require(path: Path, what: str, command: str) -> Path:
    if not path.is_file():
        raise CliError("missing_artifact", f"{what} not found at {path}; run `sictag {command}` first")
    return path


def _records(manifest, split: str):
    if split == "all":
        return list(manifest.records)
    return manifest.split(Split(split))


def _cached_tracks(manifest, records, cfg: RunConfig, cache_dir: str, expect_hash: str | None = None):
    """Tracks whose features are already cached with the expected config hash."""
    want = expect_hash or cfg.feature_hash
    for rec in records:
        found = read_feature_hash(cache_path(cache_dir, rec.isrc))
        if found is None:
            raise CliError("missing_artifact",
                           f"no cached features for {rec.isrc} in {cache_dir}; run `sictag extract` first")
        if found != want:
            raise CliError("hash_mismatch",
                           f"cached features for {rec.isrc} have config hash {found}, expected {want}; "
                           "re-run `sictag extract` with the matching config")
    return load_tracks(manifest, cfg, cache_dir=cache_dir, records=records)


def _load_doc(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except ValueError as exc:
        raise CliError("bad_artifact", f"{path}: not a valid model document ({exc})") from None


def _model_config(doc: dict, path: Path) -> RunConfig:
    embedded = doc.get("extra", doc).get("config")
    if embedded is None:
        raise CliError("bad_artifact", f"{path}: model document carries no config")
    return config_from_dict(embedded)


def _check_hash(doc_hash: str | None, cfg: RunConfig, path: Path):
    if doc_hash != cfg.feature_hash:
        raise CliError("hash_mismatch",
                       f"{path} was trained on features with hash {doc_hash}, "
                       f"current config gives {cfg.feature_hash}")


def write_predictions(preds, path: Path, provenance: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={provenance['config_hash']} feature_hash={provenance['feature_hash']}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for p in preds:
            song, inst = p.scores
            writer.writerow([p.isrc, p.predicted_label.value, repr(p.margin), repr(song), repr(inst)])


def read_predictions(path: Path) -> list[TrackPrediction]:
    if not path.is_file():
        raise CliError("missing_artifact", f"predictions not found at {path}; run `sictag predict` first")
    with path.open(newline="") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames != PREDICTIONS_HEADER:
        raise CliError("bad_artifact", f"{path}: header must be {','.join(PREDICTIONS_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(TrackPrediction(row["isrc"], Label.parse(row["predicted_label"]), float(row["margin"])))
        except ValueError as exc:
            raise CliError("bad_artifact", f"{path}: row {lineno}: {exc}") from None
    return out


# -- commands ----------------------------------------------------------------------

def cmd_synth(args, cfg, paths):
    out = Path(args.out) if args.out else Path(paths.manifest).parent
    scfg = SynthConfig(
        n_songs=args.songs, n_instrumentals=args.instrumentals, duration_s=args.duration,
        seed=cfg.seed if args.seed is None else args.seed,
        n_test_songs=args.test_songs, n_test_instrumentals=args.test_instrumentals,
        voice_snr_db=args.snr,
    )
    manifest = generate_synthetic_corpus(scfg, out)
    print(f"wrote {len(manifest.records)} tracks and {out / 'manifest.csv'}")


def cmd_extract(args, cfg, paths):
    manifest = load_manifest(paths.manifest)
    records = _records(manifest, args.split)
    tracks = load_tracks(manifest, cfg, cache_dir=paths.cache_dir, records=records, jobs=cfg.jobs)
    frames = sum(t.features.n_frames for t in tracks)
    print(f"features for {len(tracks)} tracks ({frames} frames) in {paths.cache_dir} "
          f"[feature_hash={cfg.feature_hash}]")


def cmd_train_frame(args, cfg, paths):
    manifest = load_manifest(paths.manifest)
    tracks = _cached_tracks(manifest, manifest.split(Split.TRAIN), cfg, paths.cache_dir)
    pipe = ProposedPipeline(cfg)
    model = pipe.fit_frame(tracks)
    model.extra = _provenance(cfg)
    out = _model_path(paths, "frame")
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    print(f"frame model ({len(model.trees)} trees) -> {out}")


def cmd_train_track(args, cfg, paths):
    frame_path = _require(_model_path(paths, "frame"), "frame model", "train-frame")
    frame_doc = _load_doc(frame_path)
    frame_model = RandomForestModel.from_dict(frame_doc)
    frame_cfg = _model_config(frame_doc, frame_path)
    _check_hash(frame_model.feature_hash, cfg, frame_path)
    if frame_cfg.hash() != cfg.hash():
        log.warning("frame model was trained with config %s, current config is %s",
                    frame_cfg.hash(), cfg.hash())
    manifest = load_manifest(paths.manifest)
    tracks = _cached_tracks(manifest, manifest.split(Split.TRAIN), cfg, paths.cache_dir)
    pipe = ProposedPipeline(cfg, frame_model=frame_model)
    model = pipe.fit_track(tracks)
    model.extra = _provenance(cfg)
    out = _model_path(paths, "track")
    model.save(out)
    print(f"track model ({len(model.alphas)} rounds) -> {out}")


def cmd_train_baseline(args, cfg, paths):
    manifest = load_manifest(paths.manifest)
    tracks = _cached_tracks(manifest, manifest.split(Split.TRAIN), cfg, paths.cache_dir)
    clf = GaClassifier(cfg) if args.name == "ga" else VqmmClassifier(cfg)
    clf.fit(tracks)
    doc = clf.model.to_dict()
    doc["extra"] = _provenance(cfg)
    out = _model_path(paths, args.name)
    out.parent.mkdir(parents=True, exist_ok=True)
    baselines.save_json(doc, out)
    print(f"{args.name} model -> {out}")


def _load_predictor(name: str, paths):
    """(classifier, config embedded in its documents, provenance of the deciding model)."""
    if name == "proposed":
        track_path = _require(_model_path(paths, "track"), "track model", "train-track")
        frame_path = _require(_model_path(paths, "frame"), "frame model", "train-frame")
        track_doc, frame_doc = _load_doc(track_path), _load_doc(frame_path)
        frame_model = RandomForestModel.from_dict(frame_doc)
        track_model = AdaBoostModel.from_dict(track_doc)
        mcfg = _model_config(track_doc, track_path)
        if frame_model.feature_hash != track_doc["extra"].get("feature_hash"):
            raise CliError("hash_mismatch", f"{frame_path} and {track_path} were built from different features")
        return ProposedPipeline(mcfg, frame_model, track_model), mcfg, track_doc["extra"]
    path = _require(_model_path(paths, name), f"{name} model", f"train-baseline {name}")
    doc = _load_doc(path)
    mcfg = _model_config(doc, path)
    if name == "ga":
        return GaClassifier(mcfg, baselines.RansacModel.from_dict(doc)), mcfg, doc["extra"]
    return VqmmClassifier(mcfg, baselines.VqmmModel.from_dict(doc)), mcfg, doc["extra"]


def cmd_predict(args, cfg, paths):
    clf, mcfg, prov = _load_predictor(args.model, paths)
    _check_hash(prov.get("feature_hash"), cfg, _model_path(paths, "track" if args.model == "proposed" else args.model))
    manifest = load_manifest(paths.manifest)
    records = _records(manifest, args.split)
    if not records:
        raise CliError("empty", f"no {args.split} records in {paths.manifest}")
    tracks = _cached_tracks(manifest, records, mcfg, paths.cache_dir, prov.get("feature_hash"))
    preds = clf.predict(tracks)
    out = Path(args.out) if args.out else Path(paths.output_dir) / f"predictions_{args.model}.csv"
    write_predictions(preds, out, prov)
    n_inst = sum(p.predicted_label is Label.INSTRUMENTAL for p in preds)
    print(f"{len(preds)} predictions ({n_inst} Instrumental) -> {out}")


def cmd_experiment(args, cfg, paths):
    kind = PlanKind.parse(args.kind)
    manifest = load_manifest(paths.manifest)
    # k-fold runs within the balanced training database; cross-database plans use both splits
    records = manifest.split(Split.TRAIN) if kind is PlanKind.KFOLD else manifest.records
    tracks = load_tracks(manifest, cfg, cache_dir=paths.cache_dir, records=records, jobs=cfg.jobs)
    plan = ExperimentPlan(kind, k=cfg.experiment.k, n_repetitions=cfg.experiment.n_repetitions,
                          seed=cfg.experiment_seed())
    name = f"{kind.value}_{args.model}"
    result = run_experiment(plan, lambda: make_model(args.model, cfg), tracks, name)
    written = result.write(paths.output_dir, name, extra=_provenance(cfg))
    print(result.render())
    print(f"report -> {written['csv']}")


def cmd_playlist(args, cfg, paths):
    src = Path(args.predictions) if args.predictions else Path(paths.output_dir) / "predictions_proposed.csv"
    preds = read_predictions(src)
    tag = Label.parse(args.tag)
    pl = generate_playlist(preds, tag, cap=args.cap, min_margin=args.min_margin)
    out = Path(args.out) if args.out else Path(paths.output_dir) / f"playlist_{tag.value.lower()}.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    pl.write(out)
    print(f"{len(pl.entries)} tracks (cap {pl.cap}) -> {out}")


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sictag", description="Song / Instrumental track tagging.")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")
    p.add_argument("--jobs", type=int, help="worker processes for extraction and forest training")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    s.add_argument("--out", help="corpus directory (default: the manifest's directory)")
    s.add_argument("--songs", type=int, default=30)
    s.add_argument("--instrumentals", type=int, default=30)
    s.add_argument("--test-songs", type=int, default=0)
    s.add_argument("--test-instrumentals", type=int, default=0)
    s.add_argument("--duration", type=float, default=8.0, help="seconds per track")
    s.add_argument("--snr", type=float, default=0.0, help="voice-to-accompaniment level in dB")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="compute and cache frame features")
    s.add_argument("--split", choices=["train", "test", "all"], default="all")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train-frame", help="train the frame-level random forest")
    s.set_defaults(func=cmd_train_frame)

    s = sub.add_parser("train-track", help="train the track-level AdaBoost model")
    s.set_defaults(func=cmd_train_track)

    s = sub.add_parser("train-baseline", help="train a baseline model")
    s.add_argument("name", choices=["ga", "vqmm"])
    s.set_defaults(func=cmd_train_baseline)

    s = sub.add_parser("predict", help="tag tracks with a trained model")
    s.add_argument("--model", choices=["proposed", "ga", "vqmm"], default="proposed")
    s.add_argument("--split", choices=["train", "test", "all"], default="test")
    s.add_argument("--out", help="predictions CSV (default: <output_dir>/predictions_<model>.csv)")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("experiment", help="run an evaluation protocol")
    s.add_argument("kind", choices=["kfold", "cross-db-balanced", "cross-db-full"])
    s.add_argument("--model", choices=MODEL_NAMES, default="proposed")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("playlist", help="build a capped tag playlist from predictions")
    s.add_argument("--tag", required=True, help="song or instrumental")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--min-margin", type=float, default=0.0)
    s.add_argument("--predictions", help="predictions CSV (default: <output_dir>/predictions_proposed.csv)")
    s.add_argument("--out", help="playlist file (default: <output_dir>/playlist_<tag>.txt)")
    s.set_defaults(func=cmd_playlist)
    return p


_CATEGORIES = (
    (ConfigError, "config"),
    (CorpusError, "corpus"),
    (FeatureError, "features"),
    (ModelError, "model"),
    (BoostError, "model"),
    (baselines.BaselineError, "model"),
    (EvalError, "experiment"),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        overrides = list(args.overrides)
        if args.jobs is not None:
            overrides.append(f"jobs={args.jobs}")
        cfg = load_config(args.config, overrides)
        if cfg.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        paths = cfg.resolve_paths()
        args.func(args, cfg, paths)
    except CliError as exc:
        return _fail(exc.category, str(exc))
    except FileNotFoundError as exc:
        return _fail("missing_file", f"{exc.filename}: {exc.strerror}")
    except ValueError as exc:
        category = next((c for t, c in _CATEGORIES if isinstance(exc, t)), "invalid")
        return _fail(category, str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    return 0


def _fail(category: str, message: str) -> int:
    print(f"error: {category}: {' '.join(message.split())}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
