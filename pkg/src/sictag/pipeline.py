"""Glue between the corpus, feature cache and the classifiers.

All classifiers share one interface, ``fit(tracks)`` / ``predict(tracks)``,
over :class:`TrackData`, which is what the experiment runner drives.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines
from .aggregate import TRACK_VECTOR_LEN, build_track_vector
from .config import RunConfig
from .corpus import CorpusManifest, Label, Split, TrackRecord, VocalActivityAnnotation, load_annotation, load_audio
from .dsp import FeatureMatrix, cache_path, extract_features, load_features, save_features
from .evaluation import kfold_plan
from .frame_model import RandomForestModel, align_labels, predict_frame_probabilities, train_frame_classifier
from .seeding import derive_seed
from .track_model import AdaBoostModel, TrackPrediction, predict_tracks, train_adaboost

log = logging.getLogger(__name__)

MODEL_NAMES = ("proposed", "ga", "vqmm", "allsong", "allinstrumental", "rca")


@dataclass(frozen=True)
class TrackData:
    isrc: str
    label: Label
    split: Split
    features: FeatureMatrix
    annotation: VocalActivityAnnotation | None = None


def _extract_one(args):
    record, manifest_root, cfg, cache_dir = args
    path = cache_path(cache_dir, record.isrc) if cache_dir else None
    if path is not None:
        cached = load_features(path, cfg.feature_hash)
        if cached is not None:
            return cached
    audio = record.audio_path if record.audio_path.is_absolute() else manifest_root / record.audio_path
    clip = load_audio(audio, cfg.features.sample_rate)
    fm = extract_features(clip, cfg.frame, cfg.mfcc, cfg.features.delta_window)
    if path is not None:
        save_features(path, fm, cfg.feature_hash)
    return fm


def load_tracks(manifest: CorpusManifest, cfg: RunConfig, cache_dir: str | os.PathLike | None = None,
                records: Sequence[TrackRecord] | None = None, jobs: int = 1) -> list[TrackData]:
    """Features (from cache when fresh) and annotations for manifest records."""
    records = list(manifest.records if records is None else records)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
    tasks = [(r, manifest.root, cfg, cache_dir) for r in records]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            mats = list(pool.map(_extract_one, tasks, chunksize=4))
    else:
        mats = [_extract_one(t) for t in tasks]
    out = []
    for rec, fm in zip(records, mats):
        ann = None
        if rec.annotation_path is not None:
            ann = load_annotation(manifest.resolve(rec.annotation_path))
        out.append(TrackData(rec.isrc, rec.label, rec.split, fm, ann))
    return out


# -- the two-stage method -----------------------------------------------------------

class ProposedPipeline:
    """Random-forest frame probabilities -> 79-dim track vectors -> AdaBoost."""

    def __init__(self, cfg: RunConfig, frame_model: RandomForestModel | None = None,
                 track_model: AdaBoostModel | None = None):
        self.cfg = cfg
        self.frame_model = frame_model
        self.track_model = track_model

    def fit_frame(self, tracks: Sequence[TrackData]) -> RandomForestModel:
        X = np.vstack([t.features.values for t in tracks])
        y = np.concatenate([align_labels(t.annotation, t.features.frame_times_s, t.label) for t in tracks])
        log.info("training frame forest on %d frames (%d voiced)", y.size, int(y.sum()))
        self.frame_model = train_frame_classifier(X, y, self.cfg.rf_config(), jobs=self.cfg.jobs)
        self.frame_model.feature_hash = self.cfg.feature_hash
        return self.frame_model

    def track_vectors(self, tracks: Sequence[TrackData]) -> np.ndarray:
        if self.frame_model is None:
            raise RuntimeError("frame model not trained")
        thr = self.cfg.features.voice_threshold
        return np.vstack([
            build_track_vector(predict_frame_probabilities(self.frame_model, t.features.values),
                               t.features.values, thr)
            for t in tracks
        ])

    def out_of_fold_vectors(self, tracks: Sequence[TrackData]) -> np.ndarray:
        """Track vectors where each track is scored by a forest trained without it."""
        k = self.cfg.features.cross_fit_folds
        if k < 2:
            return self.track_vectors(tracks)
        folds = kfold_plan(tracks, k, derive_seed(self.cfg.seed, "cross-fit"))
        index = {t.isrc: i for i, t in enumerate(tracks)}
        vectors = np.zeros((len(tracks), TRACK_VECTOR_LEN))
        final = self.frame_model
        for f, held in enumerate(folds):
            held_ids = {t.isrc for t in held}
            sub = ProposedPipeline(dataclasses.replace(self.cfg, seed=derive_seed(self.cfg.seed, f"cross-fit:{f}")))
            sub.fit_frame([t for t in tracks if t.isrc not in held_ids])
            vectors[[index[t.isrc] for t in held]] = sub.track_vectors(held)
        self.frame_model = final
        return vectors

    def fit_track(self, tracks: Sequence[TrackData]) -> AdaBoostModel:
        vectors = self.out_of_fold_vectors(tracks)
        log.info("training AdaBoost on %d track vectors", len(tracks))
        self.track_model = train_adaboost(vectors, [t.label for t in tracks], self.cfg.boost_config())
        return self.track_model

    def fit(self, tracks: Sequence[TrackData]) -> "ProposedPipeline":
        self.fit_frame(tracks)
        self.fit_track(tracks)
        return self

    def predict(self, tracks: Sequence[TrackData]) -> list[TrackPrediction]:
        if self.track_model is None:
            raise RuntimeError("track model not trained")
        return predict_tracks(self.track_model, self.track_vectors(tracks), [t.isrc for t in tracks])


# -- baselines behind the same interface ---------------------------------------------

class GaClassifier:
    def __init__(self, cfg: RunConfig, model: baselines.RansacModel | None = None):
        self.cfg, self.model = cfg, model

    def fit(self, tracks):
        self.model = baselines.train_ga([t.features.values for t in tracks], [t.label for t in tracks],
                                        self.cfg.ga_config())
        return self

    def predict(self, tracks):
        return baselines.predict_ga(self.model, [t.features.values for t in tracks], [t.isrc for t in tracks])


class VqmmClassifier:
    def __init__(self, cfg: RunConfig, model: baselines.VqmmModel | None = None):
        self.cfg, self.model = cfg, model

    def fit(self, tracks):
        self.model = baselines.train_vqmm([t.features.values for t in tracks], [t.label for t in tracks],
                                          self.cfg.vqmm_config())
        return self

    def predict(self, tracks):
        return baselines.predict_vqmm(self.model, [t.features.values for t in tracks], [t.isrc for t in tracks])


class ConstantClassifier:
    def __init__(self, label: Label):
        self.label = Label(label)

    def fit(self, tracks):
        return self

    def predict(self, tracks):
        return baselines.predict_all([t.isrc for t in tracks], self.label)


class RcaClassifier:
    def __init__(self, seed: int):
        self.seed = seed

    def fit(self, tracks):
        return self

    def predict(self, tracks):
        return baselines.predict_rca([t.isrc for t in tracks], self.seed)


def make_model(name: str, cfg: RunConfig):
    name = name.lower()
    if name == "proposed":
        return ProposedPipeline(cfg)
    if name == "ga":
        return GaClassifier(cfg)
    if name == "vqmm":
        return VqmmClassifier(cfg)
    if name == "allsong":
        return ConstantClassifier(Label.SONG)
    if name == "allinstrumental":
        return ConstantClassifier(Label.INSTRUMENTAL)
    if name == "rca":
        return RcaClassifier(cfg.rca_seed())
    raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
