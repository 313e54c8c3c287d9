"""Metrics, ROC analysis and the cross-validation / cross-database protocols."""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .corpus import Label, Split
from .seeding import rng_for
from .track_model import TrackPrediction

CLASSES = (Label.SONG, Label.INSTRUMENTAL)
CSV_HEADER = ["experiment", "repetition", "class", "precision", "recall", "fscore", "accuracy"]


class EvalError(ValueError):
    pass


class LeakageError(EvalError):
    pass


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    fscore: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray  # rows true, cols predicted, order (Song, Instrumental)
    per_class: dict
    accuracy: float
    fscore: float          # support-weighted mean of the per-class f-scores
    n_tracks: int
    positive_class: Label = Label.INSTRUMENTAL

    def __getitem__(self, label) -> ClassMetrics:
        return self.per_class[Label(label)]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "classes": [c.value for c in CLASSES],
            "per_class": {lab.value: vars(m) for lab, m in self.per_class.items()},
            "accuracy": self.accuracy,
            "fscore": self.fscore,
            "n_tracks": self.n_tracks,
            "positive_class": self.positive_class.value,
        }

    def render(self) -> str:
        lines = [f"n_tracks={self.n_tracks} accuracy={self.accuracy:.3f} fscore={self.fscore:.3f}"]
        for lab in CLASSES:
            m = self.per_class[lab]
            lines.append(f"  {lab.value:<12} P={m.precision:.3f} R={m.recall:.3f} "
                         f"F={m.fscore:.3f} support={m.support}")
        (ss, si), (is_, ii) = self.confusion.tolist()
        lines.append(f"  confusion [[{ss}, {si}], [{is_}, {ii}]] (rows true Song/Instrumental)")
        return "\n".join(lines)


def compute_metrics(truth: Sequence, predicted: Sequence,
                    positive_class: Label = Label.INSTRUMENTAL) -> EvalReport:
    if len(truth) != len(predicted):
        raise EvalError(f"length mismatch: {len(truth)} truths vs {len(predicted)} predictions")
    if len(truth) == 0:
        raise EvalError("no tracks to evaluate")
    t = np.array([CLASSES.index(Label(x)) for x in truth])
    p = np.array([CLASSES.index(Label(x)) for x in predicted])
    confusion = np.zeros((2, 2), dtype=np.int64)
    np.add.at(confusion, (t, p), 1)
    n = int(confusion.sum())
    per_class = {}
    for c, lab in enumerate(CLASSES):
        tp = confusion[c, c]
        fp = confusion[:, c].sum() - tp
        fn = confusion[c, :].sum() - tp
        prec = _safe_div(tp, tp + fp)
        rec = _safe_div(tp, tp + fn)
        per_class[lab] = ClassMetrics(prec, rec, _safe_div(2 * prec * rec, prec + rec),
                                      int(confusion[c, :].sum()))
    accuracy = np.trace(confusion) / n
    fscore = sum(m.fscore * m.support for m in per_class.values()) / n
    return EvalReport(confusion, per_class, float(accuracy), float(fscore), n, Label(positive_class))


def report_from_predictions(truth: dict, predictions: Iterable[TrackPrediction],
                            positive_class: Label = Label.INSTRUMENTAL) -> EvalReport:
    preds = list(predictions)
    return compute_metrics([truth[p.isrc] for p in preds], [p.predicted_label for p in preds],
                           positive_class)


# -- ROC ----------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    points: list  # (fpr, tpr), sorted by fpr
    auc: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("fpr,tpr\n")
        for fpr, tpr in self.points:
            buf.write(f"{fpr:.6f},{tpr:.6f}\n")
        return buf.getvalue()


def roc_curve(scores: Sequence[float], truth: Sequence,
              positive_class: Label = Label.INSTRUMENTAL) -> RocCurve:
    """Threshold sweep over distinct scores, highest first; tied scores move together."""
    s = np.asarray(scores, dtype=float)
    pos = np.array([Label(x) is Label(positive_class) for x in truth])
    if s.size != pos.size:
        raise EvalError("scores and truth differ in length")
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvalError("ROC needs both positive and negative examples")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    last_of_group = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(pos)[last_of_group]
    fp = np.cumsum(~pos)[last_of_group]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    if fpr[-1] != 1.0 or tpr[-1] != 1.0:
        tpr, fpr = np.r_[tpr, 1.0], np.r_[fpr, 1.0]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(list(zip(fpr.tolist(), tpr.tolist())), auc)


# -- plans ----------------------------------------------------------------------

class PlanKind(str, enum.Enum):
    KFOLD = "kfold"
    CROSS_DB_BALANCED = "cross_db_balanced"
    CROSS_DB_FULL = "cross_db_full"

    @classmethod
    def parse(cls, text: str) -> "PlanKind":
        return cls(text.strip().lower().replace("-", "_"))


@dataclass(frozen=True)
class ExperimentPlan:
    kind: PlanKind
    k: int = 5
    n_repetitions: int = 8
    seed: int = 0
    positive_class: Label = Label.INSTRUMENTAL

    def __post_init__(self):
        object.__setattr__(self, "kind", PlanKind(self.kind))
        if self.kind is PlanKind.KFOLD and self.k < 2:
            raise EvalError("k-fold needs k >= 2")
        if self.n_repetitions < 1:
            raise EvalError("need at least one repetition")


@dataclass(frozen=True)
class Run:
    """One train/test round of an experiment, in ISRCs."""
    name: str
    train: tuple
    test: tuple


def _by_class(records):
    groups = {lab: [] for lab in CLASSES}
    for r in records:
        groups[Label(r.label)].append(r)
    return groups


def kfold_plan(records: Sequence, k: int, seed: int) -> list[list]:
    """Stratified folds: each class is shuffled then dealt round-robin.

    Dealing continues where the previous class stopped, so fold sizes as
    well as per-class counts differ by at most one.
    """
    if k < 2:
        raise EvalError("k-fold needs k >= 2")
    folds = [[] for _ in range(k)]
    rng = rng_for(seed, "kfold")
    offset = 0
    for lab, members in _by_class(records).items():
        if len(members) < k:
            raise EvalError(f"class {lab.value} has {len(members)} tracks, fewer than k={k}")
        for j, idx in enumerate(rng.permutation(len(members))):
            folds[(offset + j) % k].append(members[idx])
        offset = (offset + len(members)) % k
    return folds


def cross_db_balanced_plan(train_set: Sequence, test_pool: Sequence, n_repetitions: int = 8,
                           seed: int = 0) -> list[list]:
    """Balanced test samples: every Instrumental plus a disjoint Song draw each time."""
    del train_set  # every repetition shares the same training material
    groups = _by_class(test_pool)
    inst, songs = groups[Label.INSTRUMENTAL], groups[Label.SONG]
    if not inst:
        raise EvalError("test pool has no Instrumentals")
    need = n_repetitions * len(inst)
    if len(songs) < need:
        raise EvalError(f"need {need} Songs for {n_repetitions} balanced samples, pool has {len(songs)}")
    order = rng_for(seed, "cross-db-balanced").permutation(len(songs))
    samples = []
    for r in range(n_repetitions):
        picked = order[r * len(inst):(r + 1) * len(inst)]
        samples.append(list(inst) + [songs[i] for i in picked])
    return samples


def plan_runs(plan: ExperimentPlan, tracks: Sequence) -> list[Run]:
    if plan.kind is PlanKind.KFOLD:
        folds = kfold_plan(tracks, plan.k, plan.seed)
        runs = []
        for i, fold in enumerate(folds):
            train = [r.isrc for j, f in enumerate(folds) if j != i for r in f]
            runs.append(Run(f"fold{i}", tuple(train), tuple(r.isrc for r in fold)))
        return runs
    train = [r for r in tracks if Split(r.split) is Split.TRAIN]
    test = [r for r in tracks if Split(r.split) is Split.TEST]
    if not train or not test:
        raise EvalError("cross-database plans need both train and test records")
    train_ids = tuple(r.isrc for r in train)
    if plan.kind is PlanKind.CROSS_DB_FULL:
        return [Run("full", train_ids, tuple(r.isrc for r in test))]
    samples = cross_db_balanced_plan(train, test, plan.n_repetitions, plan.seed)
    return [Run(f"rep{i}", train_ids, tuple(r.isrc for r in s)) for i, s in enumerate(samples)]


# -- running --------------------------------------------------------------------

class Classifier(Protocol):
    def fit(self, tracks: Sequence) -> "Classifier": ...

    def predict(self, tracks: Sequence) -> list[TrackPrediction]: ...


@dataclass
class ExperimentResult:
    name: str
    plan: ExperimentPlan
    runs: list[Run]
    reports: list[EvalReport]
    predictions: list[list[TrackPrediction]] = field(repr=False, default_factory=list)
    truths: list[list[Label]] = field(repr=False, default_factory=list)

    def aggregate(self) -> dict:
        """Mean and standard deviation (ddof=1 when >1 run) of every reported metric."""
        rows = {}
        for key, getter in _metric_getters():
            vals = np.array([getter(r) for r in self.reports])
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            rows[key] = (float(vals.mean()), std)
        return rows

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "plan": {"kind": self.plan.kind.value, "k": self.plan.k,
                     "n_repetitions": self.plan.n_repetitions, "seed": self.plan.seed,
                     "positive_class": self.plan.positive_class.value},
            "runs": [{"name": run.name, "n_train": len(run.train), "n_test": len(run.test),
                      "report": rep.to_dict()} for run, rep in zip(self.runs, self.reports)],
            "aggregate": {k: {"mean": m, "std": s} for k, (m, s) in self.aggregate().items()},
        }

    def render(self) -> str:
        out = [f"experiment {self.name} ({self.plan.kind.value}, {len(self.runs)} runs)"]
        for run, rep in zip(self.runs, self.reports):
            out.append(f"[{run.name}] train={len(run.train)} test={len(run.test)}")
            out.append(rep.render())
        out.append("aggregate (mean +- std):")
        for key, (m, s) in self.aggregate().items():
            out.append(f"  {key:<24} {m:.3f} +- {s:.3f}")
        return "\n".join(out)

    def csv_rows(self) -> list[list]:
        rows = []

        def fmt(x):
            return f"{x:.6f}"

        for run, rep in zip(self.runs, self.reports):
            for lab in CLASSES:
                m = rep[lab]
                rows.append([self.name, run.name, lab.value, fmt(m.precision), fmt(m.recall),
                             fmt(m.fscore), fmt(rep.accuracy)])
            rows.append([self.name, run.name, "all", "", "", fmt(rep.fscore), fmt(rep.accuracy)])
        agg = self.aggregate()
        for stat, pos in (("mean", 0), ("std", 1)):
            for lab in CLASSES:
                rows.append([self.name, stat, lab.value,
                             fmt(agg[f"{lab.value}.precision"][pos]),
                             fmt(agg[f"{lab.value}.recall"][pos]),
                             fmt(agg[f"{lab.value}.fscore"][pos]),
                             fmt(agg["accuracy"][pos])])
            rows.append([self.name, stat, "all", "", "", fmt(agg["fscore"][pos]),
                         fmt(agg["accuracy"][pos])])
        return rows

    def roc_curves(self) -> dict:
        """Per-run ROC over prediction margins; runs with a single test class are skipped."""
        out = {}
        for run, preds, labels in zip(self.runs, self.predictions, self.truths):
            if len(set(labels)) == 2:
                out[run.name] = roc_curve([p.margin for p in preds], labels, self.plan.positive_class)
        return out

    def write(self, out_dir: str | os.PathLike, stem: str | None = None, extra: dict | None = None) -> dict:
        """Write `<stem>.json`, `<stem>.txt`, `<stem>.csv` and one ROC CSV per run.

        ``extra`` is merged into the JSON document (used for config provenance).
        """
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name
        paths = {"json": out / f"{stem}.json", "txt": out / f"{stem}.txt", "csv": out / f"{stem}.csv"}
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        paths["json"].write_text(json.dumps(doc, indent=2))
        header = "".join(f"# {k}={v}\n" for k, v in (extra or {}).items() if isinstance(v, str))
        paths["txt"].write_text(header + self.render() + "\n")
        for run_name, roc in self.roc_curves().items():
            paths[f"roc:{run_name}"] = out / f"{stem}_roc_{run_name}.csv"
            paths[f"roc:{run_name}"].write_text(roc.to_csv())
        with paths["csv"].open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(self.csv_rows())
        return paths


def _metric_getters():
    yield "accuracy", lambda r: r.accuracy
    yield "fscore", lambda r: r.fscore
    for lab in CLASSES:
        for attr in ("precision", "recall", "fscore"):
            yield f"{lab.value}.{attr}", (lambda r, lab=lab, attr=attr: getattr(r[lab], attr))


def check_leakage(run: Run) -> None:
    overlap = set(run.train) & set(run.test)
    if overlap:
        sample = ", ".join(sorted(overlap)[:3])
        raise LeakageError(f"{run.name}: {len(overlap)} test ISRC(s) also in training ({sample})")


def run_experiment(plan: ExperimentPlan, model_factory: Callable[[], Classifier], tracks: Sequence,
                   name: str = "experiment", runs: list[Run] | None = None) -> ExperimentResult:
    """Train and evaluate every run of ``plan``.

    ``tracks`` are objects with ``isrc``, ``label`` and ``split``; the model only
    ever receives the training tracks of a run, so no test audio reaches any
    training stage.  A model is fitted once per distinct training set.
    """
    by_id = {t.isrc: t for t in tracks}
    runs = plan_runs(plan, tracks) if runs is None else runs
    for run in runs:
        check_leakage(run)
        missing = [i for i in run.train + run.test if i not in by_id]
        if missing:
            raise EvalError(f"{run.name}: unknown ISRC {missing[0]}")
    truth = {t.isrc: Label(t.label) for t in tracks}
    fitted: dict[tuple, Classifier] = {}
    reports, all_preds, all_truths = [], [], []
    for run in runs:
        model = fitted.get(run.train)
        if model is None:
            model = model_factory().fit([by_id[i] for i in run.train])
            fitted = {run.train: model}
        preds = model.predict([by_id[i] for i in run.test])
        all_preds.append(preds)
        all_truths.append([truth[p.isrc] for p in preds])
        reports.append(report_from_predictions(truth, preds, plan.positive_class))
    return ExperimentResult(name, plan, runs, reports, all_preds, all_truths)
