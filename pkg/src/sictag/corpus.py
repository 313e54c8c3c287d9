"""Track records, manifests, annotations and audio loading."""

from __future__ import annotations

import csv
import enum
import os
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

CANONICAL_RATE = 22050
MANIFEST_HEADER = ["isrc", "label", "split", "audio_path", "annotation_path"]
ISRC_PATTERN = re.compile(r"^[A-Z]{2}[A-Z0-9]{3}[0-9]{2}[0-9]{5}$")


class CorpusError(ValueError):
    pass


class Label(str, enum.Enum):
    SONG = "Song"
    INSTRUMENTAL = "Instrumental"

    @classmethod
    def parse(cls, text: str) -> "Label":
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise CorpusError(f"unknown label {text!r}")

    @property
    def sign(self) -> int:
        """+1 for Instrumental, -1 for Song (the margin convention)."""
        return 1 if self is Label.INSTRUMENTAL else -1


class Split(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise CorpusError("sample rate must be positive")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise CorpusError("audio clip must be non-empty mono")
        if not np.all(np.isfinite(self.samples)):
            raise CorpusError("audio clip contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class VocalActivityAnnotation:
    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        prev_end = None
        for start, end in self.intervals:
            if not (0 <= start < end):
                raise CorpusError(f"inverted or negative interval ({start}, {end})")
            if prev_end is not None and start < prev_end:
                raise CorpusError(f"overlapping intervals near {start}")
            prev_end = end

    @property
    def voiced_duration(self) -> float:
        return sum(end - start for start, end in self.intervals)


@dataclass(frozen=True)
class TrackRecord:
    isrc: str
    label: Label
    split: Split
    audio_path: Path
    annotation_path: Path | None = None

    def __post_init__(self):
        if not ISRC_PATTERN.match(self.isrc):
            raise CorpusError(f"malformed ISRC {self.isrc!r}")


@dataclass
class CorpusManifest:
    records: list[TrackRecord] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.isrc in seen:
                raise CorpusError(f"duplicate ISRC {rec.isrc}")
            seen.add(rec.isrc)

    def split(self, which: Split | str) -> list[TrackRecord]:
        which = Split(which)
        return [r for r in self.records if r.split is which]

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.root / path


def load_manifest(path: str | os.PathLike) -> CorpusManifest:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest not found: {path}")
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise CorpusError(f"row 1: header must be {','.join(MANIFEST_HEADER)}")
        seen: set[str] = set()
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise CorpusError(f"row {rownum}: expected 5 fields, got {len(row)}")
            isrc, label, split, audio, ann = (c.strip() for c in row)
            try:
                rec = TrackRecord(
                    isrc=isrc,
                    label=Label.parse(label),
                    split=Split(split.lower()),
                    audio_path=Path(audio),
                    annotation_path=Path(ann) if ann else None,
                )
            except ValueError as exc:
                raise CorpusError(f"row {rownum}: {exc}") from None
            if isrc in seen:
                raise CorpusError(f"row {rownum}: duplicate ISRC {isrc}")
            seen.add(isrc)
            records.append(rec)
    return CorpusManifest(records=records, root=path.parent)


def write_manifest(manifest: CorpusManifest, path: str | os.PathLike) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            writer.writerow([
                r.isrc,
                r.label.value,
                r.split.value,
                r.audio_path.as_posix(),
                r.annotation_path.as_posix() if r.annotation_path else "",
            ])


def load_annotation(path: str | os.PathLike) -> VocalActivityAnnotation:
    intervals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 'start end'")
            try:
                start, end = float(parts[0]), float(parts[1])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-numeric field") from None
            intervals.append((start, end))
    intervals.sort()
    return VocalActivityAnnotation(tuple(intervals))


def write_annotation(ann: VocalActivityAnnotation, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        for start, end in ann.intervals:
            fh.write(f"{start:.6f} {end:.6f}\n")


def _to_float(data: np.ndarray) -> np.ndarray:
    kind, size = data.dtype.kind, data.dtype.itemsize
    if kind == "f":
        return data.astype(np.float64)
    if kind == "u" and size == 1:
        return (data.astype(np.float64) - 128.0) / 128.0
    if kind == "i" and size in (2, 4):
        # scipy left-justifies 24-bit PCM into int32
        return data.astype(np.float64) / float(2 ** (8 * size - 1))
    raise CorpusError(f"unsupported WAV sample type {data.dtype}")


def resample_linear(x: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Linear-interpolation resampler; output keeps the input duration."""
    if src_rate == dst_rate:
        return x
    n_out = max(1, int(round(x.size * dst_rate / src_rate)))
    t_out = np.arange(n_out) * (src_rate / dst_rate)
    return np.interp(t_out, np.arange(x.size), x)


def load_audio(path: str | os.PathLike, target_rate_hz: int = CANONICAL_RATE) -> AudioClip:
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, struct.error) as exc:
        raise CorpusError(f"{path}: cannot decode WAV ({exc})") from None
    if data.ndim == 2:
        if data.shape[1] not in (1, 2):
            raise CorpusError(f"{path}: {data.shape[1]} channels unsupported")
        x = _to_float(data).mean(axis=1)
    else:
        x = _to_float(data)
    if x.size == 0:
        raise CorpusError(f"{path}: zero-length audio")
    x = np.clip(resample_linear(x, rate, target_rate_hz), -1.0, 1.0)
    return AudioClip(x, target_rate_hz)


def write_wav(path: str | os.PathLike, samples: np.ndarray, rate: int = CANONICAL_RATE) -> None:
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767).astype("<i2")
    wavfile.write(path, rate, pcm)
