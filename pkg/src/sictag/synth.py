"""Seeded synthetic Song / Instrumental corpus.

Instrumentals are a bed of 3-6 steady harmonic tones with slow amplitude
envelopes plus low-passed noise.  Songs add a vibrato "voice" whose partials are
shaped by vowel formants that change every syllable; it is switched on over
random intervals covering 30-70% of the track.  Everything is derived from
one seed, so two runs with the same config produce byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import lfilter

from .corpus import (
    CANONICAL_RATE,
    CorpusError,
    CorpusManifest,
    Label,
    Split,
    TrackRecord,
    VocalActivityAnnotation,
    write_annotation,
    write_manifest,
    write_wav,
)
from .seeding import rng_for

# (F1, F2, F3) in Hz for a, e, i, o, u
VOWELS_HZ = np.array([
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
])
FORMANT_BW_HZ = np.array([100.0, 150.0, 200.0])
FADE_S = 0.02


@dataclass(frozen=True)
class SynthConfig:
    n_songs: int = 30
    n_instrumentals: int = 30
    duration_s: float = 8.0
    seed: int = 0
    n_test_songs: int = 0
    n_test_instrumentals: int = 0
    # voice level relative to the bed, in dB of RMS ratio while active
    voice_snr_db: float = 0.0
    noise_level: float = 0.05

    def validate(self):
        counts = (self.n_songs, self.n_instrumentals, self.n_test_songs, self.n_test_instrumentals)
        if min(counts) < 0:
            raise CorpusError("track counts must be >= 0")
        if self.duration_s < 5:
            raise CorpusError("duration must be at least 5 s")


def _harmonics(phase, n_partials):
    """sin(k * phase) for k = 1..n via the Chebyshev recurrence (one sin/cos call)."""
    s1 = np.sin(phase)
    two_cos = 2.0 * np.cos(phase)
    prev, cur = np.zeros_like(phase), s1
    for _ in range(n_partials):
        yield cur
        prev, cur = cur, two_cos * cur - prev


def _tone(rng, t, f0, n_partials, rolloff):
    phase = 2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi)
    n_partials = min(n_partials, int(CANONICAL_RATE * 0.95 / 2 // f0))
    out = np.zeros_like(t)
    for k, h in enumerate(_harmonics(phase, n_partials), start=1):
        out += h / k**rolloff
    return out


def _bed(rng, n, cfg: SynthConfig):
    t = np.arange(n) / CANONICAL_RATE
    bed = np.zeros(n)
    for _ in range(rng.integers(3, 7)):
        f0 = 55.0 * 2 ** rng.uniform(0, 4)
        tone = _tone(rng, t, f0, int(rng.integers(2, 7)), rng.uniform(0.8, 2.0))
        env_rate = rng.uniform(0.05, 0.4)
        env = 1.0 + 0.5 * np.sin(2 * np.pi * env_rate * t + rng.uniform(0, 2 * np.pi))
        bed += rng.uniform(0.3, 1.0) * env * tone
    bed /= np.sqrt(np.mean(bed**2)) + 1e-12
    alpha = rng.uniform(0.5, 0.95)
    noise = lfilter([1 - alpha], [1, -alpha], rng.standard_normal(n))
    noise /= np.sqrt(np.mean(noise**2)) + 1e-12
    return bed + cfg.noise_level * rng.uniform(0.5, 2.0) * noise


def _voice_intervals(rng, duration):
    frac = rng.uniform(0.31, 0.69)
    n_seg = int(rng.integers(2, 6))
    segs = rng.dirichlet(np.ones(n_seg)) * frac * duration
    gaps = rng.dirichlet(np.ones(n_seg + 1)) * (1 - frac) * duration
    intervals, pos = [], 0.0
    for seg, gap in zip(segs, gaps):
        start = round(pos + gap, 6)
        end = round(start + seg, 6)
        intervals.append((start, end))
        pos = end
    return VocalActivityAnnotation(tuple(intervals))


def _syllables(rng, n):
    """Per-sample vowel index and syllabic amplitude envelope."""
    bounds = [0]
    while bounds[-1] < n:
        bounds.append(bounds[-1] + int(rng.uniform(0.12, 0.35) * CANONICAL_RATE))
    bounds[-1] = n
    lengths = np.diff(bounds)
    vowel = np.repeat(rng.integers(0, len(VOWELS_HZ), size=lengths.size), lengths)
    env = np.concatenate([
        rng.uniform(0.6, 1.0) * (0.35 + 0.65 * np.sin(np.pi * (np.arange(m) + 0.5) / m))
        for m in lengths
    ])
    return vowel, env


def _voice(rng, n, ann: VocalActivityAnnotation):
    t = np.arange(n) / CANONICAL_RATE
    f0 = rng.uniform(150.0, 450.0)
    rate = rng.uniform(5.0, 7.0)
    # +-30 cents vibrato
    inst_f = f0 * 2 ** ((30.0 / 1200.0) * np.sin(2 * np.pi * rate * t))
    phase = 2 * np.pi * np.cumsum(inst_f) / CANONICAL_RATE
    formants = VOWELS_HZ * rng.uniform(0.9, 1.1)
    vowel, env = _syllables(rng, n)
    # 30 ms cross-fade between consecutive vowels
    weights = uniform_filter1d(np.eye(len(VOWELS_HZ))[vowel].T, int(0.03 * CANONICAL_RATE), axis=1)
    voice = np.zeros(n)
    for k, h in enumerate(_harmonics(phase, int(4000.0 // f0)), start=1):
        gains = 0.05 + np.exp(-0.5 * ((k * f0 - formants) / FORMANT_BW_HZ) ** 2).sum(axis=1)
        voice += (gains @ weights) / np.sqrt(k) * h
    voice *= env
    gate = np.zeros(n)
    fade = int(FADE_S * CANONICAL_RATE)
    for start, end in ann.intervals:
        a = int(round(start * CANONICAL_RATE))
        b = min(n, int(round(end * CANONICAL_RATE)))
        gate[a:b] = 1.0
        ramp = min(fade, (b - a) // 2)
        if ramp > 0:
            gate[a:a + ramp] = np.linspace(0, 1, ramp)
            gate[b - ramp:b] = np.linspace(1, 0, ramp)
    active = voice[gate > 0]
    voice /= np.sqrt(np.mean(active**2)) + 1e-12 if active.size else 1.0
    return voice * gate


def synthesize_track(cfg: SynthConfig, index: int, label: Label):
    """Return (samples, annotation-or-None) for one synthetic track."""
    rng = rng_for(cfg.seed, f"synth-track:{index}")
    n = int(round(cfg.duration_s * CANONICAL_RATE))
    x = _bed(rng, n, cfg)
    ann = None
    if label is Label.SONG:
        ann = _voice_intervals(rng, cfg.duration_s)
        x = x + 10 ** (cfg.voice_snr_db / 20.0) * _voice(rng, n, ann)
    x *= rng.uniform(0.3, 0.9) / (np.max(np.abs(x)) + 1e-12)
    return x, ann


def synthetic_isrc(index: int) -> str:
    return f"ZZSYN{index:07d}"


def generate_synthetic_corpus(cfg: SynthConfig, out_dir: str | os.PathLike) -> CorpusManifest:
    cfg.validate()
    out = Path(out_dir)
    try:
        (out / "audio").mkdir(parents=True, exist_ok=True)
        (out / "annotations").mkdir(exist_ok=True)
    except OSError as exc:
        raise CorpusError(f"cannot write to {out}: {exc}") from None

    plan = (
        [(Label.SONG, Split.TRAIN)] * cfg.n_songs
        + [(Label.INSTRUMENTAL, Split.TRAIN)] * cfg.n_instrumentals
        + [(Label.SONG, Split.TEST)] * cfg.n_test_songs
        + [(Label.INSTRUMENTAL, Split.TEST)] * cfg.n_test_instrumentals
    )
    records = []
    for index, (label, split) in enumerate(plan):
        isrc = synthetic_isrc(index)
        samples, ann = synthesize_track(cfg, index, label)
        audio_rel = Path("audio") / f"{isrc}.wav"
        write_wav(out / audio_rel, samples)
        ann_rel = None
        if ann is not None:
            ann_rel = Path("annotations") / f"{isrc}.txt"
            write_annotation(ann, out / ann_rel)
        records.append(TrackRecord(isrc, label, split, audio_rel, ann_rel))
    manifest = CorpusManifest(records=records, root=out)
    write_manifest(manifest, out / "manifest.csv")
    return manifest
