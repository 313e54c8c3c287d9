"""Frame-level MFCC + delta features.

Every frame is Hann-windowed, turned into a power spectrum, pooled by a
triangular HTK-mel filterbank, log-compressed and passed through an
orthonormal DCT-II.  Coefficient 0 (overall log energy) is dropped, so the
13 kept coefficients are insensitive to the clip's gain.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import AudioClip

N_MFCC = 13
N_FEATURES = 3 * N_MFCC
CACHE_MAGIC = "sictag-feat/1"


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FrameSpec:
    frame_len: int = 2048
    hop: int = 1024

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise FeatureError("need 0 < hop <= frame_len")

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            return 0
        return (n_samples - self.frame_len) // self.hop + 1


@dataclass(frozen=True)
class MfccConfig:
    n_mels: int = 40
    n_coeffs: int = N_MFCC
    fmin_hz: float = 64.0
    fmax_hz: float | None = None
    log_floor: float = 1e-10

    def resolved_fmax(self, sample_rate: int) -> float:
        return sample_rate / 2 if self.fmax_hz is None else self.fmax_hz

    def validate(self, sample_rate: int):
        fmax = self.resolved_fmax(sample_rate)
        if not 0 <= self.fmin_hz < fmax <= sample_rate / 2:
            raise FeatureError("need 0 <= fmin < fmax <= Nyquist")
        if not 0 < self.n_coeffs < self.n_mels:
            raise FeatureError("need 0 < n_coeffs < n_mels")


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-frame [MFCC | delta | delta-delta] rows plus frame centre times."""

    values: np.ndarray
    frame_times_s: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@functools.lru_cache(maxsize=16)
def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters on the rfft bins, shape (n_mels, n_fft // 2 + 1)."""
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    # narrow low filters can fall between bins; give them the nearest bin
    for i in np.flatnonzero(fb.sum(axis=1) <= 0):
        fb[i, np.argmin(np.abs(freqs - centre[i, 0]))] = 1.0
    fb.setflags(write=False)
    return fb


@functools.lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k is the k-th cosine."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    basis[0] /= np.sqrt(2.0)
    basis.setflags(write=False)
    return basis


def frame_signal(x: np.ndarray, spec: FrameSpec) -> np.ndarray:
    n = spec.n_frames(x.size)
    if n < 1:
        raise FeatureError(
            f"clip of {x.size} samples is shorter than one {spec.frame_len}-sample frame"
        )
    return np.lib.stride_tricks.sliding_window_view(x, spec.frame_len)[:: spec.hop][:n]


def compute_mfcc(clip: AudioClip, spec: FrameSpec = FrameSpec(), cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    cfg.validate(clip.sample_rate_hz)
    frames = frame_signal(clip.samples, spec) * np.hanning(spec.frame_len + 1)[:-1]
    power = np.abs(np.fft.rfft(frames, n=spec.frame_len, axis=1)) ** 2
    fb = mel_filterbank(cfg.n_mels, spec.frame_len, clip.sample_rate_hz,
                        float(cfg.fmin_hz), float(cfg.resolved_fmax(clip.sample_rate_hz)))
    log_mel = np.log(np.maximum(power @ fb.T, cfg.log_floor))
    # rows 1.. of the DCT are orthogonal to constants; centring makes a flat
    # spectrum (silence, pure gain) give exact zeros instead of round-off
    log_mel -= log_mel.mean(axis=1, keepdims=True)
    ceps = log_mel @ dct_matrix(cfg.n_mels).T
    return ceps[:, 1:cfg.n_coeffs + 1]


def deltas(x: np.ndarray, window: int = 2) -> np.ndarray:
    """Symmetric-regression time derivative along axis 0, edges replicated."""
    n = x.shape[0]
    padded = np.concatenate([np.repeat(x[:1], window, 0), x, np.repeat(x[-1:], window, 0)])
    out = np.zeros_like(x, dtype=float)
    for k in range(1, window + 1):
        out += k * (padded[window + k:window + k + n] - padded[window - k:window - k + n])
    return out / (2 * sum(k * k for k in range(1, window + 1)))


def append_deltas(mfcc: np.ndarray, window: int = 2) -> np.ndarray:
    d1 = deltas(mfcc, window)
    return np.hstack([mfcc, d1, deltas(d1, window)])


def frame_times(n_frames: int, spec: FrameSpec, sample_rate: int) -> np.ndarray:
    return (np.arange(n_frames) * spec.hop + spec.frame_len / 2) / sample_rate


def extract_features(clip: AudioClip, spec: FrameSpec = FrameSpec(), cfg: MfccConfig = MfccConfig(),
                     delta_window: int = 2) -> FeatureMatrix:
    values = append_deltas(compute_mfcc(clip, spec, cfg), delta_window)
    return FeatureMatrix(values, frame_times(values.shape[0], spec, clip.sample_rate_hz))


def feature_config_hash(spec: FrameSpec, cfg: MfccConfig, sample_rate: int, delta_window: int = 2) -> str:
    doc = {"frame": asdict(spec), "mfcc": asdict(cfg), "rate": sample_rate, "delta_window": delta_window}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def cache_path(cache_dir: str | os.PathLike, isrc: str, suffix: str = ".feat") -> Path:
    return Path(cache_dir) / f"{isrc}{suffix}"


def save_features(path: str | os.PathLike, fm: FeatureMatrix, config_hash: str) -> None:
    """Write a `.feat` file: one JSON header line, then raw float64 rows."""
    header = {"magic": CACHE_MAGIC, "config_hash": config_hash,
              "rows": fm.values.shape[0], "cols": fm.values.shape[1]}
    tmp = Path(f"{path}.tmp")
    with open(tmp, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.ascontiguousarray(fm.frame_times_s, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fm.values, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_features(path: str | os.PathLike, config_hash: str | None = None) -> FeatureMatrix | None:
    """Read a cached matrix; None when absent, corrupt or produced by another config."""
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            body = fh.read()
    except (OSError, ValueError):
        return None
    if header.get("magic") != CACHE_MAGIC:
        return None
    if config_hash is not None and header.get("config_hash") != config_hash:
        return None
    rows, cols = header["rows"], header["cols"]
    data = np.frombuffer(body, dtype="<f8")
    if data.size != rows * (cols + 1):
        return None
    return FeatureMatrix(data[rows:].reshape(rows, cols).copy(), data[:rows].copy())


def read_feature_hash(path: str | os.PathLike) -> str | None:
    try:
        with open(path, "rb") as fh:
            return json.loads(fh.readline()).get("config_hash")
    except (OSError, ValueError):
        return None
