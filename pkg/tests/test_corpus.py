import hashlib

import numpy as np
import pytest
from scipy.io import wavfile

from sictag.corpus import (
    CorpusError,
    Label,
    Split,
    load_annotation,
    load_audio,
    load_manifest,
    write_manifest,
)
from sictag.synth import SynthConfig, generate_synthetic_corpus

HEADER = "isrc,label,split,audio_path,annotation_path\n"


def write(path, text):
    path.write_text(text)
    return path


def test_manifest_empty_annotation_and_case_insensitive_label(tmp_path):
    m = load_manifest(write(tmp_path / "m.csv", HEADER
                            + "FRZ039800212,Instrumental,test,a.wav,\n"
                            + "FRZ039800213,song,train,b.wav,b.txt\n"))
    inst, song = m.records
    assert inst.annotation_path is None
    assert inst.label is Label.INSTRUMENTAL and inst.split is Split.TEST
    assert song.label is Label.SONG
    assert str(song.annotation_path) == "b.txt"
    assert m.resolve(song.audio_path) == tmp_path / "b.wav"


def test_manifest_duplicate_isrc_names_it(tmp_path):
    path = write(tmp_path / "m.csv", HEADER
                 + "FRZ039800212,Song,train,a.wav,\n"
                 + "FRZ039800212,Song,train,b.wav,\n")
    with pytest.raises(CorpusError, match="FRZ039800212"):
        load_manifest(path)


@pytest.mark.parametrize("row, message", [
    ("FRZ039800212,Vocal,train,a.wav,", "unknown label"),
    ("FRZ0398,Song,train,a.wav,", "malformed ISRC"),
    ("FRZ039800212,Song,train,a.wav", "expected 5 fields"),
])
def test_manifest_bad_rows_report_row_number(tmp_path, row, message):
    path = write(tmp_path / "m.csv", HEADER + row + "\n")
    with pytest.raises(CorpusError, match=f"row 2.*{message}"):
        load_manifest(path)


def test_manifest_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_manifest(tmp_path / "nope.csv")


def test_manifest_round_trip(tmp_path):
    src = load_manifest(write(tmp_path / "m.csv", HEADER
                              + "FRZ039800212,Instrumental,test,a.wav,\n"
                              + "GBAYE0000351,Song,train,sub/b.wav,ann/b.txt\n"))
    write_manifest(src, tmp_path / "again.csv")
    again = load_manifest(tmp_path / "again.csv")
    assert again.records == src.records


def test_annotation_parsing(tmp_path):
    ann = load_annotation(write(tmp_path / "a.txt", "3.0 4.5\n1.0 2.0\n"))
    assert ann.intervals == ((1.0, 2.0), (3.0, 4.5))
    assert load_annotation(write(tmp_path / "e.txt", "")).intervals == ()


@pytest.mark.parametrize("text", ["1.0 2.0\n1.5 3.0\n", "2.0 1.0\n", "1.0 x\n"])
def test_annotation_errors(tmp_path, text):
    with pytest.raises(CorpusError):
        load_annotation(write(tmp_path / "a.txt", text))


def test_stereo_16bit_is_mixed_and_scaled(tmp_path):
    data = np.full((1000, 2), 16384, dtype=np.int16)
    wavfile.write(tmp_path / "s.wav", 22050, data)
    clip = load_audio(tmp_path / "s.wav", 22050)
    assert clip.sample_rate_hz == 22050
    np.testing.assert_allclose(clip.samples, 0.5, atol=1e-4)


@pytest.mark.parametrize("dtype, scale", [
    (np.uint8, None), (np.int16, 32767), (np.int32, 2**31 - 1), (np.float32, 1.0),
])
def test_encodings_decode_to_unit_range(tmp_path, dtype, scale):
    x = 0.5 * np.sin(np.linspace(0, 20, 4000))
    if dtype is np.uint8:
        data = np.round(x * 127 + 128).astype(np.uint8)
    else:
        data = (x * scale).astype(dtype)
    wavfile.write(tmp_path / "x.wav", 22050, data)
    clip = load_audio(tmp_path / "x.wav", 22050)
    np.testing.assert_allclose(clip.samples, x, atol=1e-2)


def test_identity_resample_keeps_samples(tmp_path):
    data = (np.random.default_rng(0).uniform(-0.5, 0.5, 5000) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "x.wav", 22050, data)
    clip = load_audio(tmp_path / "x.wav", 22050)
    np.testing.assert_array_equal(clip.samples, data / 32768.0)


def test_resampled_sine_keeps_its_peak(tmp_path):
    sr = 44100
    t = np.arange(sr) / sr
    wavfile.write(tmp_path / "a.wav", sr, (0.8 * np.sin(2 * np.pi * 440 * t)).astype(np.float32))
    clip = load_audio(tmp_path / "a.wav", 22050)
    # duration preserved within one output sample
    assert abs(clip.samples.size / 22050 - 1.0) <= 1 / 22050
    spectrum = np.abs(np.fft.rfft(clip.samples))
    freqs = np.fft.rfftfreq(clip.samples.size, 1 / 22050)
    bin_hz = freqs[1]
    assert abs(freqs[np.argmax(spectrum)] - 440) <= bin_hz


def test_zero_length_and_garbage_audio(tmp_path):
    wavfile.write(tmp_path / "z.wav", 22050, np.zeros(0, dtype=np.int16))
    with pytest.raises(CorpusError):
        load_audio(tmp_path / "z.wav")
    (tmp_path / "g.wav").write_bytes(b"RIFF\x00\x00")
    with pytest.raises(CorpusError):
        load_audio(tmp_path / "g.wav")


def test_synthetic_corpus_instrumental_only(tmp_path):
    m = generate_synthetic_corpus(SynthConfig(n_songs=0, n_instrumentals=1, duration_s=5), tmp_path)
    assert len(m.records) == 1
    assert m.records[0].annotation_path is None
    assert not any((tmp_path / "annotations").iterdir())


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_synthetic_corpus_is_deterministic(tmp_path):
    cfg = SynthConfig(n_songs=2, n_instrumentals=2, duration_s=5, seed=7)
    generate_synthetic_corpus(cfg, tmp_path / "a")
    generate_synthetic_corpus(cfg, tmp_path / "b")
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")


def test_synthetic_songs_voiced_fraction(tmp_path):
    cfg = SynthConfig(n_songs=5, n_instrumentals=1, duration_s=6, seed=3)
    m = generate_synthetic_corpus(cfg, tmp_path)
    m = load_manifest(tmp_path / "manifest.csv")
    songs = [r for r in m.records if r.label is Label.SONG]
    assert len(songs) == 5
    for rec in songs:
        ann = load_annotation(m.resolve(rec.annotation_path))
        assert len(ann.intervals) >= 1
        total = sum(e - s for s, e in ann.intervals)
        assert 0.3 * cfg.duration_s <= total <= 0.7 * cfg.duration_s
        assert ann.intervals[-1][1] <= cfg.duration_s
    assert all(r.isrc.startswith("ZZSYN") for r in m.records)


def test_synthetic_rejects_short_duration(tmp_path):
    with pytest.raises(CorpusError):
        generate_synthetic_corpus(SynthConfig(duration_s=2), tmp_path)
