"""WAV decoding, resampling, and dataset scanning checks."""

import struct

import numpy as np
import pytest

from artistid.dsp import DspParams, stft_power
from artistid.ingest import (
    DecodeError,
    Waveform,
    decode_wav,
    load_manifest,
    resample,
    save_manifest,
    scan_dataset,
    write_wav,
)


def make_wav(data: bytes, channels: int = 1, sample_rate: int = 16000,
             bits: int = 16, audio_format: int = 1) -> bytes:
    """Assemble RIFF bytes from scratch, independent of the library encoder."""
    byte_rate = sample_rate * channels * bits // 8
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", audio_format, channels, sample_rate, byte_rate, block_align, bits)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def int16_data(values) -> bytes:
    return struct.pack(f"<{len(values)}h", *values)


class TestDecodeWav:
    def test_known_16bit_values(self, tmp_path):
        path = tmp_path / "a.wav"
        path.write_bytes(make_wav(int16_data([0, 16384, -16384, 32767, -32768])))
        wave = decode_wav(path)
        assert wave.sample_rate == 16000
        np.testing.assert_allclose(
            wave.samples, [0.0, 0.5, -0.5, 32767 / 32768, -1.0], atol=0.0)

    def test_stereo_averaged(self, tmp_path):
        # one stereo frame (0.5, -0.5) -> 0.0
        path = tmp_path / "s.wav"
        path.write_bytes(make_wav(int16_data([16384, -16384, 8192, 8192]), channels=2))
        wave = decode_wav(path)
        np.testing.assert_allclose(wave.samples, [0.0, 0.25], atol=0.0)

    def test_float32_format(self, tmp_path):
        path = tmp_path / "f.wav"
        data = struct.pack("<3f", 0.25, -0.125, 1.5)
        path.write_bytes(make_wav(data, bits=32, audio_format=3))
        wave = decode_wav(path)
        np.testing.assert_allclose(wave.samples, [0.25, -0.125, 1.0], atol=1e-7)

    def test_unsupported_codec_names_path(self, tmp_path):
        path = tmp_path / "mp3ish.wav"
        path.write_bytes(make_wav(b"\x00\x00", audio_format=85))
        with pytest.raises(DecodeError, match="mp3ish"):
            decode_wav(path)

    def test_not_riff(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(b"not audio at all")
        with pytest.raises(DecodeError):
            decode_wav(path)

    def test_truncated_data_chunk(self, tmp_path):
        path = tmp_path / "t.wav"
        raw = make_wav(int16_data([1] * 100))
        path.write_bytes(raw[: len(raw) - 50])
        with pytest.raises(DecodeError):
            decode_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DecodeError):
            decode_wav(tmp_path / "absent.wav")


class TestWriteWav:
    def test_round_trip_within_one_lsb(self, tmp_path):
        rng = np.random.default_rng(31)
        samples = rng.uniform(-0.99, 0.99, size=2000)
        path = tmp_path / "rt.wav"
        write_wav(Waveform(samples=samples, sample_rate=16000), path)
        decoded = decode_wav(path)
        assert decoded.sample_rate == 16000
        assert np.abs(decoded.samples - samples).max() <= 1.0 / 32768


class TestResample:
    def test_identity_same_rate(self):
        wave = Waveform(samples=np.random.default_rng(32).standard_normal(100), sample_rate=16000)
        out = resample(wave, 16000)
        np.testing.assert_array_equal(out.samples, wave.samples)
        assert out.samples is not wave.samples

    def test_constant_preserved(self):
        wave = Waveform(samples=np.full(1000, 0.3), sample_rate=44100)
        out = resample(wave, 16000)
        assert out.sample_rate == 16000
        assert len(out.samples) == round(1000 * 16000 / 44100)
        np.testing.assert_allclose(out.samples, 0.3, atol=1e-7)

    def test_tone_keeps_its_frequency(self):
        # 1 kHz cosine at 32 kHz, downsampled to 16 kHz: the dominant STFT
        # bin should still be 1 kHz = bin 128 at n_fft 2048
        t = np.arange(32000) / 32000.0
        wave = Waveform(samples=np.cos(2 * np.pi * 1000.0 * t), sample_rate=32000)
        out = resample(wave, 16000)
        power = stft_power(out, DspParams())
        interior = power[:, 2:-2]
        np.testing.assert_array_equal(interior.argmax(axis=0), np.full(interior.shape[1], 128))

    def test_bad_target(self):
        wave = Waveform(samples=np.zeros(10), sample_rate=16000)
        with pytest.raises(ValueError):
            resample(wave, 0)


def write_tone(path, n=64):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(make_wav(int16_data([0] * n)))


class TestScanDataset:
    def test_small_tree(self, tmp_path):
        for artist, album, title in [
            ("alpha", "a1", "t1"), ("alpha", "a1", "t2"),
            ("beta", "b1", "t1"), ("beta", "b1", "t2"),
        ]:
            write_tone(tmp_path / artist / album / f"{title}.wav")
        manifest = scan_dataset(tmp_path)
        assert len(manifest.tracks) == 4
        assert manifest.artists == ["alpha", "beta"]
        assert [t.track_id for t in manifest.tracks] == [0, 1, 2, 3]

    def test_empty_tree(self, tmp_path):
        manifest = scan_dataset(tmp_path)
        assert manifest.tracks == []
        assert manifest.artists == []

    def test_missing_root(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            scan_dataset(tmp_path / "nowhere")

    def test_non_audio_skipped_with_warning(self, tmp_path, caplog):
        write_tone(tmp_path / "a" / "b" / "t.wav")
        (tmp_path / "README.txt").write_text("notes")
        (tmp_path / "a" / "b" / "cover.jpg").write_bytes(b"img")
        (tmp_path / "a" / "stray.wav").write_bytes(b"wrong depth")
        with caplog.at_level("WARNING"):
            manifest = scan_dataset(tmp_path)
        assert len(manifest.tracks) == 1
        assert "skipped 3" in caplog.text

    def test_deterministic(self, tmp_path):
        for artist in ("x", "y"):
            for song in range(3):
                write_tone(tmp_path / artist / "al" / f"s{song}.wav")
        a = scan_dataset(tmp_path)
        b = scan_dataset(tmp_path)
        assert a.tracks == b.tracks


class TestManifestFile:
    def test_round_trip(self, tmp_path):
        write_tone(tmp_path / "art" / "alb" / "song.wav")
        manifest = scan_dataset(tmp_path)
        out = tmp_path / "manifest.tsv"
        save_manifest(manifest, out)
        loaded = load_manifest(out)
        assert loaded.tracks == manifest.tracks

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("definitely not a manifest\n")
        with pytest.raises(ValueError):
            load_manifest(path)

    def test_rejects_duplicate_ids(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text(
            "track_id\tartist\talbum\ttitle\tpath\n"
            "0\ta\tb\tc\tp1\n"
            "0\ta\tb\td\tp2\n"
        )
        with pytest.raises(ValueError):
            load_manifest(path)
