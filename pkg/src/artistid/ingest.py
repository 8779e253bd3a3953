"""Dataset scanning and PCM WAV decoding.

Audio enters the pipeline as a directory tree ``root/<artist>/<album>/<track>.wav``
holding mono or stereo PCM WAV files (16-bit integer or 32-bit IEEE float).
Artist identity comes from the directory structure only; no tag metadata is read.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

AUDIO_SUFFIX = ".wav"


class DecodeError(Exception):
    """Raised when a WAV file cannot be decoded."""


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class TrackMeta:
    artist: str
    album: str
    title: str
    path: str
    track_id: int


@dataclass
class DatasetManifest:
    """All tracks of a dataset plus the sorted list of distinct artists."""

    tracks: list[TrackMeta] = field(default_factory=list)

    @property
    def artists(self) -> list[str]:
        return sorted({t.artist for t in self.tracks})

    def by_id(self, track_id: int) -> TrackMeta:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise KeyError(f"no track with id {track_id}")


def scan_dataset(root: str | Path) -> DatasetManifest:
    """Scan ``root/<artist>/<album>/<track>.wav`` into a manifest.

    Track ids are assigned in sorted-path order, so two scans of the same
    tree always produce identical manifests. Files that are not ``.wav``
    (or sit at the wrong depth) are skipped; one warning reports the count.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")

    wav_paths = []
    n_skipped = 0
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root)
        if len(rel.parts) == 3 and path.suffix.lower() == AUDIO_SUFFIX:
            wav_paths.append(path)
        else:
            n_skipped += 1
    if n_skipped:
        log.warning("scan_dataset: skipped %d non-audio files under %s", n_skipped, root)

    tracks = []
    for track_id, path in enumerate(sorted(wav_paths, key=str)):
        artist, album = path.relative_to(root).parts[:2]
        tracks.append(
            TrackMeta(artist=artist, album=album, title=path.stem, path=str(path), track_id=track_id)
        )
    return DatasetManifest(tracks=tracks)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as a TSV table (one row per track, sorted by id)."""
    lines = ["track_id\tartist\talbum\ttitle\tpath"]
    for t in sorted(manifest.tracks, key=lambda t: t.track_id):
        lines.append(f"{t.track_id}\t{t.artist}\t{t.album}\t{t.title}\t{t.path}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split("\t") != ["track_id", "artist", "album", "title", "path"]:
        raise ValueError(f"not a manifest file: {path}")
    tracks = []
    for line in lines[1:]:
        tid, artist, album, title, p = line.split("\t")
        tracks.append(TrackMeta(artist=artist, album=album, title=title, path=p, track_id=int(tid)))
    ids = [t.track_id for t in tracks]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate track ids in manifest: {path}")
    return DatasetManifest(tracks=tracks)


def _parse_riff_chunks(raw: bytes, path) -> dict[bytes, bytes]:
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise DecodeError(f"{path}: not a RIFF/WAVE file")
    chunks = {}
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise DecodeError(f"{path}: truncated {cid!r} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size % 2)  # chunk bodies are padded to even length
    return chunks


def decode_wav(path: str | Path) -> Waveform:
    """Decode a PCM WAV file into a normalized mono waveform.

    16-bit samples map to ``s / 32768``; 32-bit float samples are clipped to
    [-1, 1]. Stereo is reduced to mono by the per-sample arithmetic mean.
    Anything that is not 16-bit integer / 32-bit float PCM (mono or stereo)
    raises :class:`DecodeError` naming the file.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DecodeError(f"{path}: {e}") from e

    chunks = _parse_riff_chunks(raw, path)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise DecodeError(f"{path}: missing fmt/data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise DecodeError(f"{path}: malformed fmt chunk")
    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if channels not in (1, 2):
        raise DecodeError(f"{path}: unsupported channel count {channels}")
    if sample_rate <= 0:
        raise DecodeError(f"{path}: invalid sample rate {sample_rate}")

    data = chunks[b"data"]
    if audio_format == 1 and bits == 16:
        ints = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = ints.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        floats = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = np.clip(floats.astype(np.float64), -1.0, 1.0)
    else:
        raise DecodeError(f"{path}: unsupported codec (format={audio_format}, bits={bits})")

    if channels == 2:
        samples = samples[: len(samples) - len(samples) % 2].reshape(-1, 2).mean(axis=1)
    return Waveform(samples=samples, sample_rate=sample_rate)


def write_wav(waveform: Waveform, path: str | Path) -> None:
    """Write a mono 16-bit PCM WAV file.

    Quantization rounds ``s * 32768`` to the nearest integer (clamped to the
    int16 range), so a decode round trip reproduces samples within half an LSB.
    """
    ints = np.clip(np.rint(waveform.samples * 32768.0), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    sr = waveform.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sr, sr * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(data))
    Path(path).write_bytes(header + data)


def resample(waveform: Waveform, target_sr: int) -> Waveform:
    """Linear-interpolation resampling to ``target_sr``.

    The identity when rates already match; output length is
    ``round(n * target / source)``. Intended as a safety net only;
    the working dataset is already at the target rate.
    """
    if target_sr <= 0:
        raise ValueError(f"target_sr must be positive, got {target_sr}")
    if target_sr == waveform.sample_rate:
        return Waveform(samples=waveform.samples.copy(), sample_rate=target_sr)
    n_in = len(waveform.samples)
    n_out = int(round(n_in * target_sr / waveform.sample_rate))
    positions = np.arange(n_out) * (waveform.sample_rate / target_sr)
    samples = np.interp(positions, np.arange(n_in), waveform.samples)
    return Waveform(samples=samples, sample_rate=target_sr)
