"""Readers for the classifier's output files.

These parse the documented text and binary formats directly so the plotting
package stays decoupled from the classifier's internals: the embeddings TSV,
the "MELS" spectrogram cache, and the manifest TSV.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MEL_CACHE_MAGIC = b"MELS"
MEL_CACHE_VERSION = 1


@dataclass(frozen=True)
class EmbeddingTable:
    track_ids: np.ndarray
    artists: list[str]
    clip_indices: np.ndarray
    vectors: np.ndarray  # (rows, width)

    def __len__(self) -> int:
        return len(self.artists)

    @property
    def artist_names(self) -> list[str]:
        return sorted(set(self.artists))


def read_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse the export table: track_id, artist, clip_index, e0..eN."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split("\t")[:3] != ["track_id", "artist", "clip_index"]:
        raise ValueError(f"{path}: not an embeddings table")
    width = len(lines[0].split("\t")) - 3
    if width < 1:
        raise ValueError(f"{path}: no embedding columns")
    track_ids, artists, clip_indices, vectors = [], [], [], []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != width + 3:
            raise ValueError(f"{path}: row {number} has {len(parts) - 3} values, expected {width}")
        track_ids.append(int(parts[0]))
        artists.append(parts[1])
        clip_indices.append(int(parts[2]))
        vectors.append([float(v) for v in parts[3:]])
    if not vectors:
        raise ValueError(f"{path}: table has no rows")
    return EmbeddingTable(
        track_ids=np.array(track_ids),
        artists=artists,
        clip_indices=np.array(clip_indices),
        vectors=np.array(vectors, dtype=np.float64),
    )


def read_mel_cache(path: str | Path) -> tuple[np.ndarray, int]:
    """Spectrogram values (n_mels, n_frames) and source track id."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 17 or raw[:4] != MEL_CACHE_MAGIC:
        raise ValueError(f"{path}: not a mel cache file")
    version, n_mels, n_frames, track_id = struct.unpack_from("<BIII", raw, 4)
    if version != MEL_CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    values = np.frombuffer(raw, dtype="<f4", offset=17)
    if values.size != n_mels * n_frames:
        raise ValueError(f"{path}: truncated cache file")
    return values.reshape(n_mels, n_frames).astype(np.float64), track_id


def read_artists(manifest_path: str | Path) -> dict[int, str]:
    """track_id -> artist from the manifest table."""
    path = Path(manifest_path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split("\t") != ["track_id", "artist", "album", "title", "path"]:
        raise ValueError(f"{path}: not a manifest file")
    out = {}
    for line in lines[1:]:
        track_id, artist, _album, _title, _path = line.split("\t")
        out[int(track_id)] = artist
    return out
