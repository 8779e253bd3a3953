"""Train/validation/test splits, label encoding, and clip batch streaming.

Two split protocols are supported. The song split is stratified per artist:
one tenth of each artist's songs (rounded up) is held out for test, then one
tenth of the remainder for validation. The album split removes two whole
albums per artist, one for test and one for validation, so no album ever
contributes tracks to more than one subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from artistid.dsp import DspParams, cache_path, load_mel_cache, slice_clips
from artistid.ingest import DatasetManifest


def _ceil_tenth(n: int) -> int:
    return -(-n // 10)


class LabelMap:
    """Bijection between artist names and contiguous 0-based class indices."""

    def __init__(self, artists: list[str]):
        self.artists = sorted(artists)
        self._index = {a: i for i, a in enumerate(self.artists)}

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "LabelMap":
        return cls(manifest.artists)

    @property
    def n_classes(self) -> int:
        return len(self.artists)

    def index_of(self, artist: str) -> int:
        return self._index[artist]

    def artist_of(self, index: int) -> str:
        return self.artists[index]


@dataclass
class SplitSpec:
    mode: str  # "song" or "album"
    seed: int
    train: list[int]
    val: list[int]
    test: list[int]

    def subset(self, name: str) -> list[int]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown subset {name!r}")
        return getattr(self, name)


def _tracks_by_artist(manifest: DatasetManifest) -> dict[str, list]:
    groups: dict[str, list] = {}
    for t in sorted(manifest.tracks, key=lambda t: t.track_id):
        groups.setdefault(t.artist, []).append(t)
    return groups


def song_split(manifest: DatasetManifest, seed: int) -> SplitSpec:
    """Stratified-by-artist 90/10 test split, then 90/10 validation split.

    Per artist, ceil(10%) of its songs go to test; of the remainder,
    ceil(10%) go to validation; the rest train. Selection is by seeded
    shuffle within each artist, so the same manifest and seed always
    produce the same split.
    """
    rng = np.random.default_rng(seed)
    groups = _tracks_by_artist(manifest)
    train, val, test = [], [], []
    for artist in manifest.artists:
        ids = [t.track_id for t in groups[artist]]
        if len(ids) < 3:
            raise ValueError(f"artist {artist!r} has only {len(ids)} songs; need >= 3")
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        n_test = _ceil_tenth(len(ids))
        n_val = _ceil_tenth(len(ids) - n_test)
        test += shuffled[:n_test]
        val += shuffled[n_test : n_test + n_val]
        train += shuffled[n_test + n_val :]
    return SplitSpec(mode="song", seed=seed, train=sorted(train), val=sorted(val), test=sorted(test))


def album_split(manifest: DatasetManifest, seed: int) -> SplitSpec:
    """Whole-album split: per artist one random album to test, one to validation.

    All remaining albums train. Guarantees no album spans two subsets, which
    is the stricter protocol (production traits cannot leak across splits).
    """
    rng = np.random.default_rng(seed)
    groups = _tracks_by_artist(manifest)
    train, val, test = [], [], []
    for artist in manifest.artists:
        tracks = groups[artist]
        albums = sorted({t.album for t in tracks})
        if len(albums) < 3:
            raise ValueError(f"artist {artist!r} has only {len(albums)} albums; need >= 3")
        order = rng.permutation(len(albums))
        test_album, val_album = albums[order[0]], albums[order[1]]
        for t in tracks:
            if t.album == test_album:
                test.append(t.track_id)
            elif t.album == val_album:
                val.append(t.track_id)
            else:
                train.append(t.track_id)
    return SplitSpec(mode="album", seed=seed, train=sorted(train), val=sorted(val), test=sorted(test))


def save_split(split: SplitSpec, path: str | Path) -> None:
    """Write a split as a key/value document (track id lists are sorted)."""
    lines = [
        f"mode={split.mode}",
        f"seed={split.seed}",
        "train=" + ",".join(str(i) for i in sorted(split.train)),
        "val=" + ",".join(str(i) for i in sorted(split.val)),
        "test=" + ",".join(str(i) for i in sorted(split.test)),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(path: str | Path) -> SplitSpec:
    fields = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        fields[key] = value
    try:
        ids = {
            k: [int(i) for i in fields[k].split(",") if i] for k in ("train", "val", "test")
        }
        return SplitSpec(mode=fields["mode"], seed=int(fields["seed"]), **ids)
    except KeyError as e:
        raise ValueError(f"{path}: missing split field {e}") from e


@dataclass
class Batch:
    inputs: np.ndarray  # (batch, 1, n_mels, clip_frames) float32
    labels: np.ndarray  # (batch,) class indices
    provenance: list[tuple[int, int]]  # (track_id, clip_index) per row


@dataclass
class ClipSet:
    """All clips of a track list, loaded into memory with labels attached."""

    inputs: np.ndarray
    labels: np.ndarray
    provenance: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)


def load_clips(
    manifest: DatasetManifest,
    track_ids: list[int],
    cache_dir: str | Path,
    params: DspParams,
    clip_seconds: float,
) -> ClipSet:
    """Load cached spectrograms for a track list and slice them into clips.

    Clip order is (sorted track_id, ascending clip index). A missing cache
    file is an error naming the track id.
    """
    label_map = LabelMap.from_manifest(manifest)
    meta = {t.track_id: t for t in manifest.tracks}
    inputs, labels, provenance = [], [], []
    for track_id in sorted(track_ids):
        path = cache_path(cache_dir, track_id)
        if not path.exists():
            raise FileNotFoundError(f"no spectrogram cache for track_id {track_id} in {cache_dir}")
        spec = load_mel_cache(path, params)
        label = label_map.index_of(meta[track_id].artist)
        for clip_index, clip in enumerate(slice_clips(spec, clip_seconds)):
            inputs.append(clip.astype(np.float32)[None, :, :])
            labels.append(label)
            provenance.append((track_id, clip_index))
    if inputs:
        stacked = np.stack(inputs)
    else:
        frames = int(clip_seconds * params.sample_rate / params.hop)
        stacked = np.zeros((0, 1, params.n_mels, frames), dtype=np.float32)
    return ClipSet(inputs=stacked, labels=np.asarray(labels, dtype=np.int64), provenance=provenance)


def iter_batches(clips: ClipSet, batch_size: int, seed=0, shuffle: bool = False):
    """Yield fixed-size batches (plus a final short one) from a clip set."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(clips))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(clips))
    for start in range(0, len(clips), batch_size):
        rows = order[start : start + batch_size]
        yield Batch(
            inputs=clips.inputs[rows],
            labels=clips.labels[rows],
            provenance=[clips.provenance[i] for i in rows],
        )


def make_batches(
    manifest: DatasetManifest,
    track_ids: list[int],
    cache_dir: str | Path,
    params: DspParams,
    clip_seconds: float,
    batch_size: int,
    seed: int = 0,
    shuffle: bool = False,
):
    """Load caches for a split list and stream shuffled clip batches."""
    clips = load_clips(manifest, track_ids, cache_dir, params, clip_seconds)
    yield from iter_batches(clips, batch_size, seed=seed, shuffle=shuffle)
