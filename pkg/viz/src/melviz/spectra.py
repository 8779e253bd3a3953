"""Grid of dB mel-spectrogram panels, one per track, labeled by artist."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .tables import read_artists, read_mel_cache

# 3 s of audio at the classifier's default analysis rate (16 kHz, hop 512)
DEFAULT_CROP_FRAMES = 93


def grid_shape(n: int) -> tuple[int, int]:
    """Near-square layout, wider than tall: 20 panels -> 4 rows x 5 columns."""
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def spectrogram_grid(cache_dir, track_ids, out_path,
                     crop_frames: int = DEFAULT_CROP_FRAMES) -> Path:
    """Render one cropped panel per track id; returns the image path."""
    cache_dir = Path(cache_dir)
    if not track_ids:
        raise ValueError("no tracks given")
    artists = read_artists(cache_dir / "manifest.tsv")
    panels = []
    for track_id in track_ids:
        path = cache_dir / f"{track_id}.mels"
        if not path.exists():
            raise FileNotFoundError(f"no spectrogram cache for track {track_id}")
        values, _ = read_mel_cache(path)
        panels.append((track_id, values[:, :crop_frames]))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows, cols = grid_shape(len(panels))
    fig, axes = plt.subplots(rows, cols, figsize=(2.4 * cols, 2.0 * rows),
                             squeeze=False)
    for index, (track_id, values) in enumerate(panels):
        ax = axes[index // cols][index % cols]
        ax.imshow(values, aspect="auto", origin="lower", cmap="magma",
                  vmin=-100.0, vmax=values.max() if values.max() > -100.0 else 0.0)
        ax.set_title(artists.get(track_id, f"track {track_id}"), fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    for index in range(len(panels), rows * cols):
        axes[index // cols][index % cols].axis("off")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="melviz-grid",
        description="Grid figure of cached mel spectrograms.",
    )
    parser.add_argument("cache_dir", help="cache directory with manifest.tsv and .mels files")
    parser.add_argument("tracks", help="comma-separated track ids")
    parser.add_argument("--out", default="spectrograms.png", help="output image path")
    parser.add_argument("--frames", type=int, default=DEFAULT_CROP_FRAMES,
                        help="crop width in frames")
    args = parser.parse_args(argv)
    try:
        track_ids = [int(v) for v in args.tracks.split(",") if v.strip()]
        out = spectrogram_grid(args.cache_dir, track_ids, args.out, args.frames)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
