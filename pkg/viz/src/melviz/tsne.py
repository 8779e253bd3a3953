"""2-D t-SNE scatter of clip embeddings, colored by artist.

Well-trained bottleneck vectors form per-artist clusters; the silhouette
score of the projection (printed to stdout) turns that impression into a
number.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .tables import EmbeddingTable, read_embeddings


def project(table: EmbeddingTable, perplexity: float, seed: int) -> np.ndarray:
    """2-D t-SNE coordinates for the table rows. Same seed, same output."""
    if len(table) < 3 * perplexity:
        raise ValueError(
            f"need at least {int(3 * perplexity)} rows for perplexity {perplexity}, "
            f"got {len(table)}"
        )
    if np.ptp(table.vectors) == 0.0:
        raise ValueError("all embedding rows are identical; nothing to project")
    from sklearn.manifold import TSNE

    tsne = TSNE(n_components=2, perplexity=perplexity, init="pca",
                random_state=seed, learning_rate="auto")
    return tsne.fit_transform(table.vectors)


def silhouette(coords: np.ndarray, artists: list[str]) -> float:
    """Euclidean silhouette of the 2-D projection, grouped by artist."""
    if len(set(artists)) < 2:
        raise ValueError("need at least 2 distinct artists to score clustering")
    from sklearn.metrics import silhouette_score

    return float(silhouette_score(coords, artists, metric="euclidean"))


def tsne_scatter(embeddings_path, out_path, perplexity: float = 30.0,
                 seed: int = 0) -> float:
    """Write the scatter image and return the silhouette score."""
    table = read_embeddings(embeddings_path)
    coords = project(table, perplexity, seed)
    score = silhouette(coords, table.artists)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 6))
    for name in table.artist_names:
        rows = [i for i, a in enumerate(table.artists) if a == name]
        ax.scatter(coords[rows, 0], coords[rows, 1], s=18, label=name, alpha=0.8)
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"embedding t-SNE (perplexity {perplexity:g}, silhouette {score:.3f})")
    ax.set_xticks([])
    ax.set_yticks([])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    print(f"silhouette={score!r}")
    return score


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="melviz-tsne",
        description="t-SNE scatter plot of exported clip embeddings.",
    )
    parser.add_argument("embeddings", help="embeddings table written by the classifier")
    parser.add_argument("--out", default="tsne.png", help="output image path")
    parser.add_argument("--perplexity", type=float, default=30.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    try:
        tsne_scatter(args.embeddings, args.out, args.perplexity, args.seed)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
