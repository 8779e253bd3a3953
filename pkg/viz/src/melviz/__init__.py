"""Figures from artist-classifier outputs.

`tables` parses the classifier's documented file formats, `tsne` projects
exported embeddings to a labeled 2-D scatter, and `spectra` renders grids
of cached mel spectrograms.
"""

from .spectra import spectrogram_grid
from .tables import EmbeddingTable, read_embeddings, read_mel_cache
from .tsne import tsne_scatter

__version__ = "0.1.0"

__all__ = [
    "EmbeddingTable",
    "read_embeddings",
    "read_mel_cache",
    "spectrogram_grid",
    "tsne_scatter",
]
