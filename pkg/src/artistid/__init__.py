"""Music artist classification from mel spectrograms with a from-scratch CRNN.

The package is organized as a pipeline:

- :mod:`artistid.ingest`: dataset scanning and WAV decoding
- :mod:`artistid.dsp`: STFT / mel spectrogram features and clip slicing
- :mod:`artistid.datasets`: song/album splits, label maps, batch streaming
- :mod:`artistid.nn`: differentiable layers, loss, Adam, gradient checking
- :mod:`artistid.crnn`: the convolutional-recurrent classifier and checkpoints
- :mod:`artistid.training`: training loop with early stopping
- :mod:`artistid.evaluation`: frame/song-level weighted-F1 reports, embeddings
- :mod:`artistid.synth`: synthetic desk-scale dataset generator
- :mod:`artistid.cli`: subcommands tying the pipeline together
"""

__version__ = "0.1.0"

from artistid.crnn import CrnnConfig, build_model, load_checkpoint, save_checkpoint
from artistid.datasets import LabelMap, SplitSpec, album_split, load_clips, song_split
from artistid.dsp import DspParams, MelSpectrogram, mel_spectrogram
from artistid.evaluation import export_embeddings, frame_eval, song_eval, weighted_f1
from artistid.ingest import DatasetManifest, TrackMeta, Waveform, decode_wav, scan_dataset
from artistid.training import TrainConfig, train

__all__ = [
    "CrnnConfig",
    "build_model",
    "load_checkpoint",
    "save_checkpoint",
    "LabelMap",
    "SplitSpec",
    "album_split",
    "load_clips",
    "song_split",
    "DspParams",
    "MelSpectrogram",
    "mel_spectrogram",
    "export_embeddings",
    "frame_eval",
    "song_eval",
    "weighted_f1",
    "DatasetManifest",
    "TrackMeta",
    "Waveform",
    "decode_wav",
    "scan_dataset",
    "TrainConfig",
    "train",
    "__version__",
]
