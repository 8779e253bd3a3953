"""
A complete training run in about a minute
=========================================

Synthesizes a small three-artist corpus, extracts features, trains a
reduced network, and scores the held-out songs at both evaluation levels.
The full-size configuration is the same code with bigger numbers.
"""

import tempfile
from pathlib import Path

from artistid.crnn import CrnnConfig, build_model
from artistid.datasets import load_clips, song_split
from artistid.dsp import DspParams, cache_path, clip_frame_count, mel_spectrogram, save_mel_cache
from artistid.evaluation import frame_eval, song_eval
from artistid.ingest import decode_wav, save_manifest, scan_dataset
from artistid.synth import synth_dataset
from artistid.training import TrainConfig, train

base = Path(tempfile.mkdtemp(prefix="artistid_demo_"))
n_songs = synth_dataset(base / "dataset", n_artists=3, songs_per_artist=6,
                        duration_seconds=6.0, seed=0)
print(f"synthesized {n_songs} songs under {base / 'dataset'}")

params = DspParams(n_mels=32)
manifest = scan_dataset(base / "dataset")
cache = base / "cache"
cache.mkdir()
save_manifest(manifest, cache / "manifest.tsv")
for track in manifest.tracks:
    spec = mel_spectrogram(decode_wav(track.path), params, track_id=track.track_id)
    save_mel_cache(spec, cache_path(cache, track.track_id))
print(f"cached {len(manifest.tracks)} spectrograms")

split = song_split(manifest, seed=0)
clip_seconds = 1.0
config = CrnnConfig(n_mels=32, n_classes=3, conv_channels=(8, 8, 8),
                    pools=((4, 2), (4, 2), (2, 2)), gru_units=(16, 16))
model = build_model(config, seed=0, clip_frames=clip_frame_count(params, clip_seconds))

train_clips = load_clips(manifest, split.train, cache, params, clip_seconds)
val_clips = load_clips(manifest, split.val, cache, params, clip_seconds)
print(f"training on {len(train_clips)} clips, validating on {len(val_clips)}")

cfg = TrainConfig(clip_seconds=clip_seconds, seed=0, lr=1e-3, batch_size=8,
                  max_epochs=20, patience=5)
checkpoint, history = train(model, train_clips, val_clips, cfg)
for s in history:
    print(f"  epoch {s.epoch:2d}: train {s.train_loss:.4f}  val {s.val_loss:.4f}  "
          f"val F1 {s.val_f1:.3f}  ({s.seconds:.1f}s)")
print(f"kept weights from epoch {checkpoint.metadata['epoch']}")

test_clips = load_clips(manifest, split.test, cache, params, clip_seconds)
frame = frame_eval(model, test_clips)
song = song_eval(model, test_clips)
print(f"\nheld-out frame-level weighted F1: {frame.weighted_f1:.4f}")
print(f"held-out song-level weighted F1:  {song.weighted_f1:.4f}")
print("\nfull report:")
print(song.render())
