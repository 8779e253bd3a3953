"""
Mel spectrogram features from raw audio
=======================================

Renders one synthetic song, walks it through the feature pipeline, and
shows how the dB-scaled mel image responds to what is in the signal.
"""

import numpy as np

from artistid.dsp import DspParams, mel_scale, mel_spectrogram, slice_clips
from artistid.ingest import Waveform
from artistid.synth import artist_signature, render_song

params = DspParams()  # 16 kHz, 2048-point windows, hop 512, 128 mel bins
print(f"window {params.n_fft} samples, hop {params.hop}, {params.n_mels} mel bins")

# the mel scale compresses high frequencies: equal mel steps, growing Hz steps
for hz in (0.0, 700.0, 4000.0, 8000.0):
    print(f"  {hz:7.1f} Hz -> {mel_scale(hz):8.2f} mel")

signature = artist_signature(0)
print(f"\nsynthetic artist 0: fundamental {signature.fundamental_hz:.1f} Hz, "
      f"noise band around {signature.noise_center_hz:.0f} Hz")

samples = render_song(artist_index=0, song_index=0, duration_seconds=12.0,
                      sample_rate=params.sample_rate, seed=0)
spec = mel_spectrogram(Waveform(samples, params.sample_rate), params)
print(f"12 s of audio -> mel image {spec.values.shape} (bins x frames)")
print(f"dB range: {spec.values.min():.1f} to {spec.values.max():.1f}")

# 3-second training clips: disjoint windows, trailing partial frames dropped
clips = slice_clips(spec, clip_seconds=3.0)
print(f"sliced into {len(clips)} clips of {clips[0].shape[1]} frames each")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.imshow(spec.values, aspect="auto", origin="lower", cmap="magma")
    ax.set_xlabel("frame")
    ax.set_ylabel("mel bin")
    ax.set_title("synthetic song, dB mel spectrogram")
    fig.savefig("demo_mel.png", dpi=100, bbox_inches="tight")
    print("wrote demo_mel.png")
except ImportError:
    print("matplotlib not installed; skipping the picture")
