"""Synthetic tone corpus: distinct timbral signatures rendered to WAV trees.

Each artist gets a fixed fundamental, harmonic decay profile, and noise
band; each song perturbs them (detune, phases, slow amplitude wobble, fresh
noise) so clips vary while artists stay clearly separable. Output is the
artist/album/title.wav layout the dataset scanner expects.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Waveform, write_wav

N_HARMONICS = 8


@dataclass(frozen=True)
class ArtistSignature:
    fundamental_hz: float
    harmonic_decay: float
    noise_center_hz: float
    noise_width_hz: float


def artist_signature(index: int) -> ArtistSignature:
    return ArtistSignature(
        fundamental_hz=165.0 * 2.0 ** (index * 5.0 / 12.0),  # fourths apart
        harmonic_decay=0.6 + 0.45 * index,
        noise_center_hz=2500.0 + 900.0 * index,
        noise_width_hz=500.0,
    )


def _band_noise(rng: np.random.Generator, n: int, sample_rate: int,
                center: float, width: float) -> np.ndarray:
    noise = rng.standard_normal(n)
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    mask = (freqs >= center - width / 2) & (freqs <= center + width / 2)
    band = np.fft.irfft(spectrum * mask, n)
    scale = band.std()
    return band / scale if scale > 0 else band


def render_song(artist_index: int, song_index: int, duration_seconds: float,
                sample_rate: int, seed: int) -> np.ndarray:
    sig = artist_signature(artist_index)
    rng = np.random.default_rng((seed, artist_index, song_index))
    n = int(round(duration_seconds * sample_rate))
    t = np.arange(n) / sample_rate
    detune = 2.0 ** (rng.uniform(-0.5, 0.5) / 12.0)
    mix = np.zeros(n)
    for h in range(1, N_HARMONICS + 1):
        freq = sig.fundamental_hz * detune * h
        if freq >= sample_rate / 2:
            break
        amp = 1.0 / h**sig.harmonic_decay
        mix += amp * np.sin(2.0 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    mix += 0.15 * _band_noise(rng, n, sample_rate, sig.noise_center_hz, sig.noise_width_hz)
    wobble_rate = rng.uniform(0.1, 0.5)
    mix *= 1.0 + 0.2 * np.sin(2.0 * np.pi * wobble_rate * t + rng.uniform(0, 2 * np.pi))
    return 0.7 * mix / np.abs(mix).max()


def synth_dataset(root, n_artists: int = 4, songs_per_artist: int = 24,
                  albums_per_artist: int = 3, duration_seconds: float = 12.0,
                  sample_rate: int = 16000, seed: int = 0) -> int:
    """Render the corpus under `root`; returns the number of files written."""
    if n_artists < 2:
        raise ValueError(f"need at least 2 artists, got {n_artists}")
    if songs_per_artist < albums_per_artist:
        raise ValueError("each album needs at least one song")
    root = Path(root)
    count = 0
    for a in range(n_artists):
        for s in range(songs_per_artist):
            album = s % albums_per_artist
            path = root / f"artist_{a:02d}" / f"album_{album}" / f"song_{a:02d}_{s:02d}.wav"
            path.parent.mkdir(parents=True, exist_ok=True)
            samples = render_song(a, s, duration_seconds, sample_rate, seed)
            write_wav(Waveform(samples=samples, sample_rate=sample_rate), path)
            count += 1
    return count
