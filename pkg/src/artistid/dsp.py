"""Log-mel spectrogram features.

A waveform becomes a power STFT (periodic Hann window, center reflect
padding), is pooled through a triangular mel filterbank, and is dB-scaled
against a reference power. Spectrograms are sliced into fixed-length clips
for the classifier and cached in a small binary format, one file per track.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from artistid.ingest import Waveform

log = logging.getLogger(__name__)

DB_FLOOR = 1e-10  # −100 dB at unit reference; keeps silence finite

MEL_CACHE_MAGIC = b"MELS"
MEL_CACHE_VERSION = 1


@dataclass(frozen=True)
class DspParams:
    """Analysis parameters; defaults are the working configuration."""

    sample_rate: int = 16000
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    ref_power: float = 1.0

    def __post_init__(self):
        if self.n_fft < 1 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ValueError(f"hop must be in (0, n_fft], got {self.hop}")
        if self.n_mels < 1:
            raise ValueError(f"n_mels must be >= 1, got {self.n_mels}")
        if self.ref_power <= 0:
            raise ValueError(f"ref_power must be positive, got {self.ref_power}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


@dataclass
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_fft//2 + 1), non-negative
    center_freqs: np.ndarray  # Hz, strictly increasing


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_mels, n_frames), dB
    params: DspParams
    track_id: int = -1

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window w[k] = 0.5 * (1 - cos(2*pi*k/n))."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def stft_power(waveform: Waveform, params: DspParams) -> np.ndarray:
    """Squared-magnitude STFT, shape (n_fft//2 + 1, n_frames).

    The signal is reflect-padded by n_fft//2 on both ends so the frame count
    is ``1 + len(samples) // hop`` regardless of window size; frame m covers
    padded samples starting at ``m * hop``.
    """
    if waveform.sample_rate != params.sample_rate:
        raise ValueError(
            f"waveform sample rate {waveform.sample_rate} != params {params.sample_rate}"
        )
    x = waveform.samples
    if len(x) < 1:
        raise ValueError("cannot take the STFT of an empty waveform")

    pad = params.n_fft // 2
    padded = np.pad(x, pad, mode="reflect")
    n_frames = 1 + len(x) // params.hop
    starts = params.hop * np.arange(n_frames)[:, None]
    frames = padded[starts + np.arange(params.n_fft)[None, :]]
    frames = frames * hann_window(params.n_fft)[None, :]
    spectrum = np.fft.rfft(frames, axis=1)
    return (spectrum.real**2 + spectrum.imag**2).T


def mel_scale(f):
    """Hz -> mels: m = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    """Inverse of :func:`mel_scale`."""
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: DspParams) -> MelFilterbank:
    """Triangular filters with peak 1.0, equally spaced on the mel axis.

    Centers run from mel(0) to mel(sample_rate/2) with each triangle's feet
    at the neighboring centers. Raises if the FFT resolution is too coarse
    for the requested number of bands (a filter would cover no bin).
    """
    mel_points = np.linspace(0.0, mel_scale(params.sample_rate / 2.0), params.n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(params.n_bins) * params.sample_rate / params.n_fft

    lower = hz_points[:-2, None]
    center = hz_points[1:-1, None]
    upper = hz_points[2:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    if not (weights > 0).any(axis=1).all():
        raise ValueError(
            f"n_mels={params.n_mels} too large for n_fft={params.n_fft} at "
            f"{params.sample_rate} Hz: some filters cover no FFT bin"
        )
    return MelFilterbank(weights=weights, center_freqs=hz_points[1:-1])


def power_to_db(x, ref_power: float = 1.0):
    """dB scaling 10 * log10(x / r), floored at ``DB_FLOOR`` to stay finite."""
    if ref_power <= 0:
        raise ValueError(f"ref_power must be positive, got {ref_power}")
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=np.float64), DB_FLOOR) / ref_power)


def mel_spectrogram(
    waveform: Waveform, params: DspParams, track_id: int = -1, filterbank: MelFilterbank | None = None
) -> MelSpectrogram:
    """Log-mel spectrogram: dB scaling of the mel-pooled power STFT."""
    fb = filterbank if filterbank is not None else mel_filterbank(params)
    mel_power = fb.weights @ stft_power(waveform, params)
    return MelSpectrogram(values=power_to_db(mel_power, params.ref_power), params=params, track_id=track_id)


def clip_frame_count(params: DspParams, clip_seconds: float) -> int:
    """Frames per clip of the given length: floor(t * sample_rate / hop)."""
    if clip_seconds <= 0:
        raise ValueError(f"clip length must be positive, got {clip_seconds}")
    return int(clip_seconds * params.sample_rate / params.hop)


def slice_clips(spec: MelSpectrogram, clip_seconds: float) -> list[np.ndarray]:
    """Slice a spectrogram into disjoint consecutive fixed-length clips.

    All full clips are kept; the trailing partial slice is dropped. A song
    shorter than one clip yields an empty list (with a warning).
    """
    frames = clip_frame_count(spec.params, clip_seconds)
    n_clips = spec.n_frames // frames
    if n_clips == 0:
        log.warning(
            "track %d: %d frames is shorter than one %gs clip (%d frames)",
            spec.track_id, spec.n_frames, clip_seconds, frames,
        )
        return []
    return [spec.values[:, i * frames : (i + 1) * frames] for i in range(n_clips)]


def cache_path(cache_dir: str | Path, track_id: int) -> Path:
    return Path(cache_dir) / f"{track_id}.mels"


def save_mel_cache(spec: MelSpectrogram, path: str | Path) -> None:
    """Write the cache file: magic, version, dims, track id, f32 LE values.

    Layout: ``b"MELS"``, version byte 0x01, u32 LE n_mels, u32 LE n_frames,
    u32 LE track_id, then n_mels * n_frames float32 LE values in row-major
    (mel-major) order. Byte-deterministic for fixed input and parameters.
    """
    n_mels, n_frames = spec.values.shape
    header = MEL_CACHE_MAGIC + struct.pack("<BIII", MEL_CACHE_VERSION, n_mels, n_frames, spec.track_id)
    Path(path).write_bytes(header + np.ascontiguousarray(spec.values, dtype="<f4").tobytes())


def load_mel_cache(path: str | Path, params: DspParams) -> MelSpectrogram:
    """Read a cache file written by :func:`save_mel_cache`.

    The file stores values and the source track id only; analysis parameters
    are supplied by the caller (they are fixed per cache directory).
    """
    raw = Path(path).read_bytes()
    if len(raw) < 17 or raw[:4] != MEL_CACHE_MAGIC:
        raise ValueError(f"{path}: not a mel cache file")
    version, n_mels, n_frames, track_id = struct.unpack_from("<BIII", raw, 4)
    if version != MEL_CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    if n_mels != params.n_mels:
        raise ValueError(f"{path}: cache has {n_mels} mel bins, params expect {params.n_mels}")
    values = np.frombuffer(raw, dtype="<f4", offset=17)
    if values.size != n_mels * n_frames:
        raise ValueError(f"{path}: truncated cache file")
    return MelSpectrogram(values=values.reshape(n_mels, n_frames).copy(), params=params, track_id=track_id)
