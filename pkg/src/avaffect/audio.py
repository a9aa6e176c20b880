"""WAV decoding and complex STFT maps.

Utterance audio is mono 16 kHz PCM16. Spectra are computed every 10 ms with
a 25 ms Hamming window and a 512-point FFT over a 3 s segment, stored as a
(bins, frames, 2) tensor holding the real and imaginary parts; defaults give
257 x 300 x 2. 48000 samples admit only 298 fully-interior 400-sample
windows, so the segment is right-padded with zeros to make exactly 300.
"""

from __future__ import annotations

import io
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .util import atomic_write_bytes

SAMPLE_RATE = 16000
STFT_MAGIC = b"STFT1\0"


@dataclass(frozen=True)
class WaveBuffer:
    samples: np.ndarray  # float64 amplitudes in [-1, 1)
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate != SAMPLE_RATE:
            raise DataError(f"sample rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}")
        if self.samples.size == 0:
            raise DataError("wave buffer is empty")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class StftParams:
    window_len: int = 400  # 25 ms
    hop: int = 160  # 10 ms
    n_fft: int = 512
    segment_seconds: float = 3.0

    def __post_init__(self):
        if self.window_len > self.n_fft:
            raise ValueError("window_len must be <= n_fft")
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two")
        seg = self.segment_seconds * SAMPLE_RATE
        if abs(seg - round(seg)) > 1e-9:
            raise ValueError("segment_seconds * 16000 must be an integer")

    @property
    def segment_samples(self) -> int:
        return round(self.segment_seconds * SAMPLE_RATE)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def n_frames(self) -> int:
        return round(self.segment_samples / self.hop)


def decode_wav(path: str | Path) -> WaveBuffer:
    """Read a mono 16 kHz PCM16 WAV; integer sample s maps to s/32768."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"WAV file not found: {path}")
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n = wav.getnframes()
            raw = wav.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise DataError(f"not a readable RIFF/WAVE file: {path} ({exc})") from exc
    if channels != 1:
        raise DataError(f"expected mono audio, found {channels} channels: {path}")
    if width != 2:
        raise DataError(f"expected 16-bit PCM, found {8 * width}-bit: {path}")
    if rate != SAMPLE_RATE:
        raise DataError(f"expected {SAMPLE_RATE} Hz, found {rate} Hz: {path}")
    if n == 0:
        raise DataError(f"WAV file has no samples: {path}")
    pcm = np.frombuffer(raw, dtype="<i2")
    return WaveBuffer(pcm.astype(np.float64) / 32768.0)


def write_wav(path: str | Path, samples: np.ndarray) -> None:
    """Write float amplitudes as mono 16 kHz PCM16 (values clipped to the
    representable [-1, 32767/32768] range)."""
    pcm = np.clip(np.rint(np.asarray(samples, dtype=np.float64) * 32768.0),
                  -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(SAMPLE_RATE)
        wav.writeframes(pcm.tobytes())
    atomic_write_bytes(path, buf.getvalue())


def hamming_window(n: int) -> np.ndarray:
    """w[k] = 0.54 - 0.46 cos(2 pi k / (n-1))."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    k = np.arange(n, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def stft(samples: np.ndarray | WaveBuffer, params: StftParams | None = None) -> np.ndarray:
    """Complex STFT map of shape (n_fft/2+1, frames, 2), float64.

    The input is cropped/zero-padded to the segment length, then right-padded
    so that exactly `params.n_frames` windows fit; frame t covers samples
    [t*hop, t*hop + window_len), is Hamming-windowed, zero-padded to n_fft,
    and transformed by a real-input FFT.
    """
    params = params or StftParams()
    x = samples.samples if isinstance(samples, WaveBuffer) else np.asarray(samples, np.float64)
    if x.size == 0:
        raise DataError("cannot compute STFT of empty input")
    seg = params.segment_samples
    if x.size >= seg:
        x = x[:seg]
    else:
        x = np.concatenate([x, np.zeros(seg - x.size)])
    frames = params.n_frames
    need = (frames - 1) * params.hop + params.window_len
    if need > seg:
        x = np.concatenate([x, np.zeros(need - seg)])
    starts = np.arange(frames) * params.hop
    idx = starts[:, None] + np.arange(params.window_len)[None, :]
    windowed = x[idx] * hamming_window(params.window_len)[None, :]
    spec = np.fft.rfft(windowed, n=params.n_fft, axis=1)  # [frames, bins]
    out = np.empty((params.n_bins, frames, 2), dtype=np.float64)
    out[:, :, 0] = spec.real.T
    out[:, :, 1] = spec.imag.T
    return out


def sample_audio_windows(
    wave_buf: WaveBuffer,
    params: StftParams,
    n_windows: int,
    rng: np.random.Generator | None = None,
) -> list[np.ndarray]:
    """Divide the utterance into `n_windows` equal spans and take one STFT
    segment from each: a uniformly drawn start in train mode (`rng` given),
    the span center in eval mode. Starts are clamped so the segment stays
    inside the audio; shorter audio is zero-padded by `stft`."""
    if n_windows < 1:
        raise ValueError(f"n_windows must be >= 1, got {n_windows}")
    duration = wave_buf.duration
    window_s = params.segment_seconds
    max_start = max(0.0, duration - window_s)
    maps = []
    for i in range(n_windows):
        lo = duration * i / n_windows
        hi = duration * (i + 1) / n_windows
        if rng is None:
            start = min(max(0.0, (lo + hi) / 2.0 - window_s / 2.0), max_start)
        else:
            a = min(lo, max_start)
            b = min(hi, max_start)
            start = a if b <= a else float(rng.uniform(a, b))
        s0 = int(round(start * wave_buf.sample_rate))
        maps.append(stft(wave_buf.samples[s0 : s0 + params.segment_samples], params))
    return maps


def write_stft_file(path: str | Path, stft_map: np.ndarray) -> None:
    """`.stft` binary: magic, u32 LE (bins, frames, 2), f32 LE payload in
    [bin][frame][component] order."""
    arr = np.asarray(stft_map)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DataError(f"STFT map must have shape (bins, frames, 2), got {arr.shape}")
    head = STFT_MAGIC + struct.pack("<III", *arr.shape)
    atomic_write_bytes(path, head + np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_stft_file(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"STFT file not found: {path}")
    blob = path.read_bytes()
    if blob[: len(STFT_MAGIC)] != STFT_MAGIC:
        raise DataError(f"not an STFT file (bad magic): {path}")
    off = len(STFT_MAGIC)
    bins, frames, comps = struct.unpack_from("<III", blob, off)
    if comps != 2:
        raise DataError(f"STFT file component count must be 2, got {comps}: {path}")
    off += 12
    n = bins * frames * comps
    payload = blob[off:]
    if len(payload) != 4 * n:
        raise DataError(f"truncated STFT file: {path}")
    return np.frombuffer(payload, dtype="<f4").reshape(bins, frames, comps).astype(np.float32)
