"""Dataset manifests, splits, and the synthetic corpus generator.

A manifest is a CSV `id,wav_path,frames_dir,arousal,valence` with labels in
[-1, 1]. Paths are kept verbatim on load; `resolve_records` joins relative
ones against the manifest's directory.

The synthetic generator builds a corpus with complementary modality noise:
the audio carrier frequency encodes arousal cleanly while its amplitude-
modulation depth encodes a noise-corrupted valence; frame brightness encodes
valence cleanly while the brightness-gradient orientation encodes a
noise-corrupted arousal. With both noise values at their defaults, fusing
the two streams is strictly better than either alone.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, write_wav
from .errors import DataError
from .util import atomic_write_bytes, derive_rng
from .video import FRAME_HEIGHT, FRAME_WIDTH, save_frame_ppm

MANIFEST_FIELDS = ("id", "wav_path", "frames_dir", "arousal", "valence")

# synthetic generative model constants
_CARRIER_BASE_HZ = 300.0
_CARRIER_SPAN_HZ = 2800.0  # carrier = 300 + 2800 * (a+1)/2
_AM_RATE_HZ = 3.0
_AM_DEPTH_BASE = 0.5
_AM_DEPTH_GAIN = 0.2  # depth = 0.5 + 0.2 * clip(v + noise, -2, 2)
_WAVE_GAIN = 0.42
_WAVE_NOISE = 0.02
_BRIGHT_BASE = 0.5
_BRIGHT_GAIN = 0.28  # mean brightness = 0.5 + 0.28 * v
_GRAD_GAIN = 0.18
_FRAME_JITTER = 0.01
_PIXEL_NOISE = 0.01


@dataclass(frozen=True)
class AffectPair:
    arousal: float
    valence: float

    def __post_init__(self):
        for name, value in (("arousal", self.arousal), ("valence", self.valence)):
            if not math.isfinite(value) or not -1.0 <= value <= 1.0:
                raise DataError(f"{name} must be finite and in [-1, 1], got {value}")


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    wav_path: str
    frames_dir: str
    label: AffectPair

    def __post_init__(self):
        if not self.id:
            raise DataError("utterance id must be nonempty")


@dataclass(frozen=True)
class SynthSpec:
    n_utterances: int
    seed: int
    audio_seconds: float = 4.0
    frames_per_utterance: int = 12
    audio_valence_noise: float = 0.3
    video_arousal_noise: float = 0.3

    def __post_init__(self):
        if self.n_utterances < 2:
            raise DataError("n_utterances must be >= 2")
        if self.audio_seconds < 3.0:
            raise DataError("audio_seconds must be >= 3.0")
        if self.frames_per_utterance < 1:
            raise DataError("frames_per_utterance must be >= 1")
        if self.audio_valence_noise < 0 or self.video_arousal_noise < 0:
            raise DataError("noise std-devs must be >= 0")


def load_manifest(path: str | Path) -> list[UtteranceRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != MANIFEST_FIELDS:
        raise DataError(
            f"manifest header must be {','.join(MANIFEST_FIELDS)}: {path}"
        )
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    for i, row in enumerate(rows[1:]):
        if len(row) != len(MANIFEST_FIELDS):
            raise DataError(f"manifest row {i} has {len(row)} columns, expected 5: {path}")
        rec_id, wav_path, frames_dir, a_raw, v_raw = row
        try:
            arousal, valence = float(a_raw), float(v_raw)
        except ValueError as exc:
            raise DataError(f"manifest row {i} has a non-numeric label: {path}") from exc
        try:
            label = AffectPair(arousal, valence)
        except DataError as exc:
            raise DataError(f"manifest row {i}: {exc}") from exc
        if rec_id in seen:
            raise DataError(f"manifest row {i} duplicates id {rec_id!r}: {path}")
        seen.add(rec_id)
        records.append(UtteranceRecord(rec_id, wav_path, frames_dir, label))
    return records


def write_manifest(records: list[UtteranceRecord], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_FIELDS)
    for rec in records:
        writer.writerow(
            [rec.id, rec.wav_path, rec.frames_dir,
             repr(rec.label.arousal), repr(rec.label.valence)]
        )
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def resolve_records(records: list[UtteranceRecord],
                    manifest_path: str | Path) -> list[UtteranceRecord]:
    """Join relative wav/frames paths against the manifest's directory."""
    base = Path(manifest_path).resolve().parent
    out = []
    for rec in records:
        wav = Path(rec.wav_path)
        frames = Path(rec.frames_dir)
        out.append(
            replace(
                rec,
                wav_path=str(wav if wav.is_absolute() else base / wav),
                frames_dir=str(frames if frames.is_absolute() else base / frames),
            )
        )
    return out


def split_train_val(records: list, val_fraction: float, seed: int) -> tuple[list, list]:
    """Disjoint, exhaustive, seed-deterministic partition with
    |val| = round(val_fraction * N) clamped to [1, N-1]."""
    n = len(records)
    if n < 2:
        raise DataError(f"need at least 2 records to split, got {n}")
    if not 0.0 < val_fraction < 1.0:
        raise DataError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n_val = int(math.floor(val_fraction * n + 0.5))
    n_val = min(max(n_val, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    val = [records[i] for i in perm[:n_val]]
    train = [records[i] for i in perm[n_val:]]
    return train, val


def synth_labels(seed: int, n: int) -> np.ndarray:
    """Latent (arousal, valence) pairs, uniform on [-0.8, 0.8]^2; shape [n,2]."""
    return derive_rng(seed, "labels").uniform(-0.8, 0.8, size=(n, 2))


def _synth_wave(a: float, v: float, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    n = round(spec.audio_seconds * SAMPLE_RATE)
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    carrier_hz = _CARRIER_BASE_HZ + _CARRIER_SPAN_HZ * (a + 1.0) / 2.0
    v_noisy = v + rng.normal(0.0, spec.audio_valence_noise)
    depth = _AM_DEPTH_BASE + _AM_DEPTH_GAIN * min(max(v_noisy, -2.0), 2.0)
    envelope = 1.0 + depth * np.sin(2.0 * np.pi * _AM_RATE_HZ * t)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = _WAVE_GAIN * envelope * np.sin(2.0 * np.pi * carrier_hz * t + phase)
    wave += rng.normal(0.0, _WAVE_NOISE, n)
    return np.clip(wave, -1.0, 32767.0 / 32768.0)


def _synth_frames(a: float, v: float, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    a_noisy = a + rng.normal(0.0, spec.video_arousal_noise)
    theta = (np.pi / 4.0) * (1.0 + min(max(a_noisy, -1.0), 1.0))
    gx = _GRAD_GAIN * np.cos(theta)
    gy = _GRAD_GAIN * np.sin(theta)
    xs = (np.arange(FRAME_WIDTH) / (FRAME_WIDTH - 1) - 0.5) * 2.0
    ys = (np.arange(FRAME_HEIGHT) / (FRAME_HEIGHT - 1) - 0.5) * 2.0
    ramp = gx * xs[None, :] + gy * ys[:, None]
    base = _BRIGHT_BASE + _BRIGHT_GAIN * v + ramp
    frames = np.empty((spec.frames_per_utterance, FRAME_HEIGHT, FRAME_WIDTH, 3))
    for f in range(spec.frames_per_utterance):
        img = base + rng.normal(0.0, _FRAME_JITTER)
        img = img + rng.normal(0.0, _PIXEL_NOISE, (FRAME_HEIGHT, FRAME_WIDTH))
        frames[f] = np.clip(img, 0.0, 1.0)[:, :, None]
    return frames


def generate_synthetic(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Write WAVs, frame directories, and a manifest under `out_dir`; returns
    the manifest path. Output is a pure function of the spec (byte-identical
    across runs), with manifest paths relative to `out_dir`."""
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    frames_root = out_dir / "frames"
    audio_dir.mkdir(parents=True, exist_ok=True)
    frames_root.mkdir(parents=True, exist_ok=True)

    labels = synth_labels(spec.seed, spec.n_utterances)
    records = []
    for u in range(spec.n_utterances):
        uid = f"utt{u:05d}"
        a, v = float(labels[u, 0]), float(labels[u, 1])
        wave = _synth_wave(a, v, spec, derive_rng(spec.seed, uid, "audio"))
        write_wav(audio_dir / f"{uid}.wav", wave)
        frames = _synth_frames(a, v, spec, derive_rng(spec.seed, uid, "frames"))
        frame_dir = frames_root / uid
        frame_dir.mkdir(exist_ok=True)
        for f in range(frames.shape[0]):
            save_frame_ppm(frame_dir / f"f{f:04d}.ppm", frames[f])
        records.append(
            UtteranceRecord(uid, f"audio/{uid}.wav", f"frames/{uid}", AffectPair(a, v))
        )
    manifest_path = out_dir / "manifest.csv"
    write_manifest(records, manifest_path)
    return manifest_path
