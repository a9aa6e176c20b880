"""Pre-cropped face frames and segment-sampled clips.

Frames are 112x96x3 images in [0, 1], stored either as binary P6 PPM
(width 96, height 112, maxval 255) or as a raw-float file. A clip is built
by dividing an utterance's frame sequence into N equal segments and taking
one frame per segment: a random one in train mode, the middle in eval mode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .util import atomic_write_bytes

FRAME_HEIGHT = 112
FRAME_WIDTH = 96
FRAME_MAGIC = b"FRM1\0"


@dataclass(frozen=True)
class ClipSample:
    frames: np.ndarray  # [N, 112, 96, 3] float32 in [0, 1]
    source_indices: tuple[int, ...]


def _parse_ppm_header(blob: bytes, path) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, payload offset); handles whitespace
    and '#' comments between header tokens."""
    pos = 2  # past "P6"
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        token = blob[start:pos]
        if not token.isdigit():
            raise DataError(f"malformed PPM header in {path}")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    return fields[0], fields[1], fields[2], pos


def load_frame(path: str | Path) -> np.ndarray:
    """Load one frame as float32 [112, 96, 3] in [0, 1] (R, G, B order)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"frame file not found: {path}")
    blob = path.read_bytes()
    if blob[:2] == b"P6":
        w, h, maxval, off = _parse_ppm_header(blob, path)
        if (w, h) != (FRAME_WIDTH, FRAME_HEIGHT):
            raise DataError(
                f"frame dimensions expected {FRAME_WIDTH}x{FRAME_HEIGHT}, "
                f"found {w}x{h}: {path}"
            )
        if maxval != 255:
            raise DataError(f"PPM maxval must be 255, found {maxval}: {path}")
        n = h * w * 3
        payload = blob[off : off + n]
        if len(payload) != n:
            raise DataError(f"truncated PPM payload: {path}")
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
        return pixels.astype(np.float32) / 255.0
    if blob[: len(FRAME_MAGIC)] == FRAME_MAGIC:
        off = len(FRAME_MAGIC)
        dims = struct.unpack_from("<III", blob, off)
        if dims != (FRAME_HEIGHT, FRAME_WIDTH, 3):
            raise DataError(
                f"frame dimensions expected {FRAME_WIDTH}x{FRAME_HEIGHT}, "
                f"found {dims[1]}x{dims[0]}: {path}"
            )
        off += 12
        n = FRAME_HEIGHT * FRAME_WIDTH * 3
        payload = blob[off:]
        if len(payload) != 4 * n:
            raise DataError(f"truncated raw frame file: {path}")
        pixels = np.frombuffer(payload, dtype="<f4").reshape(FRAME_HEIGHT, FRAME_WIDTH, 3)
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DataError(f"raw frame values outside [0, 1]: {path}")
        return pixels.astype(np.float32)
    raise DataError(f"unrecognized frame format (not P6 PPM or FRM1): {path}")


def _check_pixels(pixels: np.ndarray) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.shape != (FRAME_HEIGHT, FRAME_WIDTH, 3):
        raise DataError(
            f"frame must be {FRAME_HEIGHT}x{FRAME_WIDTH}x3, got {arr.shape}"
        )
    return arr


def save_frame_ppm(path: str | Path, pixels: np.ndarray) -> None:
    arr = _check_pixels(pixels)
    data = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    head = f"P6\n{FRAME_WIDTH} {FRAME_HEIGHT}\n255\n".encode("ascii")
    atomic_write_bytes(path, head + data.tobytes())


def save_frame_raw(path: str | Path, pixels: np.ndarray) -> None:
    arr = _check_pixels(pixels)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise DataError("raw frame values must lie in [0, 1]")
    head = FRAME_MAGIC + struct.pack("<III", FRAME_HEIGHT, FRAME_WIDTH, 3)
    atomic_write_bytes(path, head + np.ascontiguousarray(arr, dtype="<f4").tobytes())


def sample_segments(n_frames: int, n_out: int,
                    rng: np.random.Generator | None = None) -> list[int]:
    """Pick one index per segment; segment i spans
    [floor(i*L/N), floor((i+1)*L/N) - 1]. Train mode (`rng` given) draws
    uniformly inside the segment, eval mode takes the middle. A segment left
    empty by the floor partition (only possible when L < N) reuses the last
    index of the nearest previous non-empty segment (0 if there is none)."""
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if n_out < 1:
        raise ValueError(f"n_out must be >= 1, got {n_out}")
    out: list[int] = []
    prev_last = 0
    for i in range(n_out):
        lo = (i * n_frames) // n_out
        hi = ((i + 1) * n_frames) // n_out - 1
        if hi < lo:
            out.append(prev_last)
            continue
        if rng is None:
            out.append((lo + hi) // 2)
        else:
            out.append(int(rng.integers(lo, hi + 1)))
        prev_last = hi
    return out


def list_frame_files(frames_dir: str | Path) -> list[Path]:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise DataError(f"frames directory not found: {frames_dir}")
    files = sorted(p for p in frames_dir.iterdir() if p.is_file())
    if not files:
        raise DataError(f"frames directory is empty: {frames_dir}")
    return files


def load_clip(frames_dir: str | Path, n_out: int,
              rng: np.random.Generator | None = None) -> ClipSample:
    """Segment-sample `n_out` frames from a directory whose lexicographic
    file order is temporal order."""
    files = list_frame_files(frames_dir)
    indices = sample_segments(len(files), n_out, rng)
    cache: dict[int, np.ndarray] = {}
    frames = np.empty((n_out, FRAME_HEIGHT, FRAME_WIDTH, 3), dtype=np.float32)
    for slot, idx in enumerate(indices):
        if idx not in cache:
            try:
                cache[idx] = load_frame(files[idx])
            except DataError as exc:
                raise DataError(f"bad frame {files[idx]}: {exc}") from exc
        frames[slot] = cache[idx]
    return ClipSample(frames, tuple(indices))
