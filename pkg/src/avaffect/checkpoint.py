"""Named parameter sets and their binary checkpoint format.

Checkpoint layout (little-endian throughout):

  magic "CKPT1\\0", u32 entry count, then per entry sorted by name:
  u16 name length, UTF-8 name, u8 rank, rank x u32 dims, f32 payload.

The training-state sidecar wraps the optimizer velocities in the same
entry encoding plus the RNG root seed, the next epoch index, and the
best-validation bookkeeping needed for bitwise-identical resumption:

  magic "OPT1\\0", u64 seed, u32 next_epoch, f64 best_total, i32 best_epoch,
  u32 entry count, entries as above.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .autodiff import Tensor
from .errors import DataError
from .util import atomic_write_bytes

CKPT_MAGIC = b"CKPT1\0"
STATE_MAGIC = b"OPT1\0"


class ParamSet:
    """Mapping from dotted parameter path to Tensor; iteration is sorted by
    name so serialization and optimizer order are deterministic."""

    def __init__(self, params: dict[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = {}
        if params:
            for name, t in params.items():
                self[name] = t

    def __setitem__(self, name: str, t: Tensor) -> None:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._params[name]

    def merge(self, other: "ParamSet") -> None:
        for name, t in other.items():
            self[name] = t

    def zero_grads(self) -> None:
        for _, t in self.items():
            t.zero_grad()

    def trainable(self) -> Iterator[tuple[str, Tensor]]:
        for name, t in self.items():
            if t.requires_grad:
                yield name, t


def _encode_entries(entries: list[tuple[str, np.ndarray]]) -> bytes:
    buf = io.BytesIO()
    for name, arr in entries:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def _decode_entries(buf: io.BytesIO, count: int, path) -> list[tuple[str, np.ndarray]]:
    entries = []
    for _ in range(count):
        header = buf.read(2)
        if len(header) != 2:
            raise DataError(f"truncated checkpoint {path}")
        (name_len,) = struct.unpack("<H", header)
        name = buf.read(name_len).decode("utf-8")
        rank_raw = buf.read(1)
        if len(rank_raw) != 1:
            raise DataError(f"truncated checkpoint {path}")
        (rank,) = struct.unpack("<B", rank_raw)
        dims_raw = buf.read(4 * rank)
        if len(dims_raw) != 4 * rank:
            raise DataError(f"truncated checkpoint {path}")
        dims = struct.unpack(f"<{rank}I", dims_raw)
        n = int(np.prod(dims)) if rank else 1
        payload = buf.read(4 * n)
        if len(payload) != 4 * n:
            raise DataError(f"truncated checkpoint {path}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        entries.append((name, arr))
    if buf.read(1):
        raise DataError(f"trailing bytes in checkpoint {path}")
    return entries


def save_checkpoint(params: ParamSet, path: str | Path) -> None:
    entries = [(name, t.data) for name, t in params.items()]
    blob = CKPT_MAGIC + struct.pack("<I", len(entries)) + _encode_entries(entries)
    atomic_write_bytes(path, blob)


def load_checkpoint(path: str | Path) -> ParamSet:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    buf = io.BytesIO(path.read_bytes())
    if buf.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
        raise DataError(f"not a checkpoint file (bad magic): {path}")
    (count,) = struct.unpack("<I", buf.read(4))
    out = ParamSet()
    for name, arr in _decode_entries(buf, count, path):
        out[name] = Tensor(arr, dtype=np.float32)
    return out


def save_train_state(path: str | Path, velocities: dict[str, np.ndarray],
                     seed: int, next_epoch: int, best_total: float,
                     best_epoch: int) -> None:
    entries = sorted((name, np.asarray(v)) for name, v in velocities.items())
    head = STATE_MAGIC + struct.pack(
        "<QIdi", seed & (2**64 - 1), next_epoch, best_total, best_epoch
    )
    blob = head + struct.pack("<I", len(entries)) + _encode_entries(entries)
    atomic_write_bytes(path, blob)


def load_train_state(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"training state not found: {path}")
    buf = io.BytesIO(path.read_bytes())
    if buf.read(len(STATE_MAGIC)) != STATE_MAGIC:
        raise DataError(f"not a training-state file (bad magic): {path}")
    seed, next_epoch, best_total, best_epoch = struct.unpack("<QIdi", buf.read(24))
    (count,) = struct.unpack("<I", buf.read(4))
    velocities = {
        name: arr for name, arr in _decode_entries(buf, count, path)
    }
    return velocities, seed, next_epoch, best_total, best_epoch
