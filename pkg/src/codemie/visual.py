"""Frame-level visual features: mean-pooled patch embeddings plus positions.

Patch embeddings come from an external encoder and are read from disk; see
``docs/format.md`` for the container layout.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CMIEEMB1"


@dataclass(frozen=True)
class PatchEmbeddings:
    """Array of shape (q images, n_p patches, d_g dims), float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"patch embeddings must be q x n_p x d_g with all sizes >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("patch embeddings contain non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class FusedFeatures:
    data: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.positions.shape or self.data.ndim != 2:
            raise ValueError("fused features and positions must both be q x d_g")


def sinusoidal_positions(q: int, d_g: int) -> np.ndarray:
    """Interleaved sin/cos encoding: even columns sin, odd columns cos."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if d_g < 2 or d_g % 2:
        raise ValueError("d_g must be even and >= 2")
    pos = np.arange(q, dtype=np.float64)[:, None]
    freq = np.power(10000.0, -np.arange(0, d_g, 2, dtype=np.float64) / d_g)
    angles = pos * freq
    out = np.empty((q, d_g), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out.astype(np.float32)


def fuse(patches: PatchEmbeddings | np.ndarray, positions: np.ndarray) -> FusedFeatures:
    if not isinstance(patches, PatchEmbeddings):
        patches = PatchEmbeddings(patches)
    q, n_p, d_g = patches.shape
    pos = np.asarray(positions, dtype=np.float32)
    if pos.shape != (q, d_g):
        raise ValueError(f"positions must be {(q, d_g)}, got {pos.shape}")
    if not np.isfinite(pos).all():
        raise ValueError("positions contain non-finite values")
    # float64 accumulation, a single division per image
    pooled = patches.data.sum(axis=1, dtype=np.float64) / n_p
    fused = (pooled + pos).astype(np.float32)
    return FusedFeatures(fused, pos)


def fuse_with_default_positions(patches: PatchEmbeddings | np.ndarray) -> FusedFeatures:
    if not isinstance(patches, PatchEmbeddings):
        patches = PatchEmbeddings(patches)
    q, _, d_g = patches.shape
    return fuse(patches, sinusoidal_positions(q, d_g))


# --- file formats ----------------------------------------------------------


def write_embeddings(path: str | Path, array: np.ndarray, kind: str = "patches") -> None:
    """Binary container: magic, u32 header length, JSON header, raw f32 bytes."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = {"dtype": "f32", "layout": "row-major", "kind": kind}
    if arr.ndim == 3:
        header.update(q=arr.shape[0], n_p=arr.shape[1], d_g=arr.shape[2])
    elif arr.ndim == 2:
        header.update(q=arr.shape[0], d_g=arr.shape[1])
    else:
        raise ValueError("only 2-D or 3-D arrays are supported")
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(arr.tobytes())


def _shape(header: dict) -> tuple[int, ...]:
    if header.get("dtype") != "f32" or header.get("layout") != "row-major":
        raise ValueError("only f32 row-major embeddings are supported")
    if "n_p" in header:
        return int(header["q"]), int(header["n_p"]), int(header["d_g"])
    return int(header["q"]), int(header["d_g"])


def read_embeddings(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not an embedding container")
    offset = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    shape = _shape(header)
    expected = int(np.prod(shape)) * 4
    payload = raw[offset:]
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)


def write_embeddings_json(path: str | Path, array: np.ndarray, kind: str = "patches") -> None:
    arr = np.asarray(array, dtype=np.float32)
    header = {"dtype": "f32", "layout": "row-major", "kind": kind}
    if arr.ndim == 3:
        header.update(q=arr.shape[0], n_p=arr.shape[1], d_g=arr.shape[2])
    else:
        header.update(q=arr.shape[0], d_g=arr.shape[1])
    header["data"] = arr.tolist()
    Path(path).write_text(json.dumps(header), encoding="utf-8")


def read_embeddings_json(path: str | Path) -> np.ndarray:
    header = json.loads(Path(path).read_text(encoding="utf-8"))
    shape = _shape(header)
    arr = np.asarray(header["data"], dtype=np.float32)
    if arr.shape != shape:
        raise ValueError(f"{path}: data shape {arr.shape} does not match header {shape}")
    return arr


def load_embeddings(path: str | Path) -> np.ndarray:
    """Read either container variant, chosen by file extension."""
    return read_embeddings_json(path) if str(path).endswith(".json") else read_embeddings(path)
