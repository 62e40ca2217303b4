"""File formats: frame-stack containers, capture bundles and graymaps.

A frame-stack file is ``FSTK``, a u16 version, u32 ``T, H, W``, a u16 dtype
code (1 = float32), then ``T*H*W`` little-endian samples, frame-major and
row-major.  All writers go through a temporary file and ``os.replace`` so a
failed write never leaves a partial output behind.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"FSTK"
VERSION = 1
DTYPE_F32 = 1
HEADER = struct.Struct("<4sHIIIH")


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def stack_bytes(stack) -> bytes:
    a = np.asarray(stack, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise FormatError(f"frame stack must be 3-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise FormatError("frame stack has non-finite values")
    t, h, w = a.shape
    return HEADER.pack(MAGIC, VERSION, t, h, w, DTYPE_F32) + a.astype("<f4").tobytes()


def parse_stack(buf: bytes) -> np.ndarray:
    if len(buf) < HEADER.size:
        raise FormatError("file too short for a frame-stack header")
    magic, version, t, h, w, dtype = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    payload = len(buf) - HEADER.size
    if payload != 4 * t * h * w:
        raise FormatError(f"payload is {payload} bytes, header declares {4 * t * h * w}")
    a = np.frombuffer(buf, dtype="<f4", offset=HEADER.size).reshape(t, h, w)
    if not np.all(np.isfinite(a)):
        raise FormatError("frame stack has non-finite values")
    return a.astype(np.float64)


def write_stack(path, stack) -> None:
    atomic_write(path, stack_bytes(stack))


def read_stack(path) -> np.ndarray:
    return parse_stack(Path(path).read_bytes())


def to_gray(img, bits: int = 8) -> np.ndarray:
    """Scale ``[0, 1]`` values to integer graymap levels (clipped)."""
    top = (1 << bits) - 1
    return np.rint(np.clip(np.asarray(img, dtype=np.float64), 0, 1) * top).astype(np.uint8 if bits == 8 else np.uint16)


def write_pgm(path, img, bits: int = 8) -> None:
    """Binary portable graymap of a ``[0, 1]`` image."""
    g = to_gray(img, bits)
    h, w = g.shape
    top = (1 << bits) - 1
    body = g.astype(">u2").tobytes() if bits == 16 else g.tobytes()
    atomic_write(path, f"P5\n{w} {h}\n{top}\n".encode("ascii") + body)


def read_pgm(path) -> np.ndarray:
    """Read an 8- or 16-bit graymap into ``[0, 1]`` floats."""
    with Image.open(path) as im:
        if im.format != "PPM" or im.mode not in ("L", "I", "I;16", "I;16B"):
            raise FormatError(f"{path} is not a graymap")
        a = np.asarray(im)
        # Pillow rescales any header maxval to the full 8- or 16-bit range
        top = 255 if im.mode == "L" else 65535
    return a.astype(np.float64) / top


def import_graymaps(directory, pattern: str = "*.pgm") -> np.ndarray:
    """Stack the graymaps in ``directory`` (sorted by name) into ``(T, H, W)``."""
    files = sorted(Path(directory).glob(pattern))
    if not files:
        raise FormatError(f"no files matching {pattern} in {directory}")
    frames = [read_pgm(f) for f in files]
    if len({f.shape for f in frames}) != 1:
        raise FormatError("graymaps differ in size")
    return np.stack(frames)


def write_bundle(prefix, images: dict, meta: dict) -> tuple[Path, Path]:
    """Write named images as one frame stack plus a JSON sidecar.

    Images are concatenated in sorted-key order; 2-D images take one slot,
    3-D images one slot per leading index.
    """
    prefix = Path(prefix)
    keys = sorted(images)
    parts, counts = [], {}
    for k in keys:
        a = np.asarray(images[k], dtype=np.float64)
        a = a[None] if a.ndim == 2 else a
        parts.append(a)
        counts[k] = int(a.shape[0]) if np.ndim(images[k]) == 3 else 0
    meta = dict(meta, images=[[k, counts[k]] for k in keys])
    stack_path, json_path = prefix.with_suffix(".fstk"), prefix.with_suffix(".json")
    write_stack(stack_path, np.concatenate(parts))
    atomic_write_text(json_path, dump_json(meta))
    return stack_path, json_path


def read_bundle(prefix) -> tuple[dict, dict]:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
    data = read_stack(prefix.with_suffix(".fstk"))
    images, pos = {}, 0
    for key, count in meta.pop("images"):
        if count == 0:
            images[key] = data[pos]
            pos += 1
        else:
            images[key] = data[pos : pos + count]
            pos += count
    if pos != data.shape[0]:
        raise FormatError("sidecar image list does not match the stack")
    return images, meta
