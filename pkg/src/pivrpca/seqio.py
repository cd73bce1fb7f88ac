"""Frame sequence I/O and the frames <-> data matrix conversion.

Frames are held in memory as float64 arrays normalized to [0, 1]. On disk a
sequence is a directory of ``frame_000000.pgm`` style files; binary PGM
(8/16-bit) is always available, PNG goes through Pillow.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from .exceptions import (DimensionMismatchError, EmptyInputError,
                         SequenceIOError, UnreadableFrameError)

SUPPORTED_SUFFIXES = (".pgm", ".ppm", ".png")
FRAME_PATTERN = "frame_{:06d}.pgm"
CSV_HEADER = ["frame", "mse", "psnr", "ssim"]
LUMA = (0.299, 0.587, 0.114)


@dataclass
class FrameSequence:
    frames: List[np.ndarray]
    source_range: float = 1.0
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.frames = [np.asarray(f, dtype=np.float64) for f in self.frames]
        shapes = {f.shape for f in self.frames}
        if len(shapes) > 1:
            raise ValueError(f"frames differ in shape: {sorted(shapes)}")
        if self.frames and self.frames[0].ndim != 2:
            raise ValueError("frames must be 2-D")

    def __len__(self):
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]

    def as_array(self) -> np.ndarray:
        """Stack as ``(n_frames, height, width)``."""
        return np.stack(self.frames)


@dataclass
class DataMatrix:
    """``(width*height) x n_frames`` matrix; column j is frame j in row-major order."""

    matrix: np.ndarray
    width: int
    height: int

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def shape(self):
        return self.matrix.shape


def aggregate(seq: FrameSequence) -> DataMatrix:
    if len(seq) == 0:
        raise ValueError("cannot aggregate an empty sequence")
    mat = np.stack([f.reshape(-1) for f in seq.frames], axis=1)
    return DataMatrix(matrix=mat, width=seq.width, height=seq.height)


def scatter(d: DataMatrix, source_range: float = 1.0) -> FrameSequence:
    mat = np.asarray(d.matrix, dtype=np.float64)
    if mat.ndim != 2 or d.width * d.height != mat.shape[0]:
        raise ValueError(
            f"matrix with {mat.shape[0]} rows cannot hold {d.height}x{d.width} frames")
    frames = [mat[:, j].reshape(d.height, d.width).copy() for j in range(mat.shape[1])]
    return FrameSequence(frames=frames, source_range=source_range)


def like(d: DataMatrix, matrix: np.ndarray) -> DataMatrix:
    return DataMatrix(matrix=matrix, width=d.width, height=d.height)


# -- PNM -----------------------------------------------------------------------

def _read_pnm(path: Path):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnreadableFrameError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte ends the header
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise UnreadableFrameError(f"{path}: unsupported PNM type {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise UnreadableFrameError(f"{path}: malformed header") from exc
    if maxval not in (255, 65535):
        raise UnreadableFrameError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos) \
        if len(data) - pos >= count * dtype.itemsize else None
    if raw is None:
        raise UnreadableFrameError(f"{path}: truncated pixel data")
    img = raw.reshape(height, width, channels) if channels == 3 else raw.reshape(height, width)
    return img.astype(np.float64), maxval


def _write_pgm(path: Path, codes: np.ndarray, maxval: int):
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{codes.shape[1]} {codes.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(codes.astype(dtype).tobytes())


def _read_png(path: Path):
    from PIL import Image

    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except OSError as exc:
        raise UnreadableFrameError(f"{path}: {exc}") from exc
    if mode in ("I;16", "I;16B", "I"):
        return arr.astype(np.float64), 65535
    if mode in ("RGBA", "LA"):
        arr = arr[..., :-1]
    if mode not in ("L", "RGB", "RGBA", "LA", "P"):
        raise UnreadableFrameError(f"{path}: unsupported PNG mode {mode}")
    if mode == "P":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    return arr.astype(np.float64), 255


def _read_frame(path: Path):
    try:
        if path.suffix.lower() == ".png":
            return _read_png(path)
        return _read_pnm(path)
    except (UnreadableFrameError, DimensionMismatchError):
        raise
    except (OSError, ValueError) as exc:
        raise UnreadableFrameError(f"{path}: {exc}") from exc


def list_frames(path) -> List[Path]:
    root = Path(path)
    if not root.is_dir():
        raise SequenceIOError(f"{root}: not a directory")
    return sorted((p for p in root.iterdir()
                   if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES),
                  key=lambda p: p.name)


def load_sequence(path) -> FrameSequence:
    """Read every supported image in `path`, ordered by file name.

    Raises
    ------
    SequenceIOError
        `path` is not a directory.
    EmptyInputError
        No supported image files.
    UnreadableFrameError
        A file cannot be decoded.
    DimensionMismatchError
        Frames differ in size; the message names the offending file.
    """
    files = list_frames(path)
    if not files:
        raise EmptyInputError(f"{path}: no image files")
    frames, warnings = [], []
    source_range = None
    shape = None
    for f in files:
        img, maxval = _read_frame(f)
        if img.ndim == 3:
            img = img @ np.array(LUMA)
            warnings.append(f"{f.name}: color image reduced to luma")
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DimensionMismatchError(
                f"{f}: frame is {img.shape[1]}x{img.shape[0]}, expected {shape[1]}x{shape[0]}")
        if source_range is not None and maxval != source_range:
            warnings.append(f"{f.name}: bit depth differs from first frame")
        source_range = max(source_range or 0, maxval)
        frames.append(img / maxval)
    return FrameSequence(frames=frames, source_range=float(source_range), warnings=warnings)


def _maxval_for(source_range: float) -> int:
    return 255 if source_range == 255 else 65535


def store_sequence(seq: FrameSequence, path, clamp: bool = True) -> List[Path]:
    """Write frames as ``frame_000000.pgm`` ... at the sequence's bit depth.

    Normalized sequences (``source_range == 1``) are written as 16-bit.
    Without `clamp`, values outside [0, 1] raise ``ValueError``.
    """
    maxval = _maxval_for(seq.source_range)
    root = Path(path)
    prepared = []
    for f in seq.frames:
        if clamp:
            f = np.clip(f, 0.0, 1.0)
        elif f.min() < 0 or f.max() > 1:
            raise ValueError("intensities outside [0, 1]; pass clamp=True")
        prepared.append(np.rint(f * maxval))
    try:
        root.mkdir(parents=True, exist_ok=True)
        written = []
        for i, codes in enumerate(prepared):
            out = root / FRAME_PATTERN.format(i)
            _write_pgm(out, codes, maxval)
            written.append(out)
    except OSError as exc:
        raise SequenceIOError(f"{root}: {exc}") from exc
    return written


# -- reports -------------------------------------------------------------------

def format_number(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def write_quality_csv(report, path) -> None:
    """Write ``frame,mse,psnr,ssim`` rows plus a trailing ``aggregate`` row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for q in report.per_frame:
            w.writerow([q.frame_index, format_number(q.mse), format_number(q.psnr), format_number(q.ssim)])
        if report.per_frame:
            w.writerow(["aggregate", format_number(report.mean_mse), format_number(report.mean_psnr),
                        format_number(report.mean_ssim)])


def read_quality_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sequence_checksum(seq: FrameSequence) -> str:
    h = hashlib.sha256()
    for f in seq.frames:
        h.update(np.ascontiguousarray(f, dtype=np.float64).tobytes())
    return h.hexdigest()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def write_json(payload: dict, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=False)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
