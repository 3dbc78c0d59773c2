"""Grayscale texture decoding and dataset manifest handling.

Supported image inputs are 8-bit grayscale PNG, 8-bit RGB PNG (converted by
integer luma) and PGM (both the ASCII ``P2`` and binary ``P5`` flavors).
Manifests are plain CSV files with a ``path,label`` header; image paths are
interpreted relative to the directory containing the manifest.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, ParseError, ValidationError


@dataclass(frozen=True)
class GrayImage:
    """An 8-bit grayscale image held as a read-only (height, width) array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width):
            raise ValueError(f"pixel array shape {px.shape} does not match "
                             f"height x width = ({self.height}, {self.width})")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered (path, label) entries plus the distinct labels in first-appearance order."""

    entries: tuple[tuple[str, str], ...]
    classes: tuple[str, ...]
    base_dir: Path

    def resolved_path(self, index: int) -> Path:
        """Absolute-ish path of entry `index`, relative to the manifest's directory."""
        return self.base_dir / self.entries[index][0]

    def __len__(self) -> int:
        return len(self.entries)


def _rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    # integer luma: floor(0.299 R + 0.587 G + 0.114 B), computed exactly in ints
    r = rgb[..., 0].astype(np.int32)
    g = rgb[..., 1].astype(np.int32)
    b = rgb[..., 2].astype(np.int32)
    return ((299 * r + 587 * g + 114 * b) // 1000).astype(np.uint8)


def _load_pil(path: Path) -> GrayImage:
    try:
        with Image.open(path) as im:
            im.load()
            fmt, mode = im.format, im.mode
            if fmt != "PNG":
                raise FormatError(f"unsupported image format {fmt!r} in '{path}' (need PNG or PGM)")
            if mode == "L":
                arr = np.asarray(im, dtype=np.uint8)
            elif mode == "RGB":
                arr = _rgb_to_gray(np.asarray(im, dtype=np.uint8))
            else:
                raise FormatError(f"unsupported PNG mode {mode!r} in '{path}' "
                                  "(need 8-bit grayscale or 8-bit RGB)")
    except UnidentifiedImageError:
        raise FormatError(f"unrecognized image format in '{path}'") from None
    h, w = arr.shape
    return GrayImage(width=w, height=h, pixels=arr)


def _pgm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments.

    Yields (token, end_offset) so the binary raster start can be located.
    """
    i, n = 0, len(data)
    while i < n:
        c = data[i:i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            while i < n and data[i:i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < n and data[j:j + 1] not in b" \t\r\n#":
                j += 1
            yield data[i:j], j
            i = j


def _load_pgm(path: Path) -> GrayImage:
    data = path.read_bytes()
    toks = _pgm_tokens(data)
    try:
        magic, _ = next(toks)
        (w_tok, _), (h_tok, _), (maxval_tok, end) = next(toks), next(toks), next(toks)
        width, height, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except (StopIteration, ValueError):
        raise ParseError(f"'{path}': truncated or malformed PGM header") from None
    if width < 1 or height < 1:
        raise ParseError(f"'{path}': invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(f"'{path}': PGM maxval {maxval} unsupported (8-bit only)")
    count = width * height
    if magic == b"P5":
        raster = data[end + 1:end + 1 + count]
        if len(raster) < count:
            raise ParseError(f"'{path}': PGM raster truncated "
                             f"({len(raster)} of {count} bytes)")
        arr = np.frombuffer(raster, dtype=np.uint8).copy()
    elif magic == b"P2":
        vals = []
        for tok, _ in toks:
            try:
                vals.append(int(tok))
            except ValueError:
                raise ParseError(f"'{path}': non-numeric PGM sample {tok!r}") from None
        if len(vals) < count:
            raise ParseError(f"'{path}': PGM raster truncated ({len(vals)} of {count} samples)")
        arr = np.asarray(vals[:count], dtype=np.int64)
    else:
        raise FormatError(f"'{path}': unsupported PGM magic {magic!r}")
    if arr.max(initial=0) > maxval:
        raise ParseError(f"'{path}': PGM sample exceeds declared maxval {maxval}")
    return GrayImage(width=width, height=height,
                     pixels=arr.reshape(height, width))


def load_image(path) -> GrayImage:
    """Decode a PNG or PGM file into a GrayImage.

    Decoding is deterministic; RGB PNGs are reduced by integer luma.
    Raises OSError for unreadable files and FormatError for unsupported
    formats or bit depths.
    """
    p = Path(path)
    with open(p, "rb") as fh:
        magic = fh.read(2)
    if magic in (b"P2", b"P5"):
        return _load_pgm(p)
    return _load_pil(p)


def load_manifest(path) -> DatasetManifest:
    """Parse a `path,label` CSV manifest.

    Entries keep file order; classes are deduplicated preserving first
    appearance. Each class needs at least two entries (required downstream
    for stratified folding) and paths must be unique.
    """
    p = Path(path)
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"'{p}' line 1: missing header 'path,label'") from None
        if [c.strip() for c in header] != ["path", "label"]:
            raise ParseError(f"'{p}' line 1: expected header 'path,label', got {','.join(header)!r}")
        entries: list[tuple[str, str]] = []
        seen: set[str] = set()
        classes: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise ParseError(f"'{p}' line {lineno}: expected 'path,label', got {','.join(row)!r}")
            img_path, label = row[0].strip(), row[1].strip()
            if img_path in seen:
                raise ValidationError(f"'{p}' line {lineno}: duplicate path '{img_path}'")
            seen.add(img_path)
            if label not in classes:
                classes.append(label)
            entries.append((img_path, label))
    if not entries:
        raise ValidationError(f"'{p}': manifest has no entries")
    counts = {c: 0 for c in classes}
    for _, label in entries:
        counts[label] += 1
    thin = [c for c, n in counts.items() if n < 2]
    if thin:
        raise ValidationError(f"'{p}': classes with fewer than 2 samples: {', '.join(thin)}")
    return DatasetManifest(entries=tuple(entries), classes=tuple(classes),
                           base_dir=p.resolve().parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest back out; load_manifest of the result restores the entries."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        writer.writerows(manifest.entries)
