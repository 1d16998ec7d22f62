"""Raster and mask containers, 8-bit image I/O, summed-area tables.

Intensities are kept as float64 in ``[0, 255]`` and only quantized when an
image is written back to disk.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

SENTINEL = 255


class ImageFormatError(ValueError):
    """Raised for unreadable, corrupt or unsupported image files."""


@dataclass(frozen=True)
class Raster:
    """A ``(height, width, channels)`` float64 image with values in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"raster must be HxW, HxWx1 or HxWx3, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("raster has a zero dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise ValueError("raster intensities must lie in [0, 255]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def copy_data(self) -> np.ndarray:
        """Writable copy of the pixel array."""
        return np.array(self.data)


@dataclass(frozen=True)
class RegionMask:
    """Boolean target-region grid; ``True`` marks pixels to be filled."""

    flags: np.ndarray
    count: int = field(init=False)

    def __post_init__(self):
        arr = np.array(self.flags, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)
        object.__setattr__(self, "count", int(arr.sum()))

    @classmethod
    def empty(cls, shape) -> "RegionMask":
        return cls(np.zeros(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.flags.shape

    @property
    def source(self) -> np.ndarray:
        """Complement of the target region."""
        return ~self.flags

    def check_pairs(self, raster: Raster) -> None:
        if self.shape != raster.shape:
            raise ValueError(f"mask shape {self.shape} does not match raster {raster.shape}")


class SummedAreaTable:
    """Per-channel integral image with a leading row and column of zeros.

    ``table[y, x, c]`` holds the sum of ``data[:y, :x, c]`` accumulated in
    double precision.
    """

    def __init__(self, data):
        arr = np.asarray(data.data if isinstance(data, Raster) else data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        table = np.zeros((h + 1, w + 1, c), dtype=np.float64)
        np.cumsum(arr, axis=0, out=table[1:, 1:])
        np.cumsum(table[1:, 1:], axis=1, out=table[1:, 1:])
        self.table = table
        self.height, self.width, self.channels = h, w, c

    def rect_sum(self, y0, x0, y1, x1):
        """Per-channel sum over rows ``[y0, y1)`` and columns ``[x0, x1)``.

        Coordinates may be integer arrays of a common shape; the result then
        has that shape plus a trailing channel axis.
        """
        t = self.table
        return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]

    def box_sums(self, ph: int, pw: int) -> np.ndarray:
        """Sums of every ``ph x pw`` window, indexed by window top-left corner."""
        t = self.table
        return t[ph:, pw:] - t[:-ph, pw:] - t[ph:, :-pw] + t[:-ph, :-pw]


def build_sat(raster: Raster) -> SummedAreaTable:
    return SummedAreaTable(raster)


def detect_damaged(raster: Raster, marker: float = SENTINEL) -> RegionMask:
    """Mask of pixels whose every channel equals ``marker``."""
    if not 0 <= marker <= 255:
        raise ValueError("marker must lie in [0, 255]")
    return RegionMask(np.all(raster.data == marker, axis=2))


def clamp_for_sentinel(raster: Raster, marker: float = SENTINEL) -> Raster:
    """Move every channel value equal to ``marker`` down by one.

    Frees the marker intensity so it can flag damaged pixels in-band.
    """
    if marker <= 0:
        raise ValueError("marker 0 has no lower neighbour to clamp to")
    data = raster.copy_data()
    data[data == marker] = marker - 1
    return Raster(data)


# --------------------------------------------------------------------- I/O

_NETPBM = {b"P5": 1, b"P6": 3}


def _read_netpbm(blob: bytes, path) -> np.ndarray:
    magic = blob[:2]
    channels = _NETPBM[magic]
    fields = []
    pos = 2
    n = len(blob)
    while len(fields) < 3:
        while pos < n and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < n and blob[pos:pos + 1] == b"#":
            while pos < n and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and blob[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: unsupported/corrupt format (bad header)")
        fields.append(int(blob[start:pos]))
    # exactly one whitespace byte separates header from raster
    if pos >= n or not blob[pos:pos + 1].isspace():
        raise ImageFormatError(f"{path}: unsupported/corrupt format (bad header)")
    pos += 1
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    if maxval > 255:
        raise ImageFormatError(f"{path}: unsupported bit depth (maxval {maxval})")
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}, only 255 is accepted")
    need = width * height * channels
    body = blob[pos:pos + need]
    if len(body) < need:
        raise ImageFormatError(f"{path}: unsupported/corrupt format (truncated raster)")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)


def _read_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            if im.format != "PNG":
                raise ImageFormatError(f"{path}: unsupported format {im.format}")
            if im.mode == "1":
                im = im.convert("L")
            if im.mode not in ("L", "RGB"):
                raise ImageFormatError(f"{path}: unsupported PNG mode {im.mode!r} (8-bit L/RGB only)")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: unsupported/corrupt format ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    return arr


def _read_array(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"{path}: unreadable file ({exc})") from exc
    if blob[:2] in _NETPBM:
        return _read_netpbm(blob, path)
    if blob[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise ImageFormatError(f"{path}: unsupported/corrupt format")


def load_raster(path) -> Raster:
    """Read an 8-bit PGM (P5), PPM (P6) or PNG (L/RGB) file."""
    return Raster(_read_array(path).astype(np.float64))


def load_mask(path, shape=None) -> RegionMask:
    """Read a single-channel mask file; nonzero pixels form the target region."""
    arr = _read_array(path)
    if arr.shape[2] != 1:
        raise ImageFormatError(f"{path}: mask must be single-channel")
    mask = RegionMask(arr[:, :, 0] != 0)
    if shape is not None and mask.shape != tuple(shape):
        raise ValueError(f"mask shape {mask.shape} does not match image {tuple(shape)}")
    return mask


def quantize(data: np.ndarray) -> np.ndarray:
    """Round half away from zero and clip to uint8."""
    return np.clip(np.floor(np.asarray(data, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def save_raster(raster: Raster, path) -> None:
    """Write ``raster`` as PGM/PPM/PNG according to the file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    arr = quantize(raster.data)
    if ext in (".pgm", ".ppm"):
        want = 1 if ext == ".pgm" else 3
        if raster.channels != want:
            raise ValueError(f"channel mismatch for format {ext}: raster has {raster.channels} channels")
        magic = b"P5" if want == 1 else b"P6"
        header = b"%s\n%d %d\n255\n" % (magic, raster.width, raster.height)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(arr).tobytes())
    elif ext == ".png":
        img = arr[:, :, 0] if raster.channels == 1 else arr
        Image.fromarray(np.ascontiguousarray(img)).save(path, format="PNG")
    else:
        raise ValueError(f"unsupported output extension {ext!r}")


def save_mask(mask: RegionMask, path) -> None:
    save_raster(Raster(mask.flags.astype(np.float64) * 255.0), path)
