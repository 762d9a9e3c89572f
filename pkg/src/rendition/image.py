"""Image arrays, binary PGM/PPM (and PNG) I/O, quality metrics and noise.

Images are plain ``numpy`` float64 arrays of shape ``(H, W)`` for grayscale
or ``(H, W, 3)`` for RGB, nominally in ``[0, 1]``.  Iterates may leave that
range; only file export clamps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

PSNR_CAP_DB = 200.0


class ImageReadError(OSError):
    """The file is missing, truncated or not a raster we understand."""


class UnsupportedImageError(ValueError):
    """The file is readable but has a bit depth or channel count we do not support."""


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


def as_image(data, copy: bool = False) -> np.ndarray:
    """Validate ``data`` as an image and return it as a float64 array."""
    img = np.array(data, dtype=np.float64, copy=copy)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")
    if img.size == 0:
        raise ValueError("empty image")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf")
    return img


def _check_same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0.

    MSE is averaged over all samples (all channels).  Identical images
    return :data:`PSNR_CAP_DB` instead of infinity.
    """
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / err), PSNR_CAP_DB))


def add_noise(img, spec: NoiseSpec) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise.  The result is not clamped."""
    img = as_image(img)
    if spec.sigma == 0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    return img + spec.sigma * rng.standard_normal(img.shape)


# --------------------------------------------------------------------------
# file I/O

_NETPBM_MAGIC = {b"P5": 1, b"P6": 3}


def _read_netpbm(raw: bytes, path) -> np.ndarray:
    magic = raw[:2]
    channels = _NETPBM_MAGIC[magic]
    # header: magic, width, height, maxval separated by whitespace, '#' comments
    fields = []
    pos = 2
    n = len(raw)
    while len(fields) < 3:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageReadError(f"{path}: truncated header")
        try:
            fields.append(int(raw[start:pos]))
        except ValueError:
            raise ImageReadError(f"{path}: bad header field {raw[start:pos]!r}") from None
    pos += 1  # exactly one whitespace byte before the raster
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ImageReadError(f"{path}: bad dimensions {width}x{height}")
    if maxval == 255:
        dtype, bits = np.dtype("u1"), 8
    elif maxval == 65535:
        dtype, bits = np.dtype(">u2"), 16
    else:
        raise UnsupportedImageError(f"{path}: maxval {maxval} (only 255 and 65535 are supported)")
    count = width * height * channels
    body = raw[pos:pos + count * dtype.itemsize]
    if len(body) != count * dtype.itemsize:
        raise ImageReadError(f"{path}: truncated raster")
    data = np.frombuffer(body, dtype=dtype).astype(np.float64) / (2 ** bits - 1)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return data.reshape(shape)


def _read_png(path) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "RGB"):
                return np.asarray(im, dtype=np.float64) / 255.0
            if mode in ("I;16", "I;16B", "I;16L"):
                return np.asarray(im, dtype=np.float64) / 65535.0
            if mode == "I":
                # Pillow reports 16-bit grayscale PNGs as 32-bit "I"
                arr = np.asarray(im, dtype=np.float64)
                if arr.min() >= 0 and arr.max() <= 65535:
                    return arr / 65535.0
            raise UnsupportedImageError(f"{path}: PNG mode {mode!r} not supported")
    except (OSError, SyntaxError) as exc:
        if isinstance(exc, UnsupportedImageError):
            raise
        raise ImageReadError(f"{path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Read a binary PGM/PPM (8 or 16 bit) or PNG file into a float image.

    A stored integer ``v`` of bit depth ``b`` becomes ``v / (2**b - 1)``.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ImageReadError(f"{path}: {exc.strerror or exc}") from exc
    if raw[:2] in _NETPBM_MAGIC:
        return _read_netpbm(raw, path)
    if raw[:2] in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedImageError(f"{path}: only binary P5/P6 netpbm files are supported")
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise ImageReadError(f"{path}: unrecognized image format")


def quantize(img, bit_depth: int = 8) -> np.ndarray:
    """Clamp to [0, 1] and round half up to integers of ``bit_depth`` bits."""
    if bit_depth not in (8, 16):
        raise UnsupportedImageError(f"bit depth {bit_depth} not supported")
    peak = 2 ** bit_depth - 1
    clamped = np.clip(as_image(img), 0.0, 1.0)
    return np.floor(clamped * peak + 0.5).astype(np.uint16 if bit_depth == 16 else np.uint8)


def save_image(img, path, bit_depth: int = 8) -> None:
    """Write ``img`` as PGM/PPM (or PNG when ``path`` ends in ``.png``)."""
    q = quantize(img, bit_depth)
    ext = os.path.splitext(str(path))[1].lower()
    try:
        if ext == ".png":
            _write_png(q, path, bit_depth)
            return
        magic = b"P5" if q.ndim == 2 else b"P6"
        height, width = q.shape[:2]
        header = b"%s\n%d %d\n%d\n" % (magic, width, height, 2 ** bit_depth - 1)
        body = q.astype(">u2").tobytes() if bit_depth == 16 else q.tobytes()
        with open(path, "wb") as fh:
            fh.write(header + body)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_png(q, path, bit_depth):
    from PIL import Image

    if bit_depth == 8:
        Image.fromarray(q).save(path)
    elif q.ndim == 2:
        Image.fromarray(q.astype(np.uint16)).save(path)
    else:
        raise UnsupportedImageError("16-bit RGB PNG is not supported; use PPM")
