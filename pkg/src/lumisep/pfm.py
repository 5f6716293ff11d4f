"""PFM float images (lossless interchange) and sRGB preview PNGs.

PFM: ASCII header "PF\\n<w> <h>\\n<scale>\\n" followed by float32 rows
stored bottom-up; negative scale marks little-endian data.  Grayscale
("Pf") files are read and broadcast to three channels.
"""

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, MalformedHeader, TruncatedData


def _read_token(fh):
    tok = b""
    while True:
        c = fh.read(1)
        if not c:
            raise MalformedHeader("unexpected end of PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into an (H, W, 3) float array."""
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic not in (b"PF", b"Pf"):
            raise MalformedHeader(f"{path}: not a PFM file (magic {magic!r})")
        try:
            width = int(_read_token(fh))
            height = int(_read_token(fh))
            scale = float(_read_token(fh))
        except ValueError as exc:
            raise MalformedHeader(f"{path}: bad PFM header") from exc
        if width <= 0 or height <= 0 or scale == 0:
            raise MalformedHeader(f"{path}: bad PFM dimensions or scale")
        channels = 3 if magic == b"PF" else 1
        count = width * height * channels
        raw = fh.read(count * 4)
        if len(raw) != count * 4:
            raise TruncatedData(
                f"{path}: {len(raw)} payload bytes, expected {count * 4}"
            )
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    img = data.reshape(height, width, channels)[::-1]  # rows are bottom-up
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    return np.ascontiguousarray(img)


def write_pfm(image, path):
    """Write an (H, W, 3) array as little-endian color PFM."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionMismatch(f"PFM writer expects (H, W, 3), got {arr.shape}")
    h, w, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(arr[::-1].astype("<f4").tobytes())


def srgb_encode(linear):
    """Exact sRGB transfer function on values in [0, 1]."""
    lin = np.asarray(linear, dtype=float)
    return np.where(
        lin <= 0.0031308,
        12.92 * lin,
        1.055 * np.power(np.clip(lin, 0.0031308, None), 1.0 / 2.4) - 0.055,
    )


def tonemap_bytes(image, exposure: float = 1.0) -> np.ndarray:
    """clamp(v * exposure, 0, 1) -> sRGB -> uint8."""
    if exposure <= 0:
        raise ValueError("exposure must be positive")
    clipped = np.clip(np.asarray(image, dtype=float) * exposure, 0.0, 1.0)
    return np.round(srgb_encode(clipped) * 255.0).astype(np.uint8)


def write_preview_png(image, path, exposure: float = 1.0):
    arr = tonemap_bytes(image, exposure)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    Image.fromarray(arr, mode="RGB").save(path)


def auto_exposure(image, percentile: float = 99.0) -> float:
    """Exposure mapping the given percentile to 1.0 (for previews)."""
    ref = float(np.percentile(np.asarray(image), percentile))
    return 1.0 / ref if ref > 0 else 1.0
