"""Image and disparity file loading/saving.

Color images: PNG or JPEG.  Disparity: 16-bit grayscale PNG (value/65535)
or PFM (32-bit float, rescaled to [0, 1] by the maximum).
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError
from .ldi import DisparityImage


def load_color(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG as float32 (H, W, 3) in [0, 1]."""
    try:
        img = Image.open(path)
    except OSError as e:
        raise InputError(f"cannot read color image {path}: {e}") from e
    img = img.convert("RGB")
    return np.asarray(img, dtype=np.float32) / 255.0


def save_color(path: str | Path, image: np.ndarray, quality: int = 95) -> None:
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    img = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8))
    img.save(path, quality=quality)


def load_disparity(path: str | Path) -> DisparityImage:
    """Load disparity from a 16-bit grayscale PNG or a PFM file."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        return DisparityImage(_read_pfm(path))
    try:
        img = Image.open(path)
    except OSError as e:
        raise InputError(f"cannot read disparity image {path}: {e}") from e
    if img.mode == "I;16":
        arr = np.asarray(img, dtype=np.float32) / 65535.0
    elif img.mode == "I":
        arr = np.asarray(img, dtype=np.float32) / 65535.0
    elif img.mode in ("L", "P"):
        arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    else:
        # Color input: average channels, assume 8-bit scale.
        arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return DisparityImage(np.clip(arr, 0.0, 1.0))


def save_disparity_png(path: str | Path, disp: DisparityImage) -> None:
    """Write disparity as 16-bit grayscale PNG."""
    arr = (np.clip(disp.data, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(arr, mode="I;16").save(path)


def _read_pfm(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().decode("latin-1").strip()
        if header not in ("Pf", "PF"):
            raise InputError(f"{path}: not a PFM file (header {header!r})")
        dims = f.readline().decode("latin-1")
        m = re.match(r"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise InputError(f"{path}: malformed PFM dimensions {dims!r}")
        w, h = int(m.group(1)), int(m.group(2))
        scale = float(f.readline().decode("latin-1").strip())
        endian = "<" if scale < 0 else ">"
        count = w * h * (3 if header == "PF" else 1)
        data = np.frombuffer(f.read(count * 4), dtype=endian + "f4", count=count)
    if header == "PF":
        data = data.reshape(h, w, 3).mean(axis=2)
    else:
        data = data.reshape(h, w)
    data = np.flipud(data).astype(np.float32)  # PFM stores bottom-up
    data = np.nan_to_num(data, nan=0.0, posinf=0.0, neginf=0.0)
    data = np.maximum(data, 0.0)
    peak = data.max()
    if peak > 0:
        data = data / peak
    return data


def save_pfm(path: str | Path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{data.shape[1]} {data.shape[0]}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(data).astype("<f4").tobytes())


def bilinear_resize(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinearly resample a 2-D array to (height, width).

    Used to bring a coarse disparity map up to color resolution before
    lifting; align-corners sampling so border values are preserved.
    """
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    if (h, w) == (height, width):
        return arr.astype(np.float32)
    ys = np.linspace(0.0, h - 1.0, height)
    xs = np.linspace(0.0, w - 1.0, width)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)
