"""Image decoding and the artifacts written by the command-line tool."""
from __future__ import annotations

import csv
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED_FORMATS = ("PNG", "PPM")  # Pillow reports PGM files as PPM

# Label colors by region code.  Code 0 is black so an unused code is obvious.
PALETTE = np.array([
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [255, 255, 255],
], dtype=np.uint8)

# Interface colors per field; the first two are green and red.
CONTOUR_COLORS = np.array([
    [0, 255, 0],
    [255, 0, 0],
    [0, 0, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
], dtype=np.uint8)


class ImageIOError(OSError):
    """An image could not be read or is in an unsupported format."""


def load_image(path, rescale=None) -> np.ndarray:
    """Read an 8-bit PNG/PGM/PPM into ``(M1, M2, omega)`` floats in [0, 1].

    ``rescale`` is an optional ``(rows, cols)`` target for bilinear resampling.
    """
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise ImageIOError(f"{path}: no such file") from None
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"{path}: cannot decode image ({exc})") from None
    if img.format not in SUPPORTED_FORMATS:
        raise ImageIOError(f"{path}: unsupported format {img.format}; expected PNG, PGM or PPM")
    if img.mode in ("1", "P"):
        img = img.convert("RGB" if img.mode == "P" else "L")
    if img.mode not in ("L", "RGB"):
        raise ImageIOError(f"{path}: unsupported {img.format} mode {img.mode}; expected 8-bit gray or RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if rescale is not None:
        arr = rescale_image(arr, rescale)
    return arr


def rescale_image(image, shape) -> np.ndarray:
    """Bilinear resampling of every channel to ``shape = (rows, cols)``."""
    rows, cols = (int(s) for s in shape)
    if rows < 2 or cols < 2:
        raise ValueError(f"rescale target must be at least 2x2, got {shape}")
    chans = [np.asarray(Image.fromarray(np.ascontiguousarray(image[:, :, c], dtype=np.float32), mode="F")
                        .resize((cols, rows), Image.BILINEAR), dtype=np.float64)
             for c in range(image.shape[2])]
    return np.clip(np.stack(chans, axis=-1), 0.0, 1.0)


def to_uint8(values) -> np.ndarray:
    return np.clip(np.rint(np.asarray(values, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def label_rgb(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= len(PALETTE):
        raise ValueError(f"labels must be in [0, {len(PALETTE)}) for the fixed palette")
    return PALETTE[labels]


def contour_rgb(image, contours) -> np.ndarray:
    """Overlay per-field interface masks ``(n, M1, M2)`` on the image."""
    image = np.asarray(image, dtype=float)
    base = to_uint8(image)
    rgb = np.repeat(base, 3, axis=2) if base.shape[2] == 1 else base.copy()
    for i, mask in enumerate(np.asarray(contours, dtype=bool)):
        rgb[mask] = CONTOUR_COLORS[i % len(CONTOUR_COLORS)]
    return rgb


def write_png(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")


def write_energy_csv(path, trace):
    trace.to_csv(path)


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def publish(files: dict, outdir) -> list:
    """Write every artifact into a scratch directory, then move them into
    ``outdir``.  Nothing appears in ``outdir`` if any writer fails.

    ``files`` maps a file name to a callable taking the target path.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".seg-", dir=outdir))
    try:
        for name, writer in files.items():
            writer(scratch / name)
        written = []
        for name in files:
            os.replace(scratch / name, outdir / name)
            written.append(outdir / name)
        return written
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def read_energy_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
