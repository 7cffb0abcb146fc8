"""Input checks shared by the estimators, the driver and the CLI."""
from __future__ import annotations

import numpy as np


def check_image(image, name: str = "image") -> np.ndarray:
    """Return ``image`` as a float array of shape ``(M1, M2, omega)``.

    A 2-D array is treated as grayscale.  ``omega`` must be 1 or 3 and every
    value finite and inside [0, 1].
    """
    arr = np.asarray(image, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"{name} must be at least 2x2, got {arr.shape[:2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1], got [{arr.min():.3g}, {arr.max():.3g}]")
    return arr


def check_phase_stack(U, shape=None, name: str = "phase stack") -> np.ndarray:
    """Return ``U`` as a float ``(n, M1, M2)`` array with values in [0, 1]."""
    arr = np.asarray(U, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError(f"{name} must have shape (n, M1, M2), got {arr.shape}")
    if shape is not None and arr.shape[1:] != tuple(shape):
        raise ValueError(f"{name} grid {arr.shape[1:]} does not match {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_region_means(C, n: int, omega: int) -> np.ndarray:
    arr = np.asarray(C, dtype=float)
    if arr.shape != (2 ** n, omega):
        raise ValueError(f"region means must have shape {(2 ** n, omega)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("region means contain non-finite values")
    return arr


def check_scheme(scheme: str) -> str:
    from .etd import SCHEMES
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return scheme
