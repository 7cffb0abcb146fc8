"""Allen-Cahn Chan-Vese energy: potentials, regularized step functions,
region indicators, fitting term, forces, region means and the discrete energy.

Conventions
-----------
* An image is an array of shape ``(M1, M2, omega)`` with values in [0, 1].
* A phase stack is an array of shape ``(n, M1, M2)``.
* Region codes are integers in ``[0, 2**n)``; bit ``i`` of a code is 1 iff the
  region lies on the ``U_i > 1/2`` side.  For ``n = 2`` this maps the classic
  four-phase names as ``C11 -> 3``, ``C12 -> 1``, ``C21 -> 2``, ``C22 -> 0``.
* Region means are an array of shape ``(2**n, omega)`` indexed by code.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import laplacian_apply

MASS_FRACTION = 1e-8


class EmptyRegionWarning(UserWarning):
    """A region had (numerically) zero mass; its mean was not updated."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar knobs of the model and of the time stepper.

    ``p`` fixes the Heaviside half-width through ``eps1 = 1 / (2 p)``.
    ``mbp_mode`` is ``"user-S"`` (use ``S`` as given) or ``"enforce-gamma"``
    (raise ``S`` to the stabilizer bound before planning).
    """

    epsilon: float = 4.0
    lam: float = 40.0
    p: int = 3
    h: float = 1.0
    S: float = 120.0
    dt: float = 0.3
    tol_steady: float = 1e-4
    tol_outer: float = 1e-3
    max_inner: int = 500
    max_outer: int = 50
    mbp_mode: str = "user-S"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if int(self.p) != self.p or self.p < 3 or self.p % 2 == 0:
            raise ValueError(f"p must be an odd integer >= 3, got {self.p}")
        for name in ("h", "S", "dt", "tol_steady", "tol_outer"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.mbp_mode not in ("user-S", "enforce-gamma"):
            raise ValueError(f"unknown mbp_mode {self.mbp_mode!r}")

    @property
    def eps1(self) -> float:
        return 1.0 / (2 * self.p)

    def effective_S(self, n_channels: int) -> float:
        if self.mbp_mode == "enforce-gamma":
            return max(self.S, stabilizer_bound(self.epsilon, self.lam, n_channels, self.eps1))
        return self.S


def double_well(u):
    """W(u) = u^2 (u - 1)^2."""
    return u ** 2 * (u - 1) ** 2


def double_well_deriv(u):
    """w(u) = W'(u) = 2u (2u - 1)(u - 1)."""
    return 2 * u * (2 * u - 1) * (u - 1)


def heaviside_reg(u, eps1: float):
    """Sine-regularized Heaviside, exactly 0 below ``-eps1`` and 1 above ``eps1``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        return heaviside_reg(u.reshape(1), eps1)[0]
    out = (u > eps1).astype(float)
    band = np.abs(u) <= eps1
    if band.any():
        ub = u[band]
        out[band] = 0.5 / eps1 * (ub + eps1 / np.pi * np.sin(np.pi * ub / eps1)) + 0.5
    return out


def dirac_reg(u, eps1: float):
    """Derivative of :func:`heaviside_reg`; supported on ``|u| <= eps1``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        return dirac_reg(u.reshape(1), eps1)[0]
    out = np.zeros(u.shape)
    band = np.abs(u) <= eps1
    if band.any():
        out[band] = 0.5 / eps1 * (1 + np.cos(np.pi * u[band] / eps1))
    return out


def code_bits(n: int) -> np.ndarray:
    """Boolean table of shape ``(2**n, n)``; row ``b`` holds the bits of code ``b``."""
    codes = np.arange(2 ** n)
    return ((codes[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def _factors(U, eps1):
    H = heaviside_reg(np.asarray(U) - 0.5, eps1)
    return H, 1.0 - H


def region_indicator(b: int, U, eps1: float):
    """Smoothed indicator Q_b of region code ``b``; works on a pixel vector
    ``(n,)`` or a full stack ``(n, M1, M2)``."""
    U = np.asarray(U, dtype=float)
    n = U.shape[0]
    if not 0 <= b < 2 ** n:
        raise ValueError(f"code {b} out of range for n={n}")
    H, Hc = _factors(U, eps1)
    Q = np.ones(U.shape[1:])
    for i in range(n):
        Q = Q * (H[i] if (b >> i) & 1 else Hc[i])
    return Q


def region_indicators(U, eps1: float) -> np.ndarray:
    """All indicators stacked, shape ``(2**n, ...)``."""
    U = np.asarray(U, dtype=float)
    return np.stack([region_indicator(b, U, eps1) for b in range(2 ** U.shape[0])])


def _check_shapes(U, C, image):
    U = np.asarray(U, dtype=float)
    image = np.asarray(image, dtype=float)
    C = np.asarray(C, dtype=float)
    if image.ndim != 3:
        raise ValueError(f"image must have shape (M1, M2, omega), got {image.shape}")
    if U.ndim != 3 or U.shape[1:] != image.shape[:2]:
        raise ValueError(f"phase stack shape {U.shape} does not match image {image.shape}")
    if C.shape != (2 ** U.shape[0], image.shape[2]):
        raise ValueError(
            f"region means must have shape {(2 ** U.shape[0], image.shape[2])}, got {C.shape}")
    return U, C, image


def squared_residuals(C, image) -> np.ndarray:
    """d_b = sum_r (I_r - C_b(r))^2 for every code, shape ``(2**n, M1, M2)``."""
    return ((image[None, :, :, :] - C[:, None, None, :]) ** 2).sum(axis=-1)


def fitting_term(U, C, image, lam: float, eps1: float) -> np.ndarray:
    """Per-pixel Chan-Vese fitting density ``lam * sum_b d_b Q_b``."""
    U, C, image = _check_shapes(U, C, image)
    Q = region_indicators(U, eps1)
    return lam * (squared_residuals(C, image) * Q).sum(axis=0)


def update_means(U, image, eps1: float, previous=None) -> np.ndarray:
    """Closed-form minimizer of the fitting term over the region means.

    Regions whose total indicator mass is below ``1e-8 * M1 * M2`` keep
    their ``previous`` value (or NaN-free zeros if none is given) and an
    :class:`EmptyRegionWarning` is issued.
    """
    U = np.asarray(U, dtype=float)
    image = np.asarray(image, dtype=float)
    if U.ndim != 3 or image.ndim != 3 or U.shape[1:] != image.shape[:2]:
        raise ValueError(f"phase stack shape {U.shape} does not match image {image.shape}")
    n_codes, omega = 2 ** U.shape[0], image.shape[2]
    Q = region_indicators(U, eps1)
    mass = Q.reshape(n_codes, -1).sum(axis=1)
    weighted = Q.reshape(n_codes, -1) @ image.reshape(-1, omega)
    if previous is None:
        C = np.zeros((n_codes, omega))
    else:
        C = np.array(previous, dtype=float, copy=True)
        if C.shape != (n_codes, omega):
            raise ValueError(f"previous means have shape {C.shape}, expected {(n_codes, omega)}")
    threshold = MASS_FRACTION * image.shape[0] * image.shape[1]
    ok = mass >= threshold
    C[ok] = weighted[ok] / mass[ok, None]
    if not ok.all():
        warnings.warn(f"empty regions {np.flatnonzero(~ok).tolist()}: means kept",
                      EmptyRegionWarning, stacklevel=2)
    return C


def force_stack(U, residuals, lam: float, eps1: float) -> np.ndarray:
    """Forces for every field from precomputed :func:`squared_residuals`.

    ``f_i = lam * delta(U_i - 1/2) * sum_{b: b_i = 1} (d_b - d_{b ^ 2^i})
    * prod_{j != i} [H(U_j - 1/2) or 1 - H(U_j - 1/2)]``.
    """
    U = np.asarray(U, dtype=float)
    n = U.shape[0]
    H, Hc = _factors(U, eps1)
    out = np.empty_like(U)
    for i in range(n):
        bit = 1 << i
        acc = np.zeros(U.shape[1:])
        for b in range(2 ** n):
            if not b & bit:
                continue
            term = residuals[b] - residuals[b ^ bit]
            for j in range(n):
                if j != i:
                    term = term * (H[j] if (b >> j) & 1 else Hc[j])
            acc += term
        out[i] = lam * dirac_reg(U[i] - 0.5, eps1) * acc
    return out


def force(i: int, U, C, image, lam: float, eps1: float) -> np.ndarray:
    """Derivative of the summed fitting term with respect to ``U_i``."""
    U, C, image = _check_shapes(U, C, image)
    if not 0 <= i < U.shape[0]:
        raise IndexError(f"phase index {i} out of range for n={U.shape[0]}")
    return force_stack(U, squared_residuals(C, image), lam, eps1)[i]


def forces(U, C, image, lam: float, eps1: float) -> np.ndarray:
    """All forces stacked, shape ``(n, M1, M2)``."""
    U, C, image = _check_shapes(U, C, image)
    return force_stack(U, squared_residuals(C, image), lam, eps1)


def discrete_energy(U, C, image, params: ModelParams) -> float:
    """E_h = sum_pixels [sum_i W(U_i)/eps + F] - sum_i eps U_i^T D_h U_i."""
    U, C, image = _check_shapes(U, C, image)
    eps = params.epsilon
    bulk = double_well(U).sum() / eps + fitting_term(U, C, image, params.lam, params.eps1).sum()
    grad = sum(float(np.vdot(u, laplacian_apply(u, params.h))) for u in U)
    return float(bulk - eps * grad)


def stabilizer_bound(epsilon: float, lam: float, omega: int, eps1: float) -> float:
    """gamma = 2/eps + 2 omega lam pi / eps1^2; any S >= gamma keeps iterates in [0, 1]."""
    if epsilon <= 0 or lam < 0 or omega <= 0 or eps1 <= 0:
        raise ValueError("stabilizer_bound needs epsilon, omega, eps1 > 0 and lam >= 0")
    return 2.0 / epsilon + 2.0 * omega * lam * math.pi / eps1 ** 2
