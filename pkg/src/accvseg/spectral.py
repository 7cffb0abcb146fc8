"""Neumann finite-difference Laplacian, orthonormal 2D cosine transforms and
phi-function multipliers for exponential integrators."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

SERIES_CUTOFF = 1e-4

_ENV_THREADS = "ACCVSEG_NUM_THREADS"


def _workers():
    value = os.environ.get(_ENV_THREADS)
    return int(value) if value else None


def laplacian_apply(v, h: float = 1.0) -> np.ndarray:
    """5-point Laplacian with homogeneous Neumann rows (first/last diagonal -1)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {v.shape}")
    p = np.pad(v, 1, mode="edge")
    out = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * v
    return out / h ** 2


def neumann_eigenvalues(M: int) -> np.ndarray:
    """Eigenvalues ``-4 sin^2(k pi / 2M)`` of the 1D Neumann second-difference matrix."""
    k = np.arange(M)
    return -4.0 * np.sin(k * np.pi / (2 * M)) ** 2


def dct2_forward(v, axes=(-2, -1)) -> np.ndarray:
    return fft.dctn(v, type=2, norm="ortho", axes=axes, workers=_workers())


def dct2_inverse(c, axes=(-2, -1)) -> np.ndarray:
    return fft.idctn(c, type=2, norm="ortho", axes=axes, workers=_workers())


def _series(a, coeffs):
    out = np.zeros_like(a)
    for c in reversed(coeffs):
        out = out * a + c
    return out


# Taylor coefficients of phi_1 and phi_2 around 0 (five terms each).
_PHI1_SERIES = [1.0, -1 / 2, 1 / 6, -1 / 24, 1 / 120]
_PHI2_SERIES = [1 / 2, -1 / 6, 1 / 24, -1 / 120, 1 / 720]


def phi_scalar(j: int, a):
    """phi_0(a) = e^-a, phi_1(a) = (1 - e^-a)/a, phi_2(a) = (e^-a - 1 + a)/a^2.

    Accepts scalars or arrays of ``a >= 0``.
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0):
        raise ValueError("phi functions are only defined here for a >= 0")
    if j == 0:
        out = np.exp(-a_arr)
    elif j in (1, 2):
        small = a_arr < SERIES_CUTOFF
        safe = np.where(small, 1.0, a_arr)
        if j == 1:
            direct = -np.expm1(-safe) / safe
            series = _series(a_arr, _PHI1_SERIES)
        else:
            direct = (np.expm1(-safe) + safe) / safe ** 2
            series = _series(a_arr, _PHI2_SERIES)
        out = np.where(small, series, direct)
    else:
        raise ValueError(f"phi index must be 0, 1 or 2, got {j}")
    return float(out) if np.ndim(a) == 0 else out


@dataclass(frozen=True)
class SpectralPlan:
    """Cached eigenvalues of ``dt * L_h`` with ``L_h = -2 eps D_h + S`` and the
    phi multipliers in the cosine basis."""

    shape: tuple
    h: float
    S: float
    epsilon: float
    dt: float
    eigenvalues: np.ndarray = field(init=False, repr=False)
    multipliers: tuple = field(init=False, repr=False)

    def __post_init__(self):
        M1, M2 = self.shape
        d = (neumann_eigenvalues(M1)[:, None] + neumann_eigenvalues(M2)[None, :]) / self.h ** 2
        a = self.dt * (-2.0 * self.epsilon * d + self.S)
        a.setflags(write=False)
        mult = tuple(phi_scalar(j, a) for j in range(3))
        for m in mult:
            m.setflags(write=False)
        object.__setattr__(self, "eigenvalues", a)
        object.__setattr__(self, "multipliers", mult)

    def check(self, v):
        if np.shape(v)[-2:] != tuple(self.shape):
            raise ValueError(f"field shape {np.shape(v)} does not match plan {self.shape}")


def apply_phi(j: int, plan: SpectralPlan, v) -> np.ndarray:
    """phi_j(dt L_h) v via the cosine transform; ``v`` may carry leading axes."""
    plan.check(v)
    return dct2_inverse(plan.multipliers[j] * dct2_forward(np.asarray(v, dtype=float)))


def laplacian_matrix(M1: int, M2: int, h: float = 1.0) -> np.ndarray:
    """Dense D_h acting on row-major flattened ``(M1, M2)`` fields; for small oracles."""
    def lam(M):
        A = -2 * np.eye(M) + np.eye(M, k=1) + np.eye(M, k=-1)
        A[0, 0] = A[-1, -1] = -1
        if M == 1:
            A[0, 0] = 0
        return A

    return (np.kron(lam(M1), np.eye(M2)) + np.kron(np.eye(M1), lam(M2))) / h ** 2


def dense_phi(j: int, plan: SpectralPlan, v) -> np.ndarray:
    """Reference phi_j(dt L_h) v from a dense matrix exponential; small grids only.

    Uses ``phi_1(A) = A^-1 (I - e^-A)`` and ``phi_2(A) = A^-2 (e^-A - I + A)``,
    which are well posed because ``A = dt L_h`` is positive definite when S > 0.
    """
    from scipy import linalg

    M1, M2 = plan.shape
    if M1 * M2 > 4096:
        raise ValueError("dense_phi is meant for small grids")
    plan.check(v)
    I = np.eye(M1 * M2)
    A = plan.dt * (-2.0 * plan.epsilon * laplacian_matrix(M1, M2, plan.h) + plan.S * I)
    E = linalg.expm(-A)
    if j == 0:
        F = E
    elif j == 1:
        F = linalg.solve(A, I - E, assume_a="sym")
    elif j == 2:
        F = linalg.solve(A, linalg.solve(A, E - I + A, assume_a="sym"), assume_a="sym")
    else:
        raise ValueError(f"phi index must be 0, 1 or 2, got {j}")
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, M1 * M2)
    return (flat @ F.T).reshape(v.shape)
