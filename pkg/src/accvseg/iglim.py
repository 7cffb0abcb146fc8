"""Multi-phase inhomogeneous graph Laplacian initialization.

Edge pixels are found with a weighted 8-neighbour graph Laplacian, split into
``m`` intensity classes by K-means, cleaned by diagonal connectivity and
finally merged into ``n = ceil(log2 m)`` binary phase fields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NoEdgesError(ValueError):
    """Thresholding the graph Laplacian left no edge pixels."""


@dataclass(frozen=True)
class InitParams:
    kappa: float = 50.0
    sigma: float = 0.05
    M: int = 5
    m: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.kappa < 0 or self.sigma < 0 or self.M < 0:
            raise ValueError("kappa, sigma and M must be nonnegative")
        if self.m < 2:
            raise ValueError(f"need at least two phases, got m={self.m}")


# Row/column offsets of the neighbours l = 1..8, clockwise from the top-left.
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _neighbors(image):
    """Stack of shifted images, shape ``(8, M1, M2, omega)``, replicate padded."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        image = image[:, :, None]
    M1, M2 = image.shape[:2]
    p = np.pad(image, ((1, 1), (1, 1), (0, 0)), mode="edge")
    return image, np.stack([p[1 + di:1 + di + M1, 1 + dj:1 + dj + M2] for di, dj in NEIGHBOR_OFFSETS])


def neighbor_weight_field(image, kappa: float) -> np.ndarray:
    """Weights c_l for every pixel, shape ``(8, M1, M2)``; they sum to one per pixel."""
    image, nb = _neighbors(image)
    diff2 = (image[None] - nb) ** 2
    # exp(kappa d^2) with d^2 <= omega; shift by the per-pixel max for overflow safety
    expo = kappa * diff2
    expo -= expo.max(axis=(0, 3), keepdims=True)
    num = np.exp(expo).sum(axis=-1)
    return num / num.sum(axis=0, keepdims=True)


def neighbor_weights(image, pixel, kappa: float) -> np.ndarray:
    """The 8 weights of a single pixel ``(i, j)``."""
    i, j = pixel
    return neighbor_weight_field(image, kappa)[:, i, j]


def graph_laplacian(image, kappa: float) -> np.ndarray:
    """L(x0) = sum_l sum_r c_l (I_r^l - I_r); vanishes on constant images."""
    image, nb = _neighbors(image)
    c = neighbor_weight_field(image, kappa)
    return (c[..., None] * (nb - image[None])).sum(axis=(0, 3))


def threshold_edges(L, sigma: float) -> np.ndarray:
    return np.abs(np.asarray(L)) > sigma


def kmeans_phases(values, m: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd's K-means with farthest-point seeding.

    ``values`` has shape ``(N, omega)``.  Returns ``(labels, centroids)``;
    labels are ordered so that clusters are sorted by centroid norm, which
    keeps the output independent of which point seeded the search.
    """
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    if m < 1:
        raise ValueError("m must be >= 1")
    if N < m:
        raise ValueError(f"K-means needs at least m={m} points, got {N}")
    rng = np.random.default_rng(seed)

    centers = [X[rng.integers(N)]]
    dist = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, m):
        centers.append(X[int(np.argmax(dist))])
        dist = np.minimum(dist, ((X - centers[-1]) ** 2).sum(axis=1))
    centers = np.array(centers)

    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=-1)
        labels = d2.argmin(axis=1)
        new = centers.copy()
        for k in range(m):
            members = labels == k
            if members.any():
                new[k] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point worst served by its centre
                far = int(np.argmax(d2[np.arange(N), labels]))
                new[k] = X[far]
        shift = np.abs(new - centers).max()
        centers = new
        if shift <= tol:
            break
    d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=-1)
    labels = d2.argmin(axis=1)

    order = np.lexsort(centers.T[::-1])
    rank = np.empty(m, dtype=int)
    rank[order] = np.arange(m)
    return rank[labels], centers[order]


def kmeans_objective(values, labels) -> float:
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    total = 0.0
    for k in np.unique(labels):
        members = X[labels == k]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def diagonal_denoise(mask, M: int) -> np.ndarray:
    """Keep pixels that are diagonally connected; repeat ``M`` sweeps.

    A pixel survives a sweep iff both of its top-left and bottom-right corner
    triples, or both of its top-right and bottom-left triples, contain an
    edge pixel.  Pixels outside the grid count as non-edge.
    """
    out = np.asarray(mask, dtype=bool).copy()
    for _ in range(M):
        p = np.pad(out, 1)
        at = lambda di, dj: p[1 + di:1 + di + out.shape[0], 1 + dj:1 + dj + out.shape[1]]  # noqa: E731
        up, down, left, right = at(-1, 0), at(1, 0), at(0, -1), at(0, 1)
        s1 = at(-1, -1) | left | up
        s2 = at(-1, 1) | right | up
        s3 = at(1, -1) | left | down
        s4 = at(1, 1) | right | down
        new = out & ((s1 & s4) | (s2 & s3))
        if np.array_equal(new, out):
            break
        out = new
    return out


def multi_iglim(image, params: InitParams) -> list:
    """Edge masks ``v_1 .. v_m`` (ordered by K-means cluster, not perimeter)."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        image = image[:, :, None]
    L = graph_laplacian(image, params.kappa)
    edges = threshold_edges(L, params.sigma)
    if not edges.any():
        raise NoEdgesError(
            f"no pixel has |L| > sigma={params.sigma} (max |L| = {np.abs(L).max():.3g}); "
            "try a smaller sigma")
    idx = np.flatnonzero(edges)
    labels, _ = kmeans_phases(image.reshape(-1, image.shape[2])[idx], params.m, params.seed)
    masks = []
    for k in range(params.m):
        raw = np.zeros(edges.size, dtype=bool)
        raw[idx[labels == k]] = True
        masks.append(diagonal_denoise(raw.reshape(edges.shape), params.M))
    return masks


def code_order(n: int) -> list:
    """Codes handed out to masks sorted by ascending perimeter.

    The all-zero code goes first; the rest follow by decreasing number of set
    bits, then by decreasing bit pattern read with ``U_1`` as the leading bit.
    For ``n = 2`` this yields ``(0,0), (1,1), (1,0), (0,1)``.
    """
    def as_tuple(code):
        return tuple((code >> i) & 1 for i in range(n))

    rest = sorted(range(1, 2 ** n), key=lambda c: (-bin(c).count("1"), [-b for b in as_tuple(c)]))
    return [0] + rest


def n_phase_fields(m: int) -> int:
    return max(1, math.ceil(math.log2(m)))


def combine_phases(masks) -> np.ndarray:
    """Merge ``m`` edge masks into ``n = ceil(log2 m)`` binary phase fields.

    Masks are sorted by pixel count (ties keep input order); ``u_i`` is the
    union of the masks whose code has bit ``i`` set.
    """
    masks = [np.asarray(v, dtype=bool) for v in masks]
    m = len(masks)
    if m < 2:
        raise ValueError(f"need at least two masks, got {m}")
    n = n_phase_fields(m)
    sizes = [int(v.sum()) for v in masks]
    ranked = sorted(range(m), key=lambda k: sizes[k])
    codes = code_order(n)
    U = np.zeros((n,) + masks[0].shape)
    for slot, k in enumerate(ranked):
        code = codes[slot]
        for i in range(n):
            if (code >> i) & 1:
                U[i] += masks[k]
    return np.minimum(U, 1.0)
