"""Synthetic piecewise-constant test images with known ground truth."""
from __future__ import annotations

import numpy as np

FOUR_BLOCK_LEVELS = (0.05, 0.5, 0.7, 0.9)


def make_four_blocks(size=64, levels=FOUR_BLOCK_LEVELS, noise_var=0.0, seed=0, clip=True):
    """Four quadrants of constant gray level.

    Returns ``(image, truth)`` where ``image`` has shape ``(size, size, 1)`` and
    ``truth`` holds the quadrant index 0..3 (top-left, top-right,
    bottom-left, bottom-right).
    """
    rows = np.arange(size)[:, None] >= size // 2
    cols = np.arange(size)[None, :] >= size // 2
    truth = (2 * rows + cols).astype(int)
    image = np.asarray(levels, dtype=float)[truth]
    if noise_var > 0:
        image = image + np.random.default_rng(seed).normal(0.0, np.sqrt(noise_var), image.shape)
        if clip:
            image = np.clip(image, 0.0, 1.0)
    return image[:, :, None], truth


def make_shapes(size=128, levels=(0.05, 0.35, 0.65, 0.95)):
    """Background, a disk, a heart and an arch in four gray levels.

    The shapes do not touch; ``truth`` is 0 for background, 1 disk,
    2 heart, 3 arch.
    """
    y, x = np.mgrid[0:size, 0:size] / size
    truth = np.zeros((size, size), dtype=int)

    disk = (x - 0.28) ** 2 + (y - 0.3) ** 2 < 0.17 ** 2
    truth[disk] = 1

    # implicit heart curve (x^2 + y^2 - 1)^3 - x^2 y^3 < 0, scaled and flipped
    hx = (x - 0.72) / 0.2
    hy = -(y - 0.33) / 0.2
    heart = (hx ** 2 + hy ** 2 - 1) ** 3 - hx ** 2 * hy ** 3 < 0
    truth[heart] = 2

    r = np.hypot(x - 0.5, y - 0.92)
    arch = (r > 0.17) & (r < 0.3) & (y < 0.9)
    truth[arch] = 3

    image = np.asarray(levels, dtype=float)[truth]
    return image[:, :, None], truth
