"""Procedural grayscale target used by the experiment harness and tests.

Smooth gradients for the blur cases, soft-edged shapes for the edge-aware
filters, a textured patch, and scattered single-pixel impulses that a
median filter removes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage as ndi


def procedural_image(n: int = 256, seed: int = 0) -> np.ndarray:
    """Deterministic ``n x n`` test image with samples in ``[0, 1]``."""
    if n < 32:
        raise ValueError("procedural image needs n >= 32")
    rng = np.random.default_rng(seed)
    yy, xx = (np.mgrid[0:n, 0:n] + 0.5) / n
    img = 0.3 + 0.35 * xx + 0.15 * np.sin(2 * np.pi * yy) * np.cos(np.pi * xx)

    shapes = np.zeros((n, n))
    shapes[(xx - 0.3) ** 2 + (yy - 0.28) ** 2 < 0.025] = 0.3
    shapes[(yy > 0.62) & (yy < 0.88) & (xx > 0.08) & (xx < 0.42)] = -0.2
    wedge = (yy > 0.1) & (yy < 0.45) & (xx > 0.55) & (xx < 0.92) & (yy - 0.1 > (xx - 0.55) * 0.5)
    shapes[wedge] = 0.25
    img += ndi.gaussian_filter(shapes, 0.8)

    tex = ndi.gaussian_filter(rng.standard_normal((n, n)), 1.2)
    tex *= 0.2 / tex.std()
    patch = (xx > 0.55) & (xx < 0.92) & (yy > 0.55) & (yy < 0.92)
    img[patch] += tex[patch]

    n_imp = max(1, (120 * n * n) // (256 * 256))
    rows, cols = rng.integers(8, n - 8, (2, n_imp))
    img[rows, cols] += rng.choice([-0.35, 0.35], n_imp)
    return np.clip(img, 0.0, 1.0)
