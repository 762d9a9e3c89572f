"""Empirical Lipschitz estimates and finite-difference derivative probes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .operators import as_operator


@dataclass(frozen=True)
class ProbeConfig:
    """Sampling setup for :func:`estimate_lipschitz`.

    ``epsilon`` scales the random direction: each probe compares ``f(x)``
    with ``f(x + epsilon * d)`` for ``x, d ~ U[0, 1]^N``.  ``epsilon = 1``
    uses full-size steps, so ``x + d`` spans ``[0, 2]``.
    """

    epsilon: float = 1e-2
    n_samples: int = 200
    shape: tuple = (64, 64)
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))


@dataclass(frozen=True)
class LipschitzEstimate:
    m_hat: float
    n_samples: int
    seed: int
    shape: tuple
    argmax_ratio_seed_index: int
    epsilon: float = 1e-2

    def to_dict(self):
        return {
            "m_hat": self.m_hat,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "shape": list(self.shape),
            "epsilon": self.epsilon,
            "argmax_index": self.argmax_ratio_seed_index,
        }


def _draw(cfg: ProbeConfig):
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.n_samples):
        x = rng.random(cfg.shape)
        d = rng.random(cfg.shape)
        yield x, x + cfg.epsilon * d


def estimate_lipschitz(f, cfg: ProbeConfig | None = None, max_workers: int = 1) -> LipschitzEstimate:
    """Largest observed ``||f(x') - f(x)|| / ||x' - x||`` over random pairs.

    Uses exactly ``2 * n_samples`` activations.  The step is measured as the
    realized ``x' - x`` so that the identity gives exactly 1.  Ratios are
    reduced in sample order, so the result does not depend on ``max_workers``.
    """
    cfg = cfg or ProbeConfig()
    op = as_operator(f)

    def ratio(pair):
        x, xp = pair
        step = np.linalg.norm(xp - x)
        return float(np.linalg.norm(op(xp) - op(x)) / step)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            ratios = list(pool.map(ratio, _draw(cfg)))
    else:
        ratios = [ratio(p) for p in _draw(cfg)]
    best = int(np.argmax(ratios))
    return LipschitzEstimate(ratios[best], cfg.n_samples, cfg.seed, cfg.shape, best, cfg.epsilon)


def directional_derivative(f, x, d, epsilon: float) -> np.ndarray:
    """Forward difference ``(f(x + eps d) - f(x)) / eps``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.shape != d.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {d.shape}")
    op = as_operator(f)
    return (op(x + epsilon * d) - op(x)) / epsilon


def radial_derivative(f, x, epsilon: float) -> np.ndarray:
    """Directional derivative along ``x`` itself, approximating ``grad f(x) . x``."""
    return directional_derivative(f, x, x, epsilon)


def check_null_preservation(f, shape) -> float:
    """Max absolute sample of ``f`` applied to the zero image."""
    op = as_operator(f)
    return float(np.max(np.abs(op(np.zeros(shape)))))
