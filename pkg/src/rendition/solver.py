"""Rendition: recover ``x*`` from ``y = f(x*)`` using only evaluations of ``f``.

The workhorse is the damped residual iteration

    x_{k+1} = (1 - gamma*mu) x_k - gamma (f(x_k) - y),    x_0 = y,

which needs one activation of ``f`` per step.  Two variants share the same
driver: ``exact_gradient`` replaces ``mu x`` by a finite-difference estimate
of ``(grad f(x) - I) x``, and ``red`` adds a denoiser-based regularizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .image import as_image, psnr
from .operators import BlackBoxOperator, as_operator

MODES = ("approximate", "exact_gradient", "red")
MU_FLOOR = 0.01


def derive_mu(m_hat: float, floor: float = MU_FLOOR, cap: float | None = None) -> float:
    """Damping from a Lipschitz estimate: ``max(|m_hat - 1|, floor)``.

    ``cap`` optionally bounds the result from above.  At a fixed point the
    relative residual is about ``mu``, so a residual stop at ``tau`` is only
    reachable when ``mu <= tau``; pass ``cap=tau`` to guarantee that.
    """
    if m_hat < 0:
        raise ValueError("m_hat must be >= 0")
    mu = max(abs(m_hat - 1.0), floor)
    if cap is not None:
        mu = min(mu, cap)
    return mu


def max_stable_step(mu: float, m_hat: float) -> float:
    """Supremum of step sizes with ``|1 - gamma mu| + gamma M < 1``; use strictly less."""
    if mu + m_hat <= 0:
        raise ValueError("mu + m_hat must be positive")
    return 2.0 / (mu + m_hat)


def suggested_iterations(gamma: float, m_hat: float) -> int:
    if gamma <= 0 or m_hat <= 0:
        raise ValueError("gamma and m_hat must be positive")
    return max(1, math.ceil(1.0 / (gamma * m_hat) - 1e-12))


def noise_amplification_bound(m_hat: float) -> float:
    """Worst-case growth ``exp((1 + M) / M)`` of an error in the observed image."""
    if m_hat <= 0:
        raise ValueError("m_hat must be positive")
    return math.exp((1.0 + m_hat) / m_hat)


def relative_residual(f, x, y) -> float:
    """``||f(x) - y|| / ||y||`` (one activation)."""
    y = np.asarray(y, dtype=np.float64)
    ny = np.linalg.norm(y)
    if ny == 0:
        raise ValueError("observed image has zero norm")
    return float(np.linalg.norm(as_operator(f)(x) - y) / ny)


def rendition_loss(x, fx, y) -> float:
    """``x.(f(x) - y) - x.x / 2`` from an iterate and its image under ``f``."""
    x = np.ravel(x)
    return float(x @ (np.ravel(fx) - np.ravel(y)) - 0.5 * (x @ x))


@dataclass
class SolverConfig:
    gamma: float = 0.15
    mu: float = MU_FLOOR
    tau: float = 1e-2
    max_iters: int = 200
    mode: str = "approximate"
    lam: float = 0.0
    epsilon: float = 1e-3
    record_trajectory: bool = True
    divergence_factor: float = 10.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.mu >= 0:
            raise ValueError("mu must be >= 0")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.lam and self.mode != "red":
            raise ValueError("lam is only meaningful in red mode")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    @classmethod
    def guarded(cls, m_hat: float, gamma: float = 0.15, mu: float | None = None, **kwargs) -> "SolverConfig":
        """Config whose step size satisfies the sufficient convergence condition."""
        if mu is None:
            mu = derive_mu(m_hat, cap=kwargs.get("tau"))
        bound = max_stable_step(mu, m_hat)
        if not gamma < bound:
            raise ValueError(f"gamma={gamma} violates gamma < 2/(mu + M) = {bound:.6g}")
        return cls(gamma=gamma, mu=mu, **kwargs)


@dataclass
class RenditionResult:
    estimate: np.ndarray
    iterations_run: int
    stop_reason: str
    residual_trajectory: list = field(default_factory=list)
    psnr_trajectory: Optional[list] = None
    activations_used: int = 0
    initial_residual: float = float("nan")
    best_iteration: int = 0
    final_iterate: Optional[np.ndarray] = None
    loss_trajectory: list = field(default_factory=list)
    initial_psnr: Optional[float] = None

    @property
    def best_residual(self) -> float:
        if self.best_iteration == 0:
            return self.initial_residual
        return self.residual_trajectory[self.best_iteration - 1]

    def to_dict(self) -> dict:
        out = {
            "stop_reason": self.stop_reason,
            "iterations": self.iterations_run,
            "activations": self.activations_used,
            "best_iteration": self.best_iteration,
            "initial_residual": self.initial_residual,
            "residuals": list(self.residual_trajectory),
            "psnrs": list(self.psnr_trajectory or []),
        }
        if self.initial_psnr is not None:
            out["initial_psnr"] = self.initial_psnr
        return out


class RenditionError(RuntimeError):
    """The operator failed mid-run; ``partial`` holds the trajectory so far."""

    def __init__(self, message, partial: RenditionResult):
        super().__init__(message)
        self.partial = partial


def _drive(f: BlackBoxOperator, y, cfg: SolverConfig, ground_truth, update):
    y = as_image(y)
    ny = float(np.linalg.norm(y))
    if ny == 0:
        raise ValueError("observed image has zero norm")
    truth = None if ground_truth is None else as_image(ground_truth)
    if truth is not None and truth.shape != y.shape:
        raise ValueError(f"ground truth shape {truth.shape} != observed shape {y.shape}")

    record = cfg.record_trajectory
    x = y.copy()
    fx = f(x)
    calls = 1
    r0 = float(np.linalg.norm(fx - y) / ny)
    result = RenditionResult(
        estimate=np.clip(x, 0.0, 1.0),
        iterations_run=0,
        stop_reason="max_iters",
        psnr_trajectory=[] if truth is not None else None,
        initial_residual=r0,
        initial_psnr=psnr(np.clip(x, 0.0, 1.0), truth) if truth is not None else None,
    )
    if record:
        result.loss_trajectory.append(rendition_loss(x, fx, y))
    best_r, best_x, best_k = r0, x, 0

    def finish(reason, k, last_x):
        result.stop_reason = reason
        result.iterations_run = k
        result.activations_used = calls
        result.best_iteration = best_k
        result.estimate = np.clip(best_x, 0.0, 1.0)
        result.final_iterate = last_x
        return result

    if r0 <= cfg.tau:
        return finish("converged", 0, x)

    for k in range(1, cfg.max_iters + 1):
        try:
            x, extra = update(x, fx)
            calls += extra
            fx = f(x)
            calls += 1
        except Exception as exc:
            raise RenditionError(f"operator failed at iteration {k}: {exc}", finish("error", k - 1, x)) from exc
        r = float(np.linalg.norm(fx - y) / ny)
        if record:
            result.residual_trajectory.append(r)
            result.loss_trajectory.append(rendition_loss(x, fx, y))
            if truth is not None:
                result.psnr_trajectory.append(psnr(np.clip(x, 0.0, 1.0), truth))
        if r < best_r:
            best_r, best_x, best_k = r, x, k
        if r <= cfg.tau:
            return finish("converged", k, x)
        if not math.isfinite(r) or r > cfg.divergence_factor * r0:
            return finish("diverged", k, x)
    return finish("max_iters", cfg.max_iters, x)


def render(f, y, cfg: SolverConfig | None = None, ground_truth=None) -> RenditionResult:
    """Approximate-gradient rendition (one activation per iteration).

    Iterates are not clamped; the returned ``estimate`` is the clamped
    iterate with the smallest relative residual, which may be ``x_0 = y``.
    """
    cfg = cfg or SolverConfig()
    op = as_operator(f)
    y_arr = as_image(y)
    damp = 1.0 - cfg.gamma * cfg.mu

    def update(x, fx):
        return damp * x - cfg.gamma * (fx - y_arr), 0

    return _drive(op, y_arr, cfg, ground_truth, update)


def render_exact(f, y, cfg: SolverConfig | None = None, ground_truth=None) -> RenditionResult:
    """Gradient descent on the rendition loss with a finite-difference ``grad f(x) . x``.

    Two activations per iteration: ``f(x_k + eps x_k)`` for the radial
    derivative and ``f(x_{k+1})`` for the residual.
    """
    cfg = cfg or SolverConfig(mode="exact_gradient")
    op = as_operator(f)
    y_arr = as_image(y)
    eps = cfg.epsilon

    def update(x, fx):
        radial = (op(x + eps * x) - fx) / eps
        grad = fx + radial - y_arr - x
        return x - cfg.gamma * grad, 1

    return _drive(op, y_arr, cfg, ground_truth, update)


def render_red(f, y, denoiser, cfg: SolverConfig | None = None, ground_truth=None) -> RenditionResult:
    """Rendition regularized by a denoiser ``s``.

    ``x_{k+1} = (1 - gamma (mu + lam)) x_k + gamma lam s(x_k) - gamma (f(x_k) - y)``.
    With ``lam = 0`` the trajectory is bitwise identical to :func:`render`.
    """
    cfg = cfg or SolverConfig(mode="red")
    op = as_operator(f)
    s = as_operator(denoiser)
    y_arr = as_image(y)
    damp = 1.0 - cfg.gamma * (cfg.mu + cfg.lam)
    pull = cfg.gamma * cfg.lam

    def update(x, fx):
        smooth = s(x)
        nxt = damp * x - cfg.gamma * (fx - y_arr)
        if pull:
            nxt = nxt + pull * smooth
        return nxt, 1

    return _drive(op, y_arr, cfg, ground_truth, update)


def solve(f, y, cfg: SolverConfig, denoiser=None, ground_truth=None) -> RenditionResult:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "approximate":
        return render(f, y, cfg, ground_truth)
    if cfg.mode == "exact_gradient":
        return render_exact(f, y, cfg, ground_truth)
    if denoiser is None:
        raise ValueError("red mode needs a denoiser")
    return render_red(f, y, denoiser, cfg, ground_truth)


# --------------------------------------------------------------------------
# linear case


class DenseLinearOperator(BlackBoxOperator):
    """``f(x) = W x`` on flattened images of a fixed shape."""

    def __init__(self, matrix, shape=None, label: str = "dense-linear"):
        w = np.array(matrix, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("W must be square")
        if not np.all(np.isfinite(w)):
            raise ValueError("W has non-finite entries")
        self.matrix = w
        self.n = w.shape[0]
        self.shape = tuple(shape) if shape is not None else (self.n,)
        if int(np.prod(self.shape)) != self.n:
            raise ValueError(f"shape {self.shape} does not have {self.n} samples")
        super().__init__(lambda x: (self.matrix @ x.reshape(-1)).reshape(x.shape), label)

    @classmethod
    def from_operator(cls, f, shape) -> "DenseLinearOperator":
        """Tabulate a (linear) operator by applying it to every basis image."""
        op = as_operator(f)
        n = int(np.prod(shape))
        cols = np.empty((n, n))
        basis = np.zeros(n)
        for j in range(n):
            basis[j] = 1.0
            cols[:, j] = op(basis.reshape(shape)).reshape(-1)
            basis[j] = 0.0
        return cls(cols, shape, label=f"dense({op.label})")


def closed_form_linear_iterate(W, x0, gamma: float, mu: float, k: int, y=None) -> np.ndarray:
    """k-th rendition iterate for ``f(x) = W x`` without running the solver.

    With ``B = (1 - gamma mu) I - gamma W`` the iteration is affine,
    ``x_{j+1} = B x_j + gamma y``, so

        x_k = B^k x_0 + gamma (I + B + ... + B^{k-1}) y.

    ``y`` defaults to ``x0`` (the solver starts from the observation).
    Evaluated with matrix-vector products only.
    """
    w = W.matrix if isinstance(W, DenseLinearOperator) else np.asarray(W, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    y = x0 if y is None else np.asarray(y, dtype=np.float64).reshape(-1)
    if w.shape != (x0.size, x0.size) or y.size != x0.size:
        raise ValueError(f"dimension mismatch: W {w.shape}, x0 {x0.size}, y {y.size}")
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha = 1.0 - gamma * mu

    def apply_b(v):
        return alpha * v - gamma * (w @ v)

    power_x0 = x0.copy()
    power_y = y.copy()
    geometric = np.zeros_like(y)
    for _ in range(k):
        geometric += power_y
        power_y = apply_b(power_y)
        power_x0 = apply_b(power_x0)
    return power_x0 + gamma * geometric
