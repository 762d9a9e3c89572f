"""Undo a Gaussian blur we are only allowed to call, never to inspect.

The solver sees nothing but ``f``.  It starts from the blurry observation and
keeps nudging the estimate until re-blurring it reproduces what was seen.
Pass an output directory to also write the three images as PGM files.
"""

import sys
from pathlib import Path

import numpy as np

from rendition import SolverConfig, derive_mu, estimate_lipschitz, psnr, render, save_image
from rendition.operators import build_operator
from rendition.testimage import procedural_image

truth = procedural_image(256, seed=0)
f = build_operator("gauss:size=5,sigma=1")
observed = f(truth)

m = estimate_lipschitz(f).m_hat
cfg = SolverConfig(gamma=0.15, mu=derive_mu(m, cap=1e-2), tau=1e-2)
f.reset_activations()
result = render(f, observed, cfg, ground_truth=truth)

print(f"M-hat {m:.3f}, mu {cfg.mu:.3f}")
print(f"stopped: {result.stop_reason} after {result.iterations_run} iterations, "
      f"{result.activations_used} activations")
print(f"PSNR blurred   {psnr(np.clip(observed, 0, 1), truth):6.2f} dB")
print(f"PSNR rendered  {psnr(result.estimate, truth):6.2f} dB")
for k in (1, 5, 10, 20, 40):
    if k <= len(result.residual_trajectory):
        print(f"  iteration {k:3d}: residual {result.residual_trajectory[k - 1]:.4f}, "
              f"PSNR {result.psnr_trajectory[k - 1]:.2f}")

if len(sys.argv) > 1:
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    for name, img in (("truth", truth), ("blurred", observed), ("rendered", result.estimate)):
        save_image(img, out / f"{name}.pgm", 8)
    print(f"images written to {out}")
