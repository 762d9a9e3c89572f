"""Experiment runner: degrade, render, estimate, batch suites, metrics.

Every command returns plain data (dicts or :class:`ExperimentReport`) and
writes files only where asked, so the CLI is a thin layer on top.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .image import NoiseSpec, add_noise, load_image, mse, psnr, save_image
from .lipschitz import ProbeConfig, estimate_lipschitz
from .operators import OperatorSpec, SpecParseError, build_operator, parse_spec
from .solver import SolverConfig, derive_mu, solve
from .testimage import procedural_image

PROCEDURAL = "procedural"


def load_input(ref, base_dir=None) -> np.ndarray:
    """Load an image file, or build the procedural target.

    ``procedural`` gives the default 256x256 image; ``procedural:N`` an NxN one.
    Relative paths resolve against ``base_dir`` when given.
    """
    ref = str(ref)
    if ref == PROCEDURAL or ref.startswith(PROCEDURAL + ":"):
        _, _, size = ref.partition(":")
        return procedural_image(int(size) if size else 256)
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    return load_image(path)


def dump_json(obj) -> str:
    """Stable-key JSON used for every machine-readable output."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True)


# --------------------------------------------------------------------------
# experiment records

SOLVER_KEYS = {
    "gamma": float,
    "mu": float,
    "tau": float,
    "max_iters": int,
    "mode": str,
    "lam": float,
    "epsilon": float,
}
PROBE_KEYS = {"samples": int, "probe_seed": int, "probe_epsilon": float, "probe_shape": str}


@dataclass
class ExperimentSpec:
    name: str
    operator: OperatorSpec
    input_image: str = PROCEDURAL
    noise: Optional[NoiseSpec] = None
    solver: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    denoiser: Optional[OperatorSpec] = None
    outputs: Optional[str] = None


@dataclass
class ExperimentReport:
    name: str
    operator: str = ""
    m_hat: float = float("nan")
    mu: float = float("nan")
    psnr_degraded: Optional[float] = None
    psnr_rendered_best: Optional[float] = None
    psnr_rendered_final: Optional[float] = None
    psnr_estimate: Optional[float] = None
    delta_psnr: Optional[float] = None
    iterations: int = 0
    stop_reason: str = ""
    activations: int = 0
    wall_time: float = 0.0
    error: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


REPORT_COLUMNS = [f.name for f in dataclasses.fields(ExperimentReport)]


def _probe_config(overrides: dict, seed: int | None = None) -> ProbeConfig:
    kwargs = {}
    if "samples" in overrides:
        kwargs["n_samples"] = overrides["samples"]
    if "probe_seed" in overrides:
        kwargs["seed"] = overrides["probe_seed"]
    elif seed is not None:
        kwargs["seed"] = seed
    if "probe_epsilon" in overrides:
        kwargs["epsilon"] = overrides["probe_epsilon"]
    if "probe_shape" in overrides:
        kwargs["shape"] = parse_shape(overrides["probe_shape"])
    return ProbeConfig(**kwargs)


def parse_shape(text: str) -> tuple:
    """``"64x48"`` (width x height) to the array shape ``(48, 64)``."""
    try:
        w, h = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise ValueError(f"shape must look like WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise ValueError(f"shape must be positive, got {text!r}")
    return (h, w)


# --------------------------------------------------------------------------
# commands


def cmd_degrade(input_ref, op, noise: NoiseSpec | None = None, out=None, bit_depth: int = 16) -> dict:
    """Apply ``op`` (and optional noise) to an image, writing it with a JSON sidecar."""
    spec = op if isinstance(op, OperatorSpec) else parse_spec(op)
    clean = load_input(input_ref)
    degraded = build_operator(spec)(clean)
    if noise is not None:
        degraded = add_noise(degraded, noise)
    record = {
        "input": str(input_ref),
        "op": spec.canonical(),
        "noise": None if noise is None else {"sigma": noise.sigma, "seed": noise.seed},
        "psnr_vs_input": psnr(np.clip(degraded, 0.0, 1.0), clean),
        "bit_depth": bit_depth,
    }
    if out is not None:
        save_image(degraded, out, bit_depth)
        record["output"] = str(out)
        Path(str(out) + ".json").write_text(dump_json(record) + "\n")
    return record


def run_rendition(f, observed, truth=None, solver: dict | None = None, probe: dict | None = None,
                  denoiser=None, seed: int | None = None, name: str = ""):
    """Estimate M, pick mu, render.  Returns ``(report, result)``.

    Unless ``mu`` is given explicitly it is ``derive_mu(M)`` capped at ``tau``,
    which keeps the residual stop reachable.
    """
    solver = dict(solver or {})
    start = time.perf_counter()
    est = estimate_lipschitz(f, _probe_config(probe or {}, seed))
    tau = solver.get("tau", SolverConfig.tau)
    if "mu" not in solver:
        solver["mu"] = derive_mu(est.m_hat, cap=tau)
    cfg = SolverConfig(**solver)
    f.reset_activations()
    den = None if denoiser is None else build_operator(denoiser)
    result = solve(f, observed, cfg, denoiser=den, ground_truth=truth)
    report = ExperimentReport(
        name=name,
        operator=getattr(f, "label", ""),
        m_hat=est.m_hat,
        mu=cfg.mu,
        iterations=result.iterations_run,
        stop_reason=result.stop_reason,
        activations=result.activations_used,
    )
    if truth is not None:
        report.psnr_degraded = result.initial_psnr
        report.psnr_rendered_best = max([result.initial_psnr, *result.psnr_trajectory])
        report.psnr_rendered_final = psnr(np.clip(result.final_iterate, 0.0, 1.0), truth)
        report.psnr_estimate = psnr(result.estimate, truth)
        report.delta_psnr = report.psnr_estimate - report.psnr_degraded
    report.wall_time = time.perf_counter() - start
    return report, result


def cmd_render(degraded, op, truth=None, overrides: dict | None = None, out=None,
               seed: int | None = None, bit_depth: int = 16):
    """Render from a degraded image file; writes the estimate and ``<out>.json``.

    ``degraded`` and ``truth`` may be paths or arrays.
    """
    spec = op if isinstance(op, OperatorSpec) else parse_spec(op)
    observed = degraded if isinstance(degraded, np.ndarray) else load_input(degraded)
    clean = None
    if truth is not None:
        clean = truth if isinstance(truth, np.ndarray) else load_input(truth)
    overrides = dict(overrides or {})
    solver = {k: v for k, v in overrides.items() if k in SOLVER_KEYS}
    probe = {k: v for k, v in overrides.items() if k in PROBE_KEYS}
    report, result = run_rendition(build_operator(spec), observed, clean, solver, probe,
                                   denoiser=overrides.get("denoiser"), seed=seed)
    if out is not None:
        save_image(result.estimate, out, bit_depth)
        payload = {"report": report.to_dict(), "result": result.to_dict()}
        Path(str(out) + ".json").write_text(dump_json(payload) + "\n")
    return report, result


def cmd_estimate(op, cfg: ProbeConfig | None = None) -> dict:
    spec = op if isinstance(op, OperatorSpec) else parse_spec(op)
    est = estimate_lipschitz(build_operator(spec), cfg)
    record = est.to_dict()
    record["op"] = spec.canonical()
    return record


def cmd_metrics(a, b) -> dict:
    img_a, img_b = load_input(a), load_input(b)
    return {"psnr": psnr(img_a, img_b), "mse": mse(img_a, img_b)}


# --------------------------------------------------------------------------
# suites


class SuiteParseError(ValueError):
    """Malformed suite file, located by 1-based line and column."""

    def __init__(self, message, line, column, source="<suite>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


def _convert(key, raw):
    typ = SOLVER_KEYS.get(key) or PROBE_KEYS.get(key)
    if typ is int:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{key} must be an integer")
        return int(value)
    return typ(raw)


_ROW_KEYS = {"op", "image", "noise", "noise_seed", "denoiser", "save", *SOLVER_KEYS, *PROBE_KEYS}


def parse_suite(text: str, source: str = "<suite>", base_dir=None) -> list:
    """Parse ``[name]`` blocks of ``key = value`` lines into experiment specs.

    A ``[defaults]`` block, if present, supplies values for every later block.
    ``#`` starts a comment line.  Every problem is reported with its position.
    """
    blocks = []  # (name, line, {key: (value, line, column)})
    defaults: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        indent = len(raw) - len(raw.lstrip())
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise SuiteParseError("unterminated block header", lineno, len(raw.rstrip()) + 1, source)
            name = stripped[1:-1].strip()
            if not name:
                raise SuiteParseError("empty block name", lineno, indent + 1, source)
            if name == "defaults":
                if blocks:
                    raise SuiteParseError("[defaults] must come before experiments", lineno, indent + 1, source)
                current = defaults
                continue
            if any(b[0] == name for b in blocks):
                raise SuiteParseError(f"duplicate experiment name {name!r}", lineno, indent + 2, source)
            current = {}
            blocks.append((name, lineno, current))
            continue
        key, eq, value = raw.partition("=")
        if not eq:
            raise SuiteParseError("expected 'key = value'", lineno, indent + 1, source)
        if current is None:
            raise SuiteParseError("setting outside of a [block]", lineno, indent + 1, source)
        key = key.strip()
        if key not in _ROW_KEYS:
            raise SuiteParseError(f"unknown key {key!r}", lineno, indent + 1, source)
        if key in current:
            raise SuiteParseError(f"duplicate key {key!r}", lineno, indent + 1, source)
        vcol = raw.index("=") + 2
        while vcol <= len(raw) and raw[vcol - 1].isspace():
            vcol += 1
        current[key] = (value.strip(), lineno, vcol)

    specs = []
    for name, lineno, settings in blocks:
        merged = {**defaults, **settings}
        if "op" not in merged:
            raise SuiteParseError(f"experiment {name!r} has no op", lineno, 1, source)
        specs.append(_build_experiment(name, merged, source, base_dir))
    return specs


def _build_experiment(name, settings, source, base_dir):
    def located(key, fn):
        value, line, col = settings[key]
        try:
            return fn(value)
        except SpecParseError as exc:
            raise SuiteParseError(str(exc).splitlines()[0], line, col + exc.pos, source) from None
        except ValueError as exc:
            raise SuiteParseError(str(exc), line, col, source) from None

    op = located("op", parse_spec)
    denoiser = located("denoiser", parse_spec) if "denoiser" in settings else None
    noise = None
    if "noise" in settings:
        seed = located("noise_seed", int) if "noise_seed" in settings else 0
        noise = located("noise", lambda v: NoiseSpec(float(v), seed))
    solver = {k: located(k, lambda v, k=k: _convert(k, v)) for k in SOLVER_KEYS if k in settings}
    probe = {k: located(k, lambda v, k=k: _convert(k, v)) for k in PROBE_KEYS if k in settings}
    if "probe_shape" in probe:
        located("probe_shape", parse_shape)
    try:
        SolverConfig(**solver)
    except ValueError as exc:
        key = next(iter(solver), "op")
        raise SuiteParseError(f"experiment {name!r}: {exc}", settings[key][1], 1, source) from None
    image = settings["image"][0] if "image" in settings else PROCEDURAL
    if image != PROCEDURAL and not image.startswith(PROCEDURAL + ":") and base_dir is not None:
        if not os.path.isabs(image):
            image = os.path.join(str(base_dir), image)
    save = settings["save"][0].lower() in ("1", "true", "yes") if "save" in settings else False
    return ExperimentSpec(name, op, image, noise, solver, probe, denoiser, outputs="save" if save else None)


def shipped_suites() -> list:
    files = resources.files("rendition").joinpath("suites")
    return sorted(p.name[: -len(".suite")] for p in files.iterdir() if p.name.endswith(".suite"))


def read_suite(ref) -> tuple:
    """Suite text and base directory for a path or a shipped suite name."""
    path = Path(str(ref))
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path), path.parent
    if str(ref) in shipped_suites():
        res = resources.files("rendition").joinpath("suites", f"{ref}.suite")
        return res.read_text(encoding="utf-8"), f"{ref}.suite", None
    raise FileNotFoundError(f"no suite file or shipped suite named {ref!r}")


def run_experiment(spec: ExperimentSpec, out_dir=None, seed: int | None = None) -> ExperimentReport:
    """One suite row.  Solver divergence is an outcome; exceptions become ``error``."""
    start = time.perf_counter()
    try:
        clean = load_input(spec.input_image)
        f = build_operator(spec.operator)
        observed = f(clean)
        if spec.noise is not None:
            observed = add_noise(observed, spec.noise)
        report, result = run_rendition(f, observed, clean, spec.solver, spec.probe,
                                       denoiser=spec.denoiser, seed=seed, name=spec.name)
        if spec.outputs and out_dir is not None:
            save_image(observed, Path(out_dir) / f"{spec.name}-degraded.pgm")
            save_image(result.estimate, Path(out_dir) / f"{spec.name}-rendered.pgm")
    except Exception as exc:  # a broken row must not sink the suite
        report = ExperimentReport(name=spec.name, operator=spec.operator.canonical(),
                                  error=f"{type(exc).__name__}: {exc}")
    report.operator = spec.operator.canonical()
    report.wall_time = time.perf_counter() - start
    return report


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for rep in reports:
        row = rep.to_dict()
        writer.writerow([_csv_value(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def cmd_suite(suite_ref, out_dir=None, workers: int = 1, seed: int | None = None):
    """Run every experiment of a suite.  Returns ``(summary, reports)``.

    Parse errors raise before anything runs.  Writes ``results.csv`` and
    ``summary.json`` to ``out_dir`` when given; rows keep suite order.
    """
    text, source, base_dir = read_suite(suite_ref)
    specs = parse_suite(text, source, base_dir)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            reports = list(pool.map(lambda s: run_experiment(s, out_dir, seed), specs))
    else:
        reports = [run_experiment(s, out_dir, seed) for s in specs]
    summary = {
        "suite": source,
        "experiments": len(reports),
        "errors": sum(1 for r in reports if r.error),
        "stop_reasons": {k: sum(1 for r in reports if r.stop_reason == k)
                         for k in ("converged", "max_iters", "diverged")},
        "rows": [r.to_dict() for r in reports],
    }
    if out_dir is not None:
        (Path(out_dir) / "results.csv").write_text(reports_to_csv(reports))
        (Path(out_dir) / "summary.json").write_text(dump_json(summary) + "\n")
    return summary, reports
