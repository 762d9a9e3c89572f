"""Command-line entry point: ``rendition {degrade,render,estimate,suite,metrics}``.

Exit codes: 0 success (render: converged), 1 error, 2 render hit max_iters,
3 render diverged.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import harness
from .image import NoiseSpec
from .lipschitz import ProbeConfig

EXIT_ERROR = 1
RENDER_EXIT = {"converged": 0, "max_iters": 2, "diverged": 3}


def _global_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(None), help="seed for probes and noise")
    parser.add_argument("--out", default=default(None), help="output file (degrade, render) or directory (suite)")
    parser.add_argument("--format", choices=("json", "csv"), default=default("json"), help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rendition", description="Invert black-box image operators by rendition.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="verb", required=True)

    def verb(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = verb("degrade", "apply an operator (and optional noise) to an image")
    p.add_argument("input", help="image path, or 'procedural[:N]'")
    p.add_argument("--op", required=True, help="operator spec, e.g. gauss:size=5,sigma=1")
    p.add_argument("--noise", type=float, help="Gaussian noise sigma")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)

    p = verb("render", "recover an image from its degraded version")
    p.add_argument("degraded", help="degraded image path")
    p.add_argument("--op", required=True, help="operator spec used to degrade")
    p.add_argument("--truth", help="ground truth image for PSNR tracking")
    p.add_argument("--gamma", type=float)
    p.add_argument("--mu", type=float, help="damping; default derived from the Lipschitz estimate")
    p.add_argument("--tau", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--mode", choices=("approximate", "exact_gradient", "red"))
    p.add_argument("--lam", type=float, help="RED strength (red mode)")
    p.add_argument("--denoiser", help="denoiser spec (red mode)")
    p.add_argument("--epsilon", type=float, help="finite-difference scale (exact_gradient mode)")
    p.add_argument("--samples", type=int, help="Lipschitz probe samples")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=16)

    p = verb("estimate", "estimate the Lipschitz constant of an operator")
    p.add_argument("--op", required=True)
    p.add_argument("--samples", type=int, default=ProbeConfig.n_samples)
    p.add_argument("--shape", default="64x64", help="probe size WxH")
    p.add_argument("--epsilon", type=float, default=ProbeConfig.epsilon, help="probe step scale")

    p = verb("suite", "run a suite file or a shipped suite")
    p.add_argument("suite", help="suite path or shipped name (" + ", ".join(harness.shipped_suites()) + ")")
    p.add_argument("--workers", type=int, default=1)

    p = verb("metrics", "PSNR and MSE between two images")
    p.add_argument("a")
    p.add_argument("b")
    return parser


def _emit(records, fmt, out=None):
    out = out or sys.stdout
    if isinstance(records, dict):
        records = [records]
    if fmt == "json":
        out.write(harness.dump_json(records[0] if len(records) == 1 else records) + "\n")
        return
    buf = io.StringIO()
    keys = sorted({k for r in records for k in r if not isinstance(r[k], (list, dict))})
    writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    out.write(buf.getvalue())


def _run(args) -> int:
    if args.verb == "degrade":
        if args.out is None:
            raise ValueError("degrade needs --out")
        noise = None
        if args.noise is not None:
            noise = NoiseSpec(args.noise, args.seed if args.seed is not None else 0)
        _emit(harness.cmd_degrade(args.input, args.op, noise, args.out, args.bit_depth), args.format)
        return 0

    if args.verb == "render":
        keys = ("gamma", "mu", "tau", "max_iters", "mode", "lam", "epsilon", "samples", "denoiser")
        overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
        report, result = harness.cmd_render(args.degraded, args.op, args.truth, overrides,
                                            args.out, seed=args.seed, bit_depth=args.bit_depth)
        if args.format == "json":
            _emit({"report": report.to_dict(), "result": result.to_dict()}, "json")
        else:
            _emit(report.to_dict(), "csv")
        return RENDER_EXIT[result.stop_reason]

    if args.verb == "estimate":
        cfg = ProbeConfig(epsilon=args.epsilon, n_samples=args.samples,
                          shape=harness.parse_shape(args.shape),
                          seed=args.seed if args.seed is not None else 0)
        _emit(harness.cmd_estimate(args.op, cfg), args.format)
        return 0

    if args.verb == "suite":
        summary, reports = harness.cmd_suite(args.suite, args.out, args.workers, args.seed)
        if args.format == "csv":
            sys.stdout.write(harness.reports_to_csv(reports))
        else:
            _emit(summary, "json")
        return EXIT_ERROR if summary["errors"] else 0

    _emit(harness.cmd_metrics(args.a, args.b), args.format)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ValueError, OSError) as exc:
        print(f"rendition {args.verb}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
