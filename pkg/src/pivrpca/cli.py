"""Command line entry point: ``pivrpca {generate,decompose,evaluate}``.

Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 numerical
divergence. Diagnostics go to stderr; ``evaluate`` prints its aggregate row
to stdout and nothing else is printed there.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .decompose import AUTO, PodConfig, RpcaConfig, min_removal, pod_decompose, rpca_alm
from .exceptions import NumericalDivergenceError, SequenceIOError
from .quality import evaluate
from .seqio import (DataMatrix, aggregate, format_number, like, load_sequence, scatter,
                    sequence_checksum, store_sequence, write_json, write_quality_csv)
from .synth import (RNG_ALGORITHM, PivSceneSpec, PlantedSpec, Reflection,
                    make_piv_sequence, make_planted)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4
FAILED_MARKER = "FAILED"

log = logging.getLogger("pivrpca")


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------

def _lambda(text):
    if text == AUTO:
        return AUTO
    return _positive_float(text)


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def _fraction(text):
    value = _positive_float(text)
    if value > 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1]: {text!r}")
    return value


def _reflection(text):
    try:
        x, y, sigma, amp = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,sigma,amplitude: {text!r}")
    return Reflection(x, y, sigma, amp)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pivrpca", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="split a frame directory into background and foreground")
    d.add_argument("input_dir")
    d.add_argument("--out-bg", required=True)
    d.add_argument("--out-fg", required=True)
    d.add_argument("--method", choices=("rpca", "pod", "minsub"), default="rpca")
    d.add_argument("--lambda", dest="lam", type=_lambda, default=AUTO)
    d.add_argument("--tol", type=_positive_float, default=1e-7)
    d.add_argument("--max-iters", type=_positive_int, default=500)
    d.add_argument("--rank", type=_positive_int, default=1)
    d.add_argument("--energy", type=_fraction, default=None)
    d.add_argument("--report", default=None,
                   help="JSON run report (default: <out-bg>/report.json)")

    e = sub.add_parser("evaluate", help="score estimated frames against ground truth")
    e.add_argument("estimate_dir")
    e.add_argument("truth_dir")
    e.add_argument("--range", dest="dynamic_range", type=_positive_float, default=1.0)
    e.add_argument("--csv", required=True)

    g = sub.add_parser("generate", help="write a synthetic sequence with ground truth")
    g.add_argument("preset", choices=("planted", "piv"))
    g.add_argument("--out-frames", required=True)
    g.add_argument("--out-bg", required=True)
    g.add_argument("--out-fg", required=True)
    g.add_argument("--spec-out", default=None,
                   help="JSON spec echo (default: <out-frames>/spec.json)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--depth", type=int, choices=(8, 16), default=16)
    g.add_argument("--width", type=_positive_int, default=64)
    g.add_argument("--height", type=_positive_int, default=64)
    g.add_argument("--frames", type=_positive_int, default=60)
    # planted
    g.add_argument("--rank", type=_positive_int, default=1)
    g.add_argument("--sparse-fraction", type=float, default=0.0)
    g.add_argument("--sparse-magnitude", type=_positive_float, default=1.0)
    # piv
    g.add_argument("--particles", type=int, default=80)
    g.add_argument("--particle-sigma", type=_positive_float, default=0.7)
    g.add_argument("--particle-peak", type=_positive_float, default=0.6)
    g.add_argument("--flow", choices=("uniform", "vortex"), default="uniform")
    g.add_argument("--u", type=float, default=1.0)
    g.add_argument("--v", type=float, default=0.5)
    g.add_argument("--omega", type=float, default=0.05)
    g.add_argument("--center", type=float, nargs=2, default=None, metavar=("X", "Y"))
    g.add_argument("--gradient", type=float, default=0.2)
    g.add_argument("--reflection", type=_reflection, action="append", default=[],
                   help="x,y,sigma,amplitude (repeatable)")
    g.add_argument("--modulation", type=float, default=0.0)
    g.add_argument("--period", type=_positive_float, default=20.0)
    g.add_argument("--noise", type=float, default=0.0)
    return p


# -- output helpers ------------------------------------------------------------

def _mark_failed(dirs, reason):
    for d in dirs:
        try:
            d = Path(d)
            if d.exists():
                (d / FAILED_MARKER).write_text(reason + "\n")
        except OSError:
            pass


def _store_all(pairs):
    """Store ``(seq, dir, clamp)`` triples; on I/O failure mark every dir FAILED."""
    dirs = [d for _, d, _ in pairs]
    try:
        for seq, d, clamp in pairs:
            store_sequence(seq, d, clamp=clamp)
    except (SequenceIOError, OSError) as exc:
        _mark_failed(dirs, str(exc))
        raise


# -- subcommands ---------------------------------------------------------------

def cmd_decompose(args) -> int:
    if args.method == "pod":
        pod_cfg = PodConfig(rank=args.rank, energy_threshold=args.energy)
    elif args.method == "rpca":
        rpca_cfg = RpcaConfig(lam=args.lam, tol=args.tol, max_iters=args.max_iters)

    seq = load_sequence(args.input_dir)
    d = aggregate(seq)
    config = {
        "input": str(args.input_dir),
        "out_bg": str(args.out_bg),
        "out_fg": str(args.out_fg),
        "method": args.method,
        "lambda": args.lam,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "rank": args.rank,
        "energy": args.energy,
    }
    report = {
        "method": args.method,
        "config": config,
        "lambda": None,
        "iterations": 1,
        "converged": True,
        "residuals": [],
        "wall_ms": 0.0,
        "warnings": list(seq.warnings),
        "input_checksum": sequence_checksum(seq),
    }

    start = time.perf_counter()
    if args.method == "rpca":
        res = rpca_alm(d, rpca_cfg)
        bg, fg = res.low_rank, res.sparse
        report.update({
            "lambda": res.lam,
            "iterations": res.iterations,
            "converged": res.converged,
            "residuals": res.residual_trace,
            "rank_of_l": res.rank_of_l,
            "sparsity_of_s": res.sparsity_of_s,
        })
        if not res.converged:
            msg = (f"rpca did not converge in {res.iterations} iterations "
                   f"(residual {res.residual_trace[-1]:.3g})")
            report["warnings"].append(msg)
            log.warning(msg)
    elif args.method == "pod":
        try:
            bg, fg = pod_decompose(d, pod_cfg)
        except ValueError as exc:
            raise UsageError(str(exc))
    else:
        bg, fg = min_removal(d)
    report["wall_ms"] = (time.perf_counter() - start) * 1e3
    norm_d = float(np.linalg.norm(d.matrix))
    report["foreground_energy_ratio"] = float(np.linalg.norm(fg)) / max(norm_d, 1e-12)

    bg_seq = scatter(like(d, bg), source_range=seq.source_range)
    fg_seq = scatter(like(d, fg), source_range=seq.source_range)
    _store_all([(bg_seq, args.out_bg, True), (fg_seq, args.out_fg, True)])
    report_path = args.report or str(Path(args.out_bg) / "report.json")
    try:
        write_json(report, report_path)
    except OSError as exc:
        _mark_failed([args.out_bg, args.out_fg], str(exc))
        raise
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = load_sequence(args.estimate_dir)
    truth = load_sequence(args.truth_dir)
    if len(est) != len(truth):
        raise UsageError(f"frame count mismatch: {len(est)} estimated vs {len(truth)} truth")
    if (est.height, est.width) != (truth.height, truth.width):
        raise UsageError(f"frame size mismatch: {est.width}x{est.height} vs "
                         f"{truth.width}x{truth.height}")
    scale = args.dynamic_range
    report = evaluate([f * scale for f in truth.frames], [f * scale for f in est.frames],
                      dynamic_range=scale)
    write_quality_csv(report, args.csv)
    print(",".join(["aggregate", format_number(report.mean_mse),
                    format_number(report.mean_psnr), format_number(report.mean_ssim)]))
    return EXIT_OK


def _generate_planted(args):
    spec = PlantedSpec(m=args.width * args.height, n=args.frames, rank=args.rank,
                       sparse_fraction=args.sparse_fraction,
                       sparse_magnitude=args.sparse_magnitude, seed=args.seed)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    d, l0, s0 = make_planted(spec)
    # images hold [0, 1]; an affine map keeps the data low-rank plus sparse
    lo, hi = float(d.min()), float(d.max())
    scale = hi - lo if hi > lo else 1.0
    shape = dict(width=args.width, height=args.height)

    def seq(mat):
        return scatter(DataMatrix(mat, **shape), source_range=_depth_range(args.depth))

    frames = seq((d - lo) / scale)
    background = seq((l0 - lo) / scale)
    foreground = seq(s0 / scale)
    echo = {"preset": "planted", "spec": asdict(spec), "offset": lo, "scale": scale}
    arrays = {"d": d, "l0": l0, "s0": s0}
    return frames, background, foreground, echo, arrays


def _generate_piv(args):
    try:
        spec = PivSceneSpec(
            width=args.width, height=args.height, n_frames=args.frames,
            particle_count=args.particles, particle_sigma=args.particle_sigma,
            particle_peak=args.particle_peak, flow=args.flow, u=args.u, v=args.v,
            center=tuple(args.center) if args.center else None, omega=args.omega,
            gradient=args.gradient, reflections=tuple(args.reflection),
            modulation=args.modulation, period=args.period, noise_sigma=args.noise,
            seed=args.seed)
        frames, background, particles = make_piv_sequence(spec)
    except ValueError as exc:
        raise UsageError(str(exc))
    depth = _depth_range(args.depth)
    for s in (frames, background, particles):
        s.source_range = depth
    return frames, background, particles, {"preset": "piv", "spec": spec.to_dict()}, None


def _depth_range(depth: int) -> float:
    return 255.0 if depth == 8 else 65535.0


def cmd_generate(args) -> int:
    make = _generate_planted if args.preset == "planted" else _generate_piv
    frames, background, foreground, echo, arrays = make(args)
    echo.update({"seed": args.seed, "depth": args.depth, "rng": RNG_ALGORITHM})
    _store_all([(frames, args.out_frames, False), (background, args.out_bg, True),
                (foreground, args.out_fg, True)])
    spec_out = Path(args.spec_out or Path(args.out_frames) / "spec.json")
    try:
        write_json(echo, spec_out)
        if arrays is not None:
            np.savez(spec_out.with_name("truth.npz"), **arrays)
    except OSError as exc:
        _mark_failed([args.out_frames, args.out_bg, args.out_fg], str(exc))
        raise
    return EXIT_OK


COMMANDS = {"decompose": cmd_decompose, "evaluate": cmd_evaluate, "generate": cmd_generate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="pivrpca: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except NumericalDivergenceError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    except (SequenceIOError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
