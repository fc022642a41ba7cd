"""Command-line entry point (``kronframe``).

Exit codes: 0 success, 2 configuration / input validation error, 3 numeric failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import bench
from .frames import FrameError
from .io import FormatError, pair_to_json, read_matrix, write_json, write_matrix
from .kron import KronDims, factor
from .solvers import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("kronframe")


def _design_frame(args):
    cfg = bench.ExperimentConfig.from_json(args.config)
    design = args.design or cfg.frame_design[0]
    if design not in bench.FRAME_DESIGNS:
        raise bench.ConfigError(f"unknown design {design!r}")
    res = bench.run_pipeline(cfg, design)
    write_matrix(args.out, res.phi_ideal.matrix)
    if args.report:
        report = {"design": design, "stages": res.stages, "config_hash": cfg.config_hash()}
        if res.sidco_report is not None:
            report.update(res.sidco_report.to_dict())
        write_json(args.report, report)
    log.info("wrote %s (coherence %.4f)", args.out, res.stages[2]["coherence"])


def _factor(args):
    try:
        dims = KronDims.parse(args.dims)
    except ValueError as exc:
        raise bench.ConfigError(str(exc)) from exc
    phi = read_matrix(args.inp)
    if phi.shape != dims.phi_shape:
        raise bench.ConfigError(f"matrix shape {phi.shape} does not match dims {dims.phi_shape}")
    pair = factor(phi, dims)
    write_json(args.out, pair_to_json(pair))
    log.info("sigma %.6g, approx_error %.6g", pair.sigma, pair.approx_error)


def _coherence_profile(args):
    phi = read_matrix(args.inp)
    if args.bins < 2:
        raise bench.ConfigError("--bins must be >= 2")
    rows = bench.coherence_profile(phi, args.bins)
    bench.write_csv(args.out, [dict(bin_center=c, count=k, empirical_cdf=p) for c, k, p in rows],
                    ["bin_center", "count", "empirical_cdf"])


def _load_cfg(args):
    cfg = bench.ExperimentConfig.from_json(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
        cfg.validate()
    return cfg


def _nmse_sweep(args):
    cfg = _load_cfg(args)
    bench.write_csv(args.out, bench.nmse_sweep(cfg), bench.SWEEP_COLUMNS)


def _aspect_sweep(args):
    cfg = _load_cfg(args)
    pairs = bench.parse_pairs(args.pairs)
    for M_T, M_R in pairs:
        if M_T * M_R > cfg.T * cfg.R or M_T > cfg.T or M_R > cfg.R:
            raise bench.ConfigError(f"pair {M_T}x{M_R} does not fit T={cfg.T}, R={cfg.R}")
    bench.write_csv(args.out, bench.aspect_ratio_sweep(cfg, pairs), bench.SWEEP_COLUMNS)


def build_parser():
    p = argparse.ArgumentParser(prog="kronframe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design-frame", help="design, tighten and normalize a measurement matrix")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--design", choices=bench.FRAME_DESIGNS)
    s.add_argument("--report", help="write convergence/stage report JSON here")
    s.set_defaults(func=_design_frame)

    s = sub.add_parser("factor", help="nearest Kronecker factorization into U, V")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--dims", required=True, help="T,R,MT,MR")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_factor)

    s = sub.add_parser("coherence-profile", help="histogram/CDF of pair inner products")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--bins", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_coherence_profile)

    s = sub.add_parser("nmse-sweep", help="NMSE versus SNR")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=_nmse_sweep)

    s = sub.add_parser("aspect-sweep", help="NMSE versus SNR for several (M_T, M_R)")
    s.add_argument("--config", required=True)
    s.add_argument("--pairs", default="4x4,2x8,8x2")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=_aspect_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (bench.ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameError, SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
