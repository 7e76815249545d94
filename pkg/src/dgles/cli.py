"""Command-line entry point: ``dgles {mesh,run,post,psd,bench} --config run.yaml``.

Exit codes are a stable contract: 0 success, 2 configuration error,
3 divergence (including a benchmark whose first rung is unstable), 4 missing
or unusable input.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import runner
from .config import load_config
from .errors import (
    ComparisonError,
    ConfigurationError,
    DivergenceError,
    InsufficientDataError,
    MeshFormatError,
    MeshValidityError,
    SamplingError,
)

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_DIVERGENCE", "EXIT_MISSING"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_MISSING = 4

log = logging.getLogger("dgles")


def build_parser():
    p = argparse.ArgumentParser(prog="dgles", description="DGSEM large-eddy simulation driver")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (overrides DGLES_THREADS and the config)")
        sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="fixed element chunking, so results do not depend on the thread count")
        sp.add_argument("--output", default=None, help="output directory (default: output.directory)")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("mesh", help="generate and write the configured mesh")
    common(sp)
    sp.add_argument("--out", default=None, help="mesh file to write (default: <output>/mesh.dgm)")
    sp = sub.add_parser("run", help="integrate the configured case")
    common(sp)
    sp.add_argument("--resume", default=None, metavar="CHECKPOINT", help="continue from a checkpoint")
    sp = sub.add_parser("post", help="VTK, surface, wake and PSD outputs from a finished run")
    common(sp)
    sp = sub.add_parser("psd", help="Welch PSD of the lift series in forces.csv")
    common(sp)
    sp.add_argument("--forces", default=None, help="forces file (default: <output>/forces.csv)")
    sp = sub.add_parser("bench", help="CFL ramp and cost table for the configured formulations")
    common(sp)
    return p


def _dispatch(args):
    cfg = load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    out = args.output or cfg.output.directory
    if not os.path.isabs(out):
        out = os.path.join(base, out)
    threads = runner.resolve_threads(cfg, args.threads)

    if args.command == "mesh":
        path = args.out or os.path.join(out, "mesh.dgm")
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        mesh, res = runner.generate_mesh(cfg, path, base)
        print(f"wrote {path}: {mesh.n_elements} elements, metric residual {res:.2e}, hash {mesh.hash()}")
    elif args.command == "run":
        arts = runner.execute_run(cfg, out, threads, args.deterministic, args.resume, base)
        r = arts.report
        print(f"run finished: {r['steps']} steps, t = {r['ctu']:.6g} CTU, {r['sec_per_iter']:.4g} s/iter")
    elif args.command == "post":
        for note in runner.post_process(cfg, out, threads, base):
            print(f"note: {note}")
        print(f"post-processing written to {out}")
    elif args.command == "psd":
        forces = args.forces or os.path.join(out, "forces.csv")
        peaks = runner.compute_psd(cfg, forces, os.path.join(os.path.dirname(os.path.abspath(forces)), "psd.csv"))
        for st, power in peaks:
            print(f"peak St = {st:.6g}  PSD = {power:.6g}")
    elif args.command == "bench":
        reports, rows = runner.run_bench(cfg, out, threads, base)
        for rep in reports:
            print(f"{rep.formulation}: CFL_max = {rep.cfl_max}, dt_max = {rep.dt_max}")
        for row in rows:
            ratio = "" if row.dt_ratio is None else f"  dt ratio {row.dt_ratio:.3f}"
            print(f"{row.formulation}: {row.hours_per_ctu:.4g} h/CTU{ratio}")
        if any(not rep.ok for rep in reports):
            print("error: instability at the first rung; no stable CFL", file=sys.stderr)
            return EXIT_DIVERGENCE
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (FileNotFoundError, MeshFormatError, InsufficientDataError, SamplingError) as exc:
        print(f"error: missing or unusable input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigurationError, MeshValidityError, ComparisonError) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
