"""Command-line interface.

    collage run --shape S --manifest M --out DIR [options]
    collage decompose --shape S --out DIR [options]
    collage layout --shape S --manifest M --out DIR [options]
    collage metrics --out DIR --manifest M
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import CollageError
from .pipeline import RunConfig, recompute_metrics, run_decompose, run_pipeline


def _add_common(parser: argparse.ArgumentParser, manifest: bool = True) -> None:
    parser.add_argument("--shape", required=True, help="polygon file or mask image")
    if manifest:
        parser.add_argument("--manifest", required=True, help="image manifest (JSON)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--resolution", type=int, default=1024)
    parser.add_argument("--tau-p", type=float, default=0.75, dest="tau_p")
    parser.add_argument("--tau-e", type=int, default=3, dest="tau_e")
    parser.add_argument("--mode", choices=["balanced", "unbalanced"], default="balanced")
    parser.add_argument("--unbalanced-prob", type=float, default=0.7, dest="unbalanced_prob")
    parser.add_argument("--triangle-penalty", type=float, default=0.8, dest="triangle_penalty")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--brute-force", action="store_true", dest="brute_force")
    parser.add_argument("--debug-axis", action="store_true", dest="debug_axis")
    parser.add_argument("--debug-masks", action="store_true", dest="debug_masks")


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        resolution=args.resolution,
        tau_p=args.tau_p,
        tau_e=args.tau_e,
        mode=args.mode,
        unbalanced_prob=args.unbalanced_prob,
        triangle_penalty=args.triangle_penalty,
        seed=args.seed,
        brute_force=args.brute_force,
        debug_axis=args.debug_axis,
        debug_masks=args.debug_masks,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline: layout + collage + metrics")
    _add_common(run)

    layout = sub.add_parser("layout", help="geometry only (no rendering)")
    _add_common(layout)

    dec = sub.add_parser("decompose", help="convex decomposition only")
    _add_common(dec, manifest=False)

    met = sub.add_parser("metrics", help="recompute metrics from saved masks")
    met.add_argument("--out", required=True, help="run directory (with masks/)")
    met.add_argument("--manifest", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            result = run_pipeline(args.shape, args.manifest, args.out, _config(args))
            print(f"wrote {len(result.artifacts)} artifacts to {args.out}")
            if result.report is not None:
                r = result.report
                mn = "n/a" if r.m_n is None else f"{r.m_n:.4f}"
                print(
                    f"metrics: m_a={r.m_a:.4f} m_c={r.m_c:.4f} m_o={r.m_o:.4f} "
                    f"m_n={mn} m_s={r.m_s:.4f}"
                )
        elif args.command == "layout":
            result = run_pipeline(args.shape, args.manifest, args.out, _config(args), render=False)
            print(f"layout with {result.layout['stats']['n_cells']} cells -> {args.out}")
        elif args.command == "decompose":
            info = run_decompose(args.shape, args.out, _config(args))
            print(f"{info['n_patches']} patches -> {args.out}")
        elif args.command == "metrics":
            report = recompute_metrics(args.out, args.manifest)
            print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        return 0
    except CollageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
