"""Command-line entry point.

Exit status: 0 success, 1 usage error (including refusal to run on a stale
upstream stage), 2 data validation failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from mlconflict import DataError, NumericalError, __version__
from mlconflict.fixtures import generate_fixture
from mlconflict.manifest import load_manifest
from mlconflict.pipeline import STAGES, Pipeline, RunConfig, StageError, load_grid

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("mlconflict")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _years(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    if a > b:
        raise argparse.ArgumentTypeError(f"first year after last in {text!r}")
    return a, b


def _param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlconflict", description="Multiplex communities and conflict-onset TERGM pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more console logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in STAGES + ("all",):
        s = sub.add_parser(name, help="run every stage in order" if name == "all" else f"run the {name} stage")
        s.add_argument("manifest", type=Path, help="dataset manifest (YAML)")
        s.add_argument("--out", type=Path, help="run directory (default: <manifest dir>/run)")
        s.add_argument("--years", type=_years, help="analysis years A:B, inside the manifest span")
        s.add_argument("--seed", type=int, help="master seed (default 0)")
        s.add_argument("--threads", type=int, help="worker threads for bootstrap replicates (default 1)")
        s.add_argument("--force", action="store_true", help="rerun even when cached or upstream is stale")
        s.add_argument("--grid", type=Path, help="YAML overrides: dims, x_max, init_proportions, models, ...")
        s.add_argument("--reps", type=int, help="bootstrap replicates (default 2000)")
        s.add_argument("--gof-sims", type=int, help="simulated networks per year for GOF (default 50)")

    f = sub.add_parser("fixture", help="write a synthetic dataset with ground truth")
    f.add_argument("kind", choices=("planted-communities", "known-ergm-panel", "clustered-corpus"))
    f.add_argument("out", type=Path)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter (JSON values), repeatable")

    n = sub.add_parser("neighbors", help="nearest tokens by cosine in an embedding file")
    n.add_argument("embeddings", type=Path)
    n.add_argument("token")
    n.add_argument("-k", type=int, default=10)

    a = sub.add_parser("analogy", help="tokens closest to sum(positive) - sum(negative)")
    a.add_argument("embeddings", type=Path)
    a.add_argument("--positive", nargs="*", default=[])
    a.add_argument("--negative", nargs="*", default=[])
    a.add_argument("-k", type=int, default=10)
    return p


def _run_stage(args) -> int:
    manifest = load_manifest(args.manifest)
    span = manifest.span
    if args.years is not None:
        if args.years[0] < span[0] or args.years[1] > span[1]:
            raise UsageError(f"--years {args.years[0]}:{args.years[1]} is outside the manifest span {span}")
        span = args.years
    flags = {"seed": args.seed, "threads": args.threads, "reps": args.reps, "gof_sims": args.gof_sims}
    grid = load_grid(args.grid) if args.grid else {}
    try:
        cfg = RunConfig.build(span, manifest.settings, grid, flags)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    out = args.out or manifest.base_dir / "run"
    status = Pipeline(manifest, cfg, out, force=args.force).run(args.command)
    for stage, st in status.items():
        print(f"{stage}: {st}")
    return EXIT_OK


def _neighbors(args) -> int:
    from mlconflict.text.glove import nearest_neighbors, read_embeddings

    space = read_embeddings(args.embeddings)
    try:
        rows = nearest_neighbors(space, args.token, args.k)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    for tok, score in rows:
        print(f"{tok}\t{score:.4f}")
    return EXIT_OK


def _analogy(args) -> int:
    from mlconflict.text.glove import analogy, read_embeddings

    space = read_embeddings(args.embeddings)
    try:
        rows = analogy(space, args.positive, args.negative, args.k)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    for tok, score in rows:
        print(f"{tok}\t{score:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "fixture":
            path = generate_fixture(args.kind, args.out, dict(args.param), args.seed)
            print(path)
            return EXIT_OK
        if args.command == "neighbors":
            return _neighbors(args)
        if args.command == "analogy":
            return _analogy(args)
        return _run_stage(args)
    except (UsageError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
