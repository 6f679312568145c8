"""Command-line entry point: ``qctf gen | reco | bench | match | config``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 failed ``--assert`` check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import RunConfig, default_config_json, load_config
from .ctf.candidates import load_tracks, save_tracks
from .ctf.cleaning import clean_improved
from .ctf.finding import find_tracks
from .ctf.pipeline import run_pipeline
from .ctf.selection import select_tracks
from .ctf.seeding import generate_seeds
from .errors import QctfError
from .events import GeneratorConfig, generate_event, load_event, save_event
from .geometry import DetectorGeometry
from .matching import match_truth
from .qsearch import QueryLedger
from .quantum.qfinding import q_find_tracks
from .quantum.qseeding import q_generate_seeds
from .quantum.superposition import reconstruct_superposition
from .svg import line_chart

EXIT_USAGE, EXIT_DATA, EXIT_ASSERT = 1, 2, 3
ALGOS = ("classical", "improved", "q-seed", "q-find", "q-super")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sizes(text: str) -> list[int]:
    try:
        ns = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if len(ns) < 4 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise argparse.ArgumentTypeError("need at least four strictly ascending sizes")
    return ns


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return lo, hi


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_gen(args) -> int:
    cfg = GeneratorConfig(n=args.n, rng_seed=args.seed, adversarial=args.adversarial,
                          distribution=args.distribution, efficiency=args.efficiency)
    event = generate_event(cfg, DetectorGeometry.with_layers(args.layers))
    save_event(event, args.out)
    _emit({"out": str(args.out), "hits_per_layer": [event.count(l) for l in range(event.n_layers)]})
    return 0


def reconstruct(event, algo: str, cfg: RunConfig, rng):
    """Run one reconstruction chain. Returns ``(tracks, stats_dict, ledger or None)``."""
    p = cfg.pipeline
    L = event.n_layers
    if algo in ("classical", "improved"):
        tracks, stats = run_pipeline(event, p, "original-clean" if algo == "classical" else "improved-clean")
        return tracks, stats.to_dict(), None
    ledger = QueryLedger()
    if algo == "q-super":
        res = reconstruct_superposition(event, cfg.superposition(), rng, ledger)
        return res.tracks, {"rounds": res.rounds, "forest_size": res.forest.size}, ledger
    if algo == "q-seed":
        res = q_generate_seeds(event, p.cuts, rng, p.kalman, p.find.omega, ledger=ledger)
        seeds = res.seeds
        found = find_tracks(seeds, event, p.find, p.kalman)
        extra = {"k_estimate": res.k_estimate, "timed_out": res.timed_out}
    elif algo == "q-find":
        seeds = generate_seeds(event, p.cuts, p.kalman, p.find.omega)
        found, _ = q_find_tracks(seeds, event, p.find, rng, p.kalman, ledger, eps=cfg.quantum.epsilon)
        extra = {}
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    tracks = select_tracks(clean_improved(found, p.f), p.threshold(L), event, p.kalman, p.find.omega)
    extra.update({"k_seed": len(seeds), "k_find": len(found), "k_select": len(tracks)})
    return tracks, extra, ledger


def cmd_reco(args) -> int:
    event = load_event(args.event)
    cfg = load_config(args.config) if args.config else RunConfig()
    seed = cfg.quantum.rng_seed if args.seed is None else args.seed
    tracks, info, ledger = reconstruct(event, args.algo, cfg, np.random.default_rng(seed))
    save_tracks(tracks, args.out)
    if ledger is not None and args.ledger:
        Path(args.ledger).write_text(ledger.to_json())
    summary = {"algo": args.algo, "tracks": len(tracks), "info": info}
    if ledger is not None:
        summary["ledger"] = ledger.snapshot()
    _emit(summary)
    return 0


def cmd_bench(args) -> int:
    cfg = bench_mod.BenchConfig(master_seed=args.seed, a=args.a, workers=args.workers)
    result, fit = bench_mod.bench_scaling(args.target, args.ns, args.trials, cfg)
    if args.csv:
        Path(args.csv).write_text(result.to_csv(include_wall=args.wall))
    if args.svg:
        Path(args.svg).write_text(line_chart({args.target: (result.ns, result.medians())},
                                             title=f"{args.target}: slope {fit.slope:.3f}",
                                             ylabel="median cost"))
    summary = {"target": args.target, "ns": result.ns, "medians": result.medians()}
    if args.fit or args.assert_slope:
        summary["fit"] = fit.to_dict()
    _emit(summary)
    if args.assert_slope:
        lo, hi = args.assert_slope
        if not lo <= fit.slope <= hi:
            print(f"slope {fit.slope:.3f} outside [{lo}, {hi}]", file=sys.stderr)
            return EXIT_ASSERT
    return 0


def cmd_match(args) -> int:
    tracks = load_tracks(args.reco)
    event = load_event(args.event)
    report = match_truth(tracks, event, args.min_frac)
    _emit(report.to_dict())
    if args.assert_ and (report.efficiency < args.min_eff or report.fake_rate > args.max_fake):
        print(f"efficiency {report.efficiency:.3f} / fake rate {report.fake_rate:.3f} outside limits",
              file=sys.stderr)
        return EXIT_ASSERT
    return 0


def cmd_config(args) -> int:
    text = default_config_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qctf", description="Classical and simulated-quantum combinatorial track finding.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic event")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--layers", type=int, default=6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--adversarial", action="store_true")
    g.add_argument("--distribution", choices=("uniform", "mixture"), default="uniform")
    g.add_argument("--efficiency", type=float, default=1.0)
    g.add_argument("--out", type=Path, required=True, help=".json or .csv")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reco", help="reconstruct tracks in an event")
    r.add_argument("--algo", choices=ALGOS, default="improved")
    r.add_argument("--event", type=Path, required=True)
    r.add_argument("--config", type=Path)
    r.add_argument("--out", type=Path, required=True, help=".json or .csv")
    r.add_argument("--ledger", type=Path)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_reco)

    b = sub.add_parser("bench", help="scaling benchmark of one stage")
    b.add_argument("--target", choices=bench_mod.TARGETS, required=True)
    b.add_argument("--ns", type=_sizes, required=True)
    b.add_argument("--trials", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--a", type=int, choices=(1, 2), default=1, help="good-seed exponent for q-seed")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--fit", action="store_true")
    b.add_argument("--csv", type=Path)
    b.add_argument("--svg", type=Path)
    b.add_argument("--wall", action="store_true", help="include wall-clock seconds in the CSV")
    b.add_argument("--assert", dest="assert_slope", type=_range, metavar="LO:HI")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("match", help="match reconstructed tracks to truth")
    m.add_argument("--reco", type=Path, required=True)
    m.add_argument("--event", type=Path, required=True)
    m.add_argument("--min-frac", type=float, default=0.75)
    m.add_argument("--assert", dest="assert_", action="store_true")
    m.add_argument("--min-eff", type=float, default=0.95)
    m.add_argument("--max-fake", type=float, default=0.05)
    m.set_defaults(func=cmd_match)

    c = sub.add_parser("config", help="print the default configuration")
    c.add_argument("--out", type=Path)
    c.set_defaults(func=cmd_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (QctfError, OSError, ValueError) as exc:
        print(f"qctf: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
