"""Command-line entry point: ``hhineq <subcommand> ...``.

Every subcommand also takes ``--config FILE`` holding ``key=value`` lines
named after its long options (``share-mode=both``); flags on the command
line win over the file.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict

import pandas as pd

from ._validation import HhIneqError
from .pipeline import PreprocessConfig, ingest, prepare_datasets
from .report import (LoessConfig, country_means, country_series, global_trend,
                     loess, pearson, read_summaries, scatter_export, summarize,
                     write_summaries, table_format)
from .synthgen import SynthParams, generate, rho_sweep, to_person_frame

log = logging.getLogger("hhineq")


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def read_config(path):
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise HhIneqError(f"{path}:{n}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _synth_options(p):
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--mu-m", type=float, default=10.0)
    p.add_argument("--mu-f", type=float, default=10.0)
    p.add_argument("--sigma-m", type=float, default=0.7)
    p.add_argument("--sigma-f", type=float, default=0.7)
    p.add_argument("--pi-m", type=float, default=1.0)
    p.add_argument("--pi-f", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _params(args, **override):
    kw = dict(n=args.n, rho=args.rho, mu_m=args.mu_m, mu_f=args.mu_f,
              sigma_m=args.sigma_m, sigma_f=args.sigma_f, pi_m=args.pi_m,
              pi_f=args.pi_f, seed=args.seed)
    kw.update(override)
    return SynthParams(**kw)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hhineq",
        description="Within/between-household decomposition of couple earnings inequality.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="file of key=value defaults")
        return p

    p = command("analyze", "person CSV -> per-dataset summary CSV")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--eps", type=_floats, default=[0.25, 1.0])
    p.add_argument("--share-mode", choices=["aggregate", "mean", "both"],
                   default="aggregate")
    p.add_argument("--precision", choices=["table", "full"], default="full")
    p.add_argument("--age-min", type=int, default=18)
    p.add_argument("--age-max", type=int, default=65)
    p.add_argument("--topcode-p", type=float, default=0.99)
    p.add_argument("--exclude-zero-total", action="store_true",
                   help="drop couples with no earnings before decomposing")
    p.add_argument("--meta-out", help="write per-dataset drop tallies as JSON")

    p = command("means", "summary CSV -> per-country means over available years")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--precision", choices=["table", "full"], default="full")

    p = command("trend", "summary CSV -> yearly cross-country means with LOESS fit")
    p.add_argument("--input")
    p.add_argument("--metric", default="within_share_pct")
    p.add_argument("--country", help="series for one country instead of the global mean")
    p.add_argument("--loess-span", type=float, default=0.75)
    p.add_argument("--loess-degree", type=int, default=1)
    p.add_argument("--out")

    p = command("corr", "Pearson correlation between two summary columns")
    p.add_argument("--input")
    p.add_argument("--x", default="theil_total")
    p.add_argument("--y", default="within_share_pct")

    p = command("scatter", "summary CSV -> (theil, within share) scatter points")
    p.add_argument("--input")
    p.add_argument("--out")

    p = command("synth", "write a synthetic person CSV")
    _synth_options(p)
    p.add_argument("--country", default="XX")
    p.add_argument("--year", type=int, default=2000)
    p.add_argument("--reporting", choices=["net", "gross", "mixed"], default="net")
    p.add_argument("--out")

    p = command("sweep", "mean within-household share across spousal correlations")
    _synth_options(p)
    p.add_argument("--grid", type=_floats, default=[0.0, 0.2, 0.4, 0.6, 0.8])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--out")
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        defaults = {}
        for key, raw in read_config(args.config).items():
            action = next((a for a in subparser._actions if a.dest == key), None)
            if action is None:
                parser.error(f"unknown config key {key!r} for {args.command}")
            if action.type is not None:
                defaults[key] = action.type(raw)
            elif action.const is True:
                defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = raw
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return parser, args


def _require(parser, args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            parser.error(f"{args.command}: --{name.replace('_', '-')} is required")


def _output(frame, out):
    if out:
        frame.to_csv(out, index=False, na_rep="")
    else:
        frame.to_csv(sys.stdout, index=False, na_rep="")


def cmd_analyze(args):
    config = PreprocessConfig(age_min=args.age_min, age_max=args.age_max,
                              topcode_p=args.topcode_p,
                              include_zero_total=not args.exclude_zero_total)
    start = time.perf_counter()
    records, metas = ingest(args.input)
    summaries, audit = [], []
    for meta, verdict, couples in prepare_datasets(records, metas, config):
        if couples is not None:
            summaries.append(summarize(couples, args.eps, config))
        else:
            log.warning("%s %s rejected: %s", meta.country, meta.year, verdict.reason)
        audit.append(dict(asdict(meta), accepted=verdict.ok, reason=verdict.reason))
    del records
    write_summaries(summaries, args.out or sys.stdout, args.precision, args.share_mode)
    if args.meta_out:
        with open(args.meta_out, "w", encoding="utf-8") as fh:
            json.dump(audit, fh, indent=2)
    log.info("analyzed %d datasets in %.2fs", len(summaries), time.perf_counter() - start)
    return 0


def cmd_means(args):
    table = country_means(read_summaries(args.input))
    if args.precision == "table":
        table = table_format(table)
    _output(table, args.out)
    return 0


def cmd_trend(args):
    summaries = read_summaries(args.input)
    if args.country:
        points = country_series(summaries, args.country, args.metric)
    else:
        points = global_trend(summaries, args.metric)
    fit = loess(points, LoessConfig(args.loess_span, args.loess_degree))
    frame = pd.DataFrame({"x": fit.x, "y": fit.y,
                          "fitted": fit.fitted if fit.fitted is not None else None})
    _output(frame, args.out)
    if fit.scatter_only:
        log.warning("fewer than 3 points: scatter only, no fitted curve")
    return 0


def cmd_corr(args):
    frame = read_summaries(args.input).dropna(subset=[args.x, args.y])
    r = pearson(frame[args.x].to_numpy(), frame[args.y].to_numpy())
    print(f"{r:.6f}")
    return 0


def cmd_scatter(args):
    points = scatter_export(read_summaries(args.input))
    _output(points, args.out)
    return 0


def cmd_synth(args):
    couples = generate(_params(args), country=args.country, year=args.year)
    _output(to_person_frame(couples, reporting=args.reporting), args.out)
    return 0


def cmd_sweep(args):
    series = rho_sweep(_params(args), args.grid, args.reps)
    _output(pd.DataFrame(series, columns=["rho", "mean_within_share_pct"]), args.out)
    return 0


COMMANDS = {
    "analyze": (cmd_analyze, ("input",)),
    "means": (cmd_means, ("input",)),
    "trend": (cmd_trend, ("input", "metric")),
    "corr": (cmd_corr, ("input", "x", "y")),
    "scatter": (cmd_scatter, ("input",)),
    "synth": (cmd_synth, ()),
    "sweep": (cmd_sweep, ()),
}


def main(argv=None):
    parser, args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    func, required = COMMANDS[args.command]
    _require(parser, args, *required)
    try:
        return func(args)
    except HhIneqError as exc:
        print(f"hhineq {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
