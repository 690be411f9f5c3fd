"""Command-line entry point: ``marketnet run`` and one subcommand per stage."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, kernels
from .config import ConfigError, RunConfig, load_config, parse_years
from .errors import MarketNetError, MissingArtifactError
from .pipeline import (
    discover_years,
    run_pipeline,
    stage_centrality,
    stage_community,
    stage_garch,
    stage_ggm,
    stage_ingest,
    write_centrality_timeseries,
    write_modularity_summary,
)

logger = logging.getLogger("marketnet")

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2

#: stage -> (input file pattern, runner)
_STAGE_INPUTS = {
    "ggm": ("returns_{year}.csv", "ingest"),
    "centrality": ("network_{year}.json", "ggm"),
    "garch": ("returns_{year}.csv", "ingest"),
    "community": ("correlation_{year}.csv", "garch"),
}


def _common(sub: bool) -> argparse.ArgumentParser:
    # defaults are suppressed on subparsers so options given before the
    # subcommand are not overwritten
    default = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default, help="seed for randomised steps (Louvain node order)")
    p.add_argument("--threads", type=int, default=default, help="worker count; 0 uses all cores")
    p.add_argument("--log-level", default=argparse.SUPPRESS if sub else "INFO",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketnet",
        description="Partial-correlation networks, centralities, DCC-GARCH correlations and "
                    "RMT-filtered communities of stock returns.",
        parents=[_common(False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND})")
    subs = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = subs.add_parser("run", parents=[common], help="run every stage for every configured year")
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="override the configured output directory")

    p = subs.add_parser("ingest", parents=[common], help="filter prices into yearly return panels")
    p.add_argument("--in", dest="input", required=True, type=Path, help="long-format price CSV")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--year", action="append", type=str, help="year or range like 2004-2006 (repeatable)")
    p.add_argument("--config", type=Path, help="YAML file supplying schema and filter parameters")

    helps = {
        "ggm": "nodewise-lasso partial-correlation network per year",
        "centrality": "degree, eigencentrality and spectra of the networks",
        "garch": "ARMA-GARCH and DCC fits, yearly correlation matrices",
        "community": "RMT decomposition and modularity communities",
    }
    for name, text in helps.items():
        p = subs.add_parser(name, parents=[common], help=text)
        p.add_argument("--in", dest="input", required=True, type=Path, help="directory with upstream artifacts")
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--year", action="append", type=str, help="year or range (repeatable); default all found")
        p.add_argument("--config", type=Path, help="YAML file supplying stage parameters")

    p = subs.add_parser("synth", parents=[common], help="write a synthetic price CSV")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--years", default="2004-2006")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def _years(arg) -> list[int] | None:
    if not arg:
        return None
    out: list[int] = []
    for a in arg:
        out.extend(parse_years(a))
    return sorted(set(out))


def _stage_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if args.seed is not None:
        cfg.community.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.out is not None:
        cfg.output = str(args.out)
    if args.seed is not None:
        cfg.community.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    manifest = run_pipeline(cfg)
    for y, rec in sorted(manifest.years.items()):
        line = f"{y}: {rec['status']}"
        if rec.get("error"):
            line += f" ({rec['error']})"
        print(line)
    return manifest.exit_code


def _ingest(args) -> int:
    cfg = _stage_config(args)
    years = _years(args.year) or (cfg.years or None)
    status = stage_ingest(args.input, args.out, years, cfg.schema, cfg.filter)
    ok = [y for y, r in status.items() if r["status"] == "ok"]
    for y, r in sorted(status.items()):
        print(f"{y}: {r['status']} ({len(r['tickers'])} tickers, T={r['T']})")
    return _code(len(ok), len(status))


def _code(n_ok: int, n_total: int) -> int:
    if n_total and n_ok == n_total:
        return EXIT_OK
    return EXIT_FAIL if n_ok == 0 else EXIT_PARTIAL


def _stage(args) -> int:
    cfg = _stage_config(args)
    pattern, producer = _STAGE_INPUTS[args.command]
    years = _years(args.year) or discover_years(args.input, pattern)
    if not years:
        raise MissingArtifactError(
            f"no {pattern.format(year='<year>')} in {args.input}; produce it with `marketnet {producer}`"
        )
    runners = {
        "ggm": lambda y: stage_ggm(args.input, args.out, y, cfg.ggm, cfg.workers),
        "centrality": lambda y: stage_centrality(args.input, args.out, y, cfg.centrality),
        "garch": lambda y: stage_garch(args.input, args.out, y, cfg.garch),
        "community": lambda y: stage_community(args.input, args.out, y, cfg.community),
    }
    n_ok = 0
    for y in years:
        try:
            runners[args.command](y)
            n_ok += 1
            print(f"{y}: complete")
        except MissingArtifactError:
            raise
        except (MarketNetError, ValueError) as exc:
            logger.error("year %d failed: %s", y, exc)
            print(f"{y}: failed ({exc})")
    if args.command == "centrality":
        write_centrality_timeseries(args.out)
    elif args.command == "community":
        write_modularity_summary(args.out)
    return _code(n_ok, len(years))


def _synth(args) -> int:
    from .synthetic import write_synthetic

    path = write_synthetic(args.out, years=parse_years(args.years), seed=args.seed or 0)
    print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "ingest":
            return _ingest(args)
        if args.command == "synth":
            return _synth(args)
        return _stage(args)
    except (ConfigError, MarketNetError, ValueError, OSError) as exc:
        print(f"marketnet: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
