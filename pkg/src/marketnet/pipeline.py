"""Per-year stages working on files, and the orchestrator that chains them.

Every stage reads its inputs from a directory and writes its outputs to
another, so any stage can be re-run alone from persisted intermediates:

============  ==============================  =====================================
stage         reads                           writes
============  ==============================  =====================================
ingest        price CSV                       returns_Y.csv, ingest_Y.json
ggm           returns_Y.csv                   network_Y.{json,graphml,dot}, ...
centrality    network_Y.json                  centrality_Y.csv, spectrum_Y.csv, ...
garch         returns_Y.csv                   garch_params_Y.csv, correlation_Y.csv, ...
community     correlation_Y.csv, dcc_Y.json   communities_Y_Q*.csv, ...
============  ==============================  =====================================
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from . import __version__, kernels
from .centrality import (
    TIMESERIES_COLUMNS,
    CentralityReport,
    centrality_report,
    centrality_timeseries,
    degree_centrality,
    degree_histogram,
    full_spectrum,
)
from .community import detect
from .config import (
    CentralityParams,
    CommunityParams,
    FilterParams,
    GarchParams,
    GgmParams,
    RunConfig,
)
from .errors import ConvergenceError, MarketNetError, MissingArtifactError
from .export import (
    communities_to_graphml,
    network_from_json,
    network_to_dot,
    network_to_graphml,
    network_to_json,
    read_matrix_csv,
    write_frame,
    write_matrix_csv,
)
from .garch import mu_table, yearly_correlation
from .ggm import estimate_network
from .ingest import UNKNOWN_SECTOR, ReturnsPanel, load_prices, yearly_windows

logger = logging.getLogger(__name__)

STAGES = ("ingest", "ggm", "centrality", "garch", "community")
MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------------------
# helpers


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _require(path: Path, producer: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(f"missing {path.name} in {path.parent}; produce it with `marketnet {producer}`")
    return path


def discover_years(in_dir: str | Path, pattern: str) -> list[int]:
    """Years for which ``pattern`` (with ``{year}``) exists in ``in_dir``."""
    rx = re.compile("^" + re.escape(pattern).replace(r"\{year\}", r"(\d{4})") + "$")
    years = []
    for p in Path(in_dir).iterdir() if Path(in_dir).is_dir() else []:
        m = rx.match(p.name)
        if m:
            years.append(int(m.group(1)))
    return sorted(years)


def _load_returns(in_dir: Path, year: int) -> ReturnsPanel:
    path = _require(in_dir / f"returns_{year}.csv", "ingest")
    sectors = {}
    meta = in_dir / f"ingest_{year}.json"
    if meta.is_file():
        sectors = json.loads(meta.read_text()).get("sectors", {})
    return ReturnsPanel.from_csv(path, sectors)


# ---------------------------------------------------------------------------
# stages


def stage_ingest(input_path: str | Path, out_dir: str | Path, years: Sequence[int] | None = None,
                 schema: dict | None = None, params: FilterParams | None = None) -> dict[int, dict]:
    """Load prices, filter each year and persist the aligned return panels.

    Returns a per-year status record.  Flagged years get an ``ingest_Y.json``
    but no returns file.
    """
    params = params or FilterParams()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panel = load_prices(input_path, schema)
    if years is None:
        years = sorted({int(str(d)[:4]) for d in panel.dates})
    windows = yearly_windows(panel, years, params.min_fraction, params.window_len, params.min_var, params.min_tickers)
    status = {}
    for w in windows:
        rec = {"year": w.year, "status": w.status, "message": w.message, "n_candidates": w.n_candidates,
               "dropped_rows": panel.dropped_rows}
        returns_path = out / f"returns_{w.year}.csv"
        if w.flagged:
            logger.warning("year %d flagged (%s): %s", w.year, w.status, w.message)
            returns_path.unlink(missing_ok=True)
            rec.update(tickers=[], sectors={}, T=0)
        else:
            r = w.returns
            r.to_csv(returns_path)
            rec.update(tickers=list(r.tickers), sectors={t: r.sectors.get(t, UNKNOWN_SECTOR) for t in r.tickers},
                       T=r.T)
        _write_json(out / f"ingest_{w.year}.json", rec)
        status[w.year] = rec
    return status


def stage_ggm(in_dir: str | Path, out_dir: str | Path, year: int, params: GgmParams | None = None,
              threads: int = 1) -> dict:
    params = params or GgmParams()
    in_dir, out = Path(in_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    returns = _load_returns(in_dir, year)
    net, fits = estimate_network(returns, gamma=params.gamma, grid_size=params.grid_size, tol=params.tol,
                                 year=year, threads=threads, selection=params.selection, folds=params.folds)
    network_to_json(net, out / f"network_{year}.json")
    write_matrix_csv(out / f"partial_corr_{year}.csv", net.P, net.tickers)
    network_to_graphml(net, out / f"network_{year}.graphml")
    network_to_dot(net, out / f"network_{year}.dot")
    nodes = pd.DataFrame({
        "node": net.tickers,
        "lambda": [f.lam for f in fits],
        "intercept": [f.intercept for f in fits],
        "residual_variance": [f.residual_variance for f in fits],
        "n_selected": [int(np.count_nonzero(f.betas)) for f in fits],
    })
    write_frame(out / f"nodewise_{year}.csv", nodes)
    if net.sign_conflicts or net.clip_events:
        logger.warning("year %d: %d sign conflicts, %d clipped weights", year, net.sign_conflicts, net.clip_events)
    return {"n_edges": len(list(net.edges())), "sign_conflicts": net.sign_conflicts, "clip_events": net.clip_events}


def _null_report(net) -> CentralityReport:
    deg, absdeg = degree_centrality(net)
    spec = full_spectrum(net)
    return CentralityReport(list(net.tickers), deg, absdeg, np.full(net.n, np.nan), 0.0,
                            spec.spectral_radius, True, net.year)


def stage_centrality(in_dir: str | Path, out_dir: str | Path, year: int,
                     params: CentralityParams | None = None) -> dict:
    params = params or CentralityParams()
    in_dir, out = Path(in_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = network_from_json(_require(in_dir / f"network_{year}.json", "ggm"))
    try:
        report = centrality_report(net, params.degeneracy_threshold)
    except ConvergenceError:
        raise
    except MarketNetError as exc:
        logger.warning("year %d: %s; eigencentrality left empty", year, exc)
        report = _null_report(net)
    write_frame(out / f"centrality_{year}.csv", report.to_frame())
    spec = full_spectrum(net)
    write_frame(out / f"spectrum_{year}.csv", pd.DataFrame({
        "rank": np.arange(1, net.n + 1),
        "eigenvalue": spec.eigenvalues,
        "modulus": np.abs(spec.eigenvalues),
    }))
    write_frame(out / f"degree_hist_{year}.csv", degree_histogram(report.degree, params.bin_width))
    if report.degenerate:
        logger.warning("year %d: dominant eigenvalue is not well separated (|l2/l1| = %.4f)", year, spec.gap_ratio)
    row = centrality_timeseries([report]).iloc[0].to_dict()
    row = {k: (v.item() if hasattr(v, "item") else v) for k, v in row.items()}
    _write_json(out / f"centrality_summary_{year}.json", row)
    return row


def stage_garch(in_dir: str | Path, out_dir: str | Path, year: int, params: GarchParams | None = None) -> dict:
    params = params or GarchParams()
    in_dir, out = Path(in_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    returns = _load_returns(in_dir, year)
    yc = yearly_correlation(returns, reduce=params.reduce, grad_tol=params.grad_tol, restarts=params.restarts)
    rows = [{"ticker": t, "mu": p.mu, "phi": p.phi, "psi": p.psi, "alpha0": p.alpha0, "alpha1": p.alpha1,
             "beta1": p.beta1, "loglik": p.loglik} for t, p in yc.fits.items()]
    write_frame(out / f"garch_params_{year}.csv", pd.DataFrame(rows))
    mu_table(yc.fits, year).to_csv(out / f"mu_table_{year}.csv", index=False, lineterminator="\n")
    write_matrix_csv(out / f"correlation_{year}.csv", yc.C, yc.tickers)
    doc = {"year": year, "T": yc.T, "a": yc.dcc.a, "b": yc.dcc.b, "loglik": yc.dcc.loglik,
           "tickers": yc.tickers, "dropped": yc.dropped, "psd_clipped": yc.clipped, "reduce": params.reduce,
           "sectors": {t: returns.sectors.get(t, UNKNOWN_SECTOR) for t in yc.tickers}}
    _write_json(out / f"dcc_{year}.json", doc)
    return {"a": yc.dcc.a, "b": yc.dcc.b, "dropped": sorted(yc.dropped)}


def stage_community(in_dir: str | Path, out_dir: str | Path, year: int,
                    params: CommunityParams | None = None) -> dict:
    params = params or CommunityParams()
    in_dir, out = Path(in_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    C, tickers = read_matrix_csv(_require(in_dir / f"correlation_{year}.csv", "garch"))
    meta = json.loads(_require(in_dir / f"dcc_{year}.json", "garch").read_text())
    sectors = meta.get("sectors", {})
    dec, parts = detect(C, int(meta["T"]), params.objectives, seed=params.seed, restarts=params.restarts)
    if "Q3" in params.objectives and not dec.has_group:
        logger.info("year %d: no eigenvalue between lambda_plus and the market mode; Q3 skipped", year)
    thresholds = {"Q2": params.threshold_q2, "Q3": params.threshold_q3}
    summary = []
    for obj, part in parts.items():
        write_frame(out / f"communities_{year}_{obj}.csv", pd.DataFrame({"node": tickers, "community": part.assignment}))
        W = dec.Cs if obj == "Q2" else dec.Cg
        communities_to_graphml(W, tickers, sectors, part.assignment, out / f"communities_{year}_{obj}.graphml",
                               thresholds[obj])
        summary.append({"year": year, "objective": obj, "n_communities": part.n_communities,
                        "modularity": part.modularity, "has_group": dec.has_group})
    _write_json(out / f"community_summary_{year}.json", {
        "year": year, "lambda_minus": dec.lambda_minus, "lambda_plus": dec.lambda_plus,
        "n_group_eigenvalues": dec.n_group, "rows": summary,
    })
    return {"has_group": dec.has_group, "objectives": sorted(parts)}


def write_centrality_timeseries(out_dir: str | Path) -> Path | None:
    out = Path(out_dir)
    years = discover_years(out, "centrality_summary_{year}.json")
    if not years:
        return None
    rows = [json.loads((out / f"centrality_summary_{y}.json").read_text()) for y in years]
    path = out / "centrality_timeseries.csv"
    write_frame(path, pd.DataFrame(rows, columns=TIMESERIES_COLUMNS))
    return path


def write_modularity_summary(out_dir: str | Path) -> Path | None:
    out = Path(out_dir)
    years = discover_years(out, "community_summary_{year}.json")
    if not years:
        return None
    rows = []
    for y in years:
        rows.extend(json.loads((out / f"community_summary_{y}.json").read_text())["rows"])
    path = out / "modularity_summary.csv"
    write_frame(path, pd.DataFrame(rows, columns=["year", "objective", "n_communities", "modularity", "has_group"]))
    return path


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class RunManifest:
    config: dict
    years: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    backend: str = kernels.BACKEND
    version: str = __version__

    @property
    def n_complete(self) -> int:
        return sum(1 for v in self.years.values() if v["status"] == "complete")

    @property
    def exit_code(self) -> int:
        """0 when every year completed, 1 when none did, 2 otherwise."""
        if self.years and self.n_complete == len(self.years):
            return 0
        return 1 if self.n_complete == 0 else 2

    def to_dict(self) -> dict:
        return {"version": self.version, "backend": self.backend, "config": self.config,
                "years": {str(k): v for k, v in sorted(self.years.items())}, "artifacts": self.artifacts}

    def write(self, path: str | Path) -> None:
        _write_json(Path(path), self.to_dict())


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def _year_job(year: int, out_dir: str, cfg: dict, threads: int) -> dict:
    """ggm -> centrality -> garch -> community for one year; never raises."""
    from .config import config_from_dict

    c = config_from_dict(cfg)
    out = Path(out_dir)
    root = logging.getLogger("marketnet")
    grab = _Collector()
    root.addHandler(grab)
    timings = {}
    rec = {"status": "complete", "error": ""}
    stage = None
    try:
        for stage, fn in (
            ("ggm", lambda: stage_ggm(out, out, year, c.ggm, threads)),
            ("centrality", lambda: stage_centrality(out, out, year, c.centrality)),
            ("garch", lambda: stage_garch(out, out, year, c.garch)),
            ("community", lambda: stage_community(out, out, year, c.community)),
        ):
            t0 = time.perf_counter()
            rec[stage] = fn()
            timings[stage] = round(time.perf_counter() - t0, 4)
    except Exception as exc:  # per-year isolation
        logger.error("year %d failed in %s: %s", year, stage, exc)
        rec.update(status="failed", error=f"{stage}: {type(exc).__name__}: {exc}")
    finally:
        root.removeHandler(grab)
    rec["timings"] = timings
    rec["warnings"] = grab.messages
    return rec


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _year_files(out: Path, years: Iterable[int]) -> list[Path]:
    years = {str(y) for y in years}
    files = []
    for p in sorted(out.iterdir()):
        if not p.is_file() or p.name == MANIFEST_NAME:
            continue
        m = re.search(r"_(\d{4})(?:_|\.)", p.name)
        if m is None or m.group(1) in years:
            files.append(p)
    return files


def _clear_year(out: Path, year: int) -> None:
    """Remove stale downstream outputs of ``year`` before it is recomputed."""
    for p in _year_files(out, [year]):
        if re.search(rf"_{year}(?:_|\.)", p.name) and not p.name.startswith(("returns_", "ingest_")):
            p.unlink()


def run_pipeline(config: RunConfig) -> RunManifest:
    """Run all stages for every configured year and write ``manifest.json``.

    Years are independent jobs (run in a process pool when ``threads > 1``);
    a failing year is recorded in the manifest and does not stop the others.
    """
    config.validate()
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=config.to_dict())
    t0 = time.perf_counter()
    status = stage_ingest(config.input, out, config.years, config.schema, config.filter)
    ingest_time = round(time.perf_counter() - t0, 4)
    todo = []
    for y in config.years:
        rec = status[y]
        entry = {"tickers": rec["tickers"], "n_tickers": len(rec["tickers"]), "T": rec["T"],
                 "timings": {"ingest": ingest_time}, "warnings": []}
        if rec["status"] != "ok":
            entry.update(status="flagged", error=f"ingest: {rec['status']}: {rec['message']}")
        else:
            todo.append(y)
        manifest.years[y] = entry
        _clear_year(out, y)

    workers = min(config.workers, len(todo)) if todo else 1
    cfg = config.to_dict()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(todo, pool.map(_year_job, todo, [str(out)] * len(todo), [cfg] * len(todo),
                                              [1] * len(todo))))
    else:
        results = {y: _year_job(y, str(out), cfg, config.workers) for y in todo}
    for y, rec in results.items():
        entry = manifest.years[y]
        entry["timings"].update(rec.pop("timings"))
        entry["warnings"] = rec.pop("warnings")
        entry.update(rec)

    write_centrality_timeseries(out)
    write_modularity_summary(out)
    manifest.artifacts = {p.name: sha256(p) for p in _year_files(out, config.years)}
    manifest.write(out / MANIFEST_NAME)
    logger.info("%d of %d years complete", manifest.n_complete, len(config.years))
    return manifest
