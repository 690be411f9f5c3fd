"""Run configuration loaded from YAML.

Example::

    input: prices.csv
    output: out/
    years: [2004, 2005, 2006]      # or "2004-2006"
    threads: 4
    schema: {date: date, ticker: ticker, close: close, sector: sector}
    filter: {min_fraction: 0.9, window_len: 30, min_var: 1.0e-10, min_tickers: 3}
    ggm: {gamma: 0.25, grid_size: 50, tol: 1.0e-7, selection: ebic, folds: 5}
    centrality: {degeneracy_threshold: 0.999, bin_width: 0.1}
    garch: {grad_tol: 1.0e-3, restarts: 3, reduce: mean}
    community: {objectives: [Q2, Q3], seed: 0, restarts: 8,
                threshold_q2: 0.3, threshold_q3: 0.05}
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .community import OBJECTIVES
from .garch import GARCH_STARTS
from .ingest import DEFAULT_SCHEMA


class ConfigError(ValueError):
    pass


@dataclass
class FilterParams:
    min_fraction: float = 0.90
    window_len: int = 30
    min_var: float = 1e-10
    min_tickers: int = 3

    def validate(self):
        _check(0.0 < self.min_fraction <= 1.0, "filter.min_fraction must be in (0, 1]")
        _check(self.window_len >= 2, "filter.window_len must be >= 2")
        _check(self.min_var >= 0.0, "filter.min_var must be >= 0")
        _check(self.min_tickers >= 2, "filter.min_tickers must be >= 2")


@dataclass
class GgmParams:
    gamma: float = 0.25
    grid_size: int = 50
    tol: float = 1e-7
    selection: str = "ebic"
    folds: int = 5

    def validate(self):
        _check(self.selection in ("ebic", "cv"), "ggm.selection must be ebic or cv")
        _check(self.folds >= 2, "ggm.folds must be >= 2")
        _check(0.0 <= self.gamma <= 1.0, "ggm.gamma must be in [0, 1]")
        _check(self.grid_size >= 2, "ggm.grid_size must be >= 2")
        _check(0.0 < self.tol < 1e-2, "ggm.tol must be in (0, 1e-2)")


@dataclass
class CentralityParams:
    degeneracy_threshold: float = 0.999
    bin_width: float = 0.1

    def validate(self):
        _check(0.0 < self.degeneracy_threshold <= 1.0, "centrality.degeneracy_threshold must be in (0, 1]")
        _check(self.bin_width > 0.0, "centrality.bin_width must be > 0")


@dataclass
class GarchParams:
    grad_tol: float = 1e-3
    restarts: int = len(GARCH_STARTS)
    reduce: str = "mean"

    def validate(self):
        _check(self.grad_tol > 0.0, "garch.grad_tol must be > 0")
        _check(1 <= self.restarts <= len(GARCH_STARTS), f"garch.restarts must be in 1..{len(GARCH_STARTS)}")
        _check(self.reduce in ("mean", "last", "unconditional"), "garch.reduce must be mean, last or unconditional")


@dataclass
class CommunityParams:
    objectives: list = field(default_factory=lambda: list(OBJECTIVES))
    seed: int = 0
    restarts: int = 8
    threshold_q2: float = 0.3
    threshold_q3: float = 0.05

    def validate(self):
        _check(len(self.objectives) > 0, "community.objectives must not be empty")
        for o in self.objectives:
            _check(o in OBJECTIVES, f"community.objectives: unknown objective {o!r}")
        _check(self.restarts >= 1, "community.restarts must be >= 1")
        _check(self.seed >= 0, "community.seed must be >= 0")
        _check(self.threshold_q2 >= 0 and self.threshold_q3 >= 0, "community thresholds must be >= 0")


@dataclass
class RunConfig:
    input: str = ""
    output: str = "out"
    years: list = field(default_factory=list)
    threads: int = 0  # 0 = all cores
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    filter: FilterParams = field(default_factory=FilterParams)
    ggm: GgmParams = field(default_factory=GgmParams)
    centrality: CentralityParams = field(default_factory=CentralityParams)
    garch: GarchParams = field(default_factory=GarchParams)
    community: CommunityParams = field(default_factory=CommunityParams)

    def validate(self, check_input: bool = True) -> "RunConfig":
        if not self.years:
            raise ConfigError("nothing to do: the years list is empty")
        _check(all(isinstance(y, int) for y in self.years), "years must be integers")
        _check(len(set(self.years)) == len(self.years), "years must not repeat")
        _check(self.threads >= 0, "threads must be >= 0")
        missing = {"date", "ticker", "close"} - set(self.schema)
        _check(not missing, f"schema is missing {sorted(missing)}")
        if check_input:
            _check(bool(self.input) and Path(self.input).is_file(), f"input file not found: {self.input!r}")
        for sec in (self.filter, self.ggm, self.centrality, self.garch, self.community):
            sec.validate()
        out = Path(self.output)
        probe = out if out.exists() else out.parent if str(out.parent) else Path(".")
        while not probe.exists():
            probe = probe.parent
        _check(os.access(probe, os.W_OK), f"output directory is not writable: {self.output}")
        return self

    @property
    def workers(self) -> int:
        return self.threads or (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "filter": FilterParams,
    "ggm": GgmParams,
    "centrality": CentralityParams,
    "garch": GarchParams,
    "community": CommunityParams,
}


def _check(ok: bool, msg: str):
    if not ok:
        raise ConfigError(msg)


def parse_years(value) -> list[int]:
    """Accept a list of years, a single year or a ``"start-end"`` range."""
    if value is None:
        return []
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        if "-" in value:
            a, b = value.split("-", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"bad year range {value!r}")
            return list(range(a, b + 1))
        return [int(value)]
    return [int(y) for y in value]


def _build(cls, values: Mapping[str, Any], where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**values)


def config_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> RunConfig:
    doc = dict(doc or {})
    kwargs: dict[str, Any] = {}
    for key, cls in _SECTIONS.items():
        if key in doc:
            kwargs[key] = _build(cls, doc.pop(key) or {}, key)
    if "years" in doc:
        kwargs["years"] = parse_years(doc.pop("years"))
    if "schema" in doc:
        schema = dict(DEFAULT_SCHEMA)
        schema.update(doc.pop("schema") or {})
        kwargs["schema"] = schema
    cfg = _build(RunConfig, {**doc, **kwargs}, "config")
    # relative paths are taken relative to the config file
    if base_dir is not None:
        for attr in ("input", "output"):
            v = getattr(cfg, attr)
            if v and not Path(v).is_absolute():
                setattr(cfg, attr, str(base_dir / v))
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(doc or {}, base_dir=path.parent)
