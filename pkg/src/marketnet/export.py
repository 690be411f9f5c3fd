"""File formats: dense matrix CSV, network JSON, GraphML and DOT."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from .ggm import PartialCorrNetwork
from .ingest import UNKNOWN_SECTOR

SHAPES = ("ellipse", "box", "triangle", "diamond", "hexagon", "octagon", "invtriangle", "pentagon")
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def fmt(v: float) -> str:
    """Round-trip-safe float text."""
    return f"{float(v):.17g}"


def write_matrix_csv(path: str | Path, M: np.ndarray, labels: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["ticker", *labels]) + "\n")
        for lab, row in zip(labels, M):
            fh.write(lab + "," + ",".join(fmt(v) for v in row) + "\n")


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    df = pd.read_csv(path, index_col=0, float_precision="round_trip")
    labels = [str(c) for c in df.columns]
    if [str(i) for i in df.index] != labels:
        raise ValueError(f"{path}: row and column labels differ")
    return df.to_numpy(dtype=float), labels


def write_frame(path: str | Path, df: pd.DataFrame) -> None:
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def network_to_json(net: PartialCorrNetwork, path: str | Path) -> None:
    doc = {
        "year": net.year,
        "tickers": list(net.tickers),
        "sectors": {t: net.sectors.get(t, UNKNOWN_SECTOR) for t in net.tickers},
        "sign_conflicts": net.sign_conflicts,
        "clip_events": net.clip_events,
        "meta": net.meta,
        "P": [[float(v) for v in row] for row in net.P],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def network_from_json(path: str | Path) -> PartialCorrNetwork:
    doc = json.loads(Path(path).read_text())
    P = np.array(doc["P"], dtype=float).reshape(len(doc["tickers"]), len(doc["tickers"]))
    return PartialCorrNetwork(
        P=P,
        tickers=list(doc["tickers"]),
        sectors=dict(doc.get("sectors", {})),
        year=doc.get("year"),
        sign_conflicts=int(doc.get("sign_conflicts", 0)),
        clip_events=int(doc.get("clip_events", 0)),
        meta=dict(doc.get("meta", {})),
    )


def _graph(weights: np.ndarray, tickers: Sequence[str], sectors: Mapping[str, str], threshold: float = 0.0) -> nx.Graph:
    G = nx.Graph()
    for t in tickers:
        G.add_node(t, ticker=t, sector=sectors.get(t, UNKNOWN_SECTOR))
    n = len(tickers)
    for i in range(n):
        for j in range(i + 1, n):
            w = float(weights[i, j])
            if w != 0.0 and abs(w) >= threshold:
                G.add_edge(tickers[i], tickers[j], weight=w)
    return G


def network_to_graphml(net: PartialCorrNetwork, path: str | Path) -> None:
    nx.write_graphml(_graph(net.P, net.tickers, net.sectors), str(path))


def network_to_dot(net: PartialCorrNetwork, path: str | Path, max_width: float = 10.0) -> None:
    """DOT with green/red edges for positive/negative weights and penwidth ``max_width * |w|``."""
    name = f"partial_correlations_{net.year}" if net.year is not None else "partial_correlations"
    lines = [f'graph "{name}" {{', "  node [shape=ellipse];"]
    for t in net.tickers:
        lines.append(f'  "{t}" [label="{t}", sector="{net.sectors.get(t, UNKNOWN_SECTOR)}"];')
    for i, j, w in net.edges():
        color = "green" if w > 0 else "red"
        lines.append(
            f'  "{net.tickers[i]}" -- "{net.tickers[j]}" '
            f'[weight="{fmt(w)}", color="{color}", penwidth="{max_width * abs(w):.4f}"];'
        )
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def communities_to_graphml(
    weights: np.ndarray,
    tickers: Sequence[str],
    sectors: Mapping[str, str],
    assignment: Sequence[int],
    path: str | Path,
    threshold: float,
) -> None:
    """GraphML of the filtered matrix with community id, shape and colour hints per node.

    Only edges with ``|w| >= threshold`` are written; this is a display
    filter and does not affect the partition.
    """
    G = _graph(weights, tickers, sectors, threshold)
    for t, c in zip(tickers, assignment):
        G.nodes[t]["community"] = int(c)
        G.nodes[t]["shape"] = SHAPES[int(c) % len(SHAPES)]
        G.nodes[t]["color"] = COLORS[int(c) % len(COLORS)]
    nx.write_graphml(G, str(path))
