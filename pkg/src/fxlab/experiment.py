"""Heuristic comparison runs: select, score, normalise, persist.

A run is fully determined by its :class:`ExperimentConfig`; each row's seed
is derived from ``(master seed, graph id, k, heuristic)`` so neither row
order nor thread count can change the report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import exact, moran, optimizers, weak
from .errors import ConfigError, DirectedUnsupported, ExcessiveTimeouts
from .graph import Graph, from_spec, read_edge_list
from .optimizers import Heuristic

REGIMES = ("strong", "weak", "finite")
DEFAULT_BUDGETS = (0.1, 0.3, 0.5)
LAYOUTS = ("spaced", "contiguous")

CSV_COLUMNS = ("graph_id", "n", "k", "heuristic", "chosen", "raw_score", "stderr",
               "normalized_score", "seed", "trials", "status")


@dataclass(frozen=True)
class GraphSource:
    id: str
    gen: Optional[str] = None
    path: Optional[str] = None
    directed: bool = False
    weighted: bool = False

    def load(self, base: Path | None = None) -> Graph:
        if self.gen:
            return from_spec(self.gen)
        p = Path(self.path)
        if base is not None and not p.is_absolute():
            p = base / p
        return read_edge_list(p, directed=self.directed, weighted=self.weighted)


@dataclass
class ExperimentConfig:
    graphs: list[GraphSource]
    regime: str = "strong"
    delta: Optional[float] = None
    budgets: tuple[float, ...] = DEFAULT_BUDGETS
    ks: Optional[tuple[int, ...]] = None
    heuristics: tuple[str, ...] = tuple(h.value for h in Heuristic)
    sets: dict = field(default_factory=dict)
    trials: int = 10_000
    greedy_trials: int = 2_000
    exact_cap: int = 10
    seed: int = 0
    base_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.regime == "finite":
            if self.delta is None or not (self.delta >= 0 and math.isfinite(self.delta)):
                raise ConfigError("finite regime needs a finite delta >= 0")
        if any(b < 0 for b in self.budgets) or any(k < 0 for k in self.ks or ()):
            raise ConfigError("budgets must be >= 0")
        for h in self.heuristics:
            try:
                Heuristic(h)
            except ValueError:
                raise ConfigError(f"unknown heuristic {h!r}") from None
        if not self.graphs:
            raise ConfigError("no graphs configured")
        ids = [g.id for g in self.graphs]
        if len(set(ids)) != len(ids):
            raise ConfigError("graph ids must be unique")
        if self.trials < 1 or self.greedy_trials < 1:
            raise ConfigError("trial counts must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = dict(data)
        graphs = []
        for item in data.pop("graphs", []):
            if isinstance(item, str):
                item = {"gen": item}
            item = dict(item)
            if not (item.get("gen") or item.get("path")):
                raise ConfigError("graph entry needs 'gen' or 'path'")
            item.setdefault("id", item.get("gen") or Path(item["path"]).stem)
            graphs.append(GraphSource(**item))
        for key in ("budgets", "ks", "heuristics"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        known = set(cls.__dataclass_fields__) - {"graphs", "base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(graphs=graphs, base_dir=base_dir, **data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def budgets_for(self, n: int) -> list[int]:
        if self.ks is not None:
            return sorted(set(int(k) for k in self.ks))
        return sorted(set(budget_to_k(b, n) for b in self.budgets))


def budget_to_k(fraction: float, n: int) -> int:
    """``floor(fraction * n)``, but at least one node for a positive fraction."""
    k = int(math.floor(fraction * n + 1e-9))
    return max(k, 1) if fraction > 0 else 0


@dataclass(frozen=True)
class Row:
    graph_id: str
    n: int
    k: int
    heuristic: str
    chosen: tuple[str, ...]
    raw_score: float
    stderr: float
    normalized_score: float
    seed: int
    trials: int
    wall_time: float = 0.0
    status: str = "ok"


@dataclass
class ExperimentReport:
    rows: list[Row]

    def to_csv(self, timings: bool = False) -> str:
        cols = CSV_COLUMNS + (("wall_time",) if timings else ())
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.rows:
            writer.writerow([_cell(getattr(row, c)) for c in cols])
        return buf.getvalue()

    def to_json(self, timings: bool = False) -> str:
        out = []
        for row in self.rows:
            d = asdict(row)
            d["chosen"] = list(row.chosen)
            if not timings:
                d.pop("wall_time")
            out.append({k: (_fmt(v) if isinstance(v, float) else v) for k, v in d.items()})
        return json.dumps(out, indent=1) + "\n"


def _fmt(x: float) -> float:
    return float(f"{x:.12g}")


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, tuple):
        return " ".join(v)
    return str(v)


def row_seed(master: int, graph_id: str, k: int, heuristic: str) -> int:
    ss = np.random.SeedSequence(
        [int(master) & 0xFFFFFFFF, zlib.crc32(graph_id.encode()), int(k),
         zlib.crc32(heuristic.encode())])
    return int(ss.generate_state(1)[0])


def layout_set(name: str, n: int, k: int) -> tuple[int, ...]:
    """Cycle activation layouts: ``spaced`` is ``floor(i n / k)``, ``contiguous`` is ``0..k-1``."""
    k = min(k, n)
    if name == "spaced":
        return tuple(i * n // k for i in range(k))
    if name == "contiguous":
        return tuple(range(k))
    raise ConfigError(f"unknown layout {name!r}; expected one of {LAYOUTS}")


def normalize_scores(rows: list[Row]) -> list[Row]:
    """Divide each raw score by its (graph, k) group maximum.

    A group whose maximum is zero (possible only for weak objectives) gets
    normalised score 1.0 throughout.
    """
    best: dict[tuple[str, int], float] = {}
    for r in rows:
        key = (r.graph_id, r.k)
        best[key] = max(best.get(key, -math.inf), r.raw_score)
    out = []
    for r in rows:
        top = best[(r.graph_id, r.k)]
        norm = 1.0 if top <= 0 else r.raw_score / top
        out.append(replace(r, normalized_score=norm))
    return out


class _Scorer:
    def __init__(self, cfg: ExperimentConfig, g: Graph):
        self.cfg = cfg
        self.g = g
        self.cap = None if g.undirected else moran.default_cap(g.n, cfg.delta or 0.0)

    def oracle(self, seed: int):
        cfg, g = self.cfg, self.g
        if cfg.regime == "weak":
            return optimizers.weak_oracle(g)
        if cfg.regime == "strong":
            if g.n <= cfg.exact_cap:
                return optimizers.strong_exact_oracle(g, cfg.exact_cap)
            return optimizers.strong_mc_oracle(g, cfg.greedy_trials, seed)
        return optimizers.finite_mc_oracle(g, cfg.delta, cfg.greedy_trials, seed, self.cap)

    def score(self, active, seed: int) -> tuple[float, float, int, str]:
        """(raw, stderr, trials, status) for one active set."""
        cfg, g = self.cfg, self.g
        if cfg.regime == "weak":
            return weak.weak_objective(g, active), 0.0, 0, "ok"
        if cfg.regime == "strong" and g.n <= cfg.exact_cap:
            return exact.exact_fp_strong(g, active, cfg.exact_cap).average, 0.0, 0, "ok"
        try:
            if cfg.regime == "strong":
                est = moran.estimate_fp_strong(g, active, cfg.trials, seed)
            else:
                est = moran.estimate_fp(g, moran.ProcessParams(active, cfg.delta),
                                        cfg.trials, seed, cap=self.cap)
            status = "ok"
        except ExcessiveTimeouts as exc:
            est, status = exc.estimate, "excessive-timeouts"
        return est.mean, est.stderr, est.trials, status


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    rows: list[Row] = []
    for src in cfg.graphs:
        g = src.load(cfg.base_dir)
        if cfg.regime == "strong" and not g.undirected:
            raise DirectedUnsupported(f"graph {src.id!r}: strong regime needs an undirected graph")
        scorer = _Scorer(cfg, g)
        for k in cfg.budgets_for(g.n):
            jobs = [(h, None) for h in cfg.heuristics]
            jobs += [(name, spec) for name, spec in sorted(cfg.sets.items())]
            for name, spec in jobs:
                t0 = time.perf_counter()
                seed = row_seed(cfg.seed, src.id, k, name)
                if spec is None:
                    oracle = scorer.oracle(seed) if name == Heuristic.LAZY_GREEDY.value else None
                    chosen = optimizers.select(g, name, k, seed=seed, oracle=oracle).chosen
                elif isinstance(spec, str):
                    chosen = layout_set(spec, g.n, k)
                else:
                    chosen = tuple(g.index_of(str(lab)) for lab in spec)
                raw, se, trials, status = scorer.score(frozenset(chosen), seed)
                rows.append(Row(src.id, g.n, k, name, tuple(g.labels[u] for u in chosen),
                                raw, se, math.nan, seed, trials,
                                time.perf_counter() - t0, status))
    rows.sort(key=lambda r: (r.graph_id, r.k, r.heuristic))
    return ExperimentReport(normalize_scores(rows))


def write_report(report: ExperimentReport, path, fmt: str = "csv",
                 timings: bool = False) -> None:
    text = report.to_csv(timings) if fmt == "csv" else report.to_json(timings)
    Path(path).write_text(text, encoding="utf-8")
