import json
import math

import pytest

from fxlab import experiment, graph
from fxlab.errors import ConfigError, DirectedUnsupported
from fxlab.experiment import ExperimentConfig, GraphSource, Row


def _row(gid, k, h, raw):
    return Row(gid, 4, k, h, (), raw, 0.0, math.nan, 0, 0)


@pytest.mark.parametrize("raws, want", [
    ([0.5, 0.25], [1.0, 0.5]), ([0.3], [1.0]), ([0.0, 0.0], [1.0, 1.0])])
def test_normalize_examples(raws, want):
    rows = [_row("g", 1, f"h{i}", r) for i, r in enumerate(raws)]
    assert [r.normalized_score for r in experiment.normalize_scores(rows)] == want


def test_normalize_is_per_group():
    rows = [_row("a", 1, "x", 0.5), _row("a", 2, "x", 0.2), _row("b", 1, "x", 0.1),
            _row("a", 1, "y", 0.25)]
    got = [r.normalized_score for r in experiment.normalize_scores(rows)]
    assert got == [1.0, 1.0, 1.0, 0.5]


def test_budget_to_k():
    assert [experiment.budget_to_k(b, 50) for b in (0.1, 0.3, 0.5)] == [5, 15, 25]
    assert experiment.budget_to_k(0.1, 4) == 1
    assert experiment.budget_to_k(0.0, 4) == 0


def test_layouts():
    assert experiment.layout_set("spaced", 50, 18)[:4] == (0, 2, 5, 8)
    assert len(set(experiment.layout_set("spaced", 50, 18))) == 18
    assert experiment.layout_set("contiguous", 10, 3) == (0, 1, 2)
    with pytest.raises(ConfigError):
        experiment.layout_set("zigzag", 10, 3)


def test_row_seed_depends_on_every_key():
    base = experiment.row_seed(1, "g", 2, "random")
    assert base == experiment.row_seed(1, "g", 2, "random")
    assert len({base, experiment.row_seed(2, "g", 2, "random"),
                experiment.row_seed(1, "h", 2, "random"), experiment.row_seed(1, "g", 3, "random"),
                experiment.row_seed(1, "g", 2, "temperature")}) == 5


def test_weak_regime_star():
    cfg = ExperimentConfig(graphs=[GraphSource("star", gen="star(4)")], regime="weak",
                           ks=(1,), heuristics=("weak-selector", "high-degree", "random"))
    rows = {r.heuristic: r for r in experiment.run_experiment(cfg).rows}
    for h in ("weak-selector", "high-degree"):
        assert rows[h].chosen == ("0",)
        assert rows[h].raw_score == pytest.approx(9 / 40, abs=1e-15)
        assert rows[h].normalized_score == 1.0
    assert 0 < rows["random"].normalized_score <= 1.0


def test_strong_regime_vertex_cover_value():
    cfg = ExperimentConfig(graphs=[GraphSource("c6", gen="cycle(6)")], regime="strong",
                           ks=(3,), heuristics=("vertex-cover",), exact_cap=4, trials=40_000)
    (row,) = experiment.run_experiment(cfg).rows
    assert row.chosen == ("0", "2", "4")
    assert abs(row.raw_score - 0.75) <= 3 * row.stderr


def test_rows_are_sorted_and_normalised():
    cfg = ExperimentConfig(graphs=[GraphSource("rc", gen="random-connected(9,13,4)"),
                                   GraphSource("c8", gen="cycle(8)")], regime="strong", seed=3)
    rep = experiment.run_experiment(cfg)
    keys = [(r.graph_id, r.k, r.heuristic) for r in rep.rows]
    assert keys == sorted(keys)
    groups = {}
    for r in rep.rows:
        assert 0 < r.normalized_score <= 1.0
        groups.setdefault((r.graph_id, r.k), []).append(r.normalized_score)
    assert all(max(v) == 1.0 for v in groups.values())
    assert {k for _, k in groups} == {1, 2, 4}


def test_finite_regime_on_digraph(tmp_path):
    p = tmp_path / "d.edges"
    p.write_text("a b 1\nb c 0.5\nb a 0.5\nc a 1\n")
    cfg = ExperimentConfig(graphs=[GraphSource("d", path=str(p), directed=True, weighted=True)],
                           regime="finite", delta=1.0, ks=(1,), trials=2000,
                           heuristics=("temperature", "lazy-greedy"), greedy_trials=500)
    rows = experiment.run_experiment(cfg).rows
    assert len(rows) == 2 and all(r.status == "ok" for r in rows)


def test_strong_regime_refuses_digraph(tmp_path):
    p = tmp_path / "d.edges"
    p.write_text("0 1\n1 0\n")
    cfg = ExperimentConfig(graphs=[GraphSource("d", path=str(p), directed=True)], ks=(1,))
    with pytest.raises(DirectedUnsupported):
        experiment.run_experiment(cfg)


@pytest.mark.parametrize("bad", [
    {"graphs": ["cycle(4)"], "regime": "chaotic"},
    {"graphs": ["cycle(4)"], "regime": "finite"},
    {"graphs": ["cycle(4)"], "regime": "finite", "delta": -1},
    {"graphs": ["cycle(4)"], "budgets": [-0.1]},
    {"graphs": ["cycle(4)"], "heuristics": ["psychic"]},
    {"graphs": []},
    {"graphs": ["cycle(4)"], "colour": "blue"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_load_and_report_formats(tmp_path):
    (tmp_path / "k4.edges").write_text("0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n")
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({
        "graphs": [{"path": "k4.edges", "id": "k4"}], "regime": "finite", "delta": 1 / 3,
        "ks": [2], "heuristics": ["high-degree"], "trials": 1000,
        "sets": {"pair": ["0", "1"]}}))
    rep = experiment.run_experiment(ExperimentConfig.load(cfgfile))
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == ",".join(experiment.CSV_COLUMNS)
    assert "wall_time" in rep.to_csv(timings=True).splitlines()[0]
    rows = json.loads(rep.to_json())
    assert [r["heuristic"] for r in rows] == ["high-degree", "pair"]
    assert rows[0]["chosen"] == ["0", "1"] and "wall_time" not in rows[0]
    assert rows[1]["chosen"] == ["0", "1"]
