import csv
import json

import numpy as np
import pytest

from pudsim.bank import PATTERN_NAMES, Bank
from pudsim.harness import (ExperimentConfig, SUMMARY_COLUMNS, _polarity_vectors, best_timing,
                            discover_subarrays, export, quartiles, render, run_experiment)
from pudsim.profile import PRESETS

SMALL = dict(banks=1, subarrays=1, groups=6, trials=2, columns=32)


def test_default_accounting():
    cfg = ExperimentConfig(operation="activation", n=[2, 4, 8, 16, 32])
    # 16 banks x 3 subarrays x 100 groups x 5 activation counts
    assert cfg.banks * cfg.subarrays * cfg.groups * len(cfg.n) == 24000


def test_validation_errors():
    with pytest.raises(ValueError):
        ExperimentConfig(operation="nope").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(t1=[2.0]).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(operation="maj", n=[2]).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(x=[4]).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(temperatures=[100]).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(patterns=["plaid"]).validate()
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_tuples_skip_unfit_and_are_canonical():
    cfg = ExperimentConfig(x=[9, 3], n=[8, 4], vpps=[2.1, 2.5])
    t = cfg.tuples()
    assert (9, 4, 1.5, 3.0, "random", 50.0, 2.5) not in t
    assert t[0] == (3, 4, 1.5, 3.0, "random", 50.0, 2.5)
    assert t[1][-1] == 2.1


def test_quartiles_inclusive():
    assert quartiles([1, 2, 3, 4, 5]) == (1, 2, 3, 4, 5)
    assert quartiles([0.5]) == (0.5,) * 5
    assert quartiles([1, 2, 3, 4]) == (1, 1.75, 2.5, 3.25, 4)


def test_polarity_vectors_balanced():
    v = _polarity_vectors(3, 16, np.random.default_rng(0))
    codes = (v * (1 << np.arange(3))).sum(1)
    assert np.bincount(codes, minlength=8).tolist() == [2] * 8
    w = _polarity_vectors(9, 100, np.random.default_rng(0))
    assert w.shape == (100, 9) and abs(w.mean() - 0.5) < 0.05


def test_ideal_activation_is_perfect(h512):
    from pudsim.profile import AnalogParams
    ideal = h512.with_analog(**AnalogParams.ideal().__dict__)
    cfg = ExperimentConfig(operation="activation", t1=[3.0], t2=[3.0], n=[2, 32], trials=1,
                           **{k: v for k, v in SMALL.items() if k != "trials"})
    rep = run_experiment(cfg, ideal)
    assert all(s.mean == 1.0 for s in rep.summaries)


def test_paired_design_and_determinism(h512):
    cfg = ExperimentConfig(operation="maj", x=[3], n=[8], temperatures=[50, 90], **SMALL)
    a = run_experiment(cfg)
    b = run_experiment(cfg, jobs=2)
    assert [g.success for g in a.groups] == [g.success for g in b.groups]
    cold = [g for g in a.groups if g.params[5] == 50.0]
    hot = [g for g in a.groups if g.params[5] == 90.0]
    assert [(g.r_first, g.r_second) for g in cold] == [(g.r_first, g.r_second) for g in hot]


def test_coverage_once(h512):
    cfg = ExperimentConfig(operation="mrc", t1=[36.0], t2=[3.0], n=[2, 4],
                           patterns=["all0", "random"], **SMALL)
    rep = run_experiment(cfg)
    assert [s.params for s in rep.summaries] == sorted(
        cfg.tuples(), key=lambda p: (p[1], PATTERN_NAMES.index(p[4])))
    assert len({s.params for s in rep.summaries}) == len(cfg.tuples())


def test_best_timing_tie_break():
    cfg = ExperimentConfig(operation="activation", t1=[3.0, 6.0], t2=[3.0], n=[2], **SMALL)
    rep = run_experiment(cfg)
    t1, t2 = best_timing(rep, n=2)
    assert (t1, t2) in [(3.0, 3.0), (6.0, 3.0)]
    with pytest.raises(KeyError):
        best_timing(rep, n=4)


def test_export_csv_json(tmp_path):
    cfg = ExperimentConfig(operation="maj", x=[3], n=[4, 32], **SMALL)
    rep = run_experiment(cfg)
    paths = export([rep], tmp_path, "csv", stem="m")
    assert sorted(p.name for p in paths) == ["m_groups.csv", "m_plot.json", "m_summary.csv"]
    rows = list(csv.DictReader(open(tmp_path / "m_summary.csv")))
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    for r in rows:
        v = [float(r[k]) for k in ("min", "q1", "median", "q3", "max")]
        assert v == sorted(v)
    export([rep], tmp_path, "json", stem="m")
    body = json.loads((tmp_path / "m.json").read_text())
    assert len(body["groups"]) == 12
    assert render([rep])["results_summary.csv"] == render([rep])["results_summary.csv"]


def test_export_empty_and_bad_format(tmp_path):
    with pytest.raises(ValueError):
        export([], tmp_path)
    cfg = ExperimentConfig(operation="maj", x=[3], n=[4], **SMALL)
    with pytest.raises(ValueError):
        export([run_experiment(cfg)], tmp_path, "xml")


def test_discover_toy_and_h512():
    assert discover_subarrays(Bank(PRESETS["demo-8"], seed=0)) == [(0, 7)]
    ranges = discover_subarrays(Bank(PRESETS["mfrH-512"], seed=0, columns=32))
    assert len(ranges) == 128
    assert all(b - a + 1 == 512 for a, b in ranges)
