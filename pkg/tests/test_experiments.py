import csv
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from pdqubo import experiments as ex
from pdqubo.cli import main
from pdqubo.errors import ConfigError, DataError
from pdqubo.qubo import save_q


def tiny(tmp_path, **changes):
    base = dict(
        num_users=30, num_items=60, num_features=6, num_informative=2, sparsity=0.7,
        n_neighbors=20, num_samples=20, runs=2, out=str(tmp_path / "out"),
        scales=[4, 6], sample_counts=[1, 5], stability_reps=3, timing_reps=3,
        difficulty_reps=2, num_solutions=20,
    )
    base.update(changes)
    return ex.ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in ("wall_time", "timings", "out")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


class TestConfig:
    def test_file_roundtrip(self, tmp_path):
        cfg = tiny(tmp_path, k_list=[2, "*"], builders=["pdqubo", "miqubo"], penalty_weight="auto")
        cfg.write(tmp_path / "c.ini")
        assert ex.ExperimentConfig.read(tmp_path / "c.ini") == cfg

    def test_bare_words_are_strings(self, tmp_path):
        (tmp_path / "c.ini").write_text("[experiment]\nmetric = recall\ncutoff = 5\n")
        cfg = ex.ExperimentConfig.read(tmp_path / "c.ini")
        assert cfg.metric == "recall" and cfg.cutoff == 5

    @pytest.mark.parametrize("changes", [
        {"builders": ["magic"]}, {"solvers": ["qpu"]}, {"k_list": [-1]}, {"runs": 0},
        {"data": "/does/not/exist"}, {"interactions_path": "/nope.csv"},
    ])
    def test_invalid(self, tmp_path, changes):
        with pytest.raises(ConfigError):
            tiny(tmp_path, **changes)

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.ini").write_text("[experiment]\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            ex.ExperimentConfig.read(tmp_path / "c.ini")

    def test_missing_section(self, tmp_path):
        (tmp_path / "c.ini").write_text("[other]\nx = 1\n")
        with pytest.raises(ConfigError):
            ex.ExperimentConfig.read(tmp_path / "c.ini")


class TestPipeline:
    @pytest.fixture(scope="class")
    @classmethod
    def report(cls, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("pipe")
        cfg = tiny(tmp, k_list=[2, "*"], builders=["pdqubo", "pdqubo-indiv", "miqubo"], solvers=["sa", "tabu"])
        return cfg, ex.run_pipeline(cfg)

    def test_artifacts(self, report):
        cfg, rep = report
        out = cfg.out
        for name in ("report.json", "table.csv", "runs.csv", "config.ini", "profile.json", "q_pdqubo.json"):
            assert (Path(out) / name).exists(), name
        table = read_csv(f"{out}/table.csv")
        assert table[0] == ["builder", "dataset", "k", "sa", "tabu"]
        assert len(table) == 1 + 3 * 2 + 1
        assert ex.ExperimentConfig.read(f"{out}/config.ini") == cfg

    def test_rows(self, report):
        cfg, rep = report
        assert len(rep["rows"]) == 3 * 2 * 2
        for row in rep["rows"]:
            assert 0.0 <= row["metric_before"] <= 1.0
            assert len(row["runs"]) == cfg.runs
            for run in row["runs"]:
                assert 0.0 <= run["metric_after"] <= 1.0
                if row["k"] != "*":
                    assert run["cardinality_ok"] == (run["cardinality"] == row["k"])
                assert run["spot_check_ok"] if "spot_check" in run else True

    def test_seeds_embedded(self, report):
        _, rep = report
        seeds = [r["seed"] for r in rep["rows"][0]["runs"]]
        assert len(set(seeds)) == len(seeds)
        assert rep["config"]["seed"] == 0

    def test_rerun_reproduces(self, report, tmp_path):
        cfg, rep = report
        again = ex.rerun_from_report(f"{cfg.out}/report.json", out=tmp_path / "again")
        assert strip_timing(again) == strip_timing(json.loads(json.dumps(rep, default=ex._json_default)))

    def test_indiv_pairs_zero(self, report):
        cfg, rep = report
        from pdqubo.qubo import load_q
        q = load_q(f"{cfg.out}/q_pdqubo-indiv.json")
        assert not (q - np.diag(np.diag(q))).any()

    def test_k_exceeds_features(self, tmp_path):
        with pytest.raises(ConfigError, match="exceeds"):
            ex.run_pipeline(tiny(tmp_path, k_list=[7]))

    def test_refuses_test_profile(self, tmp_path):
        cfg = tiny(tmp_path)
        bundle = ex.load_bundle(cfg)
        _, test_ev = ex.evaluators(bundle, cfg)
        with pytest.raises(ConfigError, match="test-split"):
            ex._MatrixCache(bundle, cfg, test_ev).matrix("pdqubo")

    def test_stage_tagged_error(self, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / "interactions.csv").write_text("user_id,item_id\n")
        (corpus / "features.csv").write_text("item_id,feature_id,value\n")
        with pytest.raises(DataError, match=r"^\[data\]") as err:
            ex.run_pipeline(tiny(tmp_path, data=str(corpus)))
        assert err.value.stage == "data"

    def test_from_corpus_dir_and_csv_paths(self, tmp_path):
        cfg = tiny(tmp_path, runs=1)
        ex.synth(cfg.replace(out=str(tmp_path / "corpus")))
        rep = ex.run_pipeline(cfg.replace(data=str(tmp_path / "corpus")))
        assert 0.0 <= rep["rows"][0]["metric_after_mean"] <= 1.0
        # explicit paths carry no manifest, so feature rows of cold items are unknown ids
        files = dict(interactions_path=str(tmp_path / "corpus/interactions.csv"),
                     features_path=str(tmp_path / "corpus/features.csv"))
        with pytest.raises(DataError, match="unknown item id"):
            ex.run_pipeline(cfg.replace(data="files", **files))

    def test_all_builders_run(self, tmp_path):
        rep = ex.run_pipeline(tiny(tmp_path, runs=1, k_list=[3], solvers=["sgd"],
                                   builders=["coqubo", "boosting"]))
        assert [r["builder"] for r in rep["rows"]] == ["coqubo", "boosting"]


class TestAnalyses:
    def test_energy_vs_perf(self, tmp_path):
        rep = ex.energy_vs_performance(tiny(tmp_path, k_list=[3]), 20)
        assert rep["num_solutions"] == 20
        assert set(rep["sources"]) <= {"sa", "random"}
        assert -1.0 <= rep["spearman"] <= 1.0
        rows = read_csv(tmp_path / "out/energy_vs_perf.csv")
        assert rows[0] == ["energy", "metric", "source", "selected"] and len(rows) == 21
        assert all(len(r[3].split()) == 3 for r in rows[1:])

    def test_single_solution_null_with_warning(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            rep = ex.energy_vs_performance(tiny(tmp_path, k_list=[3]), 1)
        assert rep["spearman"] is None
        assert "undefined" in caplog.text

    def test_difficulty_shape(self, tmp_path):
        rep = ex.difficulty(tiny(tmp_path, k_list=[3]), [0.2, 0.4, 0.6])
        assert [r["drop_fraction"] for r in rep["rows"]] == [0.2, 0.4, 0.6]
        assert len(read_csv(tmp_path / "out/difficulty.csv")) == 4

    def test_difficulty_zero_drop_reproduces_baseline(self, tmp_path):
        cfg = tiny(tmp_path, k_list=[3], runs=1)
        rep = ex.difficulty(cfg, [0.0])
        bundle = ex.load_bundle(cfg)
        rows, before, _ = ex.run_selection(bundle, cfg)
        expected = (rows[0]["metric_after_mean"] - before) / before
        assert rep["rows"][0]["values"] == [expected] * cfg.difficulty_reps

    def test_difficulty_extreme_drop(self, tmp_path):
        rep = ex.difficulty(tiny(tmp_path, k_list=[3], difficulty_reps=1), [0.99])
        assert np.isfinite(rep["rows"][0]["improvement_mean"])

    def test_stability(self, tmp_path):
        rep = ex.stability(tiny(tmp_path, solvers=["exhaustive", "sa"]))
        for scale in (4, 6):
            assert (tmp_path / f"out/stability_scale{scale}.csv").exists()
        for row in rep["constraints"]:
            assert row["exhaustive_unconstrained"] <= row["exhaustive_constrained"]
        for s in rep["scales"]:
            means = [r["mean"] for r in s["reports"]]
            assert means == sorted(means, reverse=True)

    def test_timing(self, tmp_path):
        rep = ex.timing(tiny(tmp_path, solvers=["sa", "tabu", "sgd"]), scales=[4, 8, 12])
        rows = read_csv(tmp_path / "out/timing.csv")
        assert rows[0] == ["scale", "sa", "tabu", "sgd"]
        assert [r[0] for r in rows[1:]] == ["4", "8", "12"]
        assert len(rep["detail"]) == 3 * 3 * 3
        for kind in ("sa", "tabu"):
            evals = [d["evaluations"] for d in rep["detail"] if d["solver"] == kind and d["rep"] == 0]
            assert evals == sorted(evals)


class TestCli:
    def test_synth_and_pipeline(self, tmp_path, capsys):
        cfg = tiny(tmp_path)
        cfg.write(tmp_path / "c.ini")
        assert main(["synth", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "corpus")]) == 0
        assert (tmp_path / "corpus/manifest.json").exists()
        capsys.readouterr()
        code = main(["pipeline", "--config", str(tmp_path / "c.ini"), "--k", "2,*",
                     "--solver", "sa,tabu", "--builder", "miqubo", "--seed", "3"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert len(summary["rows"]) == 4
        assert json.loads((tmp_path / "out/report.json").read_text())["config"]["seed"] == 3

    def test_config_error_exit(self, tmp_path):
        assert main(["pipeline", "--builder", "magic", "--out", str(tmp_path)]) == 2
        assert main(["pipeline", "--k", "two", "--out", str(tmp_path)]) == 2
        assert main(["pipeline", "--config", str(tmp_path / "missing.ini")]) == 2

    def test_data_error_exit(self, tmp_path):
        q = tmp_path / "q.json"
        q.write_text(json.dumps({"size": 2, "format": "dense-sym", "values": [1.0, float("nan"), 0.0]}))
        assert main(["validate-q", str(q)]) == 3
        assert main(["validate-q", str(tmp_path / "absent.json")]) == 3

    def test_solver_error_exit(self, tmp_path):
        cfg = tiny(tmp_path, num_features=26, num_items=80, runs=1)
        cfg.write(tmp_path / "c.ini")
        code = main(["pipeline", "--config", str(tmp_path / "c.ini"), "--builder", "coqubo",
                     "--solver", "exhaustive"])
        assert code == 4

    def test_validate_q_ok(self, tmp_path, capsys):
        save_q(np.array([[1.0, 2.0], [2.0, -1.0]]), tmp_path / "q.json")
        assert main(["validate-q", str(tmp_path / "q.json")]) == 0
        assert json.loads(capsys.readouterr().out)["size"] == 2

    def test_analysis_subcommands(self, tmp_path):
        cfg = tiny(tmp_path)
        cfg.write(tmp_path / "c.ini")
        c = str(tmp_path / "c.ini")
        assert main(["energy-vs-perf", "--config", c, "--k", "2", "--num-solutions", "10"]) == 0
        assert main(["difficulty", "--config", c, "--k", "2", "--drop-fractions", "0.2,0.4"]) == 0
        assert main(["difficulty", "--config", c, "--drop-fractions", "1.5"]) == 2
        assert main(["timing", "--config", c, "--scales", "4,6", "--solver", "sa,tabu"]) == 0
        assert main(["stability", "--config", c]) == 0
