"""End-to-end feature-selection runs and the analysis experiments.

Every entry point takes an :class:`ExperimentConfig`, writes its artifacts
under ``config.out`` and returns a JSON-serializable report that embeds
the resolved config, so any report can be replayed with
:func:`rerun_from_report`.
"""

from __future__ import annotations

import configparser
import contextlib
import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import dataset as ds
from .counterfactual import CounterfactualProfile, PairMode, compute_profile
from .errors import ConfigError, PdquboError
from .qubo import (
    QuboProblem,
    boosting_predictions,
    build_boosting,
    build_coqubo,
    build_miqubo,
    build_pdqubo,
    energy,
    save_q,
)
from .recsys import ItemKNNEvaluator, MetricSpec, evaluate, train_item_knn
from .solvers import SAMPLING_KINDS, SolverConfig, SolverKind, derive_seed, sample_stability, solve

logger = logging.getLogger(__name__)

BUILDERS = ("pdqubo", "pdqubo-indiv", "miqubo", "coqubo", "boosting")
SOLVERS = ("exhaustive", "sa", "tabu", "sgd", "external-stub")


@dataclass
class ExperimentConfig:
    # data: "synthetic", or a corpus directory / explicit CSV paths
    data: str = "synthetic"
    interactions_path: str = ""
    features_path: str = ""
    num_users: int = 100
    num_items: int = 200
    num_features: int = 30
    num_informative: int = 8
    sparsity: float = 0.9
    corpus_seed: int = 0
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    split_seed: int = 0
    # base model and metric
    n_neighbors: int = 100
    metric: str = "ndcg"
    cutoff: int = 10
    # selection
    builders: list = field(default_factory=lambda: ["pdqubo"])
    k_list: list = field(default_factory=lambda: ["*"])
    solvers: list = field(default_factory=lambda: ["sa"])
    penalty_weight: object = 1.0
    num_samples: int = 200
    runs: int = 5
    seed: int = 0
    negative_ratio: int = 1
    boosting_regularizer: float = 0.0
    workers: int = 1
    out: str = "runs/default"
    # analysis experiments
    num_solutions: int = 200
    drop_fractions: list = field(default_factory=lambda: [0.2, 0.4, 0.6])
    difficulty_reps: int = 3
    scales: list = field(default_factory=lambda: [10, 30, 50, 100, 150])
    sample_counts: list = field(default_factory=lambda: [1, 10, 100, 1000])
    stability_reps: int = 20
    timing_reps: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self):
        for b in self.builders:
            if b not in BUILDERS:
                raise ConfigError(f"unknown builder {b!r}; choose from {', '.join(BUILDERS)}")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
        for k in self.k_list:
            if k != "*" and not (isinstance(k, int) and k >= 0):
                raise ConfigError(f"k values must be nonnegative integers or '*', got {k!r}")
        if self.data != "synthetic":
            path = Path(self.data)
            if not (path.is_dir() or (self.interactions_path and self.features_path)):
                raise ConfigError(f"data source {self.data!r} is neither 'synthetic' nor a directory")
        for p in (self.interactions_path, self.features_path):
            if p and not Path(p).exists():
                raise ConfigError(f"path does not exist: {p}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # flat ``key = value`` file; values are JSON literals, bare words are strings
    def write(self, path) -> None:
        parser = configparser.ConfigParser()
        parser["experiment"] = {k: json.dumps(v) for k, v in self.to_dict().items()}
        with open(path, "w") as fh:
            parser.write(fh)

    @classmethod
    def read(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError(f"cannot read config file {path}")
        if "experiment" not in parser:
            raise ConfigError(f"{path}: missing [experiment] section")
        data = {}
        for key, raw in parser["experiment"].items():
            try:
                data[key] = json.loads(raw)
            except json.JSONDecodeError:
                data[key] = raw
        return cls.from_dict(data)


@contextlib.contextmanager
def stage(name: str):
    """Tag any package error raised inside with the pipeline stage."""
    try:
        yield
    except PdquboError as exc:
        if not getattr(exc, "stage", None):
            exc.stage = name
            exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise


def _metric(config):
    return MetricSpec(config.metric, config.cutoff)


def load_bundle(config: ExperimentConfig) -> ds.DatasetBundle:
    spec = ds.SplitSpec(config.test_fraction, config.validation_fraction, config.split_seed)
    if config.data == "synthetic":
        return ds.synthesize_corpus(
            config.num_users, config.num_items, config.num_features,
            config.num_informative, config.sparsity, config.corpus_seed, spec,
        )
    if config.interactions_path:
        inter = ds.load_interactions(config.interactions_path)
        feats = ds.load_features(config.features_path, inter)
        return ds.split(inter, spec).with_features(feats)
    return ds.load_corpus(config.data, spec)


def evaluators(bundle, config, features=None):
    """Validation evaluator (profile input) and test evaluator (reporting)."""
    features = bundle.features if features is None else features
    metric = _metric(config)
    val = ItemKNNEvaluator(features, bundle.train, bundle.validation, metric,
                           config.n_neighbors, "validation")
    test = ItemKNNEvaluator(features, bundle.train_and_validation, bundle.test, metric,
                            config.n_neighbors, "test")
    return val, test


def complement(selected, n):
    chosen = set(int(i) for i in selected)
    return [i for i in range(n) if i not in chosen]


class _MatrixCache:
    """Builds each coefficient matrix once per (features, builder)."""

    def __init__(self, bundle, config, val_ev, out=None):
        self.bundle, self.config, self.val_ev, self.out = bundle, config, val_ev, out
        self._profile = None
        self._samples = None
        self.timings = {}

    def profile(self) -> CounterfactualProfile:
        if self._profile is None:
            start = time.perf_counter()
            ckpt = Path(self.out) / "profile_checkpoint.jsonl" if self.out else None
            self._profile = compute_profile(self.val_ev, PairMode.COMB, self.config.workers, ckpt)
            self.timings["profile"] = time.perf_counter() - start
            if self.out:
                self._profile.save(Path(self.out) / "profile.json")
        return self._profile

    def samples(self):
        if self._samples is None:
            self._samples = ds.negative_sample(
                self.bundle.train, self.config.negative_ratio, self.config.seed
            )
        return self._samples

    def matrix(self, builder):
        feats = self.val_ev.features
        if builder in ("pdqubo", "pdqubo-indiv"):
            prof = self.profile()
            if prof.split == "test":
                raise ConfigError("refusing a test-split counterfactual profile")
            if builder == "pdqubo-indiv":
                prof = dataclasses.replace(prof, pairs=np.zeros_like(prof.pairs), mode=PairMode.INDIV)
            return build_pdqubo(prof)
        if builder == "miqubo":
            return build_miqubo(feats, self.samples())
        if builder == "coqubo":
            return build_coqubo(feats, self.samples())
        preds = boosting_predictions(feats, self.bundle.train, self.samples(), self.config.n_neighbors)
        return build_boosting(preds, self.samples()[:, 2], self.config.boosting_regularizer)


def _solver_config(config, kind, seed, **extra):
    return SolverConfig(kind=kind, seed=seed, num_samples=config.num_samples, **extra)


def _parse_k(k):
    return None if k == "*" else int(k)


def _independent_metric(bundle, config, features, selected):
    """Re-evaluate a selection by physically dropping unselected columns."""
    dense = features.dense[:, sorted(selected)]
    reduced = ds.ItemFeatureMatrix.from_dense(dense)
    model = train_item_knn(reduced, config.n_neighbors)
    return evaluate(model, bundle.train_and_validation, bundle.test, _metric(config)).metric_value


def select_and_score(problem, kind, seed, config, test_ev):
    result = solve(problem, _solver_config(config, kind, seed))
    selected = result.selected
    after = test_ev(complement(selected, problem.size))
    return result, selected, after


def run_selection(bundle, config, features=None, out=None):
    """Core of the pipeline: returns (rows, metric_before, cache)."""
    val_ev, test_ev = evaluators(bundle, config, features)
    n = val_ev.num_features
    for k in config.k_list:
        if k != "*" and k > n:
            raise ConfigError(f"k={k} exceeds the {n} available features")
    with stage("baseline"):
        before = test_ev(())
    cache = _MatrixCache(bundle, config, val_ev, out)
    rows = []
    for builder in config.builders:
        with stage(f"build:{builder}"):
            q = cache.matrix(builder)
        if out:
            save_q(q, Path(out) / f"q_{builder}.json")
        for k in config.k_list:
            problem = QuboProblem(q, _parse_k(k), config.penalty_weight)
            for kind in config.solvers:
                runs = []
                for r in range(config.runs):
                    seed = derive_seed(config.seed, r)
                    with stage(f"solve:{builder}:{kind}:k={k}"):
                        result, selected, after = select_and_score(problem, kind, seed, config, test_ev)
                    ok = k == "*" or len(selected) == int(k)
                    if not ok:
                        logger.warning("%s/%s k=%s run %d selected %d features",
                                       builder, kind, k, r, len(selected))
                    run = {
                        "run": r,
                        "seed": seed,
                        "selected": selected,
                        "cardinality": len(selected),
                        "cardinality_ok": ok,
                        "energy": result.best_energy,
                        "metric_after": after,
                        "wall_time": result.wall_time,
                    }
                    if r == 0 and selected:
                        check = _independent_metric(bundle, config, val_ev.features, selected)
                        run["spot_check"] = check
                        run["spot_check_ok"] = abs(check - after) <= 1e-9
                    runs.append(run)
                afters = [x["metric_after"] for x in runs]
                rows.append({
                    "builder": builder,
                    "solver": kind,
                    "k": k,
                    "metric_before": before,
                    "metric_after_mean": float(np.mean(afters)),
                    "metric_after_std": float(np.std(afters)),
                    "energy_mean": float(np.mean([x["energy"] for x in runs])),
                    "runs": runs,
                })
    return rows, before, cache


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _prepare_out(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    config.write(out / "config.ini")
    return out


def run_pipeline(config: ExperimentConfig) -> dict:
    """Data -> profile -> Q -> solve per (builder, k, solver, run) -> test metric.

    Writes ``report.json``, ``table.csv`` (one row per builder and k, one
    column per solver holding mean test metric) and ``runs.csv``.
    """
    out = _prepare_out(config)
    with stage("data"):
        bundle = load_bundle(config)
    rows, before, cache = run_selection(bundle, config, out=out)
    report = {
        "command": "pipeline",
        "config": config.to_dict(),
        "metric": str(_metric(config)),
        "metric_before": before,
        "informative": bundle.metadata.get("informative"),
        "rows": rows,
        "timings": cache.timings,
    }
    _write_json(out / "report.json", report)
    _write_table(out / "table.csv", rows, config, before)
    with (out / "runs.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["builder", "solver", "k", "run", "seed", "cardinality", "energy", "metric_after"])
        for row in rows:
            for r in row["runs"]:
                w.writerow([row["builder"], row["solver"], row["k"], r["run"], r["seed"],
                            r["cardinality"], repr(float(r["energy"])), repr(float(r["metric_after"]))])
    return report


def _write_table(path, rows, config, before):
    dataset = "synthetic" if config.data == "synthetic" else Path(config.data).name
    cells = {(r["builder"], str(r["k"]), r["solver"]): r["metric_after_mean"] for r in rows}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["builder", "dataset", "k", *config.solvers])
        for b in config.builders:
            for k in config.k_list:
                w.writerow([b, dataset, k, *(f"{cells[(b, str(k), s)]:.4f}" for s in config.solvers)])
        w.writerow(["all-features", dataset, "all", *(f"{before:.4f}" for _ in config.solvers)])


def rerun_from_report(report_path, out=None) -> dict:
    """Replay the config embedded in a report (optionally into another directory)."""
    report = json.loads(Path(report_path).read_text())
    config = ExperimentConfig.from_dict(report["config"])
    if out is not None:
        config = config.replace(out=str(out))
    commands = {
        "pipeline": run_pipeline,
        "energy-vs-perf": energy_vs_performance,
        "difficulty": difficulty,
    }
    return commands[report["command"]](config)


def _default_k(config, n):
    fixed = [k for k in config.k_list if k != "*"]
    if fixed:
        return int(fixed[0])
    if config.num_informative:
        return config.num_informative
    return max(1, n // 2)


def energy_vs_performance(config: ExperimentConfig, num_solutions: int | None = None,
                          builder: str | None = None) -> dict:
    """Energy and test metric of many k-hot selections, with their Spearman rho.

    Half the selections come from solver samples, the rest (and any
    shortfall) are uniformly random k-subsets. Writes ``energy_vs_perf.csv``.
    """
    num_solutions = config.num_solutions if num_solutions is None else num_solutions
    builder = builder or config.builders[0]
    out = _prepare_out(config)
    with stage("data"):
        bundle = load_bundle(config)
    val_ev, test_ev = evaluators(bundle, config)
    n = val_ev.num_features
    k = _default_k(config, n)
    with stage(f"build:{builder}"):
        q = _MatrixCache(bundle, config, val_ev, out).matrix(builder)
    problem = QuboProblem(q, k, config.penalty_weight)

    seen, sources = [], []
    keys = set()

    def add(bits, source):
        key = tuple(int(b) for b in bits)
        if sum(key) == k and key not in keys and len(seen) < num_solutions:
            keys.add(key)
            seen.append(np.array(key, dtype=np.int8))
            sources.append(source)

    want_solver = num_solutions // 2
    if want_solver:
        kind = config.solvers[0]
        cfg = SolverConfig(kind=kind, seed=config.seed, num_samples=max(want_solver, 1),
                           restarts=max(want_solver, 1))
        with stage(f"solve:{kind}"):
            result = solve(problem, cfg)
        bits = result.sample_bits if result.sample_bits is not None else result.best[None, :]
        for b in bits:
            if len(seen) >= want_solver:
                break
            add(b, kind)
    rng = np.random.default_rng(derive_seed(config.seed, 7))
    attempts = 0
    while len(seen) < num_solutions and attempts < 100 * max(num_solutions, 1):
        bits = np.zeros(n, dtype=np.int8)
        bits[rng.choice(n, size=k, replace=False)] = 1
        add(bits, "random")
        attempts += 1

    energies = [energy(problem, b) for b in seen]
    metrics = [test_ev(complement(np.flatnonzero(b), n)) for b in seen]
    rho = None
    if len(seen) < 2 or np.ptp(energies) == 0 or np.ptp(metrics) == 0:
        logger.warning("Spearman correlation undefined for %d solutions", len(seen))
    else:
        rho = float(stats.spearmanr(energies, metrics).statistic)
    with (out / "energy_vs_perf.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["energy", "metric", "source", "selected"])
        for e, m, s, b in zip(energies, metrics, sources, seen):
            w.writerow([repr(e), repr(m), s, " ".join(map(str, np.flatnonzero(b)))])
    report = {
        "command": "energy-vs-perf",
        "config": config.to_dict(),
        "builder": builder,
        "k": k,
        "num_solutions": len(seen),
        "spearman": rho,
        "energies": energies,
        "metrics": metrics,
        "sources": sources,
    }
    _write_json(out / "energy_vs_perf.json", report)
    return report


def random_qubo(n: int, seed: int, scale: float = 0.01) -> np.ndarray:
    """Symmetric Gaussian matrix with entries of counterfactual magnitude."""
    rng = np.random.default_rng(seed)
    a = rng.normal(scale=scale, size=(n, n))
    return np.triu(a) + np.triu(a, 1).T


def stability(config: ExperimentConfig) -> dict:
    """Best-of-s energy distributions per scale, plus unconstrained vs 90% runs.

    The distributions use the first sampling solver in ``config.solvers``
    (SA when none is listed); the constraint comparison runs every solver.

    Writes ``stability_scale<n>.csv`` (single-sample energies and the
    best-of-s summary per scale) and ``constraints.csv``.
    """
    out = _prepare_out(config)
    samplers = [s for s in config.solvers if SolverKind(s) in SAMPLING_KINDS]
    kind = samplers[0] if samplers else "sa"
    scales_out = []
    constraint_rows = []
    for scale in config.scales:
        q = random_qubo(int(scale), derive_seed(config.seed, int(scale)))
        k = math.ceil(0.9 * scale)
        constrained = QuboProblem(q, k, config.penalty_weight)
        base = _solver_config(config, kind, config.seed)
        with stage(f"stability:{scale}"):
            reports = sample_stability(constrained, base, config.sample_counts, config.stability_reps)
            single = solve(constrained, dataclasses.replace(base, num_samples=max(config.sample_counts)))
        path = out / f"stability_scale{scale}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "energy"])
            for i, e in enumerate(single.sample_energies):
                w.writerow([i, repr(float(e))])
        row = {"scale": scale}
        for solver_kind in config.solvers:
            uncon = solve(QuboProblem(q), _solver_config(config, solver_kind, config.seed))
            con = solve(constrained, _solver_config(config, solver_kind, config.seed))
            row[f"{solver_kind}_unconstrained"] = uncon.best_energy
            row[f"{solver_kind}_constrained"] = con.best_energy
        constraint_rows.append(row)
        scales_out.append({
            "scale": scale,
            "k": k,
            "reports": [r.to_dict() for r in reports],
            "distribution_file": path.name,
        })
    with (out / "constraints.csv").open("w", newline="") as fh:
        fields = list(constraint_rows[0]) if constraint_rows else ["scale"]
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(constraint_rows)
    report = {
        "command": "stability",
        "config": config.to_dict(),
        "scales": scales_out,
        "constraints": constraint_rows,
    }
    _write_json(out / "stability.json", report)
    return report


def difficulty(config: ExperimentConfig, drop_fractions=None) -> dict:
    """Relative test-metric improvement of the selection vs all features,
    after randomly dropping a share of feature values."""
    drop_fractions = config.drop_fractions if drop_fractions is None else drop_fractions
    out = _prepare_out(config)
    with stage("data"):
        bundle = load_bundle(config)
    sub = config.replace(builders=config.builders[:1], solvers=config.solvers[:1],
                         k_list=[_default_k(config, bundle.features.num_features)], runs=1)
    rows = []
    for fraction in drop_fractions:
        values = []
        for rep in range(config.difficulty_reps):
            with stage(f"difficulty:{fraction}"):
                feats = ds.drop_feature_values(bundle.features, fraction, derive_seed(config.seed, rep))
                sel_rows, before, _ = run_selection(bundle, sub, feats)
            after = sel_rows[0]["metric_after_mean"]
            values.append((after - before) / before if before > 0 else 0.0)
        rows.append({
            "drop_fraction": fraction,
            "improvement_mean": float(np.mean(values)),
            "improvement_std": float(np.std(values)),
            "values": values,
        })
    with (out / "difficulty.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["drop_fraction", "improvement_mean", "improvement_std"])
        for r in rows:
            w.writerow([r["drop_fraction"], repr(r["improvement_mean"]), repr(r["improvement_std"])])
    report = {"command": "difficulty", "config": config.to_dict(), "rows": rows}
    _write_json(out / "difficulty.json", report)
    return report


def timing(config: ExperimentConfig, scales=None, solvers=None) -> dict:
    """Wall time per classical solver and scale on random matrices.

    ``timing.csv`` holds the mean over ``timing_reps`` repetitions (one row
    per scale, one column per solver); ``timing_detail.csv`` holds every rep.
    """
    scales = config.scales if scales is None else scales
    solvers = [s for s in (config.solvers if solvers is None else solvers) if s != "exhaustive"]
    out = _prepare_out(config)
    detail, table = [], []
    for scale in scales:
        q = random_qubo(int(scale), derive_seed(config.seed, int(scale)))
        problem = QuboProblem(q, math.ceil(0.9 * scale), config.penalty_weight)
        row = {"scale": scale}
        for kind in solvers:
            times = []
            for rep in range(config.timing_reps):
                result = solve(problem, _solver_config(config, kind, derive_seed(config.seed, rep)))
                times.append(result.wall_time)
                detail.append({"scale": scale, "solver": kind, "rep": rep,
                               "seconds": result.wall_time, "evaluations": result.evaluations})
            row[kind] = float(np.mean(times))
            row[f"{kind}_std"] = float(np.std(times))
        table.append(row)
    with (out / "timing.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scale", *solvers])
        for row in table:
            w.writerow([row["scale"], *(f"{row[s]:.6f}" for s in solvers)])
    with (out / "timing_detail.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["scale", "solver", "rep", "seconds", "evaluations"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(detail)
    report = {"command": "timing", "config": config.to_dict(), "table": table, "detail": detail}
    _write_json(out / "timing.json", report)
    return report


def synth(config: ExperimentConfig) -> dict:
    """Generate the configured synthetic corpus into ``config.out``."""
    out = Path(config.out)
    bundle = load_bundle(config.replace(data="synthetic"))
    paths = ds.write_corpus(bundle, out)
    return {"command": "synth", "paths": paths, "informative": bundle.metadata["informative"]}
