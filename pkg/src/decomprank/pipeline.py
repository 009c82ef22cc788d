"""End-to-end experiment pipeline: generate, evaluate, benchmark."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .decomp import (
    deduplicate,
    dump_record,
    from_record,
    partition,
    read_jsonl,
    remove_redundant_constraints,
    to_record,
)
from .features import FEATURE_NAMES, RC_FEATURES, extract_features
from .heuristics import HEURISTICS, score_all
from .lagrange import EvalBudget, evaluate, prepare_instance
from .model import MipInstance, extract_instance_features
from .mps import read_mps
from .nsga import DEFAULT_SEEDING, NsgaConfig, evolve
from .ranking import (
    LabeledDataset,
    label_dataset,
    leave_one_instance_out,
    random_selection,
    rc_only_model,
    select_top,
    train_model,
    feature_spread_diagnostic,
)
from .report import emit_report
from .sampling import GreedyConfig, greedy_sample, make_rng
from .stats import ComparisonTable, aligned_rank_pairwise, friedman_statistic, pca

log = logging.getLogger(__name__)

WORKERS_ENV = "DECOMPRANK_WORKERS"
TIMING_FIELDS = ("time_s",)


class ConfigError(ValueError):
    """Invalid pipeline configuration (exit code 1)."""


@dataclass
class PipelineConfig:
    instances: list = field(default_factory=list)
    out_dir: str = "out"
    seed: int = 0
    greedy_proportions: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    greedy_count: int = 111
    population_size: int = 32
    generations: int = 300
    crossover_prob: float = 0.95
    mutation_prob_per_gene: float = 0.01
    seeding_proportions: tuple = DEFAULT_SEEDING
    budget: EvalBudget = field(default_factory=lambda: EvalBudget(clock="work", total_cpu=3000.0, root_grace=3000.0,
                                                                    reference_cpu=20000.0))
    models: tuple = ("ridge", "lasso", "knn", "voting")
    heuristics: tuple = HEURISTICS
    top_k: int = 8
    random_trials: int = 100
    control: str = "voting"
    sided: int = 2

    def validate(self, check_files: bool = True) -> "PipelineConfig":
        if self.top_k < 1:
            raise ConfigError("top_k must be at least 1")
        if self.greedy_count < 0:
            raise ConfigError("greedy_count must be non-negative")
        if check_files:
            missing = [p for p in self.instances if not Path(p).exists()]
            if missing:
                raise ConfigError(f"instance files not found: {', '.join(map(str, missing))}")
        try:
            self.nsga_config()
            for q in self.greedy_proportions:
                GreedyConfig(q, self.seed, 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def nsga_config(self) -> NsgaConfig:
        return NsgaConfig(
            population_size=self.population_size,
            generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob_per_gene=self.mutation_prob_per_gene,
            seed=self.seed,
            seeding_proportions=tuple(self.seeding_proportions),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["budget"] = asdict(self.budget)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        try:
            if "budget" in d:
                d["budget"] = EvalBudget(**d["budget"])
            for k in ("greedy_proportions", "seeding_proportions", "models", "heuristics"):
                if k in d:
                    d[k] = tuple(d[k])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def load_instances(paths) -> dict[str, MipInstance]:
    """Parse every path; unreadable files are logged and skipped."""
    out = {}
    for p in paths:
        try:
            inst = read_mps(p)
        except (OSError, ValueError) as exc:
            log.error("skipping %s: %s", p, exc)
            continue
        out[inst.name] = inst
    return out


def worker_count(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, default)))
    except ValueError:
        return default


# -- generate ----------------------------------------------------------------------


def generate_for_instance(instance: MipInstance, config: PipelineConfig) -> list:
    """All decompositions of one instance, post-processed and deduplicated.

    The empty relaxation comes first, then greedy draws per proportion,
    then the NSGA-II front (skipped when ``generations`` is 0).
    """
    decomps = [partition(instance, [], source="none-relaxed")]
    m = instance.num_constraints
    if config.greedy_count > 0:
        for q in config.greedy_proportions:
            if q * m < 1:
                log.warning("%s: proportion %s relaxes nothing, skipped", instance.name, q)
                continue
            for d in greedy_sample(instance, GreedyConfig(q, config.seed, config.greedy_count)):
                decomps.append(remove_redundant_constraints(instance, d))
    if config.generations > 0 and m > 0:
        decomps.extend(evolve(instance, config.nsga_config()))
    out = deduplicate(decomps)
    counts = {}
    for d in out:
        counts[d.source] = counts.get(d.source, 0) + 1
    log.info("%s: %d decompositions %s", instance.name, len(out), counts)
    return out


def run_generate(config: PipelineConfig, out_path=None) -> Path:
    config.validate()
    instances = load_instances(config.instances)
    if not instances:
        raise ConfigError("no instance could be read")
    out = Path(out_path or Path(config.out_dir) / "decompositions.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for name in instances:
            for d in generate_for_instance(instances[name], config):
                fh.write(dump_record(to_record(d)) + "\n")
    return out


# -- evaluate ----------------------------------------------------------------------


def record_key(rec: dict) -> str:
    return rec["instance"] + ":" + ",".join(str(i) for i in sorted(rec["relaxed"]))


def _truncate_partial(path: Path) -> None:
    if not path.exists():
        return
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        with open(path, "r+b") as fh:
            fh.truncate(cut)


def _evaluate_one(args):
    instance, rec, budget, context = args
    try:
        d = from_record(instance, rec)
        res = evaluate(instance, d, budget, context)
        return res.to_record()
    except Exception as exc:  # recorded in place, never aborts the batch
        return {"status": f"error: {type(exc).__name__}: {exc}"}


def run_evaluate(config: PipelineConfig, dataset_path, out_path=None) -> tuple[Path, int]:
    """Append an ``eval`` block to every record; resumes an interrupted run.

    Returns ``(path, failures)``. Records whose key already carries an eval
    block in the output file are skipped.
    """
    config.validate()
    dataset_path = Path(dataset_path)
    records = list(read_jsonl(dataset_path))
    out = Path(out_path or Path(config.out_dir) / "evaluated.jsonl")
    if out.resolve() == dataset_path.resolve():
        if all("eval" in r for r in records):
            return out, 0
        raise ConfigError("output path must differ from the input dataset")
    out.parent.mkdir(parents=True, exist_ok=True)
    _truncate_partial(out)
    done = {record_key(r) for r in read_jsonl(out) if "eval" in r}
    todo = [r for r in records if record_key(r) not in done and "eval" not in r]
    carried = [r for r in records if "eval" in r and record_key(r) not in done]
    instances = load_instances(config.instances)
    contexts = {}
    jobs = []
    failures = 0
    for rec in todo:
        name = rec["instance"]
        if name not in instances:
            jobs.append((None, rec, None, None))
            continue
        if name not in contexts:
            contexts[name] = prepare_instance(instances[name], config.budget)
        jobs.append((instances[name], rec, config.budget, contexts[name]))

    def results():
        runnable = [j for j in jobs if j[0] is not None]
        workers = worker_count()
        if workers > 1 and len(runnable) > 1:
            with ProcessPoolExecutor(workers) as pool:
                mapped = iter(pool.map(_evaluate_one, runnable, chunksize=4))
                for j in jobs:
                    yield next(mapped) if j[0] is not None else {"status": "error: unknown instance"}
        else:
            for j in jobs:
                yield _evaluate_one(j) if j[0] is not None else {"status": "error: unknown instance"}

    with open(out, "a", encoding="utf-8") as fh:
        for rec in carried:
            fh.write(dump_record(rec) + "\n")
        for (_, rec, _, _), ev in zip(jobs, results()):
            if ev.get("status") != "ok":
                failures += 1
            fh.write(dump_record({**rec, "eval": ev}) + "\n")
            fh.flush()
    return out, failures


# -- benchmark ---------------------------------------------------------------------


@dataclass
class BenchmarkData:
    instances: dict
    dataset: LabeledDataset
    heuristic_order: dict
    records: list


def load_benchmark_data(config: PipelineConfig, evaluated_path) -> BenchmarkData:
    instances = load_instances(config.instances)
    by_inst: dict[str, list] = {}
    records = []
    for rec in read_jsonl(evaluated_path):
        ev = rec.get("eval")
        if not ev or ev.get("status") != "ok" or rec["instance"] not in instances:
            continue
        by_inst.setdefault(rec["instance"], []).append(rec)
    rows, orders = [], {}
    for name in sorted(by_inst):
        recs = by_inst[name]
        if len(recs) < 2:
            log.warning("%s has a single evaluated decomposition, excluded", name)
            continue
        inst = instances[name]
        decomps = [from_record(inst, r) for r in recs]
        _, orders[name] = score_all(inst, decomps)
        for r, d in zip(recs, decomps):
            f = extract_features(inst, d)
            rows.append((name, d.key, f.as_array(), r["eval"]["gap_pct"], r["eval"]["solve_time"]))
            records.append(r)
    if not rows:
        raise ConfigError("no evaluated decompositions to benchmark")
    return BenchmarkData(instances, label_dataset(rows, FEATURE_NAMES), orders, records)


def random_trials(dataset: LabeledDataset, trials: int, top_k: int, seed: int) -> np.ndarray:
    """Mean selected score of a uniform-random ranker, one value per trial."""
    rng = make_rng(seed, "random-ranker")
    means = []
    for _ in range(trials):
        vals = [random_selection(dataset.score[dataset.rows_of(i)], rng, top_k) for i in dataset.instances()]
        means.append(float(np.mean(vals)))
    return np.array(means)


def selection_grid(data: BenchmarkData, config: PipelineConfig):
    """Selected renormalised score of every method on every instance."""
    ds = data.dataset
    names = ds.instances()
    columns, loio = {}, {}
    for h in config.heuristics:
        col = []
        for name in names:
            rows = ds.rows_of(name)
            col.append(select_top(data.heuristic_order[name][h], [ds.keys[r] for r in rows], ds.score[rows], config.top_k))
        columns[h] = col
    for kind in config.models:
        res = leave_one_instance_out(ds, kind, config.top_k)
        loio[kind] = res
        columns[kind] = [r["selected_score"] for r in res]
    methods = list(columns)
    scores = np.array([[columns[m][i] for m in methods] for i in range(len(names))])
    return ComparisonTable(methods, names, scores), loio


def _pooled_predictions(ds: LabeledDataset, kind: str):
    pred, actual = [], []
    for name in ds.instances():
        test = ds.rows_of(name)
        train = np.array([r for r in range(len(ds)) if ds.instance_ids[r] != name])
        model = train_model(kind, ds.X[train], ds.score[train], ds.feature_names)
        pred.extend(model.predict(ds.X[test]).tolist())
        actual.extend(ds.score[test].tolist())
    return pred, actual


def run_benchmark(config: PipelineConfig, evaluated_path, out_dir=None) -> dict:
    config.validate()
    out = Path(out_dir or Path(config.out_dir) / "benchmark")
    data = load_benchmark_data(config, evaluated_path)
    ds = data.dataset
    if len(ds.instances()) < 2:
        raise ConfigError("benchmark needs at least two evaluated instances")
    table, loio = selection_grid(data, config)
    trials = random_trials(ds, config.random_trials, config.top_k, config.seed)
    summary = {
        "instances": ds.instances(),
        "rows": len(ds),
        "mean_selected": {m: float(table.scores[:, j].mean()) for j, m in enumerate(table.methods)},
        "random_trials_mean": float(trials.mean()),
        "random_trials_se": float(trials.std(ddof=1) / math.sqrt(len(trials))) if len(trials) > 1 else 0.0,
        "rmse": {k: [r["rmse"] for r in v] for k, v in loio.items()},
        "feature_spread": feature_spread_diagnostic(ds.X),
    }
    if table.k >= 2 and table.n >= 2:
        ff, p = friedman_statistic(table)
        summary["friedman"] = {"statistic": ff, "p_value": p}
        control = config.control if config.control in table.methods else table.methods[-1]
        summary["aligned_rank"] = {}
        for other in table.methods:
            if other != control:
                z, pz = aligned_rank_pairwise(table, control, other, config.sided)
                summary["aligned_rank"][other] = {"z": z, "p_value": pz}
        summary["aligned_rank_control"] = control
    else:
        log.warning("fewer than two ranking methods: statistical tests skipped")
    rc = {}
    for reg in ("ridge", "lasso"):
        model = rc_only_model(ds, reg)
        rc[reg] = dict(zip(RC_FEATURES, model.weights.tolist()))
    summary["rc_coefficients"] = rc

    inst_names = ds.instances()
    pca_result = None
    if len(inst_names) >= 2:
        feats = np.array([extract_instance_features(data.instances[n]).as_array() for n in inst_names])
        try:
            pca_result = pca(feats)
            summary["pca_explained"] = pca_result.explained_variance_ratio.tolist()
        except ValueError as exc:
            log.warning("PCA skipped: %s", exc)
    scatter = {}
    if "voting" in config.models:
        scatter["voting_predicted_vs_actual"] = _pooled_predictions(ds, "voting")
    emit_report(
        out,
        {"selected_scores": table},
        pca_result,
        {"selected_score_boxplot": {m: table.scores[:, j].tolist() for j, m in enumerate(table.methods)}},
        scatter,
        pca_labels=inst_names,
    )
    ds.to_csv(out / "dataset.csv")
    if "voting" in config.models:
        (out / "model_voting.json").write_text(train_model("voting", ds.X, ds.score).to_json() + "\n")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def strip_timing(rec: dict) -> dict:
    """Copy of an evaluated record without timing fields."""
    rec = dict(rec)
    if "eval" in rec:
        rec["eval"] = {k: v for k, v in rec["eval"].items() if k not in TIMING_FIELDS}
    return rec


__all__ = [
    "ConfigError",
    "PipelineConfig",
    "generate_for_instance",
    "load_benchmark_data",
    "run_benchmark",
    "run_evaluate",
    "run_generate",
    "strip_timing",
]
