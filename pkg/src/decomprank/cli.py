"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .decomp import from_record, read_jsonl
from .features import FEATURE_NAMES, extract_features
from .heuristics import HEURISTICS, score_all
from .model import InstanceFeatureVector, extract_instance_features
from .pipeline import (
    ConfigError,
    PipelineConfig,
    load_benchmark_data,
    load_instances,
    run_benchmark,
    run_evaluate,
    run_generate,
)
from .ranking import MODEL_KINDS, RankingModel, rank_and_select, train_model
from .report import emit_report
from .stats import ComparisonTable, aligned_rank_pairwise, friedman_statistic, pca

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    updates = {}
    if getattr(args, "instances", None):
        updates["instances"] = list(args.instances)
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "proportion", None):
        updates["greedy_proportions"] = tuple(args.proportion)
    if getattr(args, "count", None) is not None:
        updates["greedy_count"] = args.count
    if getattr(args, "pop", None) is not None:
        updates["population_size"] = args.pop
    if getattr(args, "gens", None) is not None:
        updates["generations"] = args.gens
    if getattr(args, "budget", None) is not None:
        try:
            updates["budget"] = replace(cfg.budget, total_cpu=args.budget)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    cfg = replace(cfg, **updates)
    return cfg.validate()


def _records_by_instance(path, instances):
    out = {}
    for rec in read_jsonl(path):
        if rec["instance"] in instances:
            out.setdefault(rec["instance"], []).append(rec)
    return out


def _write_rows(rows, header, out):
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def cmd_generate(args) -> int:
    cfg = _config(args)
    path = run_generate(cfg, args.output)
    print(path)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    path, failures = run_evaluate(cfg, args.dataset, args.output)
    print(path)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_heuristics(args) -> int:
    instances = load_instances(args.instances)
    rows = []
    for name, recs in sorted(_records_by_instance(args.dataset, instances).items()):
        table, _ = score_all(instances[name], [from_record(instances[name], r) for r in recs])
        rows += [[r["key"], *(repr(r[h]) for h in HEURISTICS)] for r in table]
    _write_rows(rows, ["key", *HEURISTICS], args.output)
    return EXIT_OK


def cmd_features(args) -> int:
    instances = load_instances(args.instances)
    rows = []
    for name, recs in sorted(_records_by_instance(args.dataset, instances).items()):
        for r in recs:
            d = from_record(instances[name], r)
            rows.append([d.key, *(repr(float(v)) for v in extract_features(instances[name], d).as_array())])
    _write_rows(rows, ["key", *FEATURE_NAMES], args.output)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    data = load_benchmark_data(cfg, args.dataset)
    model = train_model(args.model, data.dataset.X, data.dataset.score, data.dataset.feature_names)
    Path(args.output).write_text(model.to_json() + "\n")
    print(args.output)
    return EXIT_OK


def cmd_rank(args) -> int:
    cfg = _config(args)
    model = RankingModel.from_json(Path(args.model).read_text())
    data = load_benchmark_data(cfg, args.dataset)
    ds = data.dataset
    rows = []
    for name in ds.instances():
        idx = ds.rows_of(name)
        sel = rank_and_select(model, [ds.keys[i] for i in idx], ds.X[idx], ds.score[idx], args.top_k)
        rows.append([name, repr(sel.best_score), repr(sel.rmse), " ".join(sel.selected)])
    _write_rows(rows, ["instance", "selected_score", "rmse", "selected"], args.output)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    summary = run_benchmark(cfg, args.dataset, args.output)
    print(json.dumps(summary["mean_selected"], indent=2, sort_keys=True))
    return EXIT_OK


def _read_table(path) -> ComparisonTable:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ConfigError(f"{path}: expected a header and at least one instance row")
    return ComparisonTable(rows[0][1:], [r[0] for r in rows[1:]], np.array([[float(v) for v in r[1:]] for r in rows[1:]]))


def cmd_stats(args) -> int:
    table = _read_table(args.table)
    if table.k < 2:
        print("fewer than two methods: nothing to test")
        return EXIT_OK
    ff, p = friedman_statistic(table)
    result = {"friedman": {"statistic": ff, "p_value": p}, "control": args.control, "pairwise": {}}
    if args.control not in table.methods:
        raise ConfigError(f"unknown control method {args.control!r}")
    for other in args.versus or [m for m in table.methods if m != args.control]:
        if other not in table.methods:
            raise ConfigError(f"unknown method {other!r}")
        z, pz = aligned_rank_pairwise(table, args.control, other, args.sided)
        result["pairwise"][other] = {"z": z, "p_value": pz}
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "stats.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_pca(args) -> int:
    instances = load_instances(args.instances)
    if len(instances) < 2:
        raise ConfigError("PCA needs at least two readable instances")
    names = sorted(instances)
    X = np.array([extract_instance_features(instances[n]).as_array() for n in names])
    res = pca(X, args.components)
    fields = InstanceFeatureVector.field_names()
    out = {
        "explained_variance_ratio": res.explained_variance_ratio.tolist(),
        "components": {f"pc{i + 1}": dict(zip([fields[j] for j in res.kept_columns], c.tolist()))
                       for i, c in enumerate(res.components)},
        "projected": {n: p.tolist() for n, p in zip(names, res.projected)},
    }
    if args.out:
        dummy = ComparisonTable(["pc1"], names, res.projected[:, :1])
        emit_report(args.out, {"pca_projection": dummy}, res, pca_labels=names)
        (Path(args.out) / "pca.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out["explained_variance_ratio"]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decomprank", description="MIP decomposition ranking workbench")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--instances", nargs="+", help="MPS instance files")
        p.add_argument("--seed", type=int)
        if outputs:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("generate", help="sample decompositions")
    common(p)
    p.add_argument("--proportion", type=float, nargs="+")
    p.add_argument("--count", type=int, help="greedy draws per proportion")
    p.add_argument("--pop", type=int)
    p.add_argument("--gens", type=int)
    p.add_argument("--output", help="JSONL path (default <out>/decompositions.jsonl)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="Lagrangian evaluation of a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--budget", type=float, help="budget per decomposition, in clock units")
    p.add_argument("--output")
    p.set_defaults(func=cmd_evaluate)

    for name, fn, hlp in (("heuristics", cmd_heuristics, "heuristic scores CSV"),
                          ("features", cmd_features, "decomposition features CSV")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--instances", nargs="+", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--output")
        p.set_defaults(func=fn)

    p = sub.add_parser("train", help="fit a ranking model on an evaluated dataset")
    common(p, outputs=False)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=MODEL_KINDS, default="voting")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="apply a saved model to an evaluated dataset")
    common(p, outputs=False)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=int, default=8)
    p.add_argument("--output")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("benchmark", help="heuristics, LOIO models, statistics and plots")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", help="report directory (default <out>/benchmark)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("stats", help="Friedman and aligned-rank tests on a score table CSV")
    p.add_argument("--table", required=True)
    p.add_argument("--control", required=True)
    p.add_argument("--versus", nargs="+")
    p.add_argument("--sided", type=int, choices=(1, 2), default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pca", help="PCA of instance features")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pca)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
