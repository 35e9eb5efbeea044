"""``hiertext`` command line: train, cv, predict, ensemble, evaluate, taxonomy, synth.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
Set ``HIERTEXT_LOG=INFO`` (or DEBUG) for progress output on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_set, build_config, read_config_file
from .data import (Dataset, dataset_stats, load_dataset, read_examples, stratified_kfold,
                   stratified_split, write_dataset, write_ids)
from .ensemble import grid_search_weights, majority_vote, weighted_average
from .errors import ConfigError, EmptyDataset, HiertextError, Misaligned
from .evaluation import confusion_matrix, evaluate_run, hierarchy_violations, metrics
from .hashing import derive_seed
from .model import fit_model, load_model, model_to_bytes, predict, save_model
from .predictions import PredictionSet, read_predictions, write_predictions
from .synth import generate_corpus
from .taxonomy import TAXONOMY, Level, TaskALabel, children_of

log = logging.getLogger("hiertext")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def resolve_config(args) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    for assignment in args.set or []:
        apply_set(raw, assignment)
    if args.data:
        raw["train_path"] = args.data
    if args.level:
        raw["level"] = args.level
    if args.profile:
        raw["profile"] = args.profile
    if args.out:
        raw["output_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    train = raw.setdefault("train", {})
    if args.loss:
        train["loss"] = args.loss
    if args.alpha is not None or args.gamma is not None:
        focal = dict(train.get("focal") or {})
        if args.alpha is not None:
            focal["alpha"] = args.alpha
        if args.gamma is not None:
            focal["gamma"] = args.gamma
        train["focal"] = focal
    if args.class_weights:
        train["class_weights"] = None if args.class_weights == "none" else "balanced"
    if getattr(args, "k", None) is not None:
        raw["k"] = args.k
    if getattr(args, "jobs", None) is not None:
        raw["jobs"] = args.jobs
    cfg = build_config(raw)
    if cfg.train_path is None:
        raise ConfigError("no training data: set train_path in the config or pass --data")
    return cfg


def _load_training_data(cfg: RunConfig) -> Dataset:
    ds = load_dataset(cfg.train_path, cfg.level)
    if len(ds) == 0:
        raise EmptyDataset(f"{cfg.train_path} has no examples labelled at level {cfg.level.value}")
    return ds


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    ds = _load_training_data(cfg)
    train_ds, val_ds = stratified_split(ds, cfg.split)
    log.info("level %s: %d train / %d validation", cfg.level.value, len(train_ds), len(val_ds))
    model, trace = fit_model(train_ds, cfg.featurizer, cfg.train)
    for epoch, loss in enumerate(trace):
        log.info("epoch %d mean loss %.6f", epoch + 1, loss)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.htxm")
    preds = model.predict(val_ds.texts, val_ds.ids, model_id="model")
    write_predictions(out / "predictions.csv", preds)
    write_ids(out / "train_ids.txt", train_ds.ids)
    write_ids(out / "validation_ids.txt", val_ds.ids)
    report = evaluate_run(preds, val_ds, cfg.level)
    report.extra["loss_trace"] = trace
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    _write_json(out / "run.json", cfg.to_dict())
    print(report.to_text(), end="")
    return 0


def _train_fold(payload):
    fold, train_ds, test_ds, featurizer_cfg, train_cfg = payload
    model, trace = fit_model(train_ds, featurizer_cfg, train_cfg)
    preds = model.predict(test_ds.texts, test_ds.ids, model_id=f"fold_{fold}")
    return fold, model_to_bytes(model), preds.probs, trace


def cmd_cv(args) -> int:
    cfg = resolve_config(args)
    ds = _load_training_data(cfg)
    assignment = stratified_kfold(ds, cfg.k, cfg.seed)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    payloads = []
    for fold in range(cfg.k):
        fold_cfg = replace(cfg.train, seed=derive_seed(cfg.seed, f"cv/fold/{fold}"))
        payloads.append((fold, ds.subset(assignment.train_indices(fold)),
                         ds.subset(assignment.fold_indices(fold)), cfg.featurizer, fold_cfg))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_train_fold, payloads))
    else:
        results = [_train_fold(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    class_list = ds.class_list()
    oof = np.zeros((len(ds), len(class_list)))
    fold_reports = []
    manifest = {"k": cfg.k, "seed": cfg.seed, "folds": []}
    labels = ds.labels()
    for fold, blob, probs, trace in results:
        (out / f"fold_{fold}.htxm").write_bytes(blob)
        idx = assignment.fold_indices(fold)
        oof[idx] = probs
        fold_preds = PredictionSet.from_probs(f"fold_{fold}", class_list, [ds.ids[i] for i in idx], probs)
        rep = metrics(confusion_matrix([labels[i] for i in idx], fold_preds.labels, class_list))
        fold_reports.append(rep.macro_f1)
        write_ids(out / f"fold_{fold}_ids.txt", fold_preds.example_ids)
        counts = dataset_stats(ds.subset(idx)).counts
        manifest["folds"].append({
            "fold": fold, "size": len(idx),
            "class_counts": {c.key: counts.get(c, 0) for c in class_list},
            "loss_trace": trace,
        })
    pooled = PredictionSet.from_probs("cv_oof", class_list, ds.ids, oof)
    write_predictions(out / "oof_predictions.csv", pooled)
    report = evaluate_run(pooled, ds, cfg.level)
    report.extra["fold_macro_f1"] = fold_reports
    (out / "cv_metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "cv_metrics.txt").write_text(report.to_text(), encoding="utf-8")
    _write_json(out / "fold_manifest.json", manifest)
    _write_json(out / "run.json", cfg.to_dict())
    print(report.to_text(), end="")
    return 0


def _restrict_to_children(probs: np.ndarray, class_list, parents) -> np.ndarray:
    """Zero every class outside the children of each row's parent and renormalize."""
    out = np.zeros_like(probs)
    for i, parent in enumerate(parents):
        keep = [j for j, c in enumerate(class_list) if c in children_of(parent)]
        row = probs[i, keep]
        total = row.sum()
        out[i, keep] = row / total if total > 0 else 1.0 / len(keep)
    return out


def cmd_predict(args) -> int:
    model = load_model(args.model)
    rows = read_examples(args.input, allow_empty_text=True)
    level = model.level
    parents = None
    if args.gate_on == "gold":
        if level is Level.A:
            raise ConfigError("--gate-on applies to level B and C models only")
        rows = [ex for ex in rows if ex.label_a is TaskALabel.SEXIST]
    elif args.gate_on:
        if level is Level.A:
            raise ConfigError("--gate-on applies to level B and C models only")
        gate = read_predictions(args.gate_on)
        gate_labels = gate.label_of()
        if gate.level is Level.A:
            rows = [ex for ex in rows if gate_labels.get(ex.id) is TaskALabel.SEXIST]
        elif gate.level is Level.B and level is Level.C:
            rows = [ex for ex in rows if ex.id in gate_labels]
            parents = [gate_labels[ex.id] for ex in rows]
        else:
            raise ConfigError(f"cannot gate a level {level.value} model on level {gate.level.value} predictions")
    ids = [ex.id for ex in rows]
    preds = predict(model.params, model.featurizer, [ex.text for ex in rows], ids,
                    model_id=args.model_id or str(args.model))
    if parents is not None:
        preds = PredictionSet.from_probs(preds.model_id, preds.class_list, ids,
                                         _restrict_to_children(preds.probs, preds.class_list, parents))
    write_predictions(args.output, preds)
    return 0


def _aligned_inputs(paths) -> list[PredictionSet]:
    preds = [read_predictions(p, model_id=str(p)) for p in paths]
    ids = preds[0].example_ids
    for p in preds[1:]:
        if set(p.example_ids) != set(ids):
            raise Misaligned(f"{p.model_id} covers different ids than {preds[0].model_id}")
    return [preds[0]] + [p.reorder(ids) for p in preds[1:]]


def cmd_ensemble(args) -> int:
    if len(args.predictions) < 2:
        raise ConfigError("ensemble needs at least two prediction files")
    if args.method == "weighted" and not args.truth:
        raise ConfigError("--method weighted requires --truth")
    preds = _aligned_inputs(args.predictions)
    level = preds[0].level
    truth = load_dataset(args.truth, level) if args.truth else None
    extra = {"method": args.method, "members": [str(p) for p in args.predictions]}
    if args.method == "vote":
        fused = majority_vote(preds, model_id="ensemble")
    else:
        weights, grid_f1 = grid_search_weights(preds, truth, args.grid_step)
        fused = weighted_average(preds, weights, model_id="ensemble")
        extra.update({"weights": list(weights), "grid_step": args.grid_step})
        log.info("grid search picked %s (macro F1 %.4f)", weights, grid_f1)
    out = Path(args.out)
    write_predictions(out, fused)
    if truth is not None:
        report = evaluate_run(fused, truth, level)
        report.extra.update(extra)
        report_path = Path(args.report) if args.report else out.with_suffix(".metrics.json")
        report_path.write_text(report.to_json(), encoding="utf-8")
        print(report.to_text(), end="")
    elif "weights" in extra:
        print(json.dumps(extra))
    return 0


def cmd_evaluate(args) -> int:
    preds = [read_predictions(p, model_id=str(p)) for p in args.predictions]
    if args.level and len(preds) == 1 and preds[0].level is not Level.parse(args.level):
        raise Misaligned(f"{args.predictions[0]} holds level {preds[0].level.value} predictions, "
                         f"not level {args.level}")
    by_level = {}
    for p in preds:
        if p.level in by_level:
            raise ConfigError(f"two prediction files at level {p.level.value}")
        by_level[p.level] = p
    result = {}
    if args.gold:
        gold = Dataset(tuple(read_examples(args.gold)))
        for level, p in sorted(by_level.items(), key=lambda kv: kv[0].value):
            report = evaluate_run(p, gold, level)
            result[level.value] = report.to_dict()
            print(f"== level {level.value} ({p.model_id})")
            print(report.to_text(), end="")
    if args.check_hierarchy:
        h = hierarchy_violations(by_level)
        result["hierarchy"] = h.to_dict()
        print(f"hierarchy: {h.violations} violations over {h.checked} examples {h.by_rule}")
    if not result:
        raise ConfigError("nothing to do: pass --gold and/or --check-hierarchy")
    if len(by_level) == 1 and args.gold and not args.check_hierarchy:
        result = next(iter(result.values()))
    if args.out:
        _write_json(Path(args.out), result)
    return 0


def cmd_taxonomy(args) -> int:
    print(json.dumps(TAXONOMY.to_dict(), indent=2))
    return 0


def cmd_synth(args) -> int:
    write_dataset(args.out, generate_corpus(args.n, args.level, args.seed))
    return 0


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--data", help="training CSV (overrides train_path)")
    p.add_argument("--level", choices=["A", "B", "C"])
    p.add_argument("--profile", choices=["desk", "paper"])
    p.add_argument("--loss", choices=["cross_entropy", "focal"])
    p.add_argument("--alpha", type=float, help="focal loss alpha")
    p.add_argument("--gamma", type=float, help="focal loss gamma")
    p.add_argument("--class-weights", choices=["none", "balanced"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key, e.g. --set train.epochs=4 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiertext", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="80/20 split, train one model, score the holdout")
    _add_run_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="stratified k-fold training with out-of-fold predictions")
    _add_run_options(p)
    p.add_argument("--k", type=int)
    p.add_argument("--jobs", type=int, help="parallel fold workers")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="write a prediction CSV from a saved model")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--gate-on", metavar="PRED_CSV|gold",
                   help="predict only rows a level-A file (or the gold label) marks sexist; "
                        "a level-B file also restricts a level-C model to that category")
    p.add_argument("--model-id")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble", help="fuse aligned prediction files")
    p.add_argument("predictions", nargs="+")
    p.add_argument("--method", choices=["vote", "weighted"], default="vote")
    p.add_argument("--truth", help="gold CSV (required for --method weighted)")
    p.add_argument("--grid-step", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="metrics JSON path (default: <out>.metrics.json)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score prediction files against gold labels")
    p.add_argument("predictions", nargs="+")
    p.add_argument("--gold")
    p.add_argument("--level", choices=["A", "B", "C"])
    p.add_argument("--check-hierarchy", action="store_true")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("taxonomy", help="inspect the label taxonomy")
    p.add_argument("action", choices=["dump"])
    p.set_defaults(func=cmd_taxonomy)

    p = sub.add_parser("synth", help="write a keyword-separable synthetic corpus")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--level", choices=["A", "B", "C"], default="A")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("HIERTEXT_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hiertext: config error: {exc}", file=sys.stderr)
        return 2
    except (HiertextError, OSError, ValueError) as exc:
        print(f"hiertext: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
