"""Service handlers: each takes a request model and returns a JSON-able dict.

The FastAPI routes and the CLI both dispatch through these functions, so a
command behaves identically in-process and over HTTP.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..blackbox import build_predictor
from ..dataset import ingest, record_to_instance, validate_file
from ..evaluation import coverage_curve
from ..explainers import ExplainerConfig, TargetKind, explain
from ..features import BowMode, Family
from ..forest import ForestHyper, load, save, score_matrix, train_forest
from ..perturbation import PerturbationConfig, Strategy
from ..pipeline import (
    MixtureSpec,
    compute_metrics,
    export_features,
    family_matrix,
    grid_search,
    importance_table,
    max_prob_scores,
    run_cross_domain,
    run_explanations,
    run_selective,
    run_trials,
    write_trial_report,
)
from ..properties import default_scheme, load_universe
from ..store import AttributionStore
from ..types import ExplainerKind, Task
from . import schemas


def _config_for(opts: schemas.ExplainerOptions, task: Task) -> ExplainerConfig:
    # Target kind follows the task: span probability for QA, class probability
    # for NLI.
    p = opts.perturbation
    return ExplainerConfig(
        kernel=ExplainerKind(opts.kernel),
        sigma=opts.sigma,
        ridge_lambda=opts.ridge_lambda,
        perturbation=PerturbationConfig(
            count=p.count,
            mask_token=p.mask_token,
            strategy=Strategy(p.strategy),
            bernoulli_p=p.bernoulli_p,
            seed=p.seed,
            include_endpoints=p.include_endpoints,
        ),
        target=TargetKind.PREDICTED_SPAN_PROB if task == Task.QA else TargetKind.PREDICTED_CLASS_PROB,
    )


def _predictor(spec: dict):
    return build_predictor(spec)


def _hyper(opts: schemas.ForestOptions, seed: int = 0) -> ForestHyper:
    return ForestHyper(
        n_trees=opts.n_trees,
        max_depth=opts.max_depth,
        min_samples_leaf=opts.min_samples_leaf,
        features_per_split=opts.features_per_split,
        seed=seed,
        bootstrap=opts.bootstrap,
    )


def _families(names: list[str]) -> list[Family]:
    return [Family(name) for name in names]


def _scheme_for(instances, tags_file: str | None):
    universe = load_universe(tags_file) if tags_file else None
    return default_scheme(instances[0].task, universe=universe)


def health() -> dict:
    return {"status": "ok", "version": __version__}


def validate(req: schemas.ValidateRequest) -> dict:
    problems = validate_file(req.dataset)
    checked = sum(1 for line in Path(req.dataset).read_text().splitlines() if line.strip())
    return {
        "valid": not problems,
        "checked": checked,
        "violations": problems,
    }


def explain_one(req: schemas.ExplainOneRequest) -> dict:
    instance = record_to_instance(req.record)
    cfg = _config_for(req.explainer, instance.task)
    attribution = explain(instance, _predictor(req.predictor), cfg)
    return {
        "id": instance.id,
        "explainer": attribution.explainer.value,
        "digest": attribution.config_digest,
        "phi0": attribution.phi0,
        "phis": list(attribution.phis),
    }


def explanations(req: schemas.ExplanationsRequest) -> dict:
    instances = ingest(req.dataset)
    cfg = _config_for(req.explainer, instances[0].task)
    store = AttributionStore(req.store)
    run = run_explanations(instances, _predictor(req.predictor), cfg, store, workers=req.workers)
    return {
        "explained": run.explained,
        "skipped": run.skipped,
        "queries": run.queries,
        "failures": [[iid, msg] for iid, msg in run.failures],
    }


def train(req: schemas.TrainRequest) -> dict:
    instances = ingest(req.dataset)
    scheme = _scheme_for(instances, req.tags_file)
    store = AttributionStore(req.store) if req.store else None
    family = Family(req.family)
    x, names = family_matrix(instances, family, scheme, store=store, bow_mode=BowMode(req.bow_mode))
    labels = np.array([i.correct for i in instances], dtype=np.int64)
    model = train_forest(x, labels, _hyper(req.forest, req.seed), feature_names=names, family=family)
    save(model, req.out)
    return {
        "model_path": req.out,
        "training_digest": model.training_digest,
        "n_rows": len(instances),
        "n_features": model.n_features,
    }


def evaluate(req: schemas.EvaluateRequest) -> dict:
    instances = ingest(req.dataset)
    scheme = _scheme_for(instances, req.tags_file)
    family = Family(req.family)
    labels = np.array([i.correct for i in instances], dtype=np.int64)
    quality = np.array([i.quality for i in instances])
    if family == Family.MAX_PROB:
        scores = max_prob_scores(instances)
    else:
        if not req.model:
            raise ValueError("evaluating a trained family requires --model")
        model = load(req.model)
        store = AttributionStore(req.store) if req.store else None
        x, names = family_matrix(instances, family, scheme, store=store, bow_mode=BowMode(req.bow_mode))
        if names != model.feature_names:
            raise ValueError("feature names do not match the trained model")
        scores = score_matrix(model, x)
    result = {"family": family.value, "n": len(instances), **compute_metrics(scores, labels, quality)}
    if req.out_dir:
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        curve = coverage_curve(scores, quality)
        lines = ["coverage\tquality"] + [f"{c:.6f}\t{q:.6f}" for c, q in curve.points]
        (out / f"curve_{family.value}.tsv").write_text("\n".join(lines) + "\n")
        (out / f"metrics_{family.value}.json").write_text(json.dumps(result, sort_keys=True, indent=2) + "\n")
        result["out_dir"] = str(out)
    return result


def trials(req: schemas.TrialsRequest) -> dict:
    instances = ingest(req.dataset)
    scheme = _scheme_for(instances, req.tags_file)
    store = AttributionStore(req.store) if req.store else None
    report = run_trials(
        instances,
        _families(req.families),
        scheme,
        _hyper(req.forest),
        seed=req.seed,
        trials=req.trials,
        train_size=req.train_size,
        store=store,
        bow_mode=BowMode(req.bow_mode),
    )
    if req.out_dir:
        report["paths"] = write_trial_report(report, req.out_dir)
    return report


def cross_domain(req: schemas.CrossDomainRequest) -> dict:
    train_pool = ingest(req.train_dataset)
    test_pool = ingest(req.test_dataset)
    if train_pool[0].task != test_pool[0].task:
        raise ValueError("cross-domain runs need a shared task")
    scheme = _scheme_for(train_pool, req.tags_file)
    store = AttributionStore(req.store) if req.store else None
    report = run_cross_domain(
        train_pool, test_pool, _families(req.families), scheme,
        _hyper(req.forest), seed=req.seed, store=store, bow_mode=BowMode(req.bow_mode),
    )
    if req.out_dir:
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cross_domain.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        report["out_dir"] = str(out)
    return report


def selective(req: schemas.SelectiveRequest) -> dict:
    id_pool = ingest(req.id_dataset)
    known_pool = ingest(req.known_dataset)
    unknown_pool = ingest(req.unknown_dataset)
    scheme = default_scheme(id_pool[0].task)
    store = AttributionStore(req.store) if req.store else None
    spec = MixtureSpec(
        id_path=req.id_dataset, id_count=req.id_count,
        known_path=req.known_dataset, known_count=req.known_count,
        unknown_path=req.unknown_dataset, unknown_count=req.unknown_count,
        id_test_count=req.id_test_count,
    )
    report = run_selective(
        id_pool, known_pool, unknown_pool, spec, _families(req.families),
        scheme, _hyper(req.forest), seed=req.seed, store=store,
    )
    if req.out_dir:
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selective.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        report["out_dir"] = str(out)
    return report


def grid(req: schemas.GridSearchRequest) -> dict:
    instances = ingest(req.dataset)
    scheme = _scheme_for(instances, req.tags_file)
    store = AttributionStore(req.store) if req.store else None
    return grid_search(
        instances, Family(req.family), scheme, seed=req.seed,
        grid_trees=tuple(req.grid_trees), grid_depths=tuple(req.grid_depths), store=store,
    )


def importance(req: schemas.ImportanceRequest) -> dict:
    model = load(req.model)
    ranked = importance_table(model, req.top_k)
    if req.out:
        lines = ["feature\timportance"] + [f"{name}\t{value:.6f}" for name, value in ranked]
        Path(req.out).write_text("\n".join(lines) + "\n")
    return {
        "model": req.model,
        "family": model.family.value,
        "features": [[name, value] for name, value in ranked],
    }


def features_export(req: schemas.ExportFeaturesRequest) -> dict:
    instances = ingest(req.dataset)
    scheme = _scheme_for(instances, req.tags_file)
    store = AttributionStore(req.store) if req.store else None
    count = export_features(
        instances, Family(req.family), scheme, req.out,
        store=store, bow_mode=BowMode(req.bow_mode),
    )
    return {"out": req.out, "rows": count, "family": req.family}


def make_corpus(req: schemas.CorpusRequest) -> dict:
    from ..synthetic import write_corpus

    return write_corpus(Task(req.task), req.size, req.seed, req.out)
