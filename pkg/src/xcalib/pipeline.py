"""End-to-end orchestration: explanation runs, trial protocols, cross-domain
and selective evaluation, grid search, and report files.

All randomness flows from one run seed: trial i draws its split from
derive_seed(seed, "trial", i), and the forest trained for family f in trial i
is seeded with derive_seed(seed, "forest", i, f); tree seeds then derive from
the forest seed via numpy SeedSequence spawning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .blackbox import Predictor
from .evaluation import auc, calibration_accuracy, coverage_curve, quality_at_coverage
from .explainers import ExplainerConfig, explain
from .features import ATTRIBUTION_FAMILIES, BowMode, Family, assemble
from .forest import ForestHyper, ForestModel, feature_importance, score_matrix, train_forest
from .properties import PropertyScheme
from .store import AttributionStore
from .types import AnnotatedInstance
from .util import derive_seed

METRIC_KEYS = ("acc", "auc", "q25", "q50", "q75")
COVERAGE_POINTS = (0.25, 0.5, 0.75)


@dataclass
class ExplanationRun:
    explained: int
    skipped: int
    queries: int
    failures: list[tuple[str, str]]


def run_explanations(
    instances: list[AnnotatedInstance],
    predictor: Predictor,
    cfg: ExplainerConfig,
    store: AttributionStore,
    workers: int = 1,
) -> ExplanationRun:
    """Explain every instance once, persisting under the config digest.

    Instances already present under the same digest are skipped without any
    predictor queries; per-instance failures are recorded and the run
    continues.  ``workers`` > 1 overlaps predictor calls across instances
    (useful against remote predictors); results are written back in instance
    order, so the store file is byte-identical regardless of worker count.
    """
    digest = cfg.digest()
    explained = skipped = queries = 0
    failures: list[tuple[str, str]] = []

    pending = []
    for inst in instances:
        if store.get(inst.id, digest) is not None:
            skipped += 1
        else:
            pending.append(inst)

    def one(inst: AnnotatedInstance):
        return explain(inst, predictor, cfg)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = []
            for inst, future in [(i, pool.submit(one, i)) for i in pending]:
                try:
                    outcomes.append((inst, future.result(), None))
                except Exception as exc:
                    outcomes.append((inst, None, exc))
    else:
        outcomes = []
        for inst in pending:
            try:
                outcomes.append((inst, one(inst), None))
            except Exception as exc:
                outcomes.append((inst, None, exc))

    for inst, attribution, error in outcomes:
        if error is not None:
            failures.append((inst.id, str(error)))
            continue
        store.put(inst.id, attribution)
        explained += 1
        queries += query_count(len(inst), cfg)
    return ExplanationRun(explained=explained, skipped=skipped, queries=queries, failures=failures)


def export_features(
    instances: list[AnnotatedInstance],
    family: Family,
    scheme: PropertyScheme,
    path,
    store: AttributionStore | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> int:
    """Write one family's feature matrix as tab-delimited text with a header
    row of feature names; the leading columns are instance id and label t."""
    x, names = family_matrix(instances, family, scheme, store=store, bow_mode=bow_mode)
    lines = ["id\tcorrect\t" + "\t".join(names)]
    for inst, row in zip(instances, x):
        values = "\t".join(repr(float(v)) for v in row)
        lines.append(f"{inst.id}\t{int(inst.correct)}\t{values}")
    Path(path).write_text("\n".join(lines) + "\n")
    return len(instances)


def query_count(n_tokens: int, cfg: ExplainerConfig) -> int:
    from .perturbation import Strategy

    if cfg.perturbation.strategy == Strategy.EXHAUSTIVE:
        return 2**n_tokens
    return cfg.perturbation.count


def max_prob_scores(instances: list[AnnotatedInstance]) -> np.ndarray:
    return np.array([inst.prediction.top_probability for inst in instances])


def family_matrix(
    instances: list[AnnotatedInstance],
    family: Family,
    scheme: PropertyScheme,
    store: AttributionStore | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Assemble the feature matrix for one family over a pool of instances."""
    rows = []
    names: tuple[str, ...] | None = None
    kind = ATTRIBUTION_FAMILIES.get(family)
    for inst in instances:
        attribution = None
        if kind is not None:
            if store is None:
                raise ValueError(f"family {family.value} needs an attribution store")
            attribution = store.find(inst.id, kind)
            if attribution is None:
                raise ValueError(f"no {kind.value} attribution stored for instance {inst.id}")
        fv = assemble(inst, scheme, family, attribution=attribution, bow_mode=bow_mode)
        if names is None:
            names = fv.names
        elif names != fv.names:
            raise ValueError("inconsistent feature names across instances")
        rows.append(fv.values)
    return np.vstack(rows), names


def compute_metrics(scores: np.ndarray, labels: np.ndarray, quality: np.ndarray) -> dict[str, float]:
    curve = coverage_curve(scores, quality)
    out = {
        "acc": 100.0 * calibration_accuracy(scores, labels),
        "auc": auc(curve),
    }
    for c in COVERAGE_POINTS:
        out[f"q{int(c * 100)}"] = 100.0 * quality_at_coverage(curve, c)
    return out


def _summarize(values: list[float]) -> dict:
    arr = np.asarray(values)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return {"values": [float(v) for v in values], "mean": float(arr.mean()), "std": std}


def evaluate_family(
    family: Family,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    pool: list[AnnotatedInstance],
    matrices: dict[Family, tuple[np.ndarray, tuple[str, ...]]],
    labels: np.ndarray,
    quality: np.ndarray,
    hyper: ForestHyper,
    forest_seed: int,
) -> tuple[dict[str, float], np.ndarray]:
    if family == Family.MAX_PROB:
        scores = max_prob_scores([pool[i] for i in test_idx])
    else:
        x, names = matrices[family]
        model = train_forest(
            x[train_idx], labels[train_idx],
            replace(hyper, seed=forest_seed), feature_names=names, family=family,
        )
        scores = score_matrix(model, x[test_idx])
    return compute_metrics(scores, labels[test_idx], quality[test_idx]), scores


def run_trials(
    pool: list[AnnotatedInstance],
    families: list[Family],
    scheme: PropertyScheme,
    hyper: ForestHyper,
    seed: int = 0,
    trials: int = 20,
    train_size: int = 500,
    store: AttributionStore | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> dict:
    """Repeatedly split the pool, train each family's calibrator on the train
    side, and report mean/stddev metrics plus per-trial deltas vs bow_prop."""
    n = len(pool)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n < train_size + 1:
        raise ValueError(f"pool of {n} too small for train size {train_size}")
    labels = np.array([inst.correct for inst in pool], dtype=np.int64)
    quality = np.array([inst.quality for inst in pool])
    matrices = {
        fam: family_matrix(pool, fam, scheme, store=store, bow_mode=bow_mode)
        for fam in families
        if fam != Family.MAX_PROB
    }

    per_family: dict[Family, dict[str, list[float]]] = {
        fam: {k: [] for k in METRIC_KEYS} for fam in families
    }
    first_trial_curves: dict[Family, list[tuple[float, float]]] = {}

    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, "trial", trial))
        perm = rng.permutation(n)
        train_idx, test_idx = perm[:train_size], perm[train_size:]
        for fam in families:
            forest_seed = derive_seed(seed, "forest", trial, fam.value)
            metrics, scores = evaluate_family(
                fam, train_idx, test_idx, pool, matrices, labels, quality, hyper, forest_seed
            )
            for key, value in metrics.items():
                per_family[fam][key].append(value)
            if trial == 0:
                first_trial_curves[fam] = list(coverage_curve(scores, quality[test_idx]).points)

    report: dict = {
        "protocol": "trials",
        "n_pool": n,
        "train_size": train_size,
        "trials": trials,
        "seed": seed,
        "families": {
            fam.value: {k: _summarize(v) for k, v in per_family[fam].items()} for fam in families
        },
        "curves": {fam.value: first_trial_curves[fam] for fam in families},
    }

    if Family.BOW_PROP in families:
        deltas = {}
        for fam in families:
            if fam == Family.BOW_PROP:
                continue
            deltas[fam.value] = {
                k: _summarize(
                    [a - b for a, b in zip(per_family[fam][k], per_family[Family.BOW_PROP][k])]
                )
                for k in METRIC_KEYS
            }
        report["deltas_vs_bow_prop"] = deltas
    return report


def run_cross_domain(
    train_pool: list[AnnotatedInstance],
    test_pool: list[AnnotatedInstance],
    families: list[Family],
    scheme: PropertyScheme,
    hyper: ForestHyper,
    seed: int = 0,
    store: AttributionStore | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> dict:
    """Train each calibrator on all of domain A and evaluate it on domain B."""
    train_labels = np.array([i.correct for i in train_pool], dtype=np.int64)
    test_labels = np.array([i.correct for i in test_pool], dtype=np.int64)
    test_quality = np.array([i.quality for i in test_pool])

    out: dict = {"protocol": "cross_domain", "n_train": len(train_pool), "n_test": len(test_pool), "families": {}}
    for fam in families:
        if fam == Family.MAX_PROB:
            scores = max_prob_scores(test_pool)
        else:
            x_train, names_train = family_matrix(train_pool, fam, scheme, store=store, bow_mode=bow_mode)
            x_test, names_test = family_matrix(test_pool, fam, scheme, store=store, bow_mode=bow_mode)
            if names_train != names_test:
                raise ValueError("feature width mismatch between domains")
            model = train_forest(
                x_train, train_labels,
                replace(hyper, seed=derive_seed(seed, "cross", fam.value)),
                feature_names=names_train, family=fam,
            )
            scores = score_matrix(model, x_test)
        out["families"][fam.value] = compute_metrics(scores, test_labels, test_quality)
    return out


@dataclass(frozen=True)
class MixtureSpec:
    id_path: str
    id_count: int
    known_path: str
    known_count: int
    unknown_path: str
    unknown_count: int
    id_test_count: int | None = None  # None -> min(4 * id_count, remaining)

    def __post_init__(self) -> None:
        if min(self.id_count, self.known_count, self.unknown_count) <= 0:
            raise ValueError("mixture counts must be positive")


def run_selective(
    id_pool: list[AnnotatedInstance],
    known_pool: list[AnnotatedInstance],
    unknown_pool: list[AnnotatedInstance],
    spec: MixtureSpec,
    families: list[Family],
    scheme: PropertyScheme,
    hyper: ForestHyper,
    seed: int = 0,
    store: AttributionStore | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> dict:
    """Train on id + known-OOD, evaluate coverage AUC on id + unknown-OOD."""
    rng = np.random.default_rng(derive_seed(seed, "selective"))
    id_perm = rng.permutation(len(id_pool))
    if spec.id_count > len(id_pool):
        raise ValueError("id pool smaller than requested train count")
    id_train = [id_pool[i] for i in id_perm[: spec.id_count]]
    remaining = id_perm[spec.id_count :]
    test_count = spec.id_test_count if spec.id_test_count is not None else min(4 * spec.id_count, len(remaining))
    id_test = [id_pool[i] for i in remaining[:test_count]]

    known_perm = rng.permutation(len(known_pool))
    known_train = [known_pool[i] for i in known_perm[: spec.known_count]]
    unknown_perm = rng.permutation(len(unknown_pool))
    unknown_test = [unknown_pool[i] for i in unknown_perm[: spec.unknown_count]]

    train_pool = id_train + known_train
    test_pool = id_test + unknown_test
    result = run_cross_domain(
        train_pool, test_pool, families, scheme, hyper, seed=seed, store=store, bow_mode=bow_mode
    )
    result["protocol"] = "selective"
    result["mixture"] = {
        "id_train": len(id_train),
        "known_train": len(known_train),
        "id_test": len(id_test),
        "unknown_test": len(unknown_test),
    }
    return result


DEFAULT_GRID_TREES = (200, 300, 400, 500)
DEFAULT_GRID_DEPTHS = (4, 6, 8, 10, 15, 20)
GRID_TRAIN = 400
GRID_VAL = 100


def grid_search(
    pool: list[AnnotatedInstance],
    family: Family,
    scheme: PropertyScheme,
    seed: int = 0,
    grid_trees: tuple[int, ...] = DEFAULT_GRID_TREES,
    grid_depths: tuple[int, ...] = DEFAULT_GRID_DEPTHS,
    store: AttributionStore | None = None,
    hyper_base: ForestHyper | None = None,
    bow_mode: BowMode = BowMode.COUNT,
) -> dict:
    """Pick (n_trees, max_depth) by validation AUC on a 400/100 split; ties
    prefer the smaller depth, then fewer trees."""
    if len(pool) < GRID_TRAIN + GRID_VAL:
        raise ValueError(f"grid search needs a pool of at least {GRID_TRAIN + GRID_VAL}")
    base = hyper_base or ForestHyper()
    rng = np.random.default_rng(derive_seed(seed, "grid"))
    perm = rng.permutation(len(pool))
    train_idx, val_idx = perm[:GRID_TRAIN], perm[GRID_TRAIN : GRID_TRAIN + GRID_VAL]

    labels = np.array([i.correct for i in pool], dtype=np.int64)
    quality = np.array([i.quality for i in pool])
    if family == Family.MAX_PROB:
        raise ValueError("max_prob has no hyperparameters to search")
    x, names = family_matrix(pool, family, scheme, store=store, bow_mode=bow_mode)

    cells = []
    best: dict | None = None
    for depth in sorted(grid_depths):
        for trees in sorted(grid_trees):
            hyper = replace(base, n_trees=trees, max_depth=depth,
                            seed=derive_seed(seed, "grid-cell", trees, depth))
            model = train_forest(x[train_idx], labels[train_idx], hyper,
                                 feature_names=names, family=family)
            scores = score_matrix(model, x[val_idx])
            val_auc = auc(coverage_curve(scores, quality[val_idx]))
            cell = {"n_trees": trees, "max_depth": depth, "val_auc": val_auc}
            cells.append(cell)
            if best is None or val_auc > best["val_auc"]:
                best = cell
    return {"protocol": "grid_search", "family": family.value, "best": best, "cells": cells}


def importance_table(model: ForestModel, top_k: int | None = None) -> list[tuple[str, float]]:
    ranked = sorted(feature_importance(model).items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k] if top_k else ranked


def write_trial_report(report: dict, out_dir: str | Path) -> dict[str, str]:
    """Emit metrics.json, metrics.tsv and curves.tsv; all output is
    deterministic for a fixed report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    json_path = out / "metrics.json"
    json_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")

    lines = ["family\tmetric\tmean\tstd\tdelta_bow_mean\tdelta_bow_std"]
    deltas = report.get("deltas_vs_bow_prop", {})
    for fam, metrics in report["families"].items():
        for key in METRIC_KEYS:
            if key not in metrics:
                continue
            stat = metrics[key] if isinstance(metrics[key], dict) else {"mean": metrics[key], "std": 0.0}
            delta = deltas.get(fam, {}).get(key)
            d_mean = f"{delta['mean']:.4f}" if delta else ""
            d_std = f"{delta['std']:.4f}" if delta else ""
            lines.append(f"{fam}\t{key}\t{stat['mean']:.4f}\t{stat['std']:.4f}\t{d_mean}\t{d_std}")
    tsv_path = out / "metrics.tsv"
    tsv_path.write_text("\n".join(lines) + "\n")

    paths = {"metrics_json": str(json_path), "metrics_tsv": str(tsv_path)}
    curves = report.get("curves")
    if curves:
        families = list(curves.keys())
        rows = ["coverage\t" + "\t".join(families)]
        for i in range(len(curves[families[0]])):
            coverage = curves[families[0]][i][0]
            rows.append(
                f"{coverage:.6f}\t" + "\t".join(f"{curves[f][i][1]:.6f}" for f in families)
            )
        curve_path = out / "curves.tsv"
        curve_path.write_text("\n".join(rows) + "\n")
        paths["curves_tsv"] = str(curve_path)
    return paths
