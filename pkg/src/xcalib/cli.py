"""Command-line interface.

Every subcommand builds the same request model the HTTP service accepts and
dispatches it either in-process (default) or, with --server, as a POST to a
running service; results print as JSON.  Exit code 0 only on full success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .service import handlers, schemas

ROUTES = {
    "validate": (handlers.validate, schemas.ValidateRequest, "/validate"),
    "explain": (handlers.explanations, schemas.ExplanationsRequest, "/pipeline/explanations"),
    "train": (handlers.train, schemas.TrainRequest, "/calibrator/train"),
    "evaluate": (handlers.evaluate, schemas.EvaluateRequest, "/evaluate"),
    "trials": (handlers.trials, schemas.TrialsRequest, "/pipeline/trials"),
    "cross-domain": (handlers.cross_domain, schemas.CrossDomainRequest, "/pipeline/cross-domain"),
    "selective": (handlers.selective, schemas.SelectiveRequest, "/pipeline/selective"),
    "grid-search": (handlers.grid, schemas.GridSearchRequest, "/pipeline/grid-search"),
    "importance-report": (handlers.importance, schemas.ImportanceRequest, "/calibrator/importance"),
    "export-features": (handlers.features_export, schemas.ExportFeaturesRequest, "/features/export"),
    "make-corpus": (handlers.make_corpus, schemas.CorpusRequest, "/corpus/synthetic"),
}


def _load_spec(value: str) -> dict:
    """Predictor spec: inline JSON or a path to a JSON file."""
    if value.strip().startswith("{"):
        return json.loads(value)
    return json.loads(Path(value).read_text())


def _add_explainer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=["lime", "shap"], default="lime")
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--ridge-lambda", type=float, default=1e-3)
    p.add_argument("--perturbations", type=int, default=2048)
    p.add_argument("--mask-token", default="<mask>")
    p.add_argument(
        "--strategy", choices=["uniform_size", "bernoulli", "exhaustive"], default="uniform_size"
    )
    p.add_argument("--pert-seed", type=int, default=0)


def _add_forest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-trees", type=int, default=300)
    p.add_argument("--max-depth", type=int, default=20)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--features-per-split", type=int, default=None)


def _explainer_options(args) -> schemas.ExplainerOptions:
    return schemas.ExplainerOptions(
        kernel=args.kernel,
        sigma=args.sigma,
        ridge_lambda=args.ridge_lambda,
        perturbation=schemas.PerturbationOptions(
            count=args.perturbations,
            mask_token=args.mask_token,
            strategy=args.strategy,
            seed=args.pert_seed,
        ),
    )


def _forest_options(args) -> schemas.ForestOptions:
    return schemas.ForestOptions(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        features_per_split=args.features_per_split,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xcalib", description=__doc__)
    parser.add_argument("--server", default=None, help="dispatch to a running service URL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset file against the record schema")
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("explain", help="run explanations over a dataset into a store")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictor", required=True, help="predictor spec JSON or file path")
    p.add_argument("--store", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_explainer_flags(p)

    p = sub.add_parser("train", help="train a calibrator on a full dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", required=True,
                   choices=["kamath", "cls_prob", "bow_prop", "lime_cal", "shap_cal"])
    p.add_argument("--out", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tags-file", default=None)
    _add_forest_flags(p)

    p = sub.add_parser("evaluate", help="score a dataset and report metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", default="max_prob")
    p.add_argument("--model", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--tags-file", default=None)

    p = sub.add_parser("trials", help="repeated random-split protocol")
    p.add_argument("--dataset", required=True)
    p.add_argument("--families", nargs="+", default=["max_prob", "bow_prop", "lime_cal"])
    p.add_argument("--store", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--train-size", type=int, default=500)
    p.add_argument("--out-dir", default=None)
    _add_forest_flags(p)

    p = sub.add_parser("cross-domain", help="train on one domain, test on another")
    p.add_argument("--train-dataset", required=True)
    p.add_argument("--test-dataset", required=True)
    p.add_argument("--families", nargs="+", default=["max_prob", "bow_prop", "lime_cal"])
    p.add_argument("--store", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    _add_forest_flags(p)

    p = sub.add_parser("selective", help="train on id+known mixture, test on id+unknown")
    p.add_argument("--id-dataset", required=True)
    p.add_argument("--id-count", type=int, default=1000)
    p.add_argument("--known-dataset", required=True)
    p.add_argument("--known-count", type=int, default=1000)
    p.add_argument("--unknown-dataset", required=True)
    p.add_argument("--unknown-count", type=int, default=4000)
    p.add_argument("--id-test-count", type=int, default=None)
    p.add_argument("--families", nargs="+", default=["max_prob", "bow_prop", "lime_cal"])
    p.add_argument("--store", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    _add_forest_flags(p)

    p = sub.add_parser("grid-search", help="pick forest hyperparameters on a 400/100 split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", default="lime_cal")
    p.add_argument("--store", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-trees", nargs="+", type=int, default=[200, 300, 400, 500])
    p.add_argument("--grid-depths", nargs="+", type=int, default=[4, 6, 8, 10, 15, 20])

    p = sub.add_parser("importance-report", help="rank a trained model's features")
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("export-features", help="dump a family's feature matrix as TSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", default="bow_prop")
    p.add_argument("--out", required=True)
    p.add_argument("--store", default=None)
    p.add_argument("--tags-file", default=None)

    p = sub.add_parser("make-corpus", help="generate a synthetic corpus plus predictor spec")
    p.add_argument("--task", choices=["qa", "nli"], default="qa")
    p.add_argument("--size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the calibration service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_for(args):
    cmd = args.command
    if cmd == "validate":
        return schemas.ValidateRequest(dataset=args.dataset)
    if cmd == "explain":
        return schemas.ExplanationsRequest(
            dataset=args.dataset,
            predictor=_load_spec(args.predictor),
            store=args.store,
            explainer=_explainer_options(args),
            workers=args.workers,
        )
    if cmd == "train":
        return schemas.TrainRequest(
            dataset=args.dataset, family=args.family, out=args.out,
            store=args.store, forest=_forest_options(args), seed=args.seed,
            tags_file=args.tags_file,
        )
    if cmd == "evaluate":
        return schemas.EvaluateRequest(
            dataset=args.dataset, family=args.family, model=args.model,
            store=args.store, out_dir=args.out_dir, tags_file=args.tags_file,
        )
    if cmd == "trials":
        return schemas.TrialsRequest(
            dataset=args.dataset, families=args.families, store=args.store,
            forest=_forest_options(args), seed=args.seed, trials=args.trials,
            train_size=args.train_size, out_dir=args.out_dir,
        )
    if cmd == "cross-domain":
        return schemas.CrossDomainRequest(
            train_dataset=args.train_dataset, test_dataset=args.test_dataset,
            families=args.families, store=args.store,
            forest=_forest_options(args), seed=args.seed, out_dir=args.out_dir,
        )
    if cmd == "selective":
        return schemas.SelectiveRequest(
            id_dataset=args.id_dataset, id_count=args.id_count,
            known_dataset=args.known_dataset, known_count=args.known_count,
            unknown_dataset=args.unknown_dataset, unknown_count=args.unknown_count,
            id_test_count=args.id_test_count, families=args.families,
            store=args.store, forest=_forest_options(args), seed=args.seed,
            out_dir=args.out_dir,
        )
    if cmd == "grid-search":
        return schemas.GridSearchRequest(
            dataset=args.dataset, family=args.family, store=args.store,
            seed=args.seed, grid_trees=args.grid_trees, grid_depths=args.grid_depths,
        )
    if cmd == "importance-report":
        return schemas.ImportanceRequest(model=args.model, top_k=args.top_k, out=args.out)
    if cmd == "export-features":
        return schemas.ExportFeaturesRequest(
            dataset=args.dataset, family=args.family, out=args.out,
            store=args.store, tags_file=args.tags_file,
        )
    if cmd == "make-corpus":
        return schemas.CorpusRequest(task=args.task, size=args.size, seed=args.seed, out=args.out)
    raise ValueError(f"unknown command {cmd}")


def _dispatch(args) -> dict:
    handler, _, path = ROUTES[args.command]
    request = _request_for(args)
    if args.server:
        import httpx

        resp = httpx.post(
            args.server.rstrip("/") + path, json=request.model_dump(), timeout=None
        )
        if resp.status_code >= 400:
            raise RuntimeError(f"service error {resp.status_code}: {resp.text}")
        return resp.json()
    return handler(request)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    try:
        result = _dispatch(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True, indent=2))
    if args.command == "validate" and not result.get("valid", False):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
