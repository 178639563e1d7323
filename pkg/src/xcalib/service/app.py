"""FastAPI application wrapping the calibration toolkit."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="xcalib", description="Black-box calibration service")

    def run(fn, req):
        try:
            return fn(req)
        except (ValueError, FileNotFoundError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest):
        return run(handlers.validate, req)

    @app.post("/explain", response_model=schemas.ExplainOneResponse)
    def explain_one(req: schemas.ExplainOneRequest):
        return run(handlers.explain_one, req)

    @app.post("/pipeline/explanations", response_model=schemas.ExplanationsResponse)
    def explanations(req: schemas.ExplanationsRequest):
        return run(handlers.explanations, req)

    @app.post("/calibrator/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        return run(handlers.train, req)

    @app.post("/evaluate")
    def evaluate(req: schemas.EvaluateRequest):
        return run(handlers.evaluate, req)

    @app.post("/pipeline/trials")
    def trials(req: schemas.TrialsRequest):
        return run(handlers.trials, req)

    @app.post("/pipeline/cross-domain")
    def cross_domain(req: schemas.CrossDomainRequest):
        return run(handlers.cross_domain, req)

    @app.post("/pipeline/selective")
    def selective(req: schemas.SelectiveRequest):
        return run(handlers.selective, req)

    @app.post("/pipeline/grid-search")
    def grid(req: schemas.GridSearchRequest):
        return run(handlers.grid, req)

    @app.post("/calibrator/importance")
    def importance(req: schemas.ImportanceRequest):
        return run(handlers.importance, req)

    @app.post("/features/export")
    def features_export(req: schemas.ExportFeaturesRequest):
        return run(handlers.features_export, req)

    @app.post("/corpus/synthetic")
    def corpus(req: schemas.CorpusRequest):
        return run(handlers.make_corpus, req)

    return app


app = create_app()
