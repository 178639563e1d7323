"""Pydantic request/response models for the calibration service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator

TRAIN_SIZE_PRESETS = (100, 300, 500)


class PerturbationOptions(BaseModel):
    count: int = 2048
    mask_token: str = "<mask>"
    strategy: Literal["uniform_size", "bernoulli", "exhaustive"] = "uniform_size"
    bernoulli_p: float = 0.5
    seed: int = 0
    include_endpoints: bool = True


class ExplainerOptions(BaseModel):
    kernel: Literal["lime", "shap"] = "lime"
    sigma: float = 0.25
    ridge_lambda: float = 1e-3
    perturbation: PerturbationOptions = Field(default_factory=PerturbationOptions)


class ForestOptions(BaseModel):
    n_trees: int = 300
    max_depth: int = 20
    min_samples_leaf: int = 1
    features_per_split: int | None = None
    bootstrap: bool = True


class ValidateRequest(BaseModel):
    dataset: str


class ViolationItem(BaseModel):
    line: int
    field: str
    rule: str


class ValidateResponse(BaseModel):
    valid: bool
    checked: int
    violations: list[ViolationItem]


class ExplainOneRequest(BaseModel):
    record: dict[str, Any]
    predictor: dict[str, Any]
    explainer: ExplainerOptions = Field(default_factory=ExplainerOptions)


class ExplainOneResponse(BaseModel):
    id: str
    explainer: str
    digest: str
    phi0: float
    phis: list[float]


class ExplanationsRequest(BaseModel):
    dataset: str
    predictor: dict[str, Any]
    store: str
    explainer: ExplainerOptions = Field(default_factory=ExplainerOptions)
    workers: int = 1


class ExplanationsResponse(BaseModel):
    explained: int
    skipped: int
    queries: int
    failures: list[list[str]]


class TrainRequest(BaseModel):
    dataset: str
    family: Literal["kamath", "cls_prob", "bow_prop", "lime_cal", "shap_cal"]
    out: str
    store: str | None = None
    forest: ForestOptions = Field(default_factory=ForestOptions)
    seed: int = 0
    bow_mode: Literal["count", "binary", "fraction"] = "count"
    tags_file: str | None = None


class TrainResponse(BaseModel):
    model_path: str
    training_digest: str
    n_rows: int
    n_features: int


class EvaluateRequest(BaseModel):
    dataset: str
    family: str = "max_prob"
    model: str | None = None
    store: str | None = None
    out_dir: str | None = None
    bow_mode: Literal["count", "binary", "fraction"] = "count"
    tags_file: str | None = None


class TrialsRequest(BaseModel):
    dataset: str
    families: list[str] = ["max_prob", "bow_prop", "lime_cal"]
    store: str | None = None
    forest: ForestOptions = Field(default_factory=ForestOptions)
    seed: int = 0
    trials: int = 20
    train_size: int = 500
    out_dir: str | None = None
    bow_mode: Literal["count", "binary", "fraction"] = "count"
    tags_file: str | None = None

    @field_validator("train_size")
    @classmethod
    def _preset(cls, v: int) -> int:
        if v not in TRAIN_SIZE_PRESETS:
            raise ValueError(f"train_size must be one of the presets {TRAIN_SIZE_PRESETS}")
        return v

    @field_validator("trials")
    @classmethod
    def _trials(cls, v: int) -> int:
        if v < 1:
            raise ValueError("trials must be >= 1")
        return v


class CrossDomainRequest(BaseModel):
    train_dataset: str
    test_dataset: str
    families: list[str] = ["max_prob", "bow_prop", "lime_cal"]
    store: str | None = None
    forest: ForestOptions = Field(default_factory=ForestOptions)
    seed: int = 0
    out_dir: str | None = None
    bow_mode: Literal["count", "binary", "fraction"] = "count"
    tags_file: str | None = None


class SelectiveRequest(BaseModel):
    id_dataset: str
    id_count: int = 1000
    known_dataset: str
    known_count: int = 1000
    unknown_dataset: str
    unknown_count: int = 4000
    id_test_count: int | None = None
    families: list[str] = ["max_prob", "bow_prop", "lime_cal"]
    store: str | None = None
    forest: ForestOptions = Field(default_factory=ForestOptions)
    seed: int = 0
    out_dir: str | None = None


class GridSearchRequest(BaseModel):
    dataset: str
    family: str = "lime_cal"
    store: str | None = None
    seed: int = 0
    grid_trees: list[int] = [200, 300, 400, 500]
    grid_depths: list[int] = [4, 6, 8, 10, 15, 20]
    tags_file: str | None = None


class ExportFeaturesRequest(BaseModel):
    dataset: str
    family: str = "bow_prop"
    out: str
    store: str | None = None
    bow_mode: Literal["count", "binary", "fraction"] = "count"
    tags_file: str | None = None


class ImportanceRequest(BaseModel):
    model: str
    top_k: int | None = None
    out: str | None = None


class CorpusRequest(BaseModel):
    task: Literal["qa", "nli"] = "qa"
    size: int = 2000
    seed: int = 0
    out: str


class HealthResponse(BaseModel):
    status: str
    version: str
