"""Request and response models for the HTTP surface."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ExplainRequest(BaseModel):
    data_path: str
    label: str | int
    index: int
    method: str = "ce-climax"
    balance: str = "gmm"
    influence: bool = False
    keep_fraction: float = 0.7
    n_prime: int = 1000
    k: int = 5
    lam: float | None = Field(default=None, alias="lambda")
    kernel_width: float | None = None
    seed: int | None = None
    blackbox_cmd: str | None = None

    model_config = {"populate_by_name": True}


class TopFeature(BaseModel):
    index: int
    name: str
    score: float


class ExplainResponse(BaseModel):
    method: str
    seed: int
    target_class: int
    contrast_classes: list[int]
    phi: list[float]
    intercept: float
    top_features: list[TopFeature]
    diagnostics: dict
    document: str
    svg: str


class StabilityRequest(BaseModel):
    data_path: str
    label: str | int
    methods: list[str] = ["lime", "ce-climax-gmm"]
    n_prime: list[int] = [500, 1000]
    repeats: int = 20
    index_count: int = 10
    seed: int | None = None
    jobs: int = 1
    blackbox_cmd: str | None = None


class StabilityCellOut(BaseModel):
    method: str
    n_prime: int
    grand_mean_jaccard: float | None
    failures: int


class StabilityResponse(BaseModel):
    dataset: str
    seed: int
    cells: list[StabilityCellOut]
    csv: str
    document: str
    svg: str


class HealthResponse(BaseModel):
    status: str
    version: str
