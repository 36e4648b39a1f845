"""Pydantic request/response models for the HTTP service.

``ModelSpec`` mirrors the on-disk model document exactly (same keys, same
defaults), so a model file can be pasted into a request body verbatim.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..linmodel import LinearGaussianModel, model_from_dict
from ..report import Report

Mode = Literal["filter", "exact"]
Innovation = Literal["ddt", "bbt"]
Indexing = Literal["direct", "stepped"]


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    name: str
    A: list[list[float]]
    B: list[list[float]] | list[float]
    C: list[list[float]] | list[float]
    sigma: float
    D: list[list[float]] | list[float] | float | None = None
    x0: list[float] | None = None
    Sigma0: list[list[float]] | None = None

    def to_model(self) -> LinearGaussianModel:
        return model_from_dict(self.model_dump(exclude_none=True))


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec
    frozen: list[int] = Field(default_factory=list)
    horizon: int = Field(ge=0)
    mode: Mode = "filter"
    innovation: Innovation = "ddt"
    frozen_value: list[float] | None = None


class HankelRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec


class ReduceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec
    order: int = Field(ge=1, description="number of states to freeze per candidate")
    horizon: int = Field(ge=0)
    mode: Mode = "filter"
    innovation: Innovation = "ddt"
    jobs: int = Field(default=1, ge=1)
    grid: list[int] | None = None
    tol: float = Field(default=1e-12, gt=0)


class CrossingRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec
    horizon: int = Field(default=200, ge=0)
    indexing: Indexing = "direct"


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec
    order: int = Field(ge=1)
    horizon: int = Field(ge=0)
    mode: Mode = "filter"
    innovation: Innovation = "ddt"
    jobs: int = Field(default=1, ge=1)
    tol: float = Field(default=1e-12, gt=0)


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelSpec


class TablePayload(BaseModel):
    columns: list[str]
    rows: list[list[float]]


class ReportPayload(BaseModel):
    metadata: dict[str, str]
    tables: dict[str, TablePayload]

    @classmethod
    def from_report(cls, report: Report) -> "ReportPayload":
        return cls(
            metadata=dict(report.metadata),
            tables={
                name: TablePayload(columns=list(t.columns), rows=[list(r) for r in t.rows])
                for name, t in report.tables.items()
            },
        )


class ValidationPayload(BaseModel):
    spectral_radius: float
    is_schur_stable: bool
    observable: bool
    controllable: bool
    messages: list[str]


class HealthPayload(BaseModel):
    status: str
    version: str
