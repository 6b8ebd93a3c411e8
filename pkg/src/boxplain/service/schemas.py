"""Request/response bodies for the session service.  All payloads carry v=1."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field


class ModelUpload(BaseModel):
    v: int = 1
    id: str
    model: dict[str, Any]


class CreatedResponse(BaseModel):
    v: int = 1
    id: str


class SessionCreate(BaseModel):
    v: int = 1
    pack: str
    model: str
    epsilon0: float = Field(gt=0.0, le=1.0)
    seed: int = 0


class QuestionBody(BaseModel):
    v: int = 1
    type: str
    strength: str = "strict"
    dnf: list[list[str]]


class ResponseBody(BaseModel):
    v: int = 1
    kind: Literal["ma", "la", "history", "ignore", "aps", "break", "exit"]
    arg: str | None = None


class ConditionView(BaseModel):
    condition: dict[str, Any]
    unique_volume: float
    total_volume: float
    text: str


class DescriptionView(BaseModel):
    v: int = 1
    status: Literal["ready", "pending", "no_situation", "exited"]
    state: str | None = None
    epsilon: float | None = None
    degraded: bool = False
    message: str | None = None
    selected_predicate: str | None = None
    conditions: list[ConditionView] = []


class PendingResponse(BaseModel):
    v: int = 1
    status: Literal["pending"] = "pending"
    poll: str


class HistoryNode(BaseModel):
    id: str
    parent: str | None
    epsilon: float
    merge_enabled: bool
    ignored: list[str]
    question: dict[str, Any]
    condition_count: int


class HistoryView(BaseModel):
    v: int = 1
    current: str | None
    nodes: list[HistoryNode]


class PredicateView(BaseModel):
    name: str
    role: str
    label: str | None = None


class PredicateListing(BaseModel):
    v: int = 1
    predicates: list[PredicateView]


class ErrorBody(BaseModel):
    v: int = 1
    error: str
    violations: list[str] = []
