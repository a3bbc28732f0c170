"""Pydantic request/response models for the annotation service.

The session view deliberately omits the source type of every excerpt: an
annotator must judge the music, not the badge. Source types only appear in
the report, which is locked until the session is finalized.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class UserProfileIn(BaseModel):
    display_name: str
    political_view: str = ""
    vote_intent: str = Field(default="blank", pattern="^(left|right|blank)$")


class LoopConfigIn(BaseModel):
    batch_size: int = 10
    max_iterations: int = 3
    initial_per_type: int = 5
    seed: int = 0
    w_user: float = 10.0
    retain_pretraining: bool = True


class CreateSessionRequest(BaseModel):
    user_profile: UserProfileIn
    pool_id: str
    config: Optional[LoopConfigIn] = None


class PendingItem(BaseModel):
    excerpt_id: str
    title: str
    audio_uri: Optional[str] = None


class ApiSessionView(BaseModel):
    session_id: str
    state: str
    iteration: int
    max_iterations: int
    batch_size: int
    pool_size: int
    annotations_count: int
    pending_batch: list[PendingItem]


class AnnotationIn(BaseModel):
    excerpt_id: str
    quadrant: str = Field(pattern="^Q[1-4]$")


class SubmitAnnotationsRequest(BaseModel):
    labels: list[AnnotationIn]


class Violation(BaseModel):
    code: str
    excerpt_ids: list[str]
    detail: str


class ViolationResponse(BaseModel):
    detail: str
    violations: list[Violation]


class PoolInfo(BaseModel):
    pool_id: str
    size: int
