"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    mode: str
    clock: float
    phase: str


class NoiseModel(BaseModel):
    bbox_jitter_px: float = 0.0
    miss_rate: float = Field(0.0, ge=0.0, le=1.0)
    confusion_rate: float = Field(0.0, ge=0.0, le=1.0)


class MessageLines(BaseModel):
    lines: list[str]


class MessageResponses(BaseModel):
    responses: list[str]


class SessionResetRequest(BaseModel):
    mode: str = "semiauto"
    scene_seed: int = 7
    classes: list[str] = ["ball"]
    noise: NoiseModel | None = None
    noise_seed: int = 0
    target: tuple[float, float] | None = None


class SessionStateResponse(BaseModel):
    mode: str
    clock: float
    phase: str
    menu: list[dict]
    highlighted: int
    held_object: int | None
    counted_commands: int
    picked: bool
    placed: bool
    trial_done: bool
    final_center: tuple[float, float] | None


class ExperimentRequest(BaseModel):
    mode: str = "semiauto"
    classes: list[str] | None = None  # None means the full ten-class set
    trials_per_class: int = Field(5, ge=1, le=50)
    seed: int = 0
    noise: NoiseModel | None = None


class TrialRecordModel(BaseModel):
    object_class: str
    mode: str
    picked: bool
    pickup_time: float
    placed: bool
    place_time: float
    n_commands: int
    seed: int
    pickup_xy: tuple[float, float]
    target_xy: tuple[float, float]
    final_center: tuple[float, float] | None


class ReportRowModel(BaseModel):
    object_class: str
    trials: int
    picked: float
    pickup_mean: float
    pickup_std: float
    placed: float
    place_mean: float
    place_std: float
    commands_mean: float


class ReportModel(BaseModel):
    mode: str
    rows: list[ReportRowModel]
    average: ReportRowModel
    text_table: str


class ExperimentResponse(BaseModel):
    records: list[TrialRecordModel]
    report: ReportModel


class ReportRequest(BaseModel):
    records: list[TrialRecordModel]
