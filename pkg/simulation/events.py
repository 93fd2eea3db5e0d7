from dataclasses import dataclass
from enum import Enum
from typing import Optional


class EventType(Enum):
    SWEEP_STARTED = "sweep_started"
    POINT_COMPLETED = "point_completed"
    POINT_FAILED = "point_failed"
    POINT_NUDGED = "point_nudged"
    SWEEP_FINISHED = "sweep_finished"
    TABLE_WRITTEN = "table_written"


@dataclass
class EventData:
    """Base class for event data."""
    pass


@dataclass
class SweepStartedData(EventData):
    experiment: str
    total: int


@dataclass
class PointEventData(EventData):
    index: int
    omega: float
    solved_omega: Optional[float] = None
    error: Optional[str] = None
    message: Optional[str] = None


@dataclass
class SweepFinishedData(EventData):
    experiment: str


@dataclass
class TableWrittenData(EventData):
    table: str
    path: str
    rows: int
