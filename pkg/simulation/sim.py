import logging
from typing import Optional

from tqdm import tqdm

from simulation.events import EventType, PointEventData, SweepFinishedData, SweepStartedData, TableWrittenData
from simulation.observers import EventManager

logger = logging.getLogger(__name__)


class SweepObserver:
    """Progress bar, log lines and counters for one command-line run."""

    def __init__(self, eventManager: EventManager, quiet: bool = False):
        self.eventManager = eventManager
        self.quiet = quiet
        self.progress: Optional[tqdm] = None
        self.completed = 0
        self.failed = 0
        self.nudged = 0
        self.written = []

        self.eventManager.subscribe(EventType.SWEEP_STARTED, self.__onSweepStarted)
        self.eventManager.subscribe(EventType.POINT_COMPLETED, self.__onPointCompleted)
        self.eventManager.subscribe(EventType.POINT_FAILED, self.__onPointFailed)
        self.eventManager.subscribe(EventType.POINT_NUDGED, self.__onPointNudged)
        self.eventManager.subscribe(EventType.SWEEP_FINISHED, self.__onSweepFinished)
        self.eventManager.subscribe(EventType.TABLE_WRITTEN, self.__onTableWritten)

    def __advance(self):
        if self.progress is not None:
            self.progress.update(1)

    def __onSweepStarted(self, data: SweepStartedData):
        logger.info("%s: %d points", data.experiment, data.total)
        if self.progress is not None:
            self.progress.close()
        self.progress = tqdm(total=data.total, desc=data.experiment, disable=self.quiet, leave=False)

    def __onPointCompleted(self, data: PointEventData):
        self.completed += 1
        self.__advance()

    def __onPointFailed(self, data: PointEventData):
        self.failed += 1
        logger.warning("point %d at omega=%r failed: %s: %s", data.index, data.omega, data.error, data.message)
        self.__advance()

    def __onPointNudged(self, data: PointEventData):
        self.nudged += 1
        logger.info("point %d moved off a pole: omega %r -> %r", data.index, data.omega, data.solved_omega)

    def __onSweepFinished(self, data: SweepFinishedData):
        if self.progress is not None:
            self.progress.close()
            self.progress = None
        logger.info("%s finished: %d completed, %d failed, %d nudged",
                    data.experiment, self.completed, self.failed, self.nudged)

    def __onTableWritten(self, data: TableWrittenData):
        self.written.append(data.path)
        logger.info("wrote %s (%d rows) to %s", data.table, data.rows, data.path)
