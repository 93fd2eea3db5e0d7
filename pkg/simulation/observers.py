from threading import Lock
from typing import Callable

from simulation.events import EventData, EventType


class EventManager:
    """Publish/subscribe hub; sweep workers notify from their own threads."""

    def __init__(self):
        self._observers = {}
        self._lock = Lock()

    def subscribe(self, eventType: EventType, handler: Callable[[EventData], None]):
        with self._lock:
            self._observers.setdefault(eventType, []).append(handler)

    def unsubscribe(self, handler: Callable[[EventData], None]):
        with self._lock:
            for observers in self._observers.values():
                if handler in observers:
                    observers.remove(handler)

    def notify(self, eventType: EventType, data: EventData):
        with self._lock:
            observers = list(self._observers.get(eventType, []))
        # handlers run unlocked; they may re-enter the manager
        for observer in observers:
            observer(data)
