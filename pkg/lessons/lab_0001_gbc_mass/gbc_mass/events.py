"""
Run-event bus

Mass and identity drivers publish progress events (one flux radius done,
one bulk shell integrated, one identity checked) without knowing who
listens. The CLI subscribes a logging handler and a collector that keeps
the events for the JSON report.

Handlers are called synchronously, in subscription order.
"""

import logging
from collections.abc import Callable
from typing import Any
from uuid import uuid4

logger = logging.getLogger(__name__)

FLUX_RADIUS = "flux.radius"
FLUX_EXTRAPOLATED = "flux.extrapolated"
BULK_SHELL = "bulk.shell"
IDENTITY_CHECKED = "identity.checked"

KNOWN_EVENTS = frozenset(
    {FLUX_RADIUS, FLUX_EXTRAPOLATED, BULK_SHELL, IDENTITY_CHECKED}
)
ALL_EVENTS = "*"

Handler = Callable[[str, dict[str, Any]], None]


class EventBus:
    """
    A synchronous publish/subscribe bus for run events.

    Subscribing to ``"*"`` receives every event.

    Examples:
        >>> bus = EventBus()
        >>> seen = []
        >>> sub_id = bus.subscribe(FLUX_RADIUS, lambda e, p: seen.append(p))
        >>> bus.publish(FLUX_RADIUS, {"rho": 10.0, "flux": 0.9})
        1
        >>> seen
        [{'rho': 10.0, 'flux': 0.9}]
    """

    def __init__(self):
        """Initialize an empty event bus."""
        self._subscribers: dict[str, dict[str, Handler]] = {}

    def subscribe(self, event: str, handler: Handler) -> str:
        """
        Subscribe a handler to an event.

        Args:
            event: A known event name or ``"*"``
            handler: Callable accepting (event, payload)

        Returns:
            A subscription ID for ``unsubscribe``

        Raises:
            AssertionError: If the event is unknown or handler not callable
        """
        assert isinstance(event, str), "Event must be a string"
        assert (
            event in KNOWN_EVENTS or event == ALL_EVENTS
        ), f"Unknown run event {event!r}"
        assert callable(handler), "Handler must be callable"

        sub_id = str(uuid4())
        self._subscribers.setdefault(event, {})[sub_id] = handler

        assert sub_id in self._subscribers[event], "Handler must be registered"
        return sub_id

    def unsubscribe(self, subscription_id: str) -> bool:
        """
        Remove a handler by subscription ID.

        Returns:
            True if a handler was removed, False if the ID is unknown
        """
        assert isinstance(
            subscription_id, str
        ), "Subscription ID must be a string"

        for event, handlers in self._subscribers.items():
            if subscription_id in handlers:
                del handlers[subscription_id]
                if not handlers:
                    del self._subscribers[event]
                return True
        return False

    def publish(self, event: str, payload: dict[str, Any] | None = None) -> int:
        """
        Deliver an event to its subscribers and to wildcard subscribers.

        Args:
            event: A known event name
            payload: Event data

        Returns:
            The number of handlers called
        """
        assert event in KNOWN_EVENTS, f"Unknown run event {event!r}"
        payload = dict(payload or {})

        handlers = list(self._subscribers.get(event, {}).values())
        handlers += list(self._subscribers.get(ALL_EVENTS, {}).values())
        for handler in handlers:
            handler(event, payload)
        return len(handlers)

    def clear(self) -> None:
        """Remove all subscriptions."""
        self._subscribers.clear()
        assert self.count_subscribers() == 0, "Count must be zero after clear"

    def count_subscribers(self, event: str | None = None) -> int:
        """
        Count subscribers for one event, or in total when event is None.
        """
        if event is not None:
            return len(self._subscribers.get(event, {}))
        return sum(len(h) for h in self._subscribers.values())


class EventRecorder:
    """
    Collects every event published on a bus.

    Examples:
        >>> bus = EventBus()
        >>> recorder = EventRecorder(bus)
        >>> bus.publish(IDENTITY_CHECKED, {"name": "trace", "passed": True})
        1
        >>> recorder.names()
        ['identity.checked']
    """

    def __init__(self, bus: EventBus):
        self.events: list[tuple[str, dict[str, Any]]] = []
        self.subscription_id = bus.subscribe(ALL_EVENTS, self._record)

    def _record(self, event: str, payload: dict[str, Any]) -> None:
        self.events.append((event, payload))

    def names(self) -> list[str]:
        return [name for name, _ in self.events]

    def payloads(self, event: str) -> list[dict[str, Any]]:
        return [p for name, p in self.events if name == event]


def log_event(event: str, payload: dict[str, Any]) -> None:
    """Handler that forwards run events to the module logger."""
    logger.info("%s %s", event, payload)


def publish(bus: EventBus | None, event: str, **payload: Any) -> None:
    """Publish on ``bus`` if one is given; drivers accept an optional bus."""
    if bus is not None:
        bus.publish(event, payload)
