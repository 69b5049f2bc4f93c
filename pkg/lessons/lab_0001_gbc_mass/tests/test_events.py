"""
Tests for the run-event bus.
"""

import logging

import pytest

from ..gbc_mass import events
from ..gbc_mass.events import EventBus, EventRecorder


class TestEventBusBasics:
    """Test subscription bookkeeping."""

    def test_initialization(self):
        """Test that a new bus starts empty."""
        assert EventBus().count_subscribers() == 0

    def test_subscribe_returns_id(self):
        """Test that subscribe returns a non-empty ID."""
        sub_id = EventBus().subscribe(events.FLUX_RADIUS, lambda e, p: None)
        assert isinstance(sub_id, str) and sub_id

    def test_count_by_event(self):
        """Test counting subscribers per event."""
        bus = EventBus()
        bus.subscribe(events.FLUX_RADIUS, lambda e, p: None)
        bus.subscribe(events.FLUX_RADIUS, lambda e, p: None)
        bus.subscribe(events.BULK_SHELL, lambda e, p: None)
        assert bus.count_subscribers(events.FLUX_RADIUS) == 2
        assert bus.count_subscribers(events.IDENTITY_CHECKED) == 0
        assert bus.count_subscribers() == 3

    def test_unsubscribe(self):
        """Test that unsubscribing removes exactly one handler."""
        bus = EventBus()
        sub_id = bus.subscribe(events.BULK_SHELL, lambda e, p: None)
        assert bus.unsubscribe(sub_id)
        assert not bus.unsubscribe(sub_id)
        assert bus.count_subscribers() == 0

    def test_clear(self):
        """Test that clear removes every subscription."""
        bus = EventBus()
        bus.subscribe(events.ALL_EVENTS, lambda e, p: None)
        bus.clear()
        assert bus.count_subscribers() == 0


class TestEventBusPublish:
    """Test delivery."""

    def test_handlers_called_in_order(self):
        """Test synchronous delivery in subscription order."""
        bus = EventBus()
        calls = []
        bus.subscribe(events.FLUX_RADIUS, lambda e, p: calls.append("first"))
        bus.subscribe(events.FLUX_RADIUS, lambda e, p: calls.append("second"))
        assert bus.publish(events.FLUX_RADIUS, {"rho": 1.0}) == 2
        assert calls == ["first", "second"]

    def test_wildcard_receives_everything(self):
        """Test that "*" subscribers see every event."""
        bus = EventBus()
        recorder = EventRecorder(bus)
        bus.publish(events.FLUX_RADIUS, {"rho": 1.0})
        bus.publish(events.BULK_SHELL, {"value": 0.5})
        assert recorder.names() == [events.FLUX_RADIUS, events.BULK_SHELL]
        assert recorder.payloads(events.BULK_SHELL) == [{"value": 0.5}]

    def test_payload_is_copied(self):
        """Test that handlers get their own copy of the payload."""
        bus = EventBus()
        recorder = EventRecorder(bus)
        payload = {"rho": 1.0}
        bus.publish(events.FLUX_RADIUS, payload)
        payload["rho"] = 2.0
        assert recorder.payloads(events.FLUX_RADIUS) == [{"rho": 1.0}]

    def test_publish_helper_without_bus(self):
        """Test that the helper is a no-op without a bus."""
        events.publish(None, events.FLUX_RADIUS, rho=1.0)

    def test_publish_helper_with_bus(self):
        """Test that the helper forwards keyword payloads."""
        bus = EventBus()
        recorder = EventRecorder(bus)
        events.publish(bus, events.IDENTITY_CHECKED, name="trace", passed=True)
        assert recorder.payloads(events.IDENTITY_CHECKED) == [
            {"name": "trace", "passed": True}
        ]

    def test_log_event(self, caplog):
        """Test that the logging handler records the event name."""
        with caplog.at_level(logging.INFO):
            events.log_event(events.BULK_SHELL, {"value": 1.0})
        assert events.BULK_SHELL in caplog.text


class TestEventBusValidation:
    """Test input assertions."""

    def test_unknown_event_subscription(self):
        """Test that unknown event names are rejected."""
        with pytest.raises(AssertionError, match="Unknown run event"):
            EventBus().subscribe("order.created", lambda e, p: None)

    def test_unknown_event_publish(self):
        """Test that publishing an unknown event is rejected."""
        with pytest.raises(AssertionError):
            EventBus().publish("flux.unknown")

    def test_handler_must_be_callable(self):
        """Test that handlers must be callable."""
        with pytest.raises(AssertionError, match="callable"):
            EventBus().subscribe(events.FLUX_RADIUS, "not callable")

    def test_subscription_id_must_be_string(self):
        """Test that unsubscribe checks its argument."""
        with pytest.raises(AssertionError):
            EventBus().unsubscribe(123)
