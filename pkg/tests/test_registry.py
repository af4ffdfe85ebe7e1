"""Tests for the command registry module."""

from gross_tower.exceptions import InvalidInputError, NonexistenceError
from gross_tower.metrics import MetricsCollector
from gross_tower.registry import CommandRegistry


def make_registry():
    registry = CommandRegistry(metrics=MetricsCollector())

    @registry.command("ok", description="always works")
    def ok(x, *, scale=1):
        return {"value": x * scale}

    @registry.command("bad_input")
    def bad_input():
        raise InvalidInputError("N_minus=15 has even parity", details={"N_minus": 15})

    @registry.command("missing")
    def missing():
        raise NonexistenceError("no eigensystem")

    @registry.command("crash")
    def crash():
        raise ZeroDivisionError("division by zero")

    return registry, ok


def test_decorated_handler_returns_result():
    registry, ok = make_registry()
    result = ok(3, scale=2)

    assert result.success
    assert result.data == {"value": 6}
    assert result.exit_code == 0
    assert result.execution_time_ms >= 0


def test_engine_errors_keep_exit_codes():
    registry, _ = make_registry()

    bad = registry.execute("bad_input")
    assert not bad.success
    assert bad.exit_code == 2
    assert bad.details == {"N_minus": 15}
    assert registry.execute("missing").exit_code == 3


def test_crash_and_unknown_command():
    registry, _ = make_registry()

    crashed = registry.execute("crash")
    assert crashed.exit_code == 4
    assert crashed.error.startswith("ZeroDivisionError")
    assert registry.execute("nope").exit_code == 2


def test_bookkeeping_and_metrics():
    registry, ok = make_registry()
    ok(1)
    registry.execute("crash")

    assert registry.names() == ["bad_input", "crash", "missing", "ok"]
    assert registry.get_command("ok").calls == 1
    assert registry.get_command("ok").description == "always works"
    assert registry.get_command("crash").failures == 1
    assert registry.get_command("crash").last_exit_code == 4
    assert registry.metrics.counter("exit_codes", tags={"code": 4}) == 1
    assert registry.metrics.stats("command_ms", tags={"command": "ok"})["count"] == 1
