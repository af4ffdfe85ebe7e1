"""Named command handlers with uniform error-to-exit-code mapping."""

from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from gross_tower.exceptions import GrossTowerError

logger = logging.getLogger(__name__)

UNKNOWN_COMMAND_EXIT = 2
CRASH_EXIT = 4


@dataclass
class CommandResult:
    """What a handler returned, or why it did not return."""

    success: bool
    data: Any = None
    error: Optional[str] = None
    exit_code: int = 0
    execution_time_ms: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass
class Command:
    name: str
    handler: Callable
    description: str = ""
    calls: int = 0
    failures: int = 0
    last_exit_code: Optional[int] = None

    def record(self, result: CommandResult) -> None:
        self.calls += 1
        self.failures += not result.success
        self.last_exit_code = result.exit_code


class CommandRegistry:
    """Command handlers by name.

    A handler takes (config, ctx, **arguments) and returns a JSON-ready
    dict. Decorated handlers stay callable and return a CommandResult.

    Usage:
        registry = CommandRegistry()

        @registry.command("classset", description="class sets per level")
        def cmd_classset(config, ctx):
            return {...}

        result = registry.execute("classset", config, ctx)
    """

    def __init__(self, metrics=None):
        self._commands: dict[str, Command] = {}
        self.metrics = metrics

    def command(self, name: str, description: str = "") -> Callable:
        def decorator(func: Callable) -> Callable:
            self._commands[name] = Command(name=name, handler=func, description=description)

            @functools.wraps(func)
            def wrapper(*args, **kwargs) -> CommandResult:
                return self.execute(name, *args, **kwargs)

            return wrapper

        return decorator

    def names(self) -> list[str]:
        return sorted(self._commands)

    def get_command(self, name: str) -> Optional[Command]:
        return self._commands.get(name)

    def execute(self, name: str, *args, **kwargs) -> CommandResult:
        """Run a handler; engine errors keep their exit code, anything else is a crash."""
        cmd = self._commands.get(name)
        if cmd is None:
            return CommandResult(success=False, error=f"unknown command {name!r}", exit_code=UNKNOWN_COMMAND_EXIT)
        start = time.perf_counter()
        try:
            result = CommandResult(success=True, data=cmd.handler(*args, **kwargs))
        except GrossTowerError as e:
            logger.warning("%s: %s", name, e)
            result = CommandResult(success=False, error=str(e), exit_code=e.exit_code, details=e.details)
        except Exception as e:
            logger.exception("%s crashed", name)
            result = CommandResult(success=False, error=f"{type(e).__name__}: {e}", exit_code=CRASH_EXIT)
        result.execution_time_ms = (time.perf_counter() - start) * 1000
        cmd.record(result)
        if self.metrics is not None:
            self.metrics.observe("command_ms", result.execution_time_ms, tags={"command": name})
            self.metrics.increment("exit_codes", tags={"code": result.exit_code})
        return result
