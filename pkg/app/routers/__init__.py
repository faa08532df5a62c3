"""
Command routers. Each module owns a CommandRouter; app.main includes them all.
"""
import argparse
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Type

from pydantic import BaseModel


@dataclass
class Command:
    name: str
    config_model: Type[BaseModel]
    handler: Callable[[BaseModel], Optional[int]]
    help: str = ""


@dataclass
class CommandRouter:
    tags: List[str] = field(default_factory=list)
    commands: Dict[str, Command] = field(default_factory=dict)

    def command(self, name: str, config_model: Type[BaseModel], help: str = ""):
        """Register a handler; it returns the number of recorded errors (None = 0)."""
        def decorator(handler):
            self.commands[name] = Command(name, config_model, handler, help or (handler.__doc__ or "").strip())
            return handler
        return decorator


def flag_name(field_name: str) -> str:
    return "--" + field_name.replace("_", "-")


def add_command_parser(subparsers, command: Command) -> argparse.ArgumentParser:
    """One flag per config field, all optional here; the config model decides what is required."""
    parser = subparsers.add_parser(command.name, help=command.help.splitlines()[0] if command.help else None)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    for name, info in command.config_model.model_fields.items():
        parser.add_argument(flag_name(name), dest=name, default=None, help=info.description)
    parser.set_defaults(command=command)
    return parser
