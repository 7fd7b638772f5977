"""Strict dataclass <-> dict conversion for JSON configs.

Unknown keys are rejected and every error names the offending field path,
so a typo in an experiment file fails loudly instead of silently using a
default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from typing import Any, Mapping

from .errors import ConfigError


def _coerce(tp: Any, value: Any, path: str) -> Any:
    if dataclasses.is_dataclass(tp):
        return parse_dataclass(tp, value, path)

    origin = typing.get_origin(tp)
    if origin is None:
        if tp is bool:
            if not isinstance(value, bool):
                raise ConfigError(path, f"expected bool, got {type(value).__name__}")
            return value
        if tp is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(path, f"expected int, got {type(value).__name__}")
            return value
        if tp is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(path, f"expected number, got {type(value).__name__}")
            return float(value)
        if tp is str:
            if not isinstance(value, str):
                raise ConfigError(path, f"expected string, got {type(value).__name__}")
            return value
        if tp is dict:
            if not isinstance(value, Mapping):
                raise ConfigError(path, f"expected object, got {type(value).__name__}")
            return dict(value)
        if tp is Any:
            return value
        raise ConfigError(path, f"unsupported config field type {tp!r}")

    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        last_error = None
        for arg in args:
            try:
                return _coerce(arg, value, path)
            except ConfigError as exc:
                last_error = exc
        raise last_error if last_error else ConfigError(path, "no matching union arm")

    if origin in (tuple, list):
        args = typing.get_args(tp)
        item_tp = args[0] if args else Any
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected array, got {type(value).__name__}")
        items = [_coerce(item_tp, v, f"{path}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items

    raise ConfigError(path, f"unsupported config field type {tp!r}")


def parse_dataclass(cls, data: Any, path: str = "") -> Any:
    """Build a dataclass instance from a mapping, rejecting unknown keys."""
    label = path or cls.__name__
    if not isinstance(data, Mapping):
        raise ConfigError(label, f"expected object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(label, f"unknown key(s): {', '.join(unknown)}")

    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name, f in fields.items():
        if name not in data:
            continue
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(hints[name], data[name], sub)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(label, str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(label, str(exc)) from exc


def dataclass_to_dict(obj: Any) -> dict:
    return dataclasses.asdict(obj)


def stable_hash(obj: Any) -> str:
    """Short content hash of a JSON-serializable structure."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2s(payload.encode("utf-8"), digest_size=8).hexdigest()
