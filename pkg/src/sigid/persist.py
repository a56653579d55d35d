"""JSON persistence with a versioned envelope and atomic whole-file writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import IoFailure, ParseError, SchemaVersionMismatch

SCHEMA_VERSION = 1
KINDS = ("gallery", "svm_model", "report", "run_config")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from None


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _kind_of(obj):
    from .config import RunConfig
    from .fusion import SvmModel
    from .identification import Gallery, Report

    for kind, cls in (("gallery", Gallery), ("svm_model", SvmModel),
                      ("report", Report), ("run_config", RunConfig)):
        if isinstance(obj, cls):
            return kind
    raise TypeError(f"cannot persist {type(obj).__name__}")


def _class_for(kind):
    from .config import RunConfig
    from .fusion import SvmModel
    from .identification import Gallery, Report

    return {"gallery": Gallery, "svm_model": SvmModel,
            "report": Report, "run_config": RunConfig}[kind]


def dumps(obj) -> str:
    """Canonical JSON text for ``obj``; equal objects give equal bytes."""
    kind = _kind_of(obj)
    doc = {"kind": kind, "schema_version": SCHEMA_VERSION, "data": obj.to_dict()}
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str, expect: str | None = None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object", line=1)
    for key in ("kind", "schema_version", "data"):
        if key not in doc:
            raise ParseError("missing envelope key", field=key)
    kind = doc["kind"]
    if kind not in KINDS:
        raise ParseError(f"unknown object kind {kind!r}", field="kind")
    if expect is not None and kind != expect:
        raise ParseError(f"expected a {expect}, found a {kind}", field="kind")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(kind, doc["schema_version"], SCHEMA_VERSION)
    try:
        return _class_for(kind).from_dict(doc["data"])
    except KeyError as exc:
        raise ParseError(f"{kind} is missing a field", field=str(exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{kind} has malformed content: {exc}", field="data") from None


def persist(obj, path) -> None:
    atomic_write_text(path, dumps(obj))


def load(path, expect: str | None = None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IoFailure(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror}") from None
    try:
        return loads(text, expect)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.detail}", line=exc.line, field=exc.field) from None
