"""Run configuration: every tunable of the pipeline in one serializable object."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import IoFailure, ParseError
from .features import FeatureConfig
from .fusion import SvmConfig
from .imaging import PreprocessConfig
from .matchers import MatcherConfig

CONFIG_ENV = "SIGID_CONFIG"


@dataclass(frozen=True)
class EvalConfig:
    n_enroll: int = 6

    def validate(self):
        if self.n_enroll < 1:
            raise ValueError("n_enroll must be >= 1")


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "features": FeatureConfig,
    "matcher": MatcherConfig,
    "svm": SvmConfig,
    "evaluation": EvalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    matcher: MatcherConfig = field(default_factory=MatcherConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def validate(self):
        for name in _SECTIONS:
            try:
                getattr(self, name).validate()
            except ValueError as exc:
                raise ValueError(f"{name}: {exc}") from None
        return self

    def to_dict(self):
        d = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        w = d["matcher"]["weights"]
        d["matcher"]["weights"] = None if w is None else list(w)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(_SECTIONS)
        if unknown:
            raise ParseError("unknown config section", field=sorted(unknown)[0])
        parts = {}
        for name, section_cls in _SECTIONS.items():
            values = dict(d.get(name, {}))
            allowed = {f.name for f in fields(section_cls)}
            bad = set(values) - allowed
            if bad:
                raise ParseError("unknown config key", field=f"{name}.{sorted(bad)[0]}")
            if name == "matcher" and values.get("weights") is not None:
                values["weights"] = tuple(values["weights"])
            parts[name] = section_cls(**values)
        return cls(**parts)

    def merged(self, overrides: dict):
        """Return a copy with ``{"section": {"key": value}}`` applied on top."""
        base = self.to_dict()
        for section, values in overrides.items():
            base.setdefault(section, {}).update(values)
        return RunConfig.from_dict(base)

    def with_svm(self, **kw):
        return replace(self, svm=replace(self.svm, **kw))


def load_config(path=None) -> RunConfig:
    """Defaults, overlaid by ``path`` or else the file named in ``$SIGID_CONFIG``.

    Accepts either a bare config mapping or a persisted run_config envelope.
    """
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path}: {exc.msg}", line=exc.lineno) from None
    if isinstance(d, dict) and d.get("kind") == "run_config":
        from .persist import loads

        return loads(text, expect="run_config").validate()
    if not isinstance(d, dict):
        raise ParseError(f"config {path} must be a JSON object", line=1)
    return RunConfig().merged(d).validate()
