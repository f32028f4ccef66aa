"""Experiment configuration: flat key = value sections with documented defaults.

A config file uses configparser syntax with the sections [data], [classifier],
[policy], [eval], and [output]; every key defaults to the corresponding
dataclass field, and command-line flags override file values. Unknown keys are
rejected rather than ignored.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .classifiers import ClassifierConfig
from .errors import ConfigError
from .phantom import GeneratorConfig
from .policy import PolicyConfig


@dataclass
class EvalConfig:
    """Evaluation protocol: seed count, inference mode, optional stop threshold."""

    seeds: int = 5
    seed: int = 1
    mode: str = "sample"
    tau: float | None = None

    def seed_list(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]


@dataclass
class ExperimentConfig:
    """All stage configs of one experiment plus the output directory."""

    data: GeneratorConfig = field(default_factory=GeneratorConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "."


_SECTIONS = {
    "data": GeneratorConfig,
    "classifier": ClassifierConfig,
    "policy": PolicyConfig,
    "eval": EvalConfig,
}


def _coerce(name: str, raw: str, annotation):
    text = raw.strip()
    if annotation in (float, "float") or annotation in ("float | None",):
        if text.lower() in ("none", ""):
            return None
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from exc
    if annotation in (int, "int"):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from exc
    return text


def load_experiment_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional file plus section overrides.

    `overrides` maps "section.key" to values that win over the file.
    """
    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    values["output"] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            if section not in values:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                values[section][key] = raw
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in values:
            raise ConfigError(f"unknown config section {section!r}")
        values[section][key] = value

    built = {}
    for section, cls in _SECTIONS.items():
        allowed = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values[section].items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kwargs[key] = _coerce(f"[{section}] {key}", str(raw), allowed[key])
        try:
            built[section] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc

    out_dir = str(values["output"].get("dir", "."))
    unknown = set(values["output"]) - {"dir"}
    if unknown:
        raise ConfigError(f"unknown key(s) in section [output]: {sorted(unknown)}")
    cfg = ExperimentConfig(
        data=built["data"],
        classifier=built["classifier"],
        policy=built["policy"],
        eval=built["eval"],
        out_dir=out_dir,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.policy.variant not in _variant_names():
        raise ConfigError(
            f"unknown policy variant {cfg.policy.variant!r}; valid: {', '.join(_variant_names())}"
        )
    if cfg.policy.gating not in ("truth", "prediction"):
        raise ConfigError("policy gating must be 'truth' or 'prediction'")
    if cfg.policy.reward_mode not in ("immediate", "to_go"):
        raise ConfigError("policy reward_mode must be 'immediate' or 'to_go'")
    if cfg.policy.candidate_mode not in ("topq", "sample"):
        raise ConfigError("policy candidate_mode must be 'topq' or 'sample'")
    if cfg.eval.mode not in ("sample", "argmax"):
        raise ConfigError("eval mode must be 'sample' or 'argmax'")
    if cfg.policy.initial_lines + cfg.policy.steps > cfg.data.cols:
        raise ConfigError("initial_lines + steps exceeds the column count")
    if cfg.eval.seeds < 1:
        raise ConfigError("eval seeds must be at least 1")


def _variant_names() -> tuple[str, ...]:
    from .policy import VARIANTS

    return VARIANTS
