"""Application configuration: one YAML file, validated on load.

Secrets never live in the file; the API key comes from the environment
(see :data:`cogforge.gateway.API_KEY_ENV`). Command-line flags override file
values; the file overrides built-in defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import urlparse

import yaml

from .gateway import ConfigError, Endpoint, ModelRole, SamplingParams
from .pipeline import PipelineConfig
from .records import BetaSchedule


@dataclass
class AppConfig:
    endpoints: dict[ModelRole, Endpoint] = field(default_factory=dict)
    sampling: SamplingParams = SamplingParams()
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    schedule: BetaSchedule = BetaSchedule()
    templates_dir: str | None = None

    def validate(self) -> list[str]:
        violations = []
        violations.extend(self.sampling.validate())
        violations.extend(self.pipeline.validate())
        violations.extend(self.schedule.validate())
        for role, endpoint in self.endpoints.items():
            parsed = urlparse(endpoint.url)
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                violations.append(f"endpoints.{role.value}.url: not a valid http(s) URL")
            if not endpoint.model:
                violations.append(f"endpoints.{role.value}.model: empty")
        return violations


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def load_config(path: str | None) -> AppConfig:
    """Build an AppConfig from a YAML file (or pure defaults when path is None)."""
    if path is None:
        config = AppConfig()
    else:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        try:
            config = _from_raw(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    violations = config.validate()
    if violations:
        raise ConfigError("; ".join(violations))
    return config


def _from_raw(raw: dict) -> AppConfig:
    endpoints = {}
    for role_name, entry in _section(raw, "endpoints").items():
        role = ModelRole(role_name)
        endpoints[role] = Endpoint(url=str(entry["url"]), model=str(entry["model"]))

    sampling_raw = _section(raw, "sampling")
    sampling = SamplingParams(
        temperature=float(sampling_raw.get("temperature", 0.7)),
        top_p=float(sampling_raw.get("top_p", 0.9)),
        top_k=int(sampling_raw.get("top_k", 50)),
        max_tokens=int(sampling_raw.get("max_tokens", 1024)),
    )

    pipeline_raw = _section(raw, "pipeline")
    pipeline = PipelineConfig(
        retry_cap=int(pipeline_raw.get("retry_cap", 3)),
        votes=int(pipeline_raw.get("votes", 3)),
        max_concurrency=int(pipeline_raw.get("max_concurrency", 4)),
        verifier_role=ModelRole(pipeline_raw.get("verifier_role", "large")),
        corruption_gate=bool(pipeline_raw.get("corruption_gate", False)),
        checkpoint_path=pipeline_raw.get("checkpoint_path"),
    )

    schedule_raw = _section(raw, "schedule")
    schedule = BetaSchedule(
        beta_small=float(schedule_raw.get("beta_small", 0.1)),
        beta_medium=float(schedule_raw.get("beta_medium", 0.2)),
        beta_large=float(schedule_raw.get("beta_large", 0.5)),
        alpha=float(schedule_raw.get("alpha", 0.6)),
        m0=float(schedule_raw.get("m0", 0.0)),
    )

    templates_dir = raw.get("templates_dir")
    return AppConfig(
        endpoints=endpoints,
        sampling=sampling,
        pipeline=pipeline,
        schedule=schedule,
        templates_dir=templates_dir,
    )


def load_schedule(path: str) -> BetaSchedule:
    """Read a beta schedule from a YAML file holding just the schedule keys."""
    with open(path, encoding="utf-8") as handle:
        raw = yaml.safe_load(handle) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: schedule file must be a mapping")
    schedule = BetaSchedule(
        beta_small=float(raw.get("beta_small", 0.1)),
        beta_medium=float(raw.get("beta_medium", 0.2)),
        beta_large=float(raw.get("beta_large", 0.5)),
        alpha=float(raw.get("alpha", 0.6)),
        m0=float(raw.get("m0", 0.0)),
    )
    violations = schedule.validate()
    if violations:
        raise ConfigError(f"{path}: {'; '.join(violations)}")
    return schedule
