"""
============================================================================
SGG-HT - SETTINGS CONFIGURATION
============================================================================
Run configuration management using Pydantic for validation.

Values resolve, lowest precedence first, from field defaults, the
environment (``SGHT_`` prefix, ``__`` between nested keys, optional
``.env`` file), a TOML config file, and finally ``key=value`` overrides
given on the command line.
============================================================================
"""

from __future__ import annotations

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from config.constants import PredicateEmbedding, ScheduleKind, ScmVariant, Weighting
from dataset.models import GenConfig
from exceptions import ConfigurationError


# ============================================================================
# SECTION MODELS
# ============================================================================

class _Section(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DataSection(_Section):
    """Dataset source: generated from ``gen`` or read from ``dataset_path``."""

    gen: GenConfig = Field(default_factory=GenConfig)
    dataset_path: Optional[Path] = Field(default=None, description="Existing SGDS file")


class ModelSection(_Section):
    """Predicate classifier and pair-feature construction."""

    hidden_dim: int = Field(default=64, ge=1, description="Context MLP width D_h")
    freq_bias: bool = Field(default=True, description="Add frequency bias during training")
    freq_smoothing: float = Field(default=1e-3, description="Laplace smoothing of the bias table")
    freq_include_background: bool = Field(default=True, description="Count unannotated pairs as background")
    neg_ratio: int = Field(default=3, ge=0, description="Negatives per annotated pair")
    max_pairs: int = Field(default=64, ge=1, description="Cap on training pairs per scene")
    embedding_seed: int = Field(default=0, description="Seed of the frozen embedding tables")
    embedding_path: Optional[Path] = Field(default=None, description="Plain-text word vectors")
    init_scale: float = Field(default=1.0, gt=0, description="Multiplier on Xavier init bounds")

    @field_validator("freq_smoothing")
    @classmethod
    def validate_smoothing(cls, v: float) -> float:
        """Smoothing must be positive."""
        if v <= 0:
            raise ValueError("freq_smoothing must be positive")
        return v

    @field_validator("embedding_path")
    @classmethod
    def validate_embedding_path(cls, v: Optional[Path]) -> Optional[Path]:
        """Referenced embedding files must exist."""
        if v is not None and not Path(v).is_file():
            raise ValueError(f"embedding file not found: {v}")
        return v


class CrmSection(_Section):
    """Curriculum re-weighting."""

    enabled: bool = True
    schedule: ScheduleKind = ScheduleKind.LINEAR
    alpha: float = Field(default=0.25, ge=0.0, le=1.0)
    nu: float = Field(default=0.1, gt=0.0, lt=1.0)
    beta: float = Field(default=0.9999, ge=0.0, lt=1.0)
    rho: float = Field(default=0.7, ge=0.0, le=1.0)
    weighting: Weighting = Weighting.CLASS_BALANCED


class ScmSection(_Section):
    """Semantic context module."""

    enabled: bool = True
    variant: ScmVariant = ScmVariant.GLOBAL
    d_model: int = Field(default=64, ge=2)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    ff_mult: int = Field(default=2, ge=1)
    predicate_embedding: PredicateEmbedding = PredicateEmbedding.SOFT

    @model_validator(mode="after")
    def validate_heads(self) -> "ScmSection":
        """d_model must split evenly across heads."""
        if self.d_model % self.heads != 0:
            raise ValueError(
                f"d_model={self.d_model} is not divisible by heads={self.heads}"
            )
        return self


class OptimSection(_Section):
    """SGD optimizer and loop cadence."""

    lr: float = Field(default=1.2e-2)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    clip_norm: float = Field(default=5.0, gt=0.0)
    batch_size: int = Field(default=12, ge=1)
    total_iters: int = Field(default=3000, ge=1)
    eval_interval: int = Field(default=500, ge=1)
    log_interval: int = Field(default=50, ge=1)

    @field_validator("lr")
    @classmethod
    def validate_lr(cls, v: float) -> float:
        """Learning rate must be positive."""
        if v <= 0:
            raise ValueError("lr must be positive")
        return v


class EvalSection(_Section):
    """Evaluation protocol switches."""

    graph_constraint: bool = True
    freq_bias: bool = Field(default=True, description="Add frequency bias at inference")
    report_top: int = Field(default=5, ge=1, description="Triplets per scene in the text report")


class AblateSection(_Section):
    """Ablation grids."""

    seeds: int = Field(default=5, ge=1)
    grids: List[str] = Field(default_factory=lambda: ["components", "schedules", "variants"])
    workers: int = Field(default=1, ge=1)

    @field_validator("grids")
    @classmethod
    def validate_grids(cls, v: List[str]) -> List[str]:
        """Only known grids may be requested."""
        known = {"components", "schedules", "variants"}
        unknown = [g for g in v if g not in known]
        if unknown:
            raise ValueError(f"unknown ablation grids {unknown}; known: {sorted(known)}")
        return v


class LoggingSection(_Section):
    """Log sinks."""

    level: str = "INFO"
    to_file: bool = True
    colorize: bool = True

    @field_validator("level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]
        v = v.upper()
        if v not in valid_levels:
            raise ValueError(f"Invalid log level. Must be one of: {valid_levels}")
        return v


# ============================================================================
# RUN CONFIG
# ============================================================================

class RunConfig(BaseSettings):
    """
    Complete configuration of one run.
    Every key can be set through ``SGHT_<SECTION>__<KEY>`` environment
    variables, a TOML file, or command-line overrides.
    """

    model_config = SettingsConfigDict(
        env_prefix="SGHT_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    seed: int = Field(default=0, description="Run seed (initialization and batch order)")
    output_dir: Path = Field(default=Path("runs/default"), description="Run directory")

    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    crm: CrmSection = Field(default_factory=CrmSection)
    scm: ScmSection = Field(default_factory=ScmSection)
    optim: OptimSection = Field(default_factory=OptimSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    ablate: AblateSection = Field(default_factory=AblateSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)

    # ========================================================================
    # DERIVED VALUES
    # ========================================================================

    @property
    def num_classes(self) -> int:
        """Predicate classes including background (R+1)."""
        return self.data.gen.num_predicate_classes + 1

    def digest(self) -> str:
        """
        SHA-256 over everything that fixes parameter shapes and logits.

        Returns:
            Hex digest
        """
        payload = {
            "model": self.model.model_dump(mode="json", exclude={"embedding_path"}),
            "scm": self.scm.model_dump(mode="json"),
            "num_object_classes": self.data.gen.num_object_classes,
            "num_predicate_classes": self.data.gen.num_predicate_classes,
            "visual_dim": self.data.gen.visual_dim,
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolved_json(self) -> str:
        """Fully resolved config as pretty JSON (for --print-config)."""
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def with_overrides(self, **sections: Dict[str, Any]) -> "RunConfig":
        """
        Copy with per-section updates, re-validated.

        Args:
            **sections: section name -> dict of key updates; top-level
                scalar keys (seed, output_dir) are passed directly

        Returns:
            New RunConfig
        """
        data = self.model_dump(mode="python")
        for name, update in sections.items():
            if isinstance(update, dict):
                data[name] = {**data[name], **update}
            else:
                data[name] = update
        return build_config(data)


# ============================================================================
# LOADING
# ============================================================================

def parse_override(item: str) -> tuple[List[str], Any]:
    """
    Parse one ``key=value`` override.

    Values are read as TOML scalars (``true``, ``0.5``, ``"x"``,
    ``[1, 2]``); anything else is kept as a bare string.

    Args:
        item: Override text

    Returns:
        Dotted key path and parsed value
    """
    if "=" not in item:
        raise ConfigurationError(f"override must be key=value, got {item!r}", config_key=item)
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"empty override key in {item!r}", config_key=item)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def _set_dotted(target: Dict[str, Any], path: Sequence[str], value: Any) -> None:
    node = target
    for part in path[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(
                f"cannot set {'.'.join(path)}: {part} is not a section",
                config_key=".".join(path),
            )
        node = child
    node[path[-1]] = value


def build_config(data: Dict[str, Any]) -> RunConfig:
    """
    Validate a raw mapping into a RunConfig.

    Args:
        data: Nested mapping of sections

    Returns:
        RunConfig

    Raises:
        ConfigurationError: on unknown keys or invalid values
    """
    unknown = sorted(set(data) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {unknown}", config_key=unknown[0])
    try:
        return RunConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"])
        raise ConfigurationError(
            f"invalid configuration at {key}: {first['msg']}",
            config_key=key,
            cause=e,
        ) from e


def load_config(
    path: Optional[Path] = None,
    seed: Optional[int] = None,
    output_dir: Optional[Path] = None,
    overrides: Sequence[str] = (),
) -> RunConfig:
    """
    Resolve the run configuration.

    Args:
        path: TOML config file
        seed: ``--seed`` value
        output_dir: ``--out`` value
        overrides: ``--override`` items

    Returns:
        Validated RunConfig
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}", config_key="--config")
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"cannot parse {path}: {e}", config_key="--config", cause=e) from e

    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = str(output_dir)
    for item in overrides:
        key_path, value = parse_override(item)
        _set_dotted(data, key_path, value)

    return build_config(data)


# ============================================================================
# END OF SETTINGS MODULE
# ============================================================================
