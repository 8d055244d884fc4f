import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.errors import ParameterError


class Settings(BaseSettings):
    """
    Toolkit settings.

    Values come from, in increasing priority: the defaults below, a
    KEY=value config file, environment variables, and keyword arguments
    (the command-line flags).
    """
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application Settings
    APP_NAME: str = Field(
        default="Agent Trajectory Cycle Detection",
        description="Application name"
    )
    APP_VERSION: str = Field(
        default="1.0.0",
        description="Application version"
    )
    LOG_LEVEL: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)"
    )
    WORKERS: int = Field(
        default=4,
        ge=1,
        description="Worker threads used to process trajectories concurrently"
    )

    # Detector Settings
    DETECTION_METHOD: str = Field(
        default="hybrid",
        description="Detector run by `detect` (cddag, cdcs, cdsa, hybrid)"
    )
    CDDAG_M: float = Field(
        default=1.4,
        description="CDDAG edge-weight multiplier m"
    )
    CDCS_K: float = Field(
        default=0.5,
        description="CDCS subsequence-frequency multiplier k"
    )
    CDSA_PHI: float = Field(
        default=0.85,
        description="CDSA sibling cosine threshold"
    )
    HYBRID_K: float = Field(
        default=0.5,
        description="Hybrid gate multiplier k"
    )
    HYBRID_PHI: float = Field(
        default=0.83,
        description="Hybrid confirmation cosine threshold"
    )
    MAX_SUBSEQUENCE_LEN: int = Field(
        default=20,
        ge=3,
        description="Longest op window counted by CDCS"
    )
    HYBRID_SCOPE: str = Field(
        default="full",
        description="Sibling pairs examined by hybrid confirmation (full, flagged_only)"
    )

    # Embedding Provider Settings
    EMBEDDING_PROVIDER: str = Field(
        default="builtin",
        description="Embedding provider (builtin, remote)"
    )
    EMBEDDING_DIMENSION: int = Field(
        default=256,
        ge=16,
        description="Embedding dimension; remote responses of another size are rejected"
    )
    EMBEDDING_ENDPOINT: str = Field(
        default="",
        description="URL of the remote embedding endpoint"
    )
    EMBEDDING_TIMEOUT_SECONDS: float = Field(
        default=5.0,
        gt=0,
        description="Timeout per request to the remote endpoint"
    )
    EMBEDDING_MAX_RETRIES: int = Field(
        default=2,
        ge=0,
        description="Retries per batch after the first failed attempt"
    )

    # Circuit Breaker Settings
    CIRCUIT_BREAKER_FAILURE_THRESHOLD: int = Field(
        default=3,
        ge=1,
        description="Consecutive failed batches before the endpoint circuit opens"
    )
    CIRCUIT_BREAKER_TIMEOUT_SECONDS: int = Field(
        default=30,
        ge=0,
        description="Cooldown period while the circuit is open in seconds"
    )

    # Embedding Cache (Redis)
    EMBEDDING_CACHE_URL: str = Field(
        default="",
        description="Redis URL for caching remote vectors (empty disables the cache)"
    )
    EMBEDDING_CACHE_TTL_SECONDS: int = Field(
        default=86400,
        gt=0,
        description="Cached vector time-to-live in seconds"
    )

    # Generator Settings
    GENERATOR_SEED: int = Field(
        default=42,
        ge=0,
        lt=2 ** 64,
        description="64-bit seed of the corpus generator"
    )
    GENERATOR_PER_CLASS: int = Field(
        default=100,
        ge=0,
        description="Trajectories generated per ground-truth class"
    )
    GENERATOR_COUNTS: str = Field(
        default="",
        description="Per-class counts such as productive=10,silent_cycle=5; overrides GENERATOR_PER_CLASS"
    )
    GENERATOR_NOISE: float = Field(
        default=0.02,
        description="Character perturbation rate of repeated outputs"
    )
    GENERATOR_DEPTH: int = Field(
        default=4,
        description="Upper bound on span tree depth; templates build at most four levels"
    )
    GENERATOR_REPEAT_MIN: int = Field(
        default=3,
        description="Fewest repetitions in cyclic classes"
    )
    GENERATOR_REPEAT_MAX: int = Field(
        default=6,
        description="Most repetitions in cyclic classes"
    )
    GENERATOR_HARD_TIMESERIES_RATIO: float = Field(
        default=0.4,
        ge=0,
        le=1,
        description="Share of redundant_step trajectories built as the hard_timeseries variant"
    )

    @field_validator('LOG_LEVEL')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level is one of the allowed values."""
        allowed_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        v_upper = v.upper()
        if v_upper not in allowed_levels:
            raise ValueError(f"LOG_LEVEL must be one of {allowed_levels}")
        return v_upper

    @field_validator('DETECTION_METHOD', 'HYBRID_SCOPE', 'EMBEDDING_PROVIDER')
    @classmethod
    def validate_choice(cls, v: str, info) -> str:
        choices = {
            'DETECTION_METHOD': ['cddag', 'cdcs', 'cdsa', 'hybrid'],
            'HYBRID_SCOPE': ['full', 'flagged_only'],
            'EMBEDDING_PROVIDER': ['builtin', 'remote'],
        }[info.field_name]
        v_lower = v.lower()
        if v_lower not in choices:
            raise ValueError(f"{info.field_name} must be one of {choices}")
        return v_lower

    @field_validator('CDDAG_M', 'CDCS_K', 'HYBRID_K')
    @classmethod
    def validate_multiplier(cls, v: float, info) -> float:
        if v <= 0:
            raise ValueError(f"{info.field_name} must be greater than 0")
        return v

    @field_validator('CDSA_PHI', 'HYBRID_PHI')
    @classmethod
    def validate_phi(cls, v: float, info) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"{info.field_name} must be in (0, 1]")
        return v

    @field_validator('GENERATOR_NOISE')
    @classmethod
    def validate_noise(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError("GENERATOR_NOISE must be in [0, 1)")
        return v

    @model_validator(mode='after')
    def validate_combinations(self) -> "Settings":
        if self.EMBEDDING_PROVIDER == "remote" and not self.EMBEDDING_ENDPOINT:
            raise ValueError("EMBEDDING_ENDPOINT is required when EMBEDDING_PROVIDER=remote")
        if self.GENERATOR_REPEAT_MIN < 3:
            raise ValueError("GENERATOR_REPEAT_MIN must be at least 3")
        if self.GENERATOR_REPEAT_MAX < self.GENERATOR_REPEAT_MIN:
            raise ValueError("GENERATOR_REPEAT_MAX must be >= GENERATOR_REPEAT_MIN")
        return self

    def effective_config(self) -> Dict[str, Any]:
        """Every setting as JSON-ready values, echoed into run manifests."""
        return self.model_dump(mode="json")


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Settings:
    """
    Build Settings from a config file plus flag overrides.

    ``config_path`` may be a KEY=value file or the JSON manifest of an
    earlier run, whose ``config`` object is replayed. Either way the file
    ranks below environment variables and flags.

    Raises:
        FileNotFoundError: the config file does not exist
        ParameterError: a JSON config is unreadable or has no ``config`` object
    """
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    if config_path is None:
        return Settings(**overrides)

    config_path = Path(config_path)
    if not config_path.is_file():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    if config_path.suffix == ".json":
        recorded = _recorded_config(config_path)
        replayed = {key: value for key, value in recorded.items() if key not in os.environ}
        return Settings(_env_file=None, **{**replayed, **overrides})
    return Settings(_env_file=config_path, **overrides)


def _recorded_config(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParameterError(f"Config file {path} is not valid JSON: {e}") from e
    recorded = manifest.get("config") if isinstance(manifest, dict) else None
    if not isinstance(recorded, dict):
        raise ParameterError(f"Config file {path} has no 'config' object to replay")
    return recorded


settings = Settings()
