#!/usr/bin/env python3
"""
Configuration Management
Process settings from the environment and run configuration from experiment files
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ParameterError
from .models import CtdMode, Method


# 2^n configurations are enumerated with int64 bit masks
MAX_EXACT_CAP = 30


class Settings(BaseSettings):
    """Process-level settings (env prefix PERCOBOUND_)"""

    # Project Settings
    PROJECT_NAME: str = "percobound"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"

    # Worker pool; PERCOBOUND_THREADS caps the worker count
    THREADS: int = Field(4, ge=1)

    # Statistics
    CONFIDENCE_LEVEL: float = Field(0.99, gt=0.0, lt=1.0)
    STABILIZATION_FRACTION: float = 0.25
    VERDICT_SLACK_HALF_WIDTHS: float = 2.0

    # Enumeration / sampling sizes
    EXACT_CAP: int = Field(25, ge=1, le=MAX_EXACT_CAP)
    REPLICA_CHUNK: int = 1024
    ENUMERATION_CHUNK: int = 65536
    SAMPLE_BUDGET: int = 8_000_000  # uniforms per work unit

    model_config = SettingsConfigDict(
        env_prefix="PERCOBOUND_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


# Global settings instance
settings = Settings()


# Run configuration sections
class Section(BaseModel):
    """Config section; unknown keys are rejected"""

    model_config = ConfigDict(extra="forbid")


class GraphSection(Section):
    graph: str = Field("lattice:2", description="lattice:<d> | tree:<b> | file:<path>")
    origin: int = 0
    rmax: Optional[int] = Field(None, ge=1, description="Truncation radius; derived per subcommand when omitted")


class RunSection(Section):
    p: float = Field(0.5, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    replicas: int = Field(4000, ge=1)
    confidence: float = Field(0.99, gt=0.0, lt=1.0)
    out: str = "results"


class PhiSection(Section):
    ball: int = Field(1, ge=0)
    vertex: Optional[int] = None
    method: Method = Method.AUTO
    exact_cap: int = Field(25, ge=1, le=MAX_EXACT_CAP)
    endpoint_interior: bool = True
    requires_source_open: bool = True


class PcBoundSection(Section):
    eps0: float = Field(0.05, gt=0.0, lt=1.0)
    rmax_search: int = Field(6, ge=1)
    tolerance: float = Field(0.01, gt=0.0, lt=0.5)
    method: Method = Method.AUTO
    exact_cap: int = Field(25, ge=1, le=MAX_EXACT_CAP)
    vertices: List[int] = Field(default_factory=list)


class PackSection(Section):
    eps: float = Field(0.2, gt=0.0, lt=1.0)
    c: float = Field(0.5, gt=0.0, lt=1.0)
    dmin: int = Field(1, ge=1)
    dmax: int = Field(3, ge=1)
    rproxy: int = Field(16, ge=2)
    segment_length: int = Field(64, ge=0)
    spacing: int = Field(8, ge=1)
    ctd_mode: CtdMode = CtdMode.MARGINAL
    p1: Optional[float] = None
    eps1: Optional[float] = None
    pc: Optional[float] = None


class VerifySection(Section):
    pc: float = Field(0.6, gt=0.0, lt=1.0)
    grid_p1: int = Field(8, ge=1)
    eps_values: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    delta_values: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])


class SimulateSection(Section):
    radii: List[int] = Field(default_factory=lambda: [4, 8, 16])
    segment_length: int = Field(1, ge=0, description="S is the centered lattice segment; 1 means the origin")


class RunConfig(BaseModel):
    """Fully resolved run configuration; embedded in every output"""

    model_config = ConfigDict(extra="forbid")

    subcommand: str
    graph: GraphSection = Field(default_factory=GraphSection)
    run: RunSection = Field(default_factory=RunSection)
    phi: PhiSection = Field(default_factory=PhiSection)
    pc_bound: PcBoundSection = Field(default_factory=PcBoundSection)
    pack: PackSection = Field(default_factory=PackSection)
    verify_bound: VerifySection = Field(default_factory=VerifySection)
    simulate: SimulateSection = Field(default_factory=SimulateSection)

    @field_validator("subcommand")
    @classmethod
    def known_subcommand(cls, value: str) -> str:
        if value not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand: {value}")
        return value


SUBCOMMANDS = ("phi", "pc-bound", "pack", "verify-bound", "simulate")

# YAML section name -> RunConfig attribute
SECTION_NAMES = {
    "graph": "graph",
    "run": "run",
    "phi": "phi",
    "pc-bound": "pc_bound",
    "pack": "pack",
    "verify-bound": "verify_bound",
    "simulate": "simulate",
}


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Read an experiment file of flat `key: value` sections.

    Returns a dict keyed by RunConfig attribute names. A missing path yields {}.
    """
    if not path:
        return {}
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ParameterError(f"cannot read config file {path}: {e}", constraint="config file")

    if not isinstance(raw, dict):
        raise ParameterError(f"config file {path} must hold named sections", constraint="config file")

    sections: Dict[str, Any] = {}
    for name, body in raw.items():
        if name not in SECTION_NAMES:
            raise ParameterError(f"unknown config section: {name}", constraint="config file")
        if not isinstance(body, dict):
            raise ParameterError(f"section {name} must be flat key: value pairs", constraint="config file")
        for key, value in body.items():
            if isinstance(value, dict):
                raise ParameterError(f"section {name}: key {key} is nested", constraint="config file")
        sections[SECTION_NAMES[name]] = {k.replace("-", "_"): v for k, v in body.items()}
    return sections


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    """Overlay flag values (non-None) on file sections; flags win"""
    merged = {name: dict(body) for name, body in base.items()}
    for name, body in overrides.items():
        target = merged.setdefault(name, {})
        for key, value in body.items():
            if value is not None:
                target[key] = value
    return merged
