#!/usr/bin/env python3
"""
Pydantic Models for Parameter Validation and Reports
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from .estimates import Estimate


# Enums
class Method(str, Enum):
    EXACT = "exact"
    MC = "mc"
    AUTO = "auto"


class CtdMode(str, Enum):
    MARGINAL = "marginal"
    PAIRED = "paired"


class WilMethod(str, Enum):
    ANALYTIC = "analytic"
    PROXY = "proxy"
    SOURCE_OPEN = "source-open"


class Verdict(str, Enum):
    CONSISTENT = "consistent"
    VIOLATION_CANDIDATE = "violation candidate"
    DEGENERATE = "degenerate"


# Parameter Models
class PercolationParams(BaseModel):
    p: float = Field(..., gt=0.0, lt=1.0, description="Site open probability")
    seed: int = Field(0, ge=0, lt=2**64, description="Counter-based generator key")
    replicas: int = Field(4000, ge=1, description="Monte Carlo replicas")
    confidence: float = Field(0.99, gt=0.0, lt=1.0, description="Two-sided CI level")

    def at(self, p: float) -> "PercolationParams":
        """Same seed and replicas at another p (monotone coupling)"""
        return self.model_copy(update={"p": p})


class SupercriticalParams(BaseModel):
    """Parameters of the analytic connection lower bound; the coupling inequality is checked on use"""

    p: float = Field(..., gt=0.0, lt=1.0)
    p1: float = Field(..., gt=0.0, lt=1.0)
    eps1: float = Field(0.0, ge=0.0, lt=1.0)
    eps: Optional[float] = Field(None, gt=0.0, lt=1.0)
    pc_tilde: Optional[float] = Field(None, gt=0.0, lt=1.0)


class LemmaBoundInput(BaseModel):
    eps: float = Field(..., ge=0.0, lt=1.0)
    c: float = Field(..., ge=0.0, le=1.0)
    k: int = Field(..., ge=0)


class GridPoint(BaseModel):
    p1: float
    eps: float
    delta: float
    c: Optional[float] = None
    k: Optional[int] = None
    value: Optional[float] = None
    skipped: bool = False

    def to_row(self) -> Dict[str, Any]:
        return self.model_dump()


class TheoremBoundInput(BaseModel):
    p: float = Field(..., gt=0.0, lt=1.0)
    pc_tilde: float = Field(..., gt=0.0, lt=1.0)
    p1_values: List[float] = Field(..., min_length=1)
    eps_values: List[float] = Field(..., min_length=1)
    delta_values: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def supercritical(self) -> "TheoremBoundInput":
        if not self.pc_tilde < self.p:
            raise ValueError("theorem grid requires p > p~_c")
        return self


class TheoremBoundResult(BaseModel):
    value: float
    argmin: Optional[GridPoint] = None
    rows: List[GridPoint] = Field(default_factory=list)


class BoundReport(BaseModel):
    verdict: Verdict
    empirical: Optional[Estimate] = None
    radii: List[int] = Field(default_factory=list)
    profile: List[Estimate] = Field(default_factory=list)
    stabilized: bool = False
    k: int = 0
    lemma_rhs: Optional[float] = None
    lemma_params: Dict[str, Any] = Field(default_factory=dict)
    theorem_rhs: Optional[float] = None
    theorem_argmin: Optional[GridPoint] = None
    margin: Optional[float] = None
    slack: float = 0.0
    diagnostics: List[str] = Field(default_factory=list)
    grid: List[GridPoint] = Field(default_factory=list)
    packing: Optional[Dict[str, Any]] = None
