"""Binomial-proportion estimates with Wilson score intervals, and bounded-mean intervals."""

from math import sqrt
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import stats


def z_score(confidence: float) -> float:
    """Two-sided standard normal quantile for a confidence level"""
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Stays inside [0, 1] and keeps honest coverage near 0 and 1, where the
    certification checks live.

    Args:
        successes: Number of successful replicas
        trials: Total number of replicas
        confidence: Two-sided confidence level

    Returns:
        Tuple of (lower, upper)
    """
    if trials == 0:
        return (0.0, 1.0)

    z = z_score(confidence)
    p_hat = successes / trials

    denominator = 1 + z**2 / trials
    center = (p_hat + z**2 / (2 * trials)) / denominator
    margin = (z / denominator) * sqrt(p_hat * (1 - p_hat) / trials + z**2 / (4 * trials**2))

    # the score interval always contains p_hat; clamp away rounding
    lower = min(p_hat, max(0.0, center - margin))
    upper = max(p_hat, min(1.0, center + margin))
    if successes == 0:
        lower = 0.0
    if successes == trials:
        upper = 1.0
    return (lower, upper)


def bounded_mean_interval(values: Sequence[float], upper: float, confidence: float = 0.99) -> Tuple[float, float]:
    """
    Interval for the mean of a per-replica variable taking values in [0, upper].

    Student-t interval on the sample mean, clipped to [0, upper]. A sample with
    no spread falls back to the Wilson interval of the scaled mean.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0 or upper <= 0:
        return (0.0, max(upper, 0.0))
    mean = float(x.mean())
    if n > 1 and float(x.var(ddof=1)) > 0.0:
        half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * sqrt(float(x.var(ddof=1)) / n)
        return (max(0.0, min(mean, mean - half)), min(upper, max(mean, mean + half)))
    low, high = wilson_interval(int(round(n * mean / upper)), n, confidence)
    return (min(mean, low * upper), max(mean, high * upper))


class Estimate(BaseModel):
    """Monte Carlo estimate of an event probability"""

    successes: int = Field(..., ge=0)
    replicas: int = Field(..., ge=0)
    point: float = Field(..., ge=0.0, le=1.0)
    ci_low: float = Field(..., ge=0.0, le=1.0)
    ci_high: float = Field(..., ge=0.0, le=1.0)
    confidence: float = Field(0.99, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def ordered_interval(self) -> "Estimate":
        if self.successes > self.replicas:
            raise ValueError("successes exceed replicas")
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValueError("interval must contain the point estimate")
        return self

    @classmethod
    def from_counts(cls, successes: int, replicas: int, confidence: float = 0.99) -> "Estimate":
        low, high = wilson_interval(successes, replicas, confidence)
        point = successes / replicas if replicas else 0.0
        return cls(
            successes=successes,
            replicas=replicas,
            point=point,
            ci_low=low,
            ci_high=high,
            confidence=confidence,
        )

    @classmethod
    def sure(cls, replicas: int, confidence: float = 0.99, value: bool = True) -> "Estimate":
        """Estimate of an event that holds (or fails) on every replica by construction"""
        return cls.from_counts(replicas if value else 0, replicas, confidence)

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    def complement(self) -> "Estimate":
        """Estimate of the complementary event on the same replicas"""
        return Estimate(
            successes=self.replicas - self.successes,
            replicas=self.replicas,
            point=1.0 - self.point if self.replicas else 0.0,
            ci_low=1.0 - self.ci_high,
            ci_high=1.0 - self.ci_low,
            confidence=self.confidence,
        )

    def to_row(self) -> Dict[str, Any]:
        return {
            "successes": self.successes,
            "replicas": self.replicas,
            "point": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }
