"""Categorical softmax over architecture logits, Gumbel-Softmax sampling,
and the temperature annealing schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GumbelError",
    "ThetaMatrix",
    "TemperatureSchedule",
    "probs",
    "gumbel_noise",
    "sample_gumbel_softmax",
    "anneal",
    "UNIFORM_EPS",
]

# Uniform draws are clamped away from {0, 1} so the double log stays finite.
UNIFORM_EPS = 1e-10


class GumbelError(ValueError):
    pass


@dataclass
class ThetaMatrix:
    """Architecture logits, one row per superblock, with an active-candidate mask.

    The mask starts as the admissible candidate set and loses entries as
    pruning removes candidates; masked logits never contribute to the
    softmax. Every row must keep at least one active candidate.
    """

    logits: np.ndarray
    active_mask: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.active_mask = np.asarray(self.active_mask, dtype=bool)
        if self.logits.ndim != 2 or self.logits.shape != self.active_mask.shape:
            raise GumbelError(
                f"logits {self.logits.shape} and mask {self.active_mask.shape} "
                "must be matching 2-d arrays"
            )
        if not np.all(np.isfinite(self.logits)):
            raise GumbelError("logits must be finite")
        if not np.all(self.active_mask.any(axis=1)):
            bad = int(np.argmin(self.active_mask.any(axis=1)))
            raise GumbelError(f"superblock {bad} has no active candidates")

    @property
    def num_superblocks(self) -> int:
        return self.logits.shape[0]

    @property
    def num_candidates(self) -> int:
        return self.logits.shape[1]

    def probs_matrix(self) -> np.ndarray:
        return np.stack(
            [probs(self.logits[i], self.active_mask[i]) for i in range(self.num_superblocks)]
        )

    def copy(self) -> "ThetaMatrix":
        return ThetaMatrix(self.logits.copy(), self.active_mask.copy())

    @classmethod
    def uniform(cls, active_mask: np.ndarray) -> "ThetaMatrix":
        mask = np.asarray(active_mask, dtype=bool)
        return cls(np.zeros(mask.shape, dtype=np.float64), mask)


@dataclass(frozen=True)
class TemperatureSchedule:
    """Anneals the sampling temperature from ``start`` down to ``end``."""

    start: float = 5.0
    end: float = 1.0
    total_steps: int = 1
    shape: str = "linear"  # or "exponential"

    def __post_init__(self):
        if not (self.start >= self.end > 0):
            raise GumbelError("need start >= end > 0")
        if self.total_steps < 1:
            raise GumbelError("total_steps must be >= 1")
        if self.shape not in ("linear", "exponential"):
            raise GumbelError(f"unknown schedule shape {self.shape!r}")


def anneal(step: int, schedule: TemperatureSchedule) -> float:
    """Temperature at a given step; linear interpolation by default."""
    if not 0 <= step <= schedule.total_steps:
        raise GumbelError(f"step {step} outside [0, {schedule.total_steps}]")
    frac = step / schedule.total_steps
    if schedule.shape == "linear":
        return schedule.start + (schedule.end - schedule.start) * frac
    return schedule.start * (schedule.end / schedule.start) ** frac


def probs(theta_row: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax over the active entries of one logit row; zeros elsewhere.

    Stabilized by subtracting the active maximum before exponentiation.
    """
    theta_row = np.asarray(theta_row, dtype=np.float64)
    if theta_row.ndim != 1:
        raise GumbelError("theta row must be 1-d")
    if not np.all(np.isfinite(theta_row)):
        raise GumbelError("logits must be finite")
    if mask is None:
        mask = np.ones(theta_row.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != theta_row.shape:
            raise GumbelError("mask shape must match theta row")
    if not mask.any():
        raise GumbelError("all candidates masked out")
    shifted = theta_row - theta_row[mask].max()
    exp = np.where(mask, np.exp(shifted), 0.0)
    return exp / exp.sum()


def gumbel_noise(rng: np.random.Generator, size) -> np.ndarray:
    """Standard Gumbel draws via the double-log transform of clamped uniforms."""
    u = rng.uniform(size=size)
    u = np.clip(u, UNIFORM_EPS, 1.0 - UNIFORM_EPS)
    return -np.log(-np.log(u))


def sample_gumbel_softmax(
    theta_row: np.ndarray,
    mask: np.ndarray | None,
    t: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One relaxed categorical sample: softmax of (theta + gumbel) / t.

    The result lies in the open simplex over active candidates; as t drops
    toward zero it concentrates on the Gumbel-max winner, whose distribution
    is exactly the categorical given by ``probs``.
    """
    if t <= 0:
        raise GumbelError(f"temperature must be positive, got {t}")
    theta_row = np.asarray(theta_row, dtype=np.float64)
    g = gumbel_noise(rng, theta_row.shape)
    return probs((theta_row + g) / t, mask)
