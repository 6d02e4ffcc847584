"""Discrete architecture sampling, shared-weight scoring, and frontier extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_model import CostTable, path_table_cost
from .gumbel import ThetaMatrix, probs
from .search_space import ArchPath, validate_path
from .supernet import Supernet
from .toy_task import ToyDataset, miou

__all__ = [
    "ParetoPoint",
    "sample_paths",
    "evaluate_path",
    "score_paths",
    "pareto_frontier",
    "select",
]

DEFAULT_SAMPLE_COUNT = 200


@dataclass(frozen=True)
class ParetoPoint:
    path: ArchPath
    cost: float
    score: float

    def __post_init__(self):
        if self.cost < 0:
            raise ValueError("cost must be nonnegative")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")


def sample_paths(theta: ThetaMatrix, n: int = DEFAULT_SAMPLE_COUNT,
                 rng: np.random.Generator | None = None) -> list[ArchPath]:
    """Draw n paths, each superblock choice independent per its categorical
    distribution; duplicates are expected once the distribution concentrates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    prob_rows = [probs(theta.logits[i], theta.active_mask[i])
                 for i in range(theta.num_superblocks)]
    paths = []
    for _ in range(n):
        choices = tuple(int(rng.choice(len(p), p=p)) for p in prob_rows)
        paths.append(ArchPath(choices))
    return paths


def evaluate_path(path: ArchPath, supernet: Supernet, val_data: ToyDataset,
                  batch_size: int = 64) -> float:
    """Validation mIOU of one discrete path inside the shared-weight supernet.

    Hard candidate selection, no sampling noise, eval-mode normalization.
    """
    check = validate_path(path, supernet.macro)
    if not check.valid:
        raise ValueError(f"invalid path: {check.reason}")
    preds = []
    n = val_data.images.shape[0]
    for lo in range(0, n, batch_size):
        logits = supernet.forward(val_data.images[lo : lo + batch_size],
                                  path=path, training=False)
        preds.append(np.argmax(logits.data, axis=1))
    return miou(np.concatenate(preds), val_data.labels, val_data.num_classes)


def score_paths(paths: list[ArchPath], supernet: Supernet, val_data: ToyDataset,
                table: CostTable) -> list[ParetoPoint]:
    """Score each unique path once and attach its cost-table total."""
    cache: dict[tuple, float] = {}
    points = []
    for path in paths:
        if path.choices not in cache:
            cache[path.choices] = evaluate_path(path, supernet, val_data)
        points.append(
            ParetoPoint(path=path, cost=path_table_cost(table, path),
                        score=cache[path.choices])
        )
    return points


def _dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """a dominates b when it costs no more, scores no less, and one is strict."""
    return (
        a.cost <= b.cost
        and a.score >= b.score
        and (a.cost < b.cost or a.score > b.score)
    )


def pareto_frontier(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated subset, sorted by cost ascending.

    Exact (cost, score) ties keep only the first point in input order.
    """
    deduped = []
    seen: set[tuple[float, float]] = set()
    for p in points:
        key = (p.cost, p.score)
        if key not in seen:
            seen.add(key)
            deduped.append(p)
    # Sweep in cost order; a point survives iff its score beats everything
    # cheaper. Sorting ties by score descending makes the sweep exact.
    order = sorted(range(len(deduped)),
                   key=lambda i: (deduped[i].cost, -deduped[i].score, i))
    frontier = []
    best_score = -np.inf
    for i in order:
        p = deduped[i]
        if p.score > best_score:
            frontier.append(p)
            best_score = p.score
    return frontier


def select(frontier: list[ParetoPoint], target_cost: float) -> tuple[ParetoPoint, bool]:
    """Best-scoring frontier point within budget.

    Returns (point, within_budget). When nothing fits, the minimum-cost
    point comes back flagged with within_budget=False.
    """
    if not frontier:
        raise ValueError("frontier is empty")
    affordable = [p for p in frontier if p.cost <= target_cost]
    if not affordable:
        cheapest = min(frontier, key=lambda p: p.cost)
        return cheapest, False
    best = max(affordable, key=lambda p: p.score)
    return best, True
