"""Filtering ablation: random start vs path-count screening vs full filtering.

For every seed a shared pool of candidate circuits (with initial parameters)
is drawn. Three cases pick ``keep`` of them:

* ``random``: the first ``keep`` candidates in sampled order,
* ``dag``: in-band candidates (log path count within the percentile band),
  in sampled order,
* ``dag+kl``: in-band candidates ranked by expressivity.

Each selected circuit is trained for a fixed number of epochs without early
stopping. A case's curve is the per-epoch minimum loss over its circuits, and
epochs-to-target is the first epoch whose loss is at or below the target.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitSpec
from .evolution import (AnalysisConfig, Individual, _EXPRESS, _INIT, _SAMPLE, _pmap,
                        filter_population, init_params, stream)
from .training import DivergenceError, OptimizerConfig, focus

CASES = ("random", "dag", "dag+kl")


def chance_floor_midpoint(n_classes: int = 2) -> float:
    """Loss halfway between chance and the best attainable softmax loss.

    Logits are Pauli-Z expectations in [-1, 1], so the best loss is reached
    with +1 on the true class and -1 elsewhere.
    """
    chance = math.log(n_classes)
    floor = math.log1p((n_classes - 1) * math.exp(-2.0))
    return 0.5 * (chance + floor)


@dataclass
class AblationResult:
    target: float
    epochs: int
    seeds: list[int]
    curves: dict = field(default_factory=dict)        # (case, seed) -> (keep, epochs) array
    epochs_to_target: dict = field(default_factory=dict)  # (case, seed) -> int

    def best_curve(self, case: str, seed: int) -> np.ndarray:
        return np.fmin.reduce(self.curves[(case, seed)], axis=0)

    def median_epochs(self, case: str) -> float:
        return float(np.median([self.epochs_to_target[(case, s)] for s in self.seeds]))

    def ordered(self) -> bool:
        m = [self.median_epochs(c) for c in CASES]
        return m[2] <= m[1] <= m[0]

    def summary_rows(self) -> list[list]:
        rows = []
        for case in CASES:
            per_seed = [self.epochs_to_target[(case, s)] for s in self.seeds]
            rows.append([case, self.median_epochs(case), *per_seed])
        return rows


def epochs_to_target(curve, target: float) -> int:
    """First epoch index with loss <= target, or ``len(curve)`` if never reached."""
    curve = np.asarray(curve, dtype=float)
    hit = np.flatnonzero(curve <= target)
    return int(hit[0]) if hit.size else int(curve.size)


def _pad(trajectory, epochs: int) -> np.ndarray:
    # an early stop holds the last loss for the remaining epochs
    t = np.full(epochs, trajectory[-1] if trajectory else np.nan)
    t[: len(trajectory)] = trajectory
    return t


def select(case: str, candidates, keep: int, spec: CircuitSpec, analysis: AnalysisConfig,
           band, seed: int, threads: int = 1):
    pool = [copy.copy(c) for c in candidates]
    if case == "random":
        return pool[:keep]
    rngs = [stream(seed, 0, _EXPRESS, i) for i in range(len(pool))]
    return filter_population(pool, keep, spec, analysis, band, case, rngs, threads)


def run_ablation(task, spec: CircuitSpec, seeds=(0, 1, 2, 3, 4), candidates: int = 100, keep: int = 5,
                 epochs: int = 200, lr: float = 0.01, target: float | None = None,
                 band=(25.0, 90.0), init_std: float = 0.1,
                 analysis: AnalysisConfig = AnalysisConfig(), threads: int = 1) -> AblationResult:
    if keep > candidates:
        raise ValueError(f"keep ({keep}) must not exceed candidates ({candidates})")
    if target is None:
        target = chance_floor_midpoint(getattr(task, "n_classes", 2))
    opt = OptimizerConfig(steps=epochs, lr=lr, tol=0.0)
    result = AblationResult(target=float(target), epochs=epochs, seeds=list(seeds))

    def train(ind):
        try:
            _, report = focus(spec.build(ind.genome), ind.params, task, opt)
        except DivergenceError:
            return np.full(epochs, np.nan)
        return _pad(report.trajectory, epochs)

    for seed in seeds:
        pool = []
        for i in range(candidates):
            genome = spec.sample(stream(seed, 0, _SAMPLE, i))
            params = init_params(spec.build(genome), task, stream(seed, 0, _INIT, i), init_std)
            pool.append(Individual(genome=genome, params=params))
        for case in CASES:
            chosen = select(case, pool, keep, spec, analysis, band, seed, threads)
            curves = np.array(_pmap(train, chosen, threads))
            result.curves[(case, seed)] = curves
            result.epochs_to_target[(case, seed)] = epochs_to_target(
                np.nan_to_num(result.best_curve(case, seed), nan=np.inf), target)
    return result
