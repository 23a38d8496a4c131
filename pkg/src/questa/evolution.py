"""The evolutionary search loop.

Each generation evaluates the training-free proxies of every individual, keeps
the top-K by proxy fitness, trains those survivors, blends their parameters
toward the generation's best, and breeds the next population. The best
individual is carried over unchanged; new random genomes are drawn from a
sampler biased toward the best genome so far.

Every random draw comes from a stream keyed by ``(seed, generation, purpose,
index)``, so results do not depend on how work is scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import DEFAULT_BINS, DEFAULT_SAMPLES, build_dag, expressivity
from .circuit import CircuitGenome, CircuitSpec, CompiledCircuit, inherit_params
from .training import (DivergenceError, OptimizerConfig, ParameterVector, ReuseConfig,
                       focus, reuse)

NEG_INF = -math.inf

# stream purposes
_SAMPLE, _INIT, _EXPRESS, _BREED = 0, 1, 2, 3

FILTER_MODES = ("dag+kl", "dag", "none")


@dataclass(frozen=True)
class EvolutionConfig:
    generations: int = 10
    population: int = 5
    top_k: int = 5
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    band: tuple[float, float] = (25.0, 90.0)
    reuse_alpha: float = 0.9
    immigrant_rate: float = 0.2
    bias_copy_prob: float = 0.5
    tournament_size: int = 2
    init_std: float = 0.1
    filter_mode: str = "dag+kl"
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if not 1 <= self.top_k <= self.population:
            raise ValueError(f"top_k ({self.top_k}) must lie in 1..population ({self.population})")
        for name in ("crossover_rate", "mutation_rate", "reuse_alpha", "immigrant_rate", "bias_copy_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        lo, hi = self.band
        if not 0.0 <= lo < hi <= 100.0:
            raise ValueError(f"band percentiles must satisfy 0 <= lo < hi <= 100, got {self.band}")
        if self.filter_mode not in FILTER_MODES:
            raise ValueError(f"filter_mode must be one of {FILTER_MODES}")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


@dataclass(frozen=True)
class AnalysisConfig:
    samples: int = DEFAULT_SAMPLES
    bins: int = DEFAULT_BINS


@dataclass
class Individual:
    genome: CircuitGenome
    params: ParameterVector | None = None
    log_paths: float | None = None
    path_count: int | None = None
    expressivity: float | None = None
    proxy_fitness: float | None = None
    task_fitness: float | None = None
    loss: float | None = None
    steps: int = 0
    focused: bool = False
    failed: bool = False
    origin: str = "sampled"


def stream(seed: int, generation: int, purpose: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(generation, purpose, index)))


def band_limits(log_paths, band: tuple[float, float]) -> tuple[float, float]:
    vals = np.asarray(log_paths, dtype=float)
    lo, hi = np.percentile(vals, [band[0], band[1]])
    return float(lo), float(hi)


def proxy_fitness(log_paths: float, expressivity: float, limits: tuple[float, float]) -> float:
    """E(c) for circuits whose log path count lies inside the band, else -inf."""
    lo, hi = limits
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    if log_paths < lo - tol or log_paths > hi + tol:
        return NEG_INF
    return float(expressivity)


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def evaluate_proxies(population, spec: CircuitSpec, analysis: AnalysisConfig, rngs,
                     with_expressivity: bool = True, threads: int = 1) -> None:
    """Fill path counts and (optionally) expressivity in place."""

    def work(i):
        circuit = spec.build(population[i].genome)
        dag = build_dag(circuit)
        e = None
        if with_expressivity:
            e = expressivity(circuit, analysis.samples, analysis.bins, rngs[i]).expressivity
        return dag, e

    for ind, (dag, e) in zip(population, _pmap(work, list(range(len(population))), threads)):
        ind.path_count = dag.path_count
        ind.log_paths = dag.log_path_count
        ind.expressivity = e


def rank_population(population, band, mode: str = "dag+kl") -> list[int]:
    """Assign proxy fitness and return indices sorted best first.

    ``dag+kl`` ranks in-band circuits by expressivity (ties break on genome
    serialization); ``dag`` only screens by the band and keeps in-band
    circuits in their given order; ``none`` keeps the given order.
    """
    if mode == "none":
        for ind in population:
            ind.proxy_fitness = 0.0
        return list(range(len(population)))
    limits = band_limits([ind.log_paths for ind in population], band)
    for ind in population:
        score = ind.expressivity if mode == "dag+kl" else 0.0
        ind.proxy_fitness = proxy_fitness(ind.log_paths, score, limits)
    if mode == "dag":
        return sorted(range(len(population)), key=lambda i: (-population[i].proxy_fitness, i))
    return sorted(range(len(population)),
                  key=lambda i: (-population[i].proxy_fitness, population[i].genome.key()))


def filter_population(population, k: int, spec: CircuitSpec, analysis: AnalysisConfig = AnalysisConfig(),
                      band=(25.0, 90.0), mode: str = "dag+kl", rngs=None, threads: int = 1):
    """Evaluate proxies for every individual and return the top ``k``."""
    if not population:
        raise ValueError("empty population")
    if not 1 <= k <= len(population):
        raise ValueError(f"k={k} must lie in 1..{len(population)}")
    if rngs is None:
        rngs = [np.random.default_rng(i) for i in range(len(population))]
    if mode != "none":
        evaluate_proxies(population, spec, analysis, rngs, mode == "dag+kl", threads)
    order = rank_population(population, band, mode)
    return [population[i] for i in order[:k]]


def crossover_at(a: CircuitGenome, b: CircuitGenome, cut: int):
    if a.shape != b.shape:
        raise ValueError(f"genome shapes differ: {a.shape} vs {b.shape}")
    ea, eb = a.entries, b.entries
    ca = np.concatenate([ea[:, :cut], eb[:, cut:]], axis=1)
    cb = np.concatenate([eb[:, :cut], ea[:, cut:]], axis=1)
    return CircuitGenome(ca), CircuitGenome(cb)


def crossover(parent_a: CircuitGenome, parent_b: CircuitGenome, rng, return_cut: bool = False):
    """Single-point layer cut at a uniform position in 1..L-1; suffixes swap."""
    if parent_a.shape != parent_b.shape:
        raise ValueError(f"genome shapes differ: {parent_a.shape} vs {parent_b.shape}")
    layers = parent_a.n_layers
    cut = int(rng.integers(1, layers)) if layers > 1 else layers
    children = crossover_at(parent_a, parent_b, cut)
    return (children, cut) if return_cut else children


def mutate(genome: CircuitGenome, p_mut: float, rng, n_codes: int = 5) -> CircuitGenome:
    """Resample each cell uniformly over 0..n_codes-1 with probability ``p_mut``."""
    if not 0.0 <= p_mut <= 1.0:
        raise ValueError("mutation rate must lie in [0, 1]")
    hit = rng.random(genome.shape) < p_mut
    fresh = rng.integers(0, n_codes, size=genome.shape)
    return CircuitGenome(np.where(hit, fresh, genome.entries))


def sample_biased(rng, spec: CircuitSpec, bias: CircuitGenome | None, copy_prob: float) -> CircuitGenome:
    """Uniform genome, with each cell copied from ``bias`` with probability ``copy_prob``."""
    fresh = spec.sample(rng)
    if bias is None or copy_prob <= 0:
        return fresh
    copy = rng.random(fresh.shape) < copy_prob
    return CircuitGenome(np.where(copy, bias.entries, fresh.entries))


def init_params(circuit: CompiledCircuit, task, rng, std: float) -> ParameterVector:
    affine = task.default_affine() if task.uses_affine else None
    return ParameterVector(rng.normal(0.0, std, circuit.n_params), affine)


def _child(spec: CircuitSpec, genome: CircuitGenome, sources, affine) -> Individual:
    """Build an offspring; ``sources[j]`` is the parent individual owning column j."""
    circuit = spec.build(genome)
    built = {}
    pairs = []
    for parent in sources:
        key = id(parent)
        if key not in built:
            built[key] = (spec.build(parent.genome), None if parent.params is None else parent.params.values)
        pairs.append(built[key])
    values = inherit_params(circuit, pairs)
    return Individual(genome=genome, params=ParameterVector(values, affine), origin="offspring")


def _tournament(pool, size: int, rng) -> Individual:
    picks = rng.integers(0, len(pool), size=size)
    best = min(picks, key=lambda i: (-pool[i].task_fitness, i))
    return pool[int(best)]


def breed(pool, n_children: int, spec: CircuitSpec, evo: EvolutionConfig, rng) -> list[Individual]:
    """Tournament selection, layer crossover and cell mutation with parameter inheritance."""
    children: list[Individual] = []
    q = len(spec.vocab)
    layers = spec.n_layers
    while len(children) < n_children:
        pa = _tournament(pool, evo.tournament_size, rng)
        pb = _tournament(pool, evo.tournament_size, rng)
        if rng.random() < evo.crossover_rate and layers > 1:
            (ga, gb), cut = crossover(pa.genome, pb.genome, rng, return_cut=True)
            broods = [(ga, [pa] * cut + [pb] * (layers - cut), pa),
                      (gb, [pb] * cut + [pa] * (layers - cut), pb)]
        else:
            broods = [(pa.genome, [pa] * layers, pa), (pb.genome, [pb] * layers, pb)]
        for genome, sources, head in broods:
            if len(children) >= n_children:
                break
            affine = None if head.params is None else head.params.affine
            crossed = _child(spec, genome, sources, affine)
            mutated = mutate(genome, evo.mutation_rate, rng, q)
            if mutated != genome:
                base = Individual(genome=genome, params=crossed.params)
                crossed = _child(spec, mutated, [base] * layers, affine)
            children.append(crossed)
    return children


@dataclass
class SearchResult:
    best: Individual
    history: list[dict] = field(default_factory=list)


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def individual_record(index: int, ind: Individual) -> dict:
    return {
        "index": index,
        "origin": ind.origin,
        "genome": ind.genome.entries.tolist(),
        "n_params": None if ind.params is None else len(ind.params),
        "path_count": None if ind.path_count is None else str(ind.path_count),
        "log_path_count": _finite_or_none(ind.log_paths),
        "expressivity": _finite_or_none(ind.expressivity),
        "proxy_fitness": _finite_or_none(ind.proxy_fitness),
        "focused": ind.focused,
        "failed": ind.failed,
        "steps": ind.steps,
        "loss": _finite_or_none(ind.loss),
        "task_fitness": _finite_or_none(ind.task_fitness),
    }


def run_quest_a(task, spec: CircuitSpec, evo: EvolutionConfig = EvolutionConfig(),
                analysis: AnalysisConfig = AnalysisConfig(), train: OptimizerConfig = OptimizerConfig(),
                threads: int = 1, on_generation: Callable[[dict], None] | None = None) -> SearchResult:
    """Run the filter / focus / evolve loop and return the best individual.

    ``history`` holds one record per generation; non-finite fitness values
    (rejected or failed individuals) are stored as ``None``.
    """
    seed = evo.seed
    reuse_cfg = ReuseConfig(evo.reuse_alpha)

    def fresh(generation, index, bias):
        genome = sample_biased(stream(seed, generation, _SAMPLE, index), spec, bias, evo.bias_copy_prob)
        params = init_params(spec.build(genome), task, stream(seed, generation, _INIT, index), evo.init_std)
        return Individual(genome=genome, params=params, origin="sampled" if bias is None else "immigrant")

    population = [fresh(0, i, None) for i in range(evo.population)]
    best: Individual | None = None
    history: list[dict] = []

    def train_one(ind: Individual):
        circuit = spec.build(ind.genome)
        try:
            params, report = focus(circuit, ind.params, task, train)
        except DivergenceError:
            return None
        return params, report

    for g in range(evo.generations):
        rngs = [stream(seed, g, _EXPRESS, i) for i in range(len(population))]
        if evo.filter_mode != "none":
            evaluate_proxies(population, spec, analysis, rngs, evo.filter_mode == "dag+kl", threads)
        order = rank_population(population, evo.band, evo.filter_mode)
        chosen = order[: evo.top_k]
        to_focus = [i for i in chosen if population[i].proxy_fitness != NEG_INF]

        for ind in population:
            ind.focused = False
        results = _pmap(train_one, [population[i] for i in to_focus], threads)
        for i, res in zip(to_focus, results):
            ind = population[i]
            ind.focused = True
            if res is None:
                ind.failed = True
                if ind.origin != "elite":
                    ind.task_fitness = NEG_INF
                    ind.loss = math.nan
                continue
            params, report = res
            ind.params = params
            ind.loss = report.best_loss
            ind.steps = report.steps
            ind.task_fitness = task.fitness(report.best_loss)

        scored = [i for i, ind in enumerate(population)
                  if ind.task_fitness is not None and ind.task_fitness != NEG_INF]
        c_best = None
        if scored:
            bi = min(scored, key=lambda i: (-population[i].task_fitness, i))
            c_best = population[bi]
            if best is None or c_best.task_fitness > best.task_fitness:
                best = replace(c_best)

        proxies = [ind.proxy_fitness for ind in population
                   if ind.proxy_fitness is not None and ind.proxy_fitness != NEG_INF]
        fits = [population[i].task_fitness for i in scored]
        record = {
            "generation": g,
            "best_proxy": _finite_or_none(max(proxies)) if proxies else None,
            "mean_proxy": _finite_or_none(float(np.mean(proxies))) if proxies else None,
            "best_task_fitness": _finite_or_none(max(fits)) if fits else None,
            "mean_task_fitness": _finite_or_none(float(np.mean(fits))) if fits else None,
            "best_so_far": None if best is None else _finite_or_none(best.task_fitness),
            "best_loss": None if best is None else _finite_or_none(best.loss),
            "n_focused": len(to_focus),
            "individuals": [individual_record(i, ind) for i, ind in enumerate(population)],
        }
        history.append(record)
        if on_generation is not None:
            on_generation(record)

        if g == evo.generations - 1:
            break

        if c_best is not None:
            for i in scored:
                ind = population[i]
                if ind is not c_best and ind.params is not None:
                    ind.params = reuse(ind.params, c_best.params, reuse_cfg)

        pool = [population[i] for i in scored]
        bias = None if c_best is None else c_best.genome
        n_imm = min(evo.population - 1, int(round(evo.population * evo.immigrant_rate)))
        nxt: list[Individual] = []
        if c_best is not None:
            nxt.append(Individual(genome=c_best.genome, params=c_best.params, task_fitness=c_best.task_fitness,
                                  loss=c_best.loss, steps=c_best.steps, origin="elite"))
        else:
            n_imm = evo.population
        n_off = evo.population - len(nxt) - n_imm
        if n_off > 0 and pool:
            nxt.extend(breed(pool, n_off, spec, evo, stream(seed, g, _BREED, 0)))
        j = 0
        while len(nxt) < evo.population:
            nxt.append(fresh(g + 1, j, bias))
            j += 1
        population = nxt

    if best is None:
        # every focus failed: report the first individual with -inf fitness
        best = replace(population[0], task_fitness=NEG_INF)
    return SearchResult(best=best, history=history)
