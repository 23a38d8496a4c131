"""Run configuration: strict YAML parsing and builders for runtime objects."""

from __future__ import annotations

import math
import os
import re
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .ablation import chance_floor_midpoint
from .circuit import DEFAULT_VOCABULARY, CircuitSpec, GateVocabulary
from .evolution import AnalysisConfig, EvolutionConfig
from .tasks import (CSVSchema, Hamiltonian, build_heisenberg, build_tfim, load_csv_dataset,
                    make_blobs_task, make_signal_task, VQETask)
from .training import OptimizerConfig


class ConfigError(ValueError):
    """Invalid configuration; the message carries line numbers where known."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TaskSection(_Strict):
    kind: Literal["vqe", "representation", "classification"]
    hamiltonian: Optional[Literal["tfim", "heisenberg", "file"]] = None
    hamiltonian_file: Optional[str] = None
    boundary: Literal["periodic", "open"] = "periodic"
    field: float = 1.0
    dataset: Optional[str] = None
    label_column: Optional[str] = None
    feature_columns: Optional[list[str]] = None
    classes: Optional[list[str]] = None
    coordinate_column: Optional[str] = None
    value_column: Optional[str] = None
    synthetic: Optional[Literal["signal", "blobs"]] = None
    points: int = Field(64, ge=2)
    samples: int = Field(200, ge=2)
    features: int = Field(4, ge=1)
    n_classes: int = Field(2, ge=2)
    separation: float = Field(3.0, gt=0)
    data_seed: int = 0
    replicas: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _consistent(self):
        if self.kind == "vqe":
            if self.hamiltonian is None:
                raise ValueError("task.hamiltonian is required for kind 'vqe'")
            if self.hamiltonian == "file" and not self.hamiltonian_file:
                raise ValueError("task.hamiltonian_file is required when hamiltonian is 'file'")
        else:
            if (self.dataset is None) == (self.synthetic is None):
                raise ValueError("exactly one of task.dataset and task.synthetic must be given")
            wanted = "signal" if self.kind == "representation" else "blobs"
            if self.synthetic is not None and self.synthetic != wanted:
                raise ValueError(f"synthetic data for kind {self.kind!r} must be {wanted!r}")
        return self


class CircuitSection(_Strict):
    n_qubits: int = Field(ge=1, le=12)
    n_layers: int = Field(ge=1)
    vocabulary: list[str] = list(DEFAULT_VOCABULARY)
    reuploads: int = Field(1, ge=1)
    feature_scale: float = math.pi
    tie_weights: bool = False
    edge_columns: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _edges(self):
        if 2 * self.edge_columns >= self.n_layers:
            raise ValueError("circuit.edge_columns must leave at least one repeated column (2*edge_columns < n_layers)")
        GateVocabulary(tuple(self.vocabulary))
        return self


class EvolutionSection(_Strict):
    generations: int = Field(10, ge=1)
    population: int = Field(5, ge=1)
    top_k: int = Field(5, ge=1)
    crossover_rate: float = Field(0.8, ge=0, le=1)
    mutation_rate: float = Field(0.1, ge=0, le=1)
    reuse_alpha: float = Field(0.9, ge=0, le=1)
    immigrant_rate: float = Field(0.2, ge=0, le=1)
    bias_copy_prob: float = Field(0.5, ge=0, le=1)
    tournament_size: int = Field(2, ge=1)
    init_std: float = Field(0.1, ge=0)
    filter_mode: Literal["dag+kl", "dag", "none"] = "dag+kl"

    @model_validator(mode="after")
    def _k_le_population(self):
        if self.top_k > self.population:
            raise ValueError(f"evolution.population ({self.population}) must be >= evolution.top_k ({self.top_k})")
        return self


class TrainingSection(_Strict):
    steps: int = Field(500, ge=0)
    lr: float = Field(0.01, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    tol: float = Field(1e-8, ge=0)
    patience: int = Field(20, ge=1)


class AnalysisSection(_Strict):
    samples: int = Field(5000, ge=100)
    bins: int = Field(75, ge=10)
    band: tuple[float, float] = (25.0, 90.0)

    @field_validator("band")
    @classmethod
    def _band(cls, v):
        if not 0.0 <= v[0] < v[1] <= 100.0:
            raise ValueError("band percentiles must satisfy 0 <= lo < hi <= 100")
        return v


class AblationSection(_Strict):
    seeds: list[int] = [0, 1, 2, 3, 4]
    candidates: int = Field(100, ge=1)
    keep: int = Field(5, ge=1)
    epochs: int = Field(200, ge=1)
    lr: float = Field(0.01, gt=0)
    target: Optional[float] = None

    @model_validator(mode="after")
    def _keep(self):
        if self.keep > self.candidates:
            raise ValueError(f"ablation.candidates ({self.candidates}) must be >= ablation.keep ({self.keep})")
        if not self.seeds:
            raise ValueError("ablation.seeds must not be empty")
        return self


class RunConfig(_Strict):
    seed: int = 0
    output_dir: str = "results"
    threads: Optional[int] = Field(None, ge=1)
    task: TaskSection
    circuit: CircuitSection
    evolution: EvolutionSection = EvolutionSection()
    training: TrainingSection = TrainingSection()
    analysis: AnalysisSection = AnalysisSection()
    ablation: AblationSection = AblationSection()

    # -- builders ---------------------------------------------------------

    def resolved_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def replicas(self) -> int:
        if self.task.replicas is not None:
            return self.task.replicas
        return self.circuit.n_qubits if self.task.kind == "representation" else 1

    def build_task(self, base_dir: Path | str = "."):
        t = self.task
        base = Path(base_dir)
        n = self.circuit.n_qubits
        if t.kind == "vqe":
            if t.hamiltonian == "tfim":
                return VQETask(build_tfim(n, t.boundary))
            if t.hamiltonian == "heisenberg":
                return VQETask(build_heisenberg(n, t.boundary, t.field))
            path = base / t.hamiltonian_file
            if not path.exists():
                raise FileNotFoundError(f"Hamiltonian file not found: {path}")
            h = Hamiltonian.from_json(path.read_text())
            return VQETask(h)
        if t.synthetic == "signal":
            return make_signal_task(t.points, self.replicas())
        if t.synthetic == "blobs":
            return make_blobs_task(t.samples, t.features, t.n_classes, t.separation, t.data_seed)
        schema = CSVSchema(
            kind=t.kind,
            label_column=t.label_column,
            feature_columns=None if t.feature_columns is None else tuple(t.feature_columns),
            classes=None if t.classes is None else tuple(t.classes),
            coordinate_column=t.coordinate_column,
            value_column=t.value_column,
            replicas=self.replicas(),
        )
        return load_csv_dataset(base / t.dataset, schema)

    def circuit_spec(self, n_features: int) -> CircuitSpec:
        c = self.circuit
        return CircuitSpec(c.n_qubits, c.n_layers, GateVocabulary(tuple(c.vocabulary)), c.reuploads,
                           n_features, c.feature_scale, c.tie_weights, c.edge_columns)

    def evolution_config(self) -> EvolutionConfig:
        e = self.evolution
        return EvolutionConfig(
            generations=e.generations, population=e.population, top_k=e.top_k,
            crossover_rate=e.crossover_rate, mutation_rate=e.mutation_rate, band=tuple(self.analysis.band),
            reuse_alpha=e.reuse_alpha, immigrant_rate=e.immigrant_rate, bias_copy_prob=e.bias_copy_prob,
            tournament_size=e.tournament_size, init_std=e.init_std, filter_mode=e.filter_mode, seed=self.seed,
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(**self.training.model_dump())

    def analysis_config(self) -> AnalysisConfig:
        return AnalysisConfig(self.analysis.samples, self.analysis.bins)

    def ablation_target(self, task) -> float:
        if self.ablation.target is not None:
            return self.ablation.target
        return chance_floor_midpoint(getattr(task, "n_classes", 2))


# -- YAML with line numbers ------------------------------------------------

def _line_index(node, path=(), out=None) -> dict:
    """Map key paths to 1-based source lines using the composed YAML node tree."""
    if out is None:
        out = {}
    if node is None:
        return out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_index(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _line_for(loc, lines: dict) -> int | None:
    path = tuple(str(p) if not isinstance(p, int) else p for p in loc)
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return lines.get(())


_FIELD_REF = re.compile(r"\b([a-z_]+)\.([a-z_0-9]+)\b")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        raise ConfigError(f"{source}: {where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: line 1: top level must be a mapping")
    lines = _line_index(node)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            line = _line_for(loc, lines)
            # cross-field checks name their fields as section.key
            named = [lines[m] for m in _FIELD_REF.findall(err["msg"]) if m in lines]
            if named:
                line = max(named)
            field = ".".join(str(p) for p in loc) or "<root>"
            msg = err["msg"]
            if err["type"] == "extra_forbidden":
                msg = "unknown key"
            msgs.append(f"{source}: line {line if line is not None else '?'}: {field}: {msg}")
        raise ConfigError("\n".join(msgs)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json")


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
