"""Genome encoding, the supercircuit indexer, and circuit compilation.

A genome is an ``N x L`` integer matrix over a gate vocabulary. Decoding walks
columns left to right and rows top to bottom. A ``CNOT`` code at row ``i``
means ``CNOT(i, (i + 1) % N)``; it is demoted to identity when its target wire
was already touched earlier in the same column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .statevector import OPCODE_KIND, GateKind

DEFAULT_VOCABULARY = ("I", "RX", "RY", "RZ", "CNOT")


@dataclass(frozen=True)
class GateVocabulary:
    names: tuple[str, ...] = DEFAULT_VOCABULARY

    def __post_init__(self):
        names = tuple(str(n).upper() for n in self.names)
        if len(names) < 2:
            raise ValueError("vocabulary needs at least two gate codes")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate vocabulary entries: {names}")
        for n in names:
            GateKind(n)  # raises on unknown names
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def kind(self, code: int) -> GateKind:
        return GateKind(self.names[code])

    @property
    def identity_code(self) -> int | None:
        return self.names.index("I") if "I" in self.names else None


@dataclass(frozen=True, eq=False)
class CircuitGenome:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"genome must be a non-empty 2-D matrix, got shape {arr.shape}")
        if arr.min() < 0:
            raise ValueError("genome entries must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def n_qubits(self) -> int:
        return self.entries.shape[0]

    @property
    def n_layers(self) -> int:
        return self.entries.shape[1]

    def key(self) -> tuple[int, ...]:
        """Serialization order used for deterministic tie-breaks."""
        return tuple(int(v) for v in self.entries.ravel())

    def __eq__(self, other):
        return isinstance(other, CircuitGenome) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.shape, self.key()))

    def to_dict(self, vocab: GateVocabulary) -> dict:
        return {"genome": self.entries.tolist(), "vocabulary": list(vocab.names)}

    def to_json(self, vocab: GateVocabulary) -> str:
        return json.dumps(self.to_dict(vocab))

    @classmethod
    def from_dict(cls, data: dict) -> tuple["CircuitGenome", GateVocabulary]:
        vocab = GateVocabulary(tuple(data.get("vocabulary", DEFAULT_VOCABULARY)))
        genome = cls(np.array(data["genome"]))
        if genome.entries.max() >= len(vocab):
            raise ValueError("genome entry outside the vocabulary")
        return genome, vocab

    @classmethod
    def from_json(cls, text: str) -> tuple["CircuitGenome", GateVocabulary]:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class CompiledCircuit:
    """Executable gate list.

    ``ops`` rows are ``(opcode, wire, target)``. For gate ``g``, ``slots[g]``
    is its parameter index, or -1 for encoding gates, whose angle is
    ``scale * x[features[g]]``. ``slot_groups`` maps ``(block, column)`` to the
    parameter slots that genome column produced in that block.
    """

    n_qubits: int
    ops: np.ndarray
    slots: np.ndarray
    features: np.ndarray
    n_params: int
    n_features: int = 0
    reuploads: int = 1
    scale: float = np.pi
    slot_groups: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("ops", "slots", "features"):
            arr = np.array(getattr(self, name), dtype=np.int32)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "ops", self.ops.reshape(-1, 3))
        used = np.unique(self.slots[self.slots >= 0])
        if not np.array_equal(used, np.arange(self.n_params)):
            raise ValueError("parameter slots must be 0..d-1 without gaps")
        enc = self._encoding_mask()
        if np.any((self.features[enc] < 0) | (self.features[enc] >= self.n_features)):
            raise ValueError("feature slot references an invalid input dimension")
        if np.any(self.ops[self.slots >= 0, 0] == kernels.CNOT):
            raise ValueError("CNOT cannot carry a parameter slot")

    @property
    def n_gates(self) -> int:
        return self.ops.shape[0]

    def _encoding_mask(self) -> np.ndarray:
        return (self.slots < 0) & (self.ops[:, 0] != kernels.CNOT)

    @property
    def n_encoding_gates(self) -> int:
        return int(np.sum(self._encoding_mask()))

    @property
    def param_gates(self) -> np.ndarray:
        return np.flatnonzero(self.slots >= 0).astype(np.int32)

    def cnot_count(self) -> int:
        return int(np.sum(self.ops[:, 0] == kernels.CNOT))

    def angles(self, params=(), x=None) -> np.ndarray:
        """Per-gate rotation angles, shape (batch, n_gates)."""
        params = np.asarray(params, dtype=float).ravel()
        if params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.size}")
        if x is None:
            x = np.zeros((1, self.n_features))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        out = np.zeros((x.shape[0], self.n_gates))
        pmask = self.slots >= 0
        out[:, pmask] = params[self.slots[pmask]]
        emask = self._encoding_mask()
        if np.any(emask):
            out[:, emask] = self.scale * x[:, self.features[emask]]
        return out

    def resolved_gates(self, params=(), x=None):
        """Yield ``(GateKind, wires, angle)`` for a single input row."""
        angles = self.angles(params, x)[0]
        for (op, w, t), a in zip(self.ops, angles):
            kind = OPCODE_KIND[int(op)]
            wires = (int(w), int(t)) if kind is GateKind.CNOT else (int(w),)
            yield kind, wires, float(a)


def _decode_columns(genome: CircuitGenome, vocab: GateVocabulary, columns):
    """Gate rows for the selected columns; returns (gates, demoted cells).

    Each gate is ``(opcode, wire, target, column)``.
    """
    entries = genome.entries
    if entries.max() >= len(vocab):
        bad = tuple(int(v) for v in np.argwhere(entries >= len(vocab))[0])
        raise ValueError(f"genome entry at {bad} is outside the vocabulary (Q={len(vocab)})")
    n = genome.n_qubits
    gates, demoted = [], []
    for j in columns:
        touched: set[int] = set()
        for i in range(n):
            kind = vocab.kind(int(entries[i, j]))
            if kind is GateKind.I:
                continue
            if kind is GateKind.CNOT:
                target = (i + 1) % n
                if target == i or target in touched:
                    demoted.append((i, j))
                    continue
                gates.append((kernels.CNOT, i, target, j))
                touched.update((i, target))
            else:
                gates.append((kind.opcode, i, -1, j))
                touched.add(i)
    return gates, demoted


def decode(genome: CircuitGenome, vocab: GateVocabulary = GateVocabulary()) -> CompiledCircuit:
    """Compile a genome into a gate list; each rotation gets a fresh slot."""
    return build_reupload(genome, reuploads=1, n_features=0, vocab=vocab)


def effective_genome(genome: CircuitGenome, vocab: GateVocabulary = GateVocabulary()) -> CircuitGenome:
    """The genome with demoted CNOT cells replaced by the identity code."""
    _, demoted = _decode_columns(genome, vocab, range(genome.n_layers))
    if not demoted:
        return genome
    if vocab.identity_code is None:
        raise ValueError("vocabulary has no identity code to express a demoted CNOT")
    entries = genome.entries.copy()
    for i, j in demoted:
        entries[i, j] = vocab.identity_code
    return CircuitGenome(entries)


def build_reupload(
    genome: CircuitGenome,
    reuploads: int = 1,
    n_features: int = 0,
    vocab: GateVocabulary = GateVocabulary(),
    scale: float = np.pi,
    tie_weights: bool = False,
    edge_columns: int = 0,
) -> CompiledCircuit:
    """Re-uploading circuit: ``reuploads`` x [RY(scale * x_j) on qubit j; block].

    With ``edge_columns = e > 0`` the first ``e`` genome columns form a block
    placed before the first encoding layer and the last ``e`` columns a block
    placed before measurement; the middle columns are the repeated block.
    Parameter slots are fresh in every repetition unless ``tie_weights``.
    """
    n = genome.n_qubits
    if reuploads < 1:
        raise ValueError("reuploads must be >= 1")
    if n_features < 0 or n_features > n:
        raise ValueError(f"n_features={n_features} exceeds the qubit count {n}")
    if edge_columns < 0 or 2 * edge_columns >= genome.n_layers:
        raise ValueError("edge_columns must leave at least one column for the repeated block")

    layers = genome.n_layers
    pre = range(0, edge_columns)
    mid = range(edge_columns, layers - edge_columns)
    post = range(layers - edge_columns, layers)

    ops, slots, feats = [], [], []
    groups: dict[tuple[int, int], list[int]] = {}
    counter = 0

    def emit(columns, block, tied_from=None):
        nonlocal counter
        gates, _ = _decode_columns(genome, vocab, columns)
        local = []
        for op, w, t, col in gates:
            ops.append((op, w, t))
            feats.append(-1)
            if op == kernels.CNOT:
                slots.append(-1)
                continue
            if tied_from is not None:
                slot = tied_from[len(local)]
            else:
                slot = counter
                counter += 1
            local.append(slot)
            slots.append(slot)
            groups.setdefault((block, col), []).append(slot)
        return local

    block = 0
    if edge_columns:
        emit(pre, block)
        block += 1
    first = None
    for r in range(reuploads):
        for j in range(n_features):
            ops.append((kernels.RY, j, -1))
            slots.append(-1)
            feats.append(j)
        local = emit(mid, block, tied_from=first if tie_weights else None)
        if first is None:
            first = local
        block += 1
    if edge_columns:
        emit(post, block)

    return CompiledCircuit(
        n_qubits=n,
        ops=np.array(ops, dtype=np.int32).reshape(-1, 3),
        slots=np.array(slots, dtype=np.int32),
        features=np.array(feats, dtype=np.int32),
        n_params=counter,
        n_features=n_features,
        reuploads=reuploads,
        scale=scale,
        slot_groups={k: tuple(v) for k, v in groups.items()},
    )


def random_genome(seed, n_qubits: int, n_layers: int, vocab: GateVocabulary = GateVocabulary()) -> CircuitGenome:
    """Uniform i.i.d. genome; ``seed`` may be an int, SeedSequence or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return CircuitGenome(rng.integers(0, len(vocab), size=(n_qubits, n_layers)))


@dataclass(frozen=True)
class CircuitSpec:
    """Everything needed to turn a genome into an executable circuit."""

    n_qubits: int
    n_layers: int
    vocab: GateVocabulary = GateVocabulary()
    reuploads: int = 1
    n_features: int = 0
    scale: float = np.pi
    tie_weights: bool = False
    edge_columns: int = 0

    def build(self, genome: CircuitGenome) -> CompiledCircuit:
        if genome.shape != (self.n_qubits, self.n_layers):
            raise ValueError(f"genome shape {genome.shape} != configured {(self.n_qubits, self.n_layers)}")
        return build_reupload(genome, self.reuploads, self.n_features, self.vocab,
                              self.scale, self.tie_weights, self.edge_columns)

    def sample(self, rng) -> CircuitGenome:
        return random_genome(rng, self.n_qubits, self.n_layers, self.vocab)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "vocabulary": list(self.vocab.names),
            "reuploads": self.reuploads,
            "n_features": self.n_features,
            "feature_scale": self.scale,
            "tie_weights": self.tie_weights,
            "edge_columns": self.edge_columns,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        return cls(
            n_qubits=int(data["n_qubits"]),
            n_layers=int(data["n_layers"]),
            vocab=GateVocabulary(tuple(data.get("vocabulary", DEFAULT_VOCABULARY))),
            reuploads=int(data.get("reuploads", 1)),
            n_features=int(data.get("n_features", 0)),
            scale=float(data.get("feature_scale", np.pi)),
            tie_weights=bool(data.get("tie_weights", False)),
            edge_columns=int(data.get("edge_columns", 0)),
        )


def inherit_params(child: CompiledCircuit, sources: Sequence[tuple[CompiledCircuit, np.ndarray]]) -> np.ndarray:
    """Positional parameter inheritance, column by column.

    ``sources[j]`` is the ``(circuit, params)`` of the parent that contributed
    genome column ``j``. Slots of a column are copied when the parent's
    matching ``(block, column)`` group has the same size; otherwise they are
    zero.
    """
    out = np.zeros(child.n_params)
    for (block, col), slots in child.slot_groups.items():
        parent, values = sources[col]
        src = parent.slot_groups.get((block, col), ())
        if len(src) == len(slots) and values is not None:
            out[list(slots)] = np.asarray(values)[list(src)]
    return out
