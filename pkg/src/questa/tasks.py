"""Task definitions: Hamiltonians, exact ground energies, and datasets.

A task tells the trainer which observables to measure on each input row and
how to turn those expectation values into a scalar loss (plus its gradient
with respect to the expectations and any classical output parameters).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .statevector import PauliString, PauliSum

MAX_EXACT_QUBITS = 12


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    n: int
    terms: tuple[PauliString, ...]
    boundary: str = "periodic"

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("Hamiltonian has no terms")
        for t in terms:
            if t.n != self.n:
                raise ValueError(f"term {t.letters!r} does not act on {self.n} qubits")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_sum", PauliSum(terms))

    @property
    def pauli_sum(self) -> PauliSum:
        return self._sum

    def matrix(self) -> np.ndarray:
        return self._sum.matrix()

    def to_dict(self) -> dict:
        return {"n": self.n, "boundary": self.boundary,
                "terms": [{"coeff": t.coeff, "paulis": t.letters} for t in self.terms]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Hamiltonian":
        n = int(data["n"])
        terms = tuple(PauliString(t["paulis"], float(t["coeff"])) for t in data["terms"])
        return cls(n, terms, boundary=data.get("boundary", "open"))

    @classmethod
    def from_json(cls, text: str) -> "Hamiltonian":
        return cls.from_dict(json.loads(text))


def _pauli(n: int, placements: dict[int, str], coeff: float) -> PauliString:
    letters = ["I"] * n
    for q, ch in placements.items():
        letters[q] = ch
    return PauliString("".join(letters), coeff)


def _bonds(n: int, boundary: str):
    if boundary == "periodic":
        return [(i, (i + 1) % n) for i in range(n)]
    if boundary == "open":
        return [(i, i + 1) for i in range(n - 1)]
    raise ValueError(f"unknown boundary {boundary!r}")


def build_tfim(n: int, boundary: str = "periodic") -> Hamiltonian:
    """sum_i Z_i Z_{i+1} - X_i."""
    if n < 2:
        raise ValueError("TFIM needs n >= 2")
    terms = [_pauli(n, {i: "Z", j: "Z"}, 1.0) for i, j in _bonds(n, boundary)]
    terms += [_pauli(n, {i: "X"}, -1.0) for i in range(n)]
    return Hamiltonian(n, tuple(terms), boundary)


def build_heisenberg(n: int, boundary: str = "periodic", field: float = 1.0) -> Hamiltonian:
    """sum over bonds of XX + YY + ZZ, plus ``field`` * Z_i on every site."""
    if n < 2:
        raise ValueError("Heisenberg model needs n >= 2")
    terms = []
    for i, j in _bonds(n, boundary):
        for ch in "XYZ":
            terms.append(_pauli(n, {i: ch, j: ch}, 1.0))
    if field != 0.0:
        terms += [_pauli(n, {i: "Z"}, field) for i in range(n)]
    return Hamiltonian(n, tuple(terms), boundary)


def exact_ground_energy(h: Hamiltonian) -> float:
    """Smallest eigenvalue of the dense Hamiltonian matrix."""
    if h.n > MAX_EXACT_QUBITS:
        raise ValueError(f"{h.n} qubits is too large for dense diagonalization (max {MAX_EXACT_QUBITS})")
    m = h.matrix()
    if np.allclose(m.imag, 0.0, atol=0.0):
        m = m.real
    return float(scipy.linalg.eigvalsh(m, subset_by_index=[0, 0])[0])


def representation_fitness(mse: float) -> float:
    """-ln(MSE); +inf for a perfect fit."""
    if mse < 0 or not math.isfinite(mse):
        raise ValueError(f"MSE must be a finite non-negative number, got {mse!r}")
    if mse == 0:
        return math.inf
    return -math.log(mse)


def _z_observable(n: int, qubit: int) -> PauliSum:
    return PauliSum([_pauli(n, {qubit: "Z"}, 1.0)])


class VQETask:
    kind = "vqe"
    uses_affine = False

    def __init__(self, hamiltonian: Hamiltonian):
        self.hamiltonian = hamiltonian
        self.n_features = 0

    def inputs(self) -> np.ndarray:
        return np.zeros((1, 0))

    def observables(self, n_qubits: int) -> list[PauliSum]:
        if n_qubits != self.hamiltonian.n:
            raise ValueError(f"Hamiltonian acts on {self.hamiltonian.n} qubits, circuit has {n_qubits}")
        return [self.hamiltonian.pauli_sum]

    def loss_terms(self, expect: np.ndarray, affine=None):
        return float(expect[0, 0]), np.ones_like(expect), None

    def fitness(self, loss: float) -> float:
        return -loss

    def metrics(self, loss: float) -> dict:
        return {"energy": loss}


class RepresentationTask:
    """Fit y = w * <Z_0> + b to targets over normalized coordinates.

    The scalar coordinate is fed to ``replicas`` encoding qubits at once so the
    reachable frequency spectrum grows with the qubit count.
    """

    kind = "representation"
    uses_affine = True

    def __init__(self, coords: np.ndarray, targets: np.ndarray, replicas: int = 1):
        coords = np.asarray(coords, dtype=float).ravel()
        targets = np.asarray(targets, dtype=float).ravel()
        if coords.size == 0 or coords.size != targets.size:
            raise ValueError("representation data must be non-empty with matching lengths")
        self.coords = coords
        self.targets = targets
        self.replicas = int(replicas)
        self.n_features = self.replicas

    def inputs(self) -> np.ndarray:
        return np.repeat(self.coords[:, None], self.replicas, axis=1)

    def observables(self, n_qubits: int) -> list[PauliSum]:
        return [_z_observable(n_qubits, 0)]

    def default_affine(self) -> np.ndarray:
        return np.array([1.0, 0.0])

    def predict(self, expect: np.ndarray, affine) -> np.ndarray:
        return affine[0] * expect[:, 0] + affine[1]

    def loss_terms(self, expect: np.ndarray, affine):
        z = expect[:, 0]
        resid = affine[0] * z + affine[1] - self.targets
        m = resid.size
        loss = float(np.mean(resid**2))
        d_expect = np.zeros_like(expect)
        d_expect[:, 0] = 2.0 * resid * affine[0] / m
        d_affine = np.array([2.0 * np.sum(resid * z) / m, 2.0 * np.sum(resid) / m])
        return loss, d_expect, d_affine

    def fitness(self, loss: float) -> float:
        return representation_fitness(loss)

    def metrics(self, loss: float) -> dict:
        return {"mse": loss}


class ClassificationTask:
    """Softmax cross-entropy over logits <Z_j>, j < n_classes."""

    kind = "classification"
    uses_affine = False

    def __init__(self, features: np.ndarray, labels: np.ndarray, n_classes: int | None = None):
        features = np.atleast_2d(np.asarray(features, dtype=float))
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if features.shape[0] == 0 or features.shape[0] != labels.size:
            raise ValueError("classification data must be non-empty with one label per row")
        n_classes = int(labels.max()) + 1 if n_classes is None else int(n_classes)
        if labels.min() < 0 or labels.max() >= n_classes:
            raise ValueError("labels must lie in 0..C-1")
        if n_classes < 2:
            raise ValueError("classification needs at least two classes")
        self.features = features
        self.labels = labels
        self.n_classes = n_classes
        self.n_features = features.shape[1]

    def inputs(self) -> np.ndarray:
        return self.features

    def observables(self, n_qubits: int) -> list[PauliSum]:
        if self.n_classes > n_qubits:
            raise ValueError("need at least one qubit per class")
        if self.n_features > n_qubits:
            raise ValueError("feature dimension exceeds qubit count")
        return [_z_observable(n_qubits, j) for j in range(self.n_classes)]

    def loss_terms(self, expect: np.ndarray, affine=None):
        logits = expect
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
        m = logits.shape[0]
        rows = np.arange(m)
        loss = float(-np.mean(logp[rows, self.labels]))
        d = np.exp(logp)
        d[rows, self.labels] -= 1.0
        return loss, d / m, None

    def accuracy(self, expect: np.ndarray) -> float:
        return float(np.mean(np.argmax(expect, axis=1) == self.labels))

    def fitness(self, loss: float) -> float:
        return -loss

    def metrics(self, loss: float) -> dict:
        return {"cross_entropy": loss}


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    task = ClassificationTask(np.zeros((logits.shape[0], 1)), labels, logits.shape[1])
    return task.loss_terms(logits)[0]


def minmax_normalize(columns: np.ndarray) -> np.ndarray:
    """Scale each column to [-1, 1]; constant columns become zeros."""
    a = np.atleast_2d(np.asarray(columns, dtype=float))
    lo = a.min(axis=0)
    hi = a.max(axis=0)
    span = hi - lo
    out = np.zeros_like(a)
    ok = span > 0
    out[:, ok] = 2.0 * (a[:, ok] - lo[ok]) / span[ok] - 1.0
    return out


@dataclass(frozen=True)
class CSVSchema:
    kind: str
    label_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    classes: tuple[str, ...] | None = None
    coordinate_column: str | None = None
    value_column: str | None = None
    replicas: int = 1


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValueError(f"row {row}: non-numeric value {cell!r} in column {col!r}") from None


def load_csv_dataset(path, schema: CSVSchema):
    """Load a classification or representation dataset from a headed CSV."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            rows.append([c.strip() for c in row])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    col = {name: i for i, name in enumerate(header)}

    def need(name):
        if name not in col:
            raise ValueError(f"{path}: missing column {name!r}")
        return col[name]

    if schema.kind == "classification":
        li = need(schema.label_column or "label")
        names = schema.feature_columns or tuple(h for h in header if h != header[li])
        fidx = [need(c) for c in names]
        feats = np.array([[_parse_float(r[i], n + 2, header[i]) for i in fidx] for n, r in enumerate(rows)])
        raw = [r[li] for r in rows]
        if schema.classes is not None:
            lookup = {c: k for k, c in enumerate(schema.classes)}
            unknown = sorted(set(raw) - set(lookup))
            if unknown:
                raise ValueError(f"{path}: unknown label values {unknown}")
            labels = np.array([lookup[v] for v in raw])
            n_classes = len(schema.classes)
        else:
            try:
                labels = np.array([int(v) for v in raw])
            except ValueError:
                raise ValueError(f"{path}: labels must be integers unless 'classes' is given") from None
            if labels.min() < 0:
                raise ValueError(f"{path}: unknown label values {sorted(set(labels[labels < 0]))}")
            n_classes = int(labels.max()) + 1
        return ClassificationTask(minmax_normalize(feats), labels, n_classes)
    if schema.kind == "representation":
        xi = need(schema.coordinate_column or "x")
        yi = need(schema.value_column or "y")
        x = np.array([_parse_float(r[xi], n + 2, header[xi]) for n, r in enumerate(rows)])
        y = np.array([_parse_float(r[yi], n + 2, header[yi]) for n, r in enumerate(rows)])
        return RepresentationTask(minmax_normalize(x[:, None])[:, 0], y, schema.replicas)
    raise ValueError(f"unknown dataset kind {schema.kind!r}")


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def signal_target(x: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * x) + 0.5 * np.sin(6 * np.pi * x)


def make_signal_task(points: int = 64, replicas: int = 1) -> RepresentationTask:
    """sin(2 pi x) + 0.5 sin(6 pi x) on ``points`` uniform samples of [0, 1]."""
    x = np.linspace(0.0, 1.0, points)
    return RepresentationTask(minmax_normalize(x[:, None])[:, 0], signal_target(x), replicas)


def make_blobs(samples: int = 200, features: int = 4, classes: int = 2,
               separation: float = 3.0, seed: int = 0):
    """Isotropic Gaussian blobs with centres ``separation`` apart (raw scale)."""
    rng = np.random.default_rng(seed)
    centres = np.zeros((classes, features))
    for c in range(classes):
        centres[c] = separation * (c - (classes - 1) / 2.0)
    labels = np.arange(samples) % classes
    feats = centres[labels] + rng.normal(size=(samples, features))
    return feats, labels


def make_blobs_task(samples: int = 200, features: int = 4, classes: int = 2,
                    separation: float = 3.0, seed: int = 0) -> ClassificationTask:
    feats, labels = make_blobs(samples, features, classes, separation, seed)
    return ClassificationTask(minmax_normalize(feats), labels, classes)
