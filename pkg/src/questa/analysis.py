"""Training-free circuit proxies: DAG path count and KL expressivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .statevector import batch_fidelity

KL_EPS = 1e-10
DEFAULT_SAMPLES = 5000
DEFAULT_BINS = 75


@dataclass(frozen=True)
class DagReport:
    n_nodes: int
    n_edges: int
    path_count: int

    @property
    def log_path_count(self) -> float:
        return math.log(self.path_count)

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "path_count": str(self.path_count),
            "log_path_count": self.log_path_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DagReport":
        return cls(int(data["n_nodes"]), int(data["n_edges"]), int(data["path_count"]))


def build_dag(circuit) -> DagReport:
    """Count input-to-output paths of the circuit DAG.

    Nodes are one virtual input and output per qubit plus one node per gate;
    each wire contributes an edge between consecutive operations on it. The
    count is the exact sum over all (input, output) pairs, computed by dynamic
    programming in gate order (which is a topological order).
    """
    n = circuit.n_qubits
    frontier = [1] * n  # paths reaching the current end of each wire
    edges = n
    for op, wire, target in circuit.ops:
        if op == kernels.CNOT:
            total = frontier[wire] + frontier[target]
            frontier[wire] = total
            frontier[target] = total
            edges += 2
        else:
            edges += 1
    return DagReport(n_nodes=2 * n + circuit.n_gates, n_edges=edges, path_count=sum(frontier))


def haar_density(f, dim: int):
    """Haar fidelity density (dim - 1) * (1 - F)**(dim - 2)."""
    return (dim - 1) * (1.0 - np.asarray(f, dtype=float)) ** (dim - 2)


def haar_bin_mass(lo: float, hi: float, dim: int) -> float:
    """Exact Haar probability of F in [lo, hi)."""
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"invalid bin [{lo}, {hi})")
    if dim < 2:
        raise ValueError("Hilbert dimension must be >= 2")
    return (1.0 - lo) ** (dim - 1) - (1.0 - hi) ** (dim - 1)


def haar_bin_masses(bins: int, dim: int) -> np.ndarray:
    edges = np.linspace(0.0, 1.0, bins + 1)
    return np.array([haar_bin_mass(edges[b], edges[b + 1], dim) for b in range(bins)])


@dataclass(frozen=True, eq=False)
class ExpressivityReport:
    expressivity: float
    samples: int
    bins: int
    histogram: np.ndarray
    dim: int

    @property
    def kl(self) -> float:
        return -self.expressivity

    def to_dict(self) -> dict:
        return {
            "expressivity": self.expressivity,
            "samples": self.samples,
            "bins": self.bins,
            "dim": self.dim,
            "histogram": self.histogram.tolist(),
        }


def fidelity_histogram(fidelities, bins: int) -> np.ndarray:
    f = np.asarray(fidelities, dtype=float)
    idx = np.minimum((f * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return counts / counts.sum()


def kl_expressivity(fidelities, dim: int, bins: int = DEFAULT_BINS) -> ExpressivityReport:
    """-KL(empirical fidelity histogram || Haar bin masses)."""
    f = np.asarray(fidelities, dtype=float)
    p = fidelity_histogram(f, bins)
    q = haar_bin_masses(bins, dim)
    nz = p > 0
    kl = float(np.sum(p[nz] * np.log((p[nz] + KL_EPS) / (q[nz] + KL_EPS))))
    # The smoothed plug-in value can dip a hair below zero; KL itself cannot.
    e = -max(kl, 0.0)
    return ExpressivityReport(expressivity=e, samples=f.size, bins=bins, histogram=p, dim=dim)


def sample_fidelities(circuit, samples: int, rng, chunk: int = 2048, backend=None) -> np.ndarray:
    """Fidelities between final states for independent uniform (theta, phi) draws.

    Encoding gates see zero-valued inputs, so only the trainable part is
    probed.
    """
    d = circuit.n_params
    theta = rng.uniform(0.0, 2 * np.pi, size=(samples, d))
    phi = rng.uniform(0.0, 2 * np.pi, size=(samples, d))
    if d == 0:
        return np.ones(samples)
    dim = 1 << circuit.n_qubits
    base = circuit.angles(np.zeros(d))[0]
    pmask = circuit.slots >= 0
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        stop = min(samples, start + chunk)
        rows = stop - start
        angles = np.tile(base, (2 * rows, 1))
        angles[:rows, pmask] = theta[start:stop][:, circuit.slots[pmask]]
        angles[rows:, pmask] = phi[start:stop][:, circuit.slots[pmask]]
        states = np.zeros((2 * rows, dim), dtype=complex)
        states[:, 0] = 1.0
        states = kernels.run(circuit.ops, angles, states, circuit.n_qubits, backend=backend)
        out[start:stop] = batch_fidelity(states[:rows], states[rows:])
    return out


def expressivity(circuit, samples: int = DEFAULT_SAMPLES, bins: int = DEFAULT_BINS,
                 rng_seed=0, backend=None) -> ExpressivityReport:
    """Expressivity E(c) = -KL(P(c, F) || P_Haar(F)) from sampled fidelities."""
    if samples < 100:
        raise ValueError("expressivity needs at least 100 samples")
    if bins < 10:
        raise ValueError("expressivity needs at least 10 bins")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    f = sample_fidelities(circuit, samples, rng, backend=backend)
    return kl_expressivity(f, 1 << circuit.n_qubits, bins)
