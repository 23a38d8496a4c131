"""Trained focusing: losses, parameter-shift gradients, Adam, parameter reuse."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .statevector import simulate

SHIFT = np.pi / 2


class DivergenceError(RuntimeError):
    """Raised when the loss becomes non-finite during focusing."""


@dataclass(frozen=True, eq=False)
class ParameterVector:
    values: np.ndarray
    affine: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.affine is not None:
            a = np.array(self.affine, dtype=float).ravel()
            if a.size != 2 or not np.all(np.isfinite(a)):
                raise ValueError("affine output parameters must be two finite numbers")
            a.setflags(write=False)
            object.__setattr__(self, "affine", a)

    def __len__(self) -> int:
        return self.values.size

    def flat(self) -> np.ndarray:
        if self.affine is None:
            return self.values.copy()
        return np.concatenate([self.values, self.affine])

    def with_flat(self, flat: np.ndarray) -> "ParameterVector":
        d = self.values.size
        return ParameterVector(flat[:d], None if self.affine is None else flat[d:])

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(),
                "affine": None if self.affine is None else self.affine.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterVector":
        return cls(np.array(data["values"], dtype=float), data.get("affine"))


def as_params(params, task=None) -> ParameterVector:
    if isinstance(params, ParameterVector):
        return params
    affine = task.default_affine() if task is not None and task.uses_affine else None
    return ParameterVector(np.asarray(params, dtype=float), affine)


@dataclass(frozen=True)
class ReuseConfig:
    alpha: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"reuse alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class OptimizerConfig:
    steps: int = 500
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tol: float = 1e-8
    patience: int = 20


@dataclass
class TrainReport:
    final_loss: float
    best_loss: float
    trajectory: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.trajectory)

    def to_dict(self) -> dict:
        return {"final_loss": self.final_loss, "best_loss": self.best_loss, "steps": self.steps,
                "trajectory": list(self.trajectory), "wall_time": self.wall_time}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["step", "loss"])
        for i, v in enumerate(self.trajectory):
            w.writerow([i, repr(v)])
        return buf.getvalue()


def _initial_states(batch: int, n: int) -> np.ndarray:
    states = np.zeros((batch, 1 << n), dtype=complex)
    states[:, 0] = 1.0
    return states


def _expectations(states: np.ndarray, observables) -> np.ndarray:
    return np.stack([obs.expect(states) for obs in observables], axis=-1)


def _check(circuit, params: ParameterVector, task):
    if params.values.size != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.values.size}")
    if task.uses_affine and params.affine is None:
        raise ValueError("task needs affine output parameters")


def loss(circuit, params, task) -> float:
    """Task loss of ``circuit`` at ``params``."""
    params = as_params(params, task)
    _check(circuit, params, task)
    x = task.inputs()
    states = simulate(circuit, params.values, x)
    expect = _expectations(states, task.observables(circuit.n_qubits))
    return task.loss_terms(expect, params.affine)[0]


def value_and_grad(circuit, params, task, backend=None):
    """Loss, parameter-shift gradient over slots, and affine gradient (or None).

    Every gate carrying a parameter slot is evaluated at angle +-pi/2;
    contributions of gates sharing a slot are summed.
    """
    params = as_params(params, task)
    _check(circuit, params, task)
    x = task.inputs()
    observables = task.observables(circuit.n_qubits)
    angles = circuit.angles(params.values, x)
    n = circuit.n_qubits
    init = _initial_states(angles.shape[0], n)
    final = kernels.run(circuit.ops, angles, init, n, backend=backend)
    expect = _expectations(final, observables)
    value, d_expect, d_affine = task.loss_terms(expect, params.affine)
    grad = np.zeros(circuit.n_params)
    pg = circuit.param_gates
    if pg.size:
        if np.any(circuit.ops[pg, 0] > kernels.RZ):
            raise ValueError("parameter slot on a non-rotation gate")
        shifted = kernels.run_shifted(circuit.ops, angles, pg, init, n, backend=backend)
        e = _expectations(shifted, observables)  # (batch, k, 2, m)
        de = 0.5 * (e[:, :, 0, :] - e[:, :, 1, :])
        per_gate = np.einsum("bm,bkm->k", d_expect, de)
        grad = np.bincount(circuit.slots[pg], weights=per_gate, minlength=circuit.n_params)
    return value, grad, d_affine


def gradient(circuit, params, task) -> np.ndarray:
    """d loss / d theta for every parameter slot, via the parameter-shift rule."""
    return value_and_grad(circuit, params, task)[1]


def focus(circuit, init_params, task, cfg: OptimizerConfig = OptimizerConfig()):
    """Adam descent from ``init_params``; returns the best-seen parameters.

    Stops early once |delta loss| < tol for ``patience`` consecutive steps.
    """
    start = time.perf_counter()
    params = as_params(init_params, task)
    _check(circuit, params, task)
    if cfg.steps <= 0:
        value = loss(circuit, params, task)
        return params, TrainReport(value, value, [], time.perf_counter() - start)
    flat = params.flat()
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    best_flat, best_loss = flat.copy(), math.inf
    trajectory: list[float] = []
    prev, calm = None, 0
    for step in range(1, cfg.steps + 1):
        current = params.with_flat(flat)
        value, g, ga = value_and_grad(circuit, current, task)
        if not math.isfinite(value) or not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite loss at step {step}")
        trajectory.append(value)
        if value < best_loss:
            best_loss, best_flat = value, flat.copy()
        if prev is not None and abs(value - prev) < cfg.tol:
            calm += 1
            if calm >= cfg.patience:
                break
        else:
            calm = 0
        prev = value
        if step == cfg.steps:
            break
        full = g if ga is None else np.concatenate([g, ga])
        m = cfg.beta1 * m + (1 - cfg.beta1) * full
        v = cfg.beta2 * v + (1 - cfg.beta2) * full * full
        mhat = m / (1 - cfg.beta1**step)
        vhat = v / (1 - cfg.beta2**step)
        flat = flat - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
    report = TrainReport(trajectory[-1], best_loss, trajectory, time.perf_counter() - start)
    return params.with_flat(best_flat), report


def reuse(theta_i: ParameterVector, theta_best: ParameterVector, cfg: ReuseConfig = ReuseConfig()) -> ParameterVector:
    """alpha * theta_best + (1 - alpha) * theta_i.

    When the lengths differ only the common prefix is blended; the remaining
    entries keep theta_i's values.
    """
    a = cfg.alpha
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"reuse alpha must lie in [0, 1], got {a}")
    vi, vb = theta_i.values, theta_best.values
    k = min(vi.size, vb.size)
    out = vi.copy()
    out[:k] = a * vb[:k] + (1 - a) * vi[:k]
    affine = theta_i.affine
    if affine is not None and theta_best.affine is not None:
        affine = a * theta_best.affine + (1 - a) * affine
    return ParameterVector(out, affine)
