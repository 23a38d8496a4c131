"""Kernel backend selection.

The compiled Cython extension is used when it is importable; otherwise the
numpy fallback is loaded. Set ``QUESTA_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

RX, RY, RZ, CNOT = 0, 1, 2, 3

_ckernels = None
if os.environ.get("QUESTA_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
_impl = _ckernels if _ckernels is not None else _pykernels


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python') or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _check_ops(ops, n):
    if ops.size == 0:
        return
    wires = ops[:, 1]
    if wires.min() < 0 or wires.max() >= n:
        raise ValueError("wire index out of range")
    cx = ops[:, 0] == CNOT
    if np.any(cx):
        targets = ops[cx, 2]
        if targets.min() < 0 or targets.max() >= n:
            raise ValueError("CNOT target out of range")
        if np.any(targets == wires[cx]):
            raise ValueError("CNOT control and target must differ")
    if ops[:, 0].min() < 0 or ops[:, 0].max() > CNOT:
        raise ValueError("unknown opcode")


def _prepare(ops, angles, states, n_qubits):
    ops = np.ascontiguousarray(ops, dtype=np.int32).reshape(-1, 3)
    states = np.array(states, dtype=np.complex128, order="C", ndmin=2, copy=True)
    if states.shape[1] != 1 << n_qubits:
        raise ValueError("state length does not match qubit count")
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    if angles.ndim == 1:
        angles = np.broadcast_to(angles, (states.shape[0], ops.shape[0])).copy()
    if not np.all(np.isfinite(angles)):
        raise ValueError("non-finite rotation angle")
    _check_ops(ops, n_qubits)
    return ops, angles, states


def run(ops, angles, states, n_qubits, backend=None):
    """Return a copy of ``states`` (batch, 2**n) evolved by the gate list."""
    ops, angles, states = _prepare(ops, angles, states, n_qubits)
    get_backend(backend).run(ops, angles, states)
    return states


def run_shifted(ops, angles, shift_gates, states, n_qubits, backend=None):
    """Final states with each gate in ``shift_gates`` shifted by +-pi/2.

    Shape of the result is ``(batch, len(shift_gates), 2, 2**n)``.
    """
    ops, angles, states = _prepare(ops, angles, states, n_qubits)
    shift_gates = np.ascontiguousarray(shift_gates, dtype=np.int32)
    return get_backend(backend).run_shifted(ops, angles, shift_gates, states)
