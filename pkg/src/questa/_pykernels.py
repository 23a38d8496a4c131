"""Pure-numpy fallback with the same contract as the compiled kernels."""

import numpy as np

HALF_PI = np.pi / 2


def _log2(dim):
    n = int(dim).bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def _apply(op, wire, target, angles, states, n):
    batch, dim = states.shape
    if op == 3:
        idx = np.arange(dim)
        cbit = 1 << (n - 1 - wire)
        tbit = 1 << (n - 1 - target)
        perm = np.where(idx & cbit, idx ^ tbit, idx)
        states[:] = states[:, perm]
        return
    view = states.reshape(batch, 1 << wire, 2, 1 << (n - 1 - wire))
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :].copy()
    c = np.cos(0.5 * angles)[:, None, None]
    s = np.sin(0.5 * angles)[:, None, None]
    if op == 0:
        view[:, :, 0, :] = c * a0 - 1j * s * a1
        view[:, :, 1, :] = -1j * s * a0 + c * a1
    elif op == 1:
        view[:, :, 0, :] = c * a0 - s * a1
        view[:, :, 1, :] = s * a0 + c * a1
    else:
        view[:, :, 0, :] = (c - 1j * s) * a0
        view[:, :, 1, :] = (c + 1j * s) * a1


def run(ops, angles, states):
    batch, dim = states.shape
    n = _log2(dim)
    if angles.shape != (batch, ops.shape[0]):
        raise ValueError("angles must have shape (batch, n_gates)")
    for g in range(ops.shape[0]):
        op, wire, target = (int(v) for v in ops[g])
        _apply(op, wire, target, angles[:, g], states, n)


def run_shifted(ops, angles, shift_gates, states):
    batch, dim = states.shape
    n_gates = ops.shape[0]
    k = len(shift_gates)
    if angles.shape != (batch, n_gates):
        raise ValueError("angles must have shape (batch, n_gates)")
    shift_gates = np.asarray(shift_gates)
    if k and (shift_gates.min() < 0 or shift_gates.max() >= n_gates):
        raise ValueError("shift gate index out of range")
    if k > 1 and np.any(np.diff(shift_gates) <= 0):
        raise ValueError("shift gate indices must be strictly increasing")
    if k and np.any(ops[shift_gates, 0] > 2):
        raise ValueError("only rotation gates can be shifted")
    # rows ordered (batch, shift, sign) to match the compiled layout
    big = np.repeat(angles, 2 * k, axis=0).reshape(batch, k, 2, n_gates)
    for j, g in enumerate(shift_gates):
        big[:, j, 0, g] += HALF_PI
        big[:, j, 1, g] -= HALF_PI
    out = np.repeat(states, 2 * k, axis=0)
    run(ops, big.reshape(-1, n_gates), out)
    return out.reshape(batch, k, 2, dim)
