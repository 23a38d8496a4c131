# cython: language_level=3
"""Compiled statevector kernels.

Gate opcodes: 0 RX, 1 RY, 2 RZ, 3 CNOT. Each row of ``ops`` is
``(opcode, wire, target)``; ``target`` is only read for CNOT. Qubit 0 is the
most significant bit of the basis index. Amplitudes are handled as
interleaved (re, im) doubles.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt
from libc.string cimport memcpy

cnp.import_array()


cdef inline void _apply(int op, int wire, int target, double angle,
                        double* psi, int n, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t stride, tstride, hi, lo, i, j, i2, j2
    cdef double c, s, ar, ai, br, bi
    stride = (<Py_ssize_t>1) << (n - 1 - wire)
    if op == 3:
        tstride = (<Py_ssize_t>1) << (n - 1 - target)
        for i in range(dim):
            if (i & stride) and not (i & tstride):
                i2 = 2 * i
                j2 = 2 * (i | tstride)
                ar = psi[i2]
                ai = psi[i2 + 1]
                psi[i2] = psi[j2]
                psi[i2 + 1] = psi[j2 + 1]
                psi[j2] = ar
                psi[j2 + 1] = ai
        return
    c = cos(0.5 * angle)
    s = sin(0.5 * angle)
    hi = 0
    while hi < dim:
        for lo in range(stride):
            i2 = 2 * (hi + lo)
            j2 = i2 + 2 * stride
            ar = psi[i2]
            ai = psi[i2 + 1]
            br = psi[j2]
            bi = psi[j2 + 1]
            if op == 0:
                # [[c, -is], [-is, c]]
                psi[i2] = c * ar + s * bi
                psi[i2 + 1] = c * ai - s * br
                psi[j2] = s * ai + c * br
                psi[j2 + 1] = -s * ar + c * bi
            elif op == 1:
                psi[i2] = c * ar - s * br
                psi[i2 + 1] = c * ai - s * bi
                psi[j2] = s * ar + c * br
                psi[j2 + 1] = s * ai + c * bi
            else:
                # diag(c - is, c + is)
                psi[i2] = c * ar + s * ai
                psi[i2 + 1] = c * ai - s * ar
                psi[j2] = c * br - s * bi
                psi[j2 + 1] = c * bi + s * br
        hi += 2 * stride


cdef inline void _apply_pauli(int op, int wire, double* psi, int n,
                              Py_ssize_t dim) noexcept nogil:
    """Apply the generator Pauli of a rotation opcode (X, Y or Z)."""
    cdef Py_ssize_t stride, hi, lo, i2, j2
    cdef double ar, ai, br, bi
    stride = (<Py_ssize_t>1) << (n - 1 - wire)
    hi = 0
    while hi < dim:
        for lo in range(stride):
            i2 = 2 * (hi + lo)
            j2 = i2 + 2 * stride
            ar = psi[i2]
            ai = psi[i2 + 1]
            br = psi[j2]
            bi = psi[j2 + 1]
            if op == 0:
                psi[i2] = br
                psi[i2 + 1] = bi
                psi[j2] = ar
                psi[j2 + 1] = ai
            elif op == 1:
                # Y = [[0, -i], [i, 0]]
                psi[i2] = bi
                psi[i2 + 1] = -br
                psi[j2] = -ai
                psi[j2 + 1] = ar
            else:
                psi[j2] = -br
                psi[j2 + 1] = -bi
        hi += 2 * stride


cdef int _log2(Py_ssize_t dim) except -1:
    cdef int n = 0
    while ((<Py_ssize_t>1) << n) < dim:
        n += 1
    if ((<Py_ssize_t>1) << n) != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def run(const int[:, ::1] ops, const double[:, ::1] angles, double complex[:, ::1] states):
    """Apply the gate list to every row of ``states`` in place.

    ``angles[b, g]`` is the rotation angle of gate ``g`` for batch row ``b``.
    """
    cdef Py_ssize_t B = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t G = ops.shape[0]
    cdef Py_ssize_t b, g
    cdef int n = _log2(dim)
    if angles.shape[0] != B or angles.shape[1] != G:
        raise ValueError("angles must have shape (batch, n_gates)")
    with nogil:
        for b in range(B):
            for g in range(G):
                _apply(ops[g, 0], ops[g, 1], ops[g, 2], angles[b, g],
                       <double*>&states[b, 0], n, dim)


def run_shifted(const int[:, ::1] ops, const double[:, ::1] angles, const int[::1] shift_gates,
                const double complex[:, ::1] states):
    """Final states with each listed gate's angle shifted by +pi/2 and -pi/2.

    Returns an array of shape ``(batch, len(shift_gates), 2, dim)``; index 0
    of the third axis is the ``+pi/2`` evaluation. ``shift_gates`` must be
    strictly increasing.

    Since R(t +- pi/2) = R(t) (I -+ iP) / sqrt(2) for a rotation generated by
    the Pauli P, both shifted final states are (psi_out -+ i chi_out) / sqrt(2)
    with chi_out = U_after P psi_after: one suffix pass per shifted gate.
    """
    cdef Py_ssize_t B = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t G = ops.shape[0]
    cdef Py_ssize_t K = shift_gates.shape[0]
    cdef Py_ssize_t b, g, k, h, a
    cdef int n = _log2(dim)
    cdef double r = 1.0 / sqrt(2.0)
    cdef double pr, pi_, cr, ci
    if angles.shape[0] != B or angles.shape[1] != G:
        raise ValueError("angles must have shape (batch, n_gates)")
    for k in range(K):
        if shift_gates[k] < 0 or shift_gates[k] >= G:
            raise ValueError("shift gate index out of range")
        if k > 0 and shift_gates[k] <= shift_gates[k - 1]:
            raise ValueError("shift gate indices must be strictly increasing")
        if ops[shift_gates[k], 0] > 2:
            raise ValueError("only rotation gates can be shifted")
    out_arr = np.empty((B, K, 2, dim), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] out = out_arr
    psi_arr = np.empty(dim, dtype=np.complex128)
    cdef double complex[::1] psi_view = psi_arr
    cdef double* psi = <double*>&psi_view[0]
    cdef double* chi
    cdef double* plus
    with nogil:
        for b in range(B):
            memcpy(psi, &states[b, 0], dim * sizeof(double complex))
            k = 0
            for g in range(G):
                _apply(ops[g, 0], ops[g, 1], ops[g, 2], angles[b, g], psi, n, dim)
                if k < K and shift_gates[k] == g:
                    chi = <double*>&out[b, k, 1, 0]
                    memcpy(chi, psi, dim * sizeof(double complex))
                    _apply_pauli(ops[g, 0], ops[g, 1], chi, n, dim)
                    for h in range(g + 1, G):
                        _apply(ops[h, 0], ops[h, 1], ops[h, 2], angles[b, h], chi, n, dim)
                    k += 1
            for k in range(K):
                plus = <double*>&out[b, k, 0, 0]
                chi = <double*>&out[b, k, 1, 0]
                for a in range(dim):
                    pr = psi[2 * a]
                    pi_ = psi[2 * a + 1]
                    cr = chi[2 * a]
                    ci = chi[2 * a + 1]
                    # (psi - i chi) / sqrt2 and (psi + i chi) / sqrt2
                    plus[2 * a] = r * (pr + ci)
                    plus[2 * a + 1] = r * (pi_ - cr)
                    chi[2 * a] = r * (pr - ci)
                    chi[2 * a + 1] = r * (pi_ + cr)
    return out_arr
