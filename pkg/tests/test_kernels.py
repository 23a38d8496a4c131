import numpy as np
import pytest

from questa import kernels
from questa.circuit import decode, random_genome

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def _random_problem(rng, n, gates, batch):
    ops = []
    for _ in range(gates):
        op = int(rng.integers(0, 4))
        w = int(rng.integers(0, n))
        t = int((w + 1 + rng.integers(0, n - 1)) % n) if op == kernels.CNOT and n > 1 else -1
        if op == kernels.CNOT and n == 1:
            op = kernels.RY
        ops.append((op, w, t))
    ops = np.array(ops, dtype=np.int32)
    angles = rng.uniform(-np.pi, np.pi, (batch, gates))
    states = rng.normal(size=(batch, 1 << n)) + 1j * rng.normal(size=(batch, 1 << n))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    return ops, angles, states


def test_compiled_backend_is_active_by_default():
    # the package is built with the extension; the fallback is a safety net
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.get_backend("python") is not None
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_backends_agree(n):
    rng = np.random.default_rng(n)
    ops, angles, states = _random_problem(rng, n, 25, 7)
    a = kernels.run(ops, angles, states, n, backend="python")
    b = kernels.run(ops, angles, states, n, backend="cython")
    assert np.max(np.abs(a - b)) < 1e-13
    rot = np.flatnonzero(ops[:, 0] < kernels.CNOT).astype(np.int32)
    sa = kernels.run_shifted(ops, angles, rot, states, n, backend="python")
    sb = kernels.run_shifted(ops, angles, rot, states, n, backend="cython")
    assert sa.shape == (7, rot.size, 2, 1 << n)
    assert np.max(np.abs(sa - sb)) < 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_shifted_matches_literal_shift(backend):
    rng = np.random.default_rng(5)
    ops, angles, states = _random_problem(rng, 3, 15, 2)
    rot = np.flatnonzero(ops[:, 0] < kernels.CNOT).astype(np.int32)
    out = kernels.run_shifted(ops, angles, rot, states, 3, backend=backend)
    for k, g in enumerate(rot):
        for s, sign in enumerate((1, -1)):
            shifted = angles.copy()
            shifted[:, g] += sign * np.pi / 2
            ref = kernels.run(ops, shifted, states, 3, backend="python")
            assert np.max(np.abs(out[:, k, s] - ref)) < 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_run_does_not_mutate_input(backend):
    rng = np.random.default_rng(0)
    ops, angles, states = _random_problem(rng, 2, 5, 1)
    before = states.copy()
    kernels.run(ops, angles, states, 2, backend=backend)
    assert np.array_equal(states, before)


@pytest.mark.parametrize("backend", BACKENDS)
def test_validation(backend):
    states = np.zeros((1, 4), complex)
    states[0, 0] = 1
    with pytest.raises(ValueError):
        kernels.run(np.array([[0, 2, -1]]), np.zeros(1), states, 2, backend=backend)
    with pytest.raises(ValueError):
        kernels.run(np.array([[3, 0, 0]]), np.zeros(1), states, 2, backend=backend)
    with pytest.raises(ValueError):
        kernels.run(np.array([[7, 0, -1]]), np.zeros(1), states, 2, backend=backend)
    with pytest.raises(ValueError):
        kernels.run(np.array([[0, 0, -1]]), np.array([np.nan]), states, 2, backend=backend)
    ops = np.array([[0, 0, -1], [3, 0, 1]], dtype=np.int32)
    with pytest.raises(ValueError):
        kernels.run_shifted(ops, np.zeros(2), np.array([1], np.int32), states, 2, backend=backend)
    with pytest.raises(ValueError):
        kernels.run_shifted(ops, np.zeros(2), np.array([0, 0], np.int32), states, 2, backend=backend)


def test_circuit_level_backend_agreement():
    rng = np.random.default_rng(3)
    circuit = decode(random_genome(rng, 4, 10))
    angles = circuit.angles(rng.normal(size=circuit.n_params))
    init = np.zeros((1, 16), complex)
    init[0, 0] = 1
    outs = [kernels.run(circuit.ops, angles, init, 4, backend=b) for b in BACKENDS]
    assert np.allclose(outs[0], outs[-1], atol=1e-13)
