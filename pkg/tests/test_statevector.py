import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from questa.circuit import decode
from questa.statevector import (Gate, GateKind, PauliString, PauliSum, StateVector, apply_gate,
                                batch_fidelity, expectation, fidelity, full_unitary, gate_matrix,
                                simulate)

from conftest import genome, random_circuit

PLUS = StateVector(np.array([1, 1]) / np.sqrt(2))
BELL = StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2))


@pytest.mark.parametrize("kind", list(GateKind))
@pytest.mark.parametrize("angle", [0.0, 0.3, -2.1, np.pi])
def test_gate_matrices_unitary(kind, angle):
    u = gate_matrix(kind, angle)
    assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)


def test_rx_pi_on_zero():
    out = apply_gate(StateVector.zero(1), Gate(GateKind.RX, np.pi), [0])
    assert np.allclose(out.amplitudes, [0, -1j], atol=1e-15)


def test_cnot_on_10():
    out = apply_gate(StateVector.basis("10"), GateKind.CNOT, [0, 1])
    assert np.allclose(out.amplitudes, StateVector.basis("11").amplitudes)


def test_rz_on_zero():
    t = np.pi / 3
    out = apply_gate(StateVector.zero(1), Gate(GateKind.RZ, t), [0])
    assert np.allclose(out.amplitudes, [np.exp(-0.5j * t), 0], atol=1e-15)


def test_qubit_zero_is_most_significant():
    out = apply_gate(StateVector.zero(2), Gate(GateKind.RX, np.pi), [0])
    assert abs(out.amplitudes[0b10]) == pytest.approx(1.0)


@pytest.mark.parametrize("gate, wires", [
    (GateKind.CNOT, [0, 0]),
    (GateKind.CNOT, [0, 2]),
    (Gate(GateKind.RX, 1.0), [3]),
    (Gate(GateKind.RX, 1.0), [0, 1]),
    (GateKind.CNOT, [1]),
])
def test_apply_gate_rejects_bad_wires(gate, wires):
    with pytest.raises(ValueError):
        apply_gate(StateVector.zero(2), gate, wires)


def test_statevector_validation():
    with pytest.raises(ValueError):
        StateVector(np.ones(3) / np.sqrt(3))
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))
    s = StateVector.zero(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


@given(st.lists(st.tuples(st.sampled_from(["RX", "RY", "RZ", "CNOT"]), st.integers(0, 2),
                          st.floats(-10, 10, allow_nan=False)), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_norm_preserved(ops):
    s = StateVector.zero(3)
    for name, w, a in ops:
        kind = GateKind(name)
        wires = [w, (w + 1) % 3] if kind is GateKind.CNOT else [w]
        s = apply_gate(s, Gate(kind, a), wires)
        assert abs(s.norm_sq() - 1.0) < 1e-10


def test_expectation_examples():
    z = [PauliString("Z")]
    assert expectation(StateVector.zero(1), z) == pytest.approx(1.0)
    assert expectation(PLUS, z) == pytest.approx(0.0, abs=1e-15)
    assert expectation(BELL, [PauliString("ZZ")]) == pytest.approx(1.0)
    assert expectation(BELL, [PauliString("XX", 0.5), PauliString("YY", 2.0)]) == pytest.approx(0.5 - 2.0)


def test_expectation_length_mismatch():
    with pytest.raises(ValueError):
        expectation(BELL, [PauliString("Z")])
    with pytest.raises(ValueError):
        PauliSum([PauliString("Z"), PauliString("ZZ")])
    with pytest.raises(ValueError):
        PauliString("ZQ")
    with pytest.raises(ValueError):
        PauliString("Z", float("inf"))


def test_pauli_sum_matrix_matches_kron():
    x = np.array([[0, 1], [1, 0]])
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1, -1])
    h = PauliSum([PauliString("XY", 0.7), PauliString("ZI", -1.3), PauliString("YZ", 0.2)])
    ref = 0.7 * np.kron(x, y) - 1.3 * np.kron(z, np.eye(2)) + 0.2 * np.kron(y, z)
    assert np.allclose(h.matrix(), ref)


def test_imaginary_residue_is_an_error():
    h = PauliSum([PauliString("X")])
    # corrupt the operator into i*X, which is anti-Hermitian
    h._phases[0] = h._phases[0] * 1j
    with pytest.raises(RuntimeError):
        h.expect(PLUS.amplitudes[None, :])


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_expectation_bounded_by_coefficients(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    terms = [PauliString("".join(rng.choice(list("IXYZ"), n)), float(rng.normal())) for _ in range(4)]
    h = PauliSum(terms)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    s = StateVector(amps / np.linalg.norm(amps))
    assert abs(expectation(s, h)) <= h.coeff_l1 + 1e-12


def test_fidelity_examples():
    assert fidelity(StateVector.zero(1), StateVector.zero(1)) == 1.0
    assert fidelity(StateVector.zero(1), StateVector.basis("1")) == 0.0
    assert fidelity(StateVector.zero(1), PLUS) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(StateVector.zero(1), BELL)


def test_fidelity_symmetric_and_clamped(rng):
    for _ in range(50):
        a, b = (rng.normal(size=8) + 1j * rng.normal(size=8) for _ in range(2))
        sa, sb = StateVector(a / np.linalg.norm(a)), StateVector(b / np.linalg.norm(b))
        assert abs(fidelity(sa, sb) - fidelity(sb, sa)) <= 1e-14
        assert 0.0 <= fidelity(sa, sb) <= 1.0
    assert batch_fidelity(np.array([[1.0 + 1e-9, 0]]), np.array([[1.0 + 1e-9, 0]]))[0] == 1.0


def test_full_unitary_examples():
    empty = decode(genome([[0], [0]]))
    assert np.allclose(full_unitary(empty), np.eye(4))
    cnot = decode(genome([[4], [0]]))
    assert np.allclose(full_unitary(cnot), gate_matrix(GateKind.CNOT))


def test_full_unitary_size_guard():
    big = decode(genome(np.zeros((11, 1), dtype=int)))
    with pytest.raises(ValueError):
        full_unitary(big)


def test_oracle_equivalence_random(rng):
    for _ in range(50):
        circuit, params = random_circuit(rng)
        u = full_unitary(circuit, params)
        assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)
        psi = simulate(circuit, params)[0]
        assert np.max(np.abs(u[:, 0] - psi)) < 1e-10
