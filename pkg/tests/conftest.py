import numpy as np
import pytest

from questa.circuit import CircuitGenome, GateVocabulary, decode, random_genome


def genome(rows):
    return CircuitGenome(np.array(rows))


def random_circuit(rng, n_max=3, depth_max=8):
    n = int(rng.integers(1, n_max + 1))
    layers = int(rng.integers(1, depth_max + 1))
    circuit = decode(random_genome(rng, n, layers))
    params = rng.uniform(-np.pi, np.pi, circuit.n_params)
    return circuit, params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def vocab():
    return GateVocabulary()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
