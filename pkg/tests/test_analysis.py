import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from questa import kernels
from questa.analysis import (DagReport, build_dag, expressivity, haar_bin_mass, haar_bin_masses,
                             haar_density, kl_expressivity)
from questa.circuit import CompiledCircuit, decode, random_genome

from conftest import genome

seeds = st.integers(0, 2**31 - 1)


def haar_fidelities(rng, dim, samples):
    return 1.0 - rng.uniform(size=samples) ** (1.0 / (dim - 1))


def test_dag_examples():
    assert build_dag(decode(genome([[0], [0]]))).path_count == 2
    assert build_dag(decode(genome([[1, 2, 3, 1, 2]]))).path_count == 1
    r = build_dag(decode(genome([[4], [0]])))
    assert (r.path_count, r.n_nodes, r.n_edges) == (4, 5, 4)


def test_dag_two_cnots_in_chain():
    # CNOT(0,1) then CNOT(1,2): frontiers [2,2,1] -> [2,3,3] -> 8 paths
    assert build_dag(decode(genome([[4, 0], [0, 4], [0, 0]]))).path_count == 8


def test_dag_report_roundtrip():
    r = build_dag(decode(random_genome(3, 8, 40)))
    d = r.to_dict()
    assert isinstance(d["path_count"], str)
    assert DagReport.from_dict(d) == r
    assert d["log_path_count"] == pytest.approx(math.log(r.path_count))


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_path_count_lower_bound_and_single_qubit_case(seed):
    g = random_genome(seed, 4, 5)
    assert build_dag(decode(g)).path_count >= 4
    no_cnot = np.where(g.entries == 4, 1, g.entries)
    assert build_dag(decode(genome(no_cnot))).path_count == 4


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_path_count_ignores_rotation_type(seed):
    rng = np.random.default_rng(seed)
    g = random_genome(rng, 4, 5)
    e = g.entries.copy()
    rot = (e >= 1) & (e <= 3)
    e[rot] = rng.integers(1, 4, size=int(rot.sum()))
    assert build_dag(decode(g)).path_count == build_dag(decode(genome(e))).path_count


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_adding_cnot_never_decreases_path_count(seed):
    rng = np.random.default_rng(seed)
    c = decode(random_genome(rng, 4, 5))
    w = int(rng.integers(0, 4))
    t = int((w + rng.integers(1, 4)) % 4)
    pos = int(rng.integers(0, c.n_gates + 1))
    ops = np.insert(c.ops, pos, [kernels.CNOT, w, t], axis=0)
    slots = np.insert(c.slots, pos, -1)
    feats = np.insert(c.features, pos, -1)
    bigger = CompiledCircuit(4, ops, slots, feats, c.n_params)
    assert build_dag(bigger).path_count >= build_dag(c).path_count


def test_path_count_is_exact_big_integer():
    g = np.zeros((2, 120), dtype=int)
    g[0, :] = 4
    r = build_dag(decode(genome(g)))
    assert r.path_count == 2 ** 121  # every CNOT doubles both frontiers
    assert r.log_path_count == pytest.approx(121 * math.log(2))


def test_haar_mass_examples():
    assert haar_bin_mass(0.0, 0.5, 2) == pytest.approx(0.5)
    assert haar_bin_mass(0.0, 1.0, 4) == pytest.approx(1.0)
    assert haar_density(0.0, 4) == pytest.approx(3.0)
    for dim in (2, 4, 16, 1024):
        assert haar_bin_masses(75, dim).sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        haar_bin_mass(0.6, 0.5, 4)
    with pytest.raises(ValueError):
        haar_bin_mass(0.0, 0.5, 1)


def test_haar_calibration(rng):
    for n in (1, 2, 3, 4):
        dim = 2 ** n
        rep = kl_expressivity(haar_fidelities(rng, dim, 5000), dim, 75)
        assert abs(rep.expressivity) < 0.01
        assert rep.histogram.sum() == pytest.approx(1.0, abs=1e-12)


def test_parameterless_circuit_closed_form():
    for n in (2, 3):
        c = decode(genome(np.zeros((n, 2), dtype=int)))
        rep = expressivity(c, 500, 75, 0)
        q_top = haar_bin_masses(75, 2 ** n)[-1]
        assert rep.expressivity == pytest.approx(-math.log((1 + 1e-10) / (q_top + 1e-10)))
        assert rep.expressivity < -2


def test_bloch_sphere_circuit_is_nearly_haar():
    rep = expressivity(decode(genome([[3, 2, 3]])), 5000, 75, 0)
    assert abs(rep.expressivity) < 0.05


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_expressivity_nonpositive(seed):
    c = decode(random_genome(seed, 3, 4))
    rep = expressivity(c, 200, 10, seed)
    assert rep.expressivity <= 0.0
    assert rep.histogram.sum() == pytest.approx(1.0, abs=1e-12)


def test_expressivity_deterministic_and_validated():
    c = decode(random_genome(1, 3, 6))
    a, b = expressivity(c, 300, 20, 9), expressivity(c, 300, 20, 9)
    assert a.expressivity == b.expressivity
    with pytest.raises(ValueError):
        expressivity(c, 50, 20)
    with pytest.raises(ValueError):
        expressivity(c, 300, 5)


def test_fidelity_one_lands_in_last_bin():
    rep = kl_expressivity(np.ones(10), 4, 10)
    assert rep.histogram[-1] == 1.0


def test_path_count_tracks_cnot_count():
    rng = np.random.default_rng(0)
    logs, cnots = [], []
    for _ in range(500):
        c = decode(random_genome(rng, 8, 12))
        logs.append(build_dag(c).log_path_count)
        cnots.append(c.cnot_count())
    assert spearmanr(logs, cnots).statistic > 0.5


def enumerate_paths(circuit):
    """Explicit DAG with per-wire edges, paths counted by exhaustive DFS."""
    n = circuit.n_qubits
    edges = {("in", q): [] for q in range(n)}
    last = {q: ("in", q) for q in range(n)}
    for g, (op, w, t) in enumerate(circuit.ops):
        node = ("gate", g)
        edges[node] = []
        for wire in ((w, t) if op == kernels.CNOT else (w,)):
            edges[last[wire]].append(node)
            last[wire] = node
    for q in range(n):
        edges.setdefault(("out", q), [])
        edges[last[q]].append(("out", q))

    def walk(node):
        if node[0] == "out":
            return 1
        return sum(walk(nxt) for nxt in edges[node])

    return sum(walk(("in", q)) for q in range(n))


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_path_count_matches_enumeration(seed):
    c = decode(random_genome(seed, 4, 5))
    assert build_dag(c).path_count == enumerate_paths(c)
