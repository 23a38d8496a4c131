"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

The lines are echoed in pytest's terminal summary. Running this file directly
(``python3 tests/test_acceptance.py``) executes all criteria and prints them.
Criteria 5-8 are marked ``slow``.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(Path(__file__).parent))

from questa import cli  # noqa: E402
from questa.ablation import CASES  # noqa: E402
from questa.analysis import build_dag, expressivity, kl_expressivity  # noqa: E402
from questa.circuit import CircuitGenome, decode, random_genome  # noqa: E402
from questa.config import load_config  # noqa: E402
from questa.statevector import Gate, StateVector, apply_gate, full_unitary  # noqa: E402
from questa.training import value_and_grad  # noqa: E402

from test_training import fd_grad, random_triple  # noqa: E402

RESULTS: list[str] = []
SEEDS = [0, 1, 2, 3, 4]

# tolerances and limits
SIM_TOL, SIM_LIMIT = 1e-10, 10.0
GRAD_TOL, GRAD_LIMIT = 1e-6, 60.0
HAAR_TOL, ZERO_PARAM_MAX, HAAR_LIMIT = 0.01, -2.0, 30.0
RHO_MIN, DAG_LIMIT = 0.5, 30.0
TFIM_GAP, HEIS_GAP, VQE_LIMIT = 1e-3, 5e-3, 15 * 60.0
MSE_MAX, REP_LIMIT = 1e-2, 10 * 60.0
ABLATION_LIMIT = 15 * 60.0
MIN_SUCCESSES = 4


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def test_criterion_1_simulator_matches_unitary_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        circuit = decode(random_genome(rng, n, int(rng.integers(1, 9))))
        params = rng.uniform(-np.pi, np.pi, circuit.n_params)
        state = StateVector.zero(n)
        for kind, wires, angle in circuit.resolved_gates(params):
            state = apply_gate(state, Gate(kind, angle), wires)
        worst = max(worst, float(np.max(np.abs(full_unitary(circuit, params)[:, 0] - state.amplitudes))))
    elapsed = time.perf_counter() - start
    assert record(1, worst < SIM_TOL and elapsed < SIM_LIMIT,
                  f"200 circuits, max amplitude diff {worst:.2e} (tol {SIM_TOL:g}), {elapsed:.2f}s (< {SIM_LIMIT:g}s)")


def test_criterion_2_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        circuit, params, task = random_triple(rng)
        _, g, ga = value_and_grad(circuit, params, task)
        full = g if ga is None else np.concatenate([g, ga])
        worst = max(worst, float(np.max(np.abs(full - fd_grad(circuit, params, task)), initial=0.0)))
    elapsed = time.perf_counter() - start
    assert record(2, worst < GRAD_TOL and elapsed < GRAD_LIMIT,
                  f"100 triples, max |shift - FD| {worst:.2e} (tol {GRAD_TOL:g}), {elapsed:.2f}s (< {GRAD_LIMIT:g}s)")


def test_criterion_3_haar_calibration():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    haar = {}
    for n in (1, 2, 3, 4):
        dim = 2 ** n
        f = 1.0 - rng.uniform(size=5000) ** (1.0 / (dim - 1))
        haar[n] = kl_expressivity(f, dim, 75).expressivity
    zero = {n: expressivity(decode(CircuitGenome(np.zeros((n, 3), int))), 5000, 75, 0).expressivity
            for n in (2, 3, 4)}
    elapsed = time.perf_counter() - start
    ok = all(abs(e) < HAAR_TOL for e in haar.values()) and all(e < ZERO_PARAM_MAX for e in zero.values())
    detail = ", ".join(f"n={n}: E={e:+.4f}" for n, e in haar.items())
    detail += "; zero-param " + ", ".join(f"n={n}: {e:.2f}" for n, e in zero.items())
    assert record(3, ok and elapsed < HAAR_LIMIT, f"{detail}; {elapsed:.2f}s")


def test_criterion_4_path_count_correlates_with_cnots():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    logs, cnots = [], []
    for _ in range(500):
        c = decode(random_genome(rng, 8, 12))
        logs.append(build_dag(c).log_path_count)
        cnots.append(c.cnot_count())
    rho = spearmanr(logs, cnots).statistic
    elapsed = time.perf_counter() - start
    assert record(4, rho > RHO_MIN and elapsed < DAG_LIMIT,
                  f"Spearman rho {rho:.3f} (> {RHO_MIN}), {elapsed:.2f}s")


def _cli_run(config, seed, out, threads=None):
    argv = ["run", "--config", str(config), "--seed", str(seed), "--out", str(out)]
    if threads is not None:
        argv += ["--threads", str(threads)]
    assert cli.main(argv) == 0
    return json.loads((out / "report.json").read_text())


@pytest.fixture(scope="module")
def vqe_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("vqe")
    start = time.perf_counter()
    gaps = {}
    for model in ("tfim", "heisenberg"):
        for seed in SEEDS:
            report = _cli_run(ROOT / "configs" / f"vqe_{model}.yaml", seed, base / f"{model}_{seed}", threads=1)
            gaps[(model, seed)] = report["reference"]["gap"]
    return base, gaps, time.perf_counter() - start


@pytest.mark.slow
def test_criterion_5_vqe_desk_scale(vqe_runs):
    _, gaps, elapsed = vqe_runs
    parts, ok = [], elapsed < VQE_LIMIT
    for model, tol in (("tfim", TFIM_GAP), ("heisenberg", HEIS_GAP)):
        g = [gaps[(model, s)] for s in SEEDS]
        wins = sum(x is not None and x <= tol for x in g)
        ok &= wins >= MIN_SUCCESSES
        parts.append(f"{model} {wins}/5 within {tol:g} (max gap {max(g):.1e})")
    assert record(5, ok, "; ".join(parts) + f"; {elapsed:.0f}s (< {VQE_LIMIT:.0f}s)")


@pytest.mark.slow
def test_criterion_6_representation_desk_scale(tmp_path):
    cfg = load_config(ROOT / "configs" / "representation.yaml")
    assert (cfg.circuit.n_qubits, cfg.circuit.reuploads, cfg.task.points) == (4, 2, 64)
    start = time.perf_counter()
    mses = []
    for seed in SEEDS:
        report = _cli_run(ROOT / "configs" / "representation.yaml", seed, tmp_path / str(seed))
        mses.append(report["best"]["metrics"]["mse"])
    elapsed = time.perf_counter() - start
    wins = sum(m <= MSE_MAX for m in mses)
    assert record(6, wins >= MIN_SUCCESSES and elapsed < REP_LIMIT,
                  f"{wins}/5 seeds with MSE <= {MSE_MAX:g} (MSEs {', '.join(f'{m:.1e}' for m in mses)}); "
                  f"{elapsed:.0f}s (< {REP_LIMIT:.0f}s)")


@pytest.mark.slow
def test_criterion_7_ablation_ordering(tmp_path):
    config = ROOT / "configs" / "ablation_blobs.yaml"
    start = time.perf_counter()
    assert cli.main(["ablate", "--config", str(config), "--out", str(tmp_path)]) == 0
    elapsed = time.perf_counter() - start
    meta = json.loads((tmp_path / "summary.json").read_text())
    med = meta["median_epochs_to_target"]
    n_curves = len(list((tmp_path / "curves").glob("*.csv")))
    ok = meta["ordered"] and n_curves == 15 and elapsed < ABLATION_LIMIT
    detail = ", ".join(f"{c}={med[c]:g}" for c in reversed(CASES))
    assert record(7, ok, f"median epochs to loss <= {meta['target']:.4f}: {detail} "
                         f"(need dag+kl <= dag <= random); {n_curves} curves; {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_8_determinism_across_threads(vqe_runs, tmp_path):
    base, _, _ = vqe_runs
    reference = (base / "tfim_0" / "history.jsonl").read_bytes()
    _cli_run(ROOT / "configs" / "vqe_tfim.yaml", 0, tmp_path / "t1", threads=1)
    _cli_run(ROOT / "configs" / "vqe_tfim.yaml", 0, tmp_path / "t3", threads=3)
    same = [(tmp_path / d / "history.jsonl").read_bytes() == reference for d in ("t1", "t3")]
    assert record(8, all(same), f"TFIM seed 0 history.jsonl byte-identical for rerun at threads=1: {same[0]}, "
                                f"threads=3: {same[1]}")


PROPERTY_TESTS = [
    "test_statevector.py::test_norm_preserved",
    "test_statevector.py::test_oracle_equivalence_random",
    "test_statevector.py::test_expectation_bounded_by_coefficients",
    "test_statevector.py::test_fidelity_symmetric_and_clamped",
    "test_circuit.py::test_effective_genome_roundtrip",
    "test_circuit.py::test_param_count_equals_rotation_instances",
    "test_circuit.py::test_reupload_encoding_count",
    "test_analysis.py::test_expressivity_nonpositive",
    "test_analysis.py::test_path_count_lower_bound_and_single_qubit_case",
    "test_analysis.py::test_path_count_ignores_rotation_type",
    "test_analysis.py::test_adding_cnot_never_decreases_path_count",
    "test_analysis.py::test_path_count_tracks_cnot_count",
    "test_training.py::test_gradient_random_triples",
    "test_training.py::test_focus_never_worse_than_init",
    "test_training.py::test_reuse_idempotent",
    "test_training.py::test_variational_bound",
    "test_evolution.py::test_elitism_filter_soundness_and_history",
    "test_evolution.py::test_determinism_across_threads",
    "test_tasks.py::test_hermitian",
    "test_tasks.py::test_term_counts",
    "test_tasks.py::test_representation_fitness_decreasing",
    "test_tasks.py::test_csv_roundtrip_bit_equal",
    "test_config.py::test_defaults_and_roundtrip",
    "test_config.py::test_unknown_key_is_rejected_with_line",
    "test_cli.py::test_run_outputs_and_thread_independence",
    "test_cli.py::test_config_error_exit_code",
]


def test_criterion_9_property_suites():
    here = Path(__file__).parent
    ids = [str(here / t) for t in PROPERTY_TESTS]
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids],
                         capture_output=True, text=True, cwd=ROOT)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr.strip()[-200:]
    assert record(9, res.returncode == 0, f"{len(PROPERTY_TESTS)} property tests: {tail}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
