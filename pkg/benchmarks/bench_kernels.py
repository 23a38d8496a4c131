"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times a batched forward pass (``run``) and the shifted evaluations used for
parameter-shift gradients (``run_shifted``) on random circuits, and checks
that both backends agree.
"""

import argparse
import timeit

import numpy as np

from questa import kernels
from questa.circuit import decode, random_genome

CASES = [  # (qubits, layers, batch)
    (4, 20, 64),
    (8, 12, 32),
    (12, 8, 4),
]


def problem(n, layers, batch, seed=0):
    rng = np.random.default_rng(seed)
    circuit = decode(random_genome(rng, n, layers))
    angles = np.tile(circuit.angles(rng.uniform(-np.pi, np.pi, circuit.n_params)), (batch, 1))
    states = np.zeros((batch, 1 << n), complex)
    states[:, 0] = 1.0
    return circuit, angles, states


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels are not built; install with `pip install -e .`")
    print(f"{'qubits':>6} {'gates':>6} {'batch':>6} {'op':>12} {'cython ms':>10} {'python ms':>10} {'speedup':>8}")
    for n, layers, batch in CASES:
        circuit, angles, states = problem(n, layers, batch)
        ops, pg = circuit.ops, circuit.param_gates
        for name, call in (("run", lambda b: kernels.run(ops, angles, states, n, backend=b)),
                           ("run_shifted", lambda b: kernels.run_shifted(ops, angles, pg, states, n, backend=b))):
            diff = np.max(np.abs(call("cython") - call("python")))
            if diff > 1e-10:
                raise SystemExit(f"backends disagree by {diff:.2e} on {name} (n={n})")
            tc = best_of(lambda: call("cython"), args.repeat)
            tp = best_of(lambda: call("python"), args.repeat)
            print(f"{n:>6} {circuit.n_gates:>6} {batch:>6} {name:>12} {1e3 * tc:>10.2f} {1e3 * tp:>10.2f} "
                  f"{tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
