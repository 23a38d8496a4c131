"""Command-line entry point: ``questa run | analyze | ablate``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import CASES, run_ablation
from .analysis import build_dag, expressivity, haar_bin_masses
from .circuit import CircuitGenome, CircuitSpec
from .config import ConfigError, RunConfig, config_to_dict, load_config
from .evolution import run_quest_a
from .tasks import exact_ground_energy

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

HISTORY_COLUMNS = ("generation", "best_proxy", "best_task_fitness", "mean_task_fitness")


def _finite(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False)


def _threads(arg: int | None, cfg: RunConfig) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("QUESTA_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"QUESTA_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"QUESTA_THREADS must be a positive integer, got {env!r}")
        return value
    return cfg.resolved_threads()


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        data = config_to_dict(cfg)
        data["seed"] = args.seed
        cfg = RunConfig.model_validate(data)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_history_csv(path: Path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in records:
            w.writerow(["" if r.get(c) is None else repr(r[c]) for c in HISTORY_COLUMNS])


def read_history_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({c: (None if r[c] == "" else (int(r[c]) if c == "generation" else float(r[c])))
                    for c in HISTORY_COLUMNS})
    return out


def circuit_document(spec: CircuitSpec, genome: CircuitGenome, params=None) -> dict:
    doc = {"genome": genome.entries.tolist(), "vocabulary": list(spec.vocab.names), "circuit": spec.to_dict()}
    if params is not None:
        doc["params"] = params.to_dict()
    return doc


def load_circuit_document(path) -> tuple[CircuitSpec, CircuitGenome]:
    """Read a circuit JSON (bare genome or a ``best_circuit.json``)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"circuit file not found: {path}")
    try:
        data = json.loads(path.read_text())
        genome, vocab = CircuitGenome.from_dict(data)
        circ = dict(data.get("circuit", {}))
        circ.setdefault("n_qubits", genome.n_qubits)
        circ.setdefault("n_layers", genome.n_layers)
        circ["vocabulary"] = list(vocab.names)
        spec = CircuitSpec.from_dict(circ)
        spec.build(genome)
    except (ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"malformed circuit file {path}: {exc}") from None
    return spec, genome


# -- subcommands -----------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = _load(args)
        threads = _threads(args.threads, cfg)
        out = _out_dir(args, cfg)
        task = cfg.build_task(Path(args.config).resolve().parent)
        spec = cfg.circuit_spec(task.n_features)
        spec.build(spec.sample(np.random.default_rng(0)))
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    records: list[dict] = []
    hist_path = out / "history.jsonl"
    with open(hist_path, "w") as fh:
        def on_generation(record):
            records.append(record)
            fh.write(_dumps(record) + "\n")
            fh.flush()
            best = record["best_so_far"]
            print(f"generation {record['generation']}: best task fitness so far {best}", file=sys.stderr)

        try:
            result = run_quest_a(task, spec, cfg.evolution_config(), cfg.analysis_config(),
                                 cfg.optimizer_config(), threads=threads, on_generation=on_generation)
        except Exception as exc:  # noqa: BLE001 - report any failure with partial history kept
            write_history_csv(out / "history.csv", records)
            print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    write_history_csv(out / "history.csv", records)

    best = result.best
    best_doc = circuit_document(spec, best.genome, best.params)
    (out / "best_circuit.json").write_text(_dumps(best_doc) + "\n")

    metrics = {} if best.loss is None or not math.isfinite(best.loss) else task.metrics(best.loss)
    report = {
        "version": __version__,
        "config": config_to_dict(cfg),
        "best": {
            **best_doc,
            "loss": _finite(best.loss),
            "task_fitness": _finite(best.task_fitness),
            "metrics": {k: _finite(v) for k, v in metrics.items()},
        },
        "history": [{k: r[k] for k in r if k != "individuals"} for r in records],
    }
    if task.kind == "vqe" and task.hamiltonian.n <= 12:
        e0 = exact_ground_energy(task.hamiltonian)
        report["reference"] = {"exact_ground_energy": e0,
                               "gap": None if best.loss is None else _finite(abs(best.loss - e0))}
    report["wall_time"] = time.perf_counter() - start
    (out / "report.json").write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    print(f"best loss {best.loss!r} written to {out}")
    return EXIT_OK


def analyze_report(spec: CircuitSpec, genome: CircuitGenome, samples: int, bins: int, seed: int) -> dict:
    circuit = spec.build(genome)
    dag = build_dag(circuit)
    expr = expressivity(circuit, samples, bins, seed)
    return {"dag": dag.to_dict(), "log_path_count": dag.log_path_count, "expressivity": expr.to_dict()}


def cmd_analyze(args) -> int:
    try:
        spec, genome = load_circuit_document(args.circuit)
        if args.samples < 100 or args.bins < 10:
            raise ValueError("need --samples >= 100 and --bins >= 10")
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = analyze_report(spec, genome, args.samples, args.bins, args.seed)
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.out) if args.out is not None else Path(args.circuit).resolve().parent
    out.mkdir(parents=True, exist_ok=True)
    hist_path = out / f"{Path(args.circuit).stem}_histogram.csv"
    expr = report["expressivity"]
    haar = haar_bin_masses(args.bins, expr["dim"])
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "empirical", "haar"])
        for b in range(args.bins):
            w.writerow([repr(b / args.bins), repr((b + 1) / args.bins), repr(expr["histogram"][b]), repr(float(haar[b]))])
    report["histogram_csv"] = str(hist_path)
    if args.json:
        print(_dumps(report))
    else:
        print(f"path_count: {report['dag']['path_count']}")
        print(f"log_path_count: {report['log_path_count']!r}")
        print(f"expressivity: {expr['expressivity']!r}")
        print(f"histogram: {hist_path}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    try:
        cfg = _load(args)
        threads = _threads(args.threads, cfg)
        out = _out_dir(args, cfg)
        task = cfg.build_task(Path(args.config).resolve().parent)
        if task.kind != "classification":
            raise ConfigError("ablate needs a classification task")
        spec = cfg.circuit_spec(task.n_features)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ab = cfg.ablation
    try:
        res = run_ablation(task, spec, seeds=ab.seeds, candidates=ab.candidates, keep=ab.keep,
                           epochs=ab.epochs, lr=ab.lr, target=cfg.ablation_target(task),
                           band=tuple(cfg.analysis.band), init_std=cfg.evolution.init_std,
                           analysis=cfg.analysis_config(), threads=threads)
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    curves_dir = out / "curves"
    curves_dir.mkdir(exist_ok=True)
    for case in CASES:
        slug = case.replace("+", "_")
        for seed in ab.seeds:
            curves = res.curves[(case, seed)]
            best = res.best_curve(case, seed)
            with open(curves_dir / f"{slug}_seed{seed}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["epoch", "best_loss", *[f"circuit_{i}" for i in range(curves.shape[0])]])
                for e in range(res.epochs):
                    w.writerow([e, repr(float(best[e])), *[repr(float(v)) for v in curves[:, e]]])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "median_epochs_to_target", *[f"seed_{s}" for s in ab.seeds]])
        for row in res.summary_rows():
            w.writerow([row[0], repr(row[1]), *row[2:]])
    meta = {"version": __version__, "config": config_to_dict(cfg), "target": res.target,
            "epochs": res.epochs, "median_epochs_to_target": {c: res.median_epochs(c) for c in CASES},
            "ordered": res.ordered()}
    (out / "summary.json").write_text(json.dumps(meta, indent=2) + "\n")
    for c in CASES:
        print(f"{c}: median epochs to loss <= {res.target:.4f}: {res.median_epochs(c)}")
    print(f"ordering dag+kl <= dag <= random: {'holds' if res.ordered() else 'violated'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="questa", description="Evolutionary quantum architecture search")
    p.add_argument("--version", action="version", version=f"questa {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--threads", type=int, help="worker threads (fallback: QUESTA_THREADS)")

    common(sub.add_parser("run", help="run the search"))
    common(sub.add_parser("ablate", help="compare filtering strategies"))
    a = sub.add_parser("analyze", help="path count and expressivity of a circuit file")
    a.add_argument("circuit", help="circuit JSON (genome + vocabulary)")
    a.add_argument("--out", help="directory for the histogram CSV (default: next to the circuit)")
    a.add_argument("--samples", type=int, default=5000)
    a.add_argument("--bins", type=int, default=75)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--json", action="store_true", help="print the full report as JSON")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"run": cmd_run, "analyze": cmd_analyze, "ablate": cmd_ablate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
