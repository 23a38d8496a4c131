"""Evolutionary quantum architecture search with untrained filtering and trained focusing."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .statevector import (Gate, GateKind, PauliString, PauliSum, StateVector, apply_gate, expectation,
                          fidelity, full_unitary, simulate)
from .circuit import CircuitGenome, CircuitSpec, CompiledCircuit, GateVocabulary, build_reupload, decode
from .analysis import DagReport, ExpressivityReport, build_dag, expressivity
from .training import OptimizerConfig, ParameterVector, ReuseConfig, TrainReport, focus, gradient, loss, reuse
from .evolution import EvolutionConfig, SearchResult, run_quest_a
from .tasks import (ClassificationTask, Hamiltonian, RepresentationTask, VQETask, build_heisenberg,
                    build_tfim, exact_ground_energy)
