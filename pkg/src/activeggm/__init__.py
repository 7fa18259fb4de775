"""Active learning of Gaussian graphical models from budgeted subset measurements."""

from .active import ActiveState, EstimatorConfig, MeasurementLedger, RowStream, algorithm1
from .chordal import greedy_fill, is_chordal, max_cliques
from .cit import CitConfig, cit, cit_path, min_partial_corr
from .graph import Decomposition, Graph, metrics, read_graph, write_graph
from .harness import ExperimentConfig, budget_sweep, run_experiment
from .model import GaussianModel, generate, sample
from .modelsel import ebic_score, select
from .twostage import algorithm4, algorithm5

__version__ = "0.1.0"

__all__ = [
    "ActiveState", "CitConfig", "Decomposition", "EstimatorConfig", "ExperimentConfig",
    "GaussianModel", "Graph", "MeasurementLedger", "RowStream", "algorithm1", "algorithm4",
    "algorithm5", "budget_sweep", "cit", "cit_path", "ebic_score", "generate", "greedy_fill",
    "is_chordal", "max_cliques", "metrics", "min_partial_corr", "read_graph", "run_experiment",
    "sample", "select", "write_graph",
]
