"""Randomized gossip with network coding: simulators and experiment tooling."""

__version__ = "0.1.0"

from .experiments import (
    ExperimentSpec,
    FitReport,
    bound_ratio,
    emit_plots,
    fit_csv,
    resolve_k,
    run_experiment,
    tail_bounds,
)
from .field import (
    CodedMessage,
    EquationBasis,
    Field,
    decode,
    random_combination,
    try_insert,
    unit_message,
)
from .graph import GraphMetrics, SpanningTree, Topology, bfs_tree, generate, metrics
from .protocols import (
    StoppingReport,
    run_brr_broadcast,
    run_tag,
    run_uniform_ag,
)
from .queueing import (
    DepartureTrace,
    QueueNetwork,
    build_tree_from_graph,
    dominance_test,
    line_network,
    scaling_report,
    simulate,
    transform,
)

__all__ = [
    "CodedMessage",
    "DepartureTrace",
    "EquationBasis",
    "ExperimentSpec",
    "Field",
    "FitReport",
    "GraphMetrics",
    "QueueNetwork",
    "SpanningTree",
    "StoppingReport",
    "Topology",
    "bfs_tree",
    "bound_ratio",
    "build_tree_from_graph",
    "decode",
    "dominance_test",
    "emit_plots",
    "fit_csv",
    "generate",
    "line_network",
    "metrics",
    "random_combination",
    "resolve_k",
    "run_brr_broadcast",
    "run_experiment",
    "run_tag",
    "run_uniform_ag",
    "scaling_report",
    "simulate",
    "tail_bounds",
    "transform",
    "try_insert",
    "unit_message",
]
