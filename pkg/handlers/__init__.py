"""
Subcommand exports for the cluster-entropy CLI.

Each module contributes a `register(subparsers)` that adds its
subcommand(s) to the main parser.
"""

from .validate import register as register_validate
from .reduce import register as register_reduce
from .cluster import register as register_cluster
from .entropy import register as register_entropy
from .simulate import register as register_simulate
from .evaluate import register as register_evaluate
from .plot_data import register as register_plot_data
from .pipeline import register as register_pipeline

__all__ = [
    "register_validate",
    "register_reduce",
    "register_cluster",
    "register_entropy",
    "register_simulate",
    "register_evaluate",
    "register_plot_data",
    "register_pipeline",
]
