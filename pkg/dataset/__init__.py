# dataset/__init__.py
"""
Dataset package: grouped feature tables and their on-disk codecs.

This module re-exports the data model and I/O helpers so they can be
imported from `dataset` directly.
"""

from .table import (
    UNLABELED,
    ClassHistogram,
    FeatureTable,
    PatchRecord,
    class_histogram,
    concat_tables,
    split_group,
    subset_groups,
    with_features,
)
from .io import (
    infer_format,
    load_table,
    write_table,
)

__all__ = [
    "UNLABELED",
    "ClassHistogram",
    "FeatureTable",
    "PatchRecord",
    "class_histogram",
    "concat_tables",
    "split_group",
    "subset_groups",
    "with_features",
    "infer_format",
    "load_table",
    "write_table",
]
