"""
CSV data behind the per-WSI inspection figure: where a WSI's patches sit
in the target feature distribution, and how they spread over clusters.
Nothing is rendered here.
"""

import hashlib
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from dataset import FeatureTable, UNLABELED
from errors import ConsistencyError, GroupLookupError
from services.cluster import Assignment
from services.entropy import RankedSelection
from services.logger import logger


def default_groups(ranking: RankedSelection) -> List[str]:
    """First High, central Med and last Low group."""
    med = ranking.slices["med"]
    picks = [ranking.slices["high"][0], med[(len(med) - 1) // 2], ranking.slices["low"][-1]]
    return list(dict.fromkeys(picks))


def _safe_name(group_id: str) -> str:
    """File-name stem; a rewritten id gets a digest suffix so it cannot collide with a plain one."""
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", group_id)
    if safe == group_id:
        return safe
    return f"{safe}-{hashlib.sha1(group_id.encode('utf-8')).hexdigest()[:8]}"


def projection_frame(table: FeatureTable, assignment: Assignment, group_id: str) -> pd.DataFrame:
    """All target patches on the first two components, flagged when in `group_id`."""
    if group_id not in table.group_index:
        raise GroupLookupError(f"unknown group_id {group_id!r}")
    if len(assignment) != len(table):
        raise ConsistencyError(f"{len(assignment)} cluster labels for {len(table)} records")
    features = table.features
    pc2 = features[:, 1] if table.dim > 1 else np.zeros(len(table))
    labels = ["" if label == UNLABELED else str(int(label)) for label in table.labels]
    return pd.DataFrame(
        {
            "patch_id": table.patch_ids,
            "pc1": features[:, 0],
            "pc2": pc2,
            "cluster": assignment.labels,
            "label": labels,
            "in_group": [int(g == group_id) for g in table.group_ids],
        }
    )


def histogram_frame(assignment: Assignment, table: FeatureTable, group_id: str, K: int) -> pd.DataFrame:
    if group_id not in table.group_index:
        raise GroupLookupError(f"unknown group_id {group_id!r}")
    rows = table.group_index[group_id]
    counts = np.bincount(np.asarray(assignment.labels)[rows], minlength=K)
    return pd.DataFrame(
        {
            "cluster": np.arange(K),
            "count": counts,
            "proportion": counts / counts.sum(),
        }
    )


def export_plot_data(
    table: FeatureTable,
    assignment: Assignment,
    ranking: RankedSelection,
    out_dir: str | Path,
    group_ids: Optional[Sequence[str]] = None,
    K: Optional[int] = None,
) -> Dict[str, List[Path]]:
    """
    Write `<group>_projection.csv` and `<group>_histogram.csv` per group.

    Args:
        table: PCA-projected target table.
        assignment: cluster label per record of `table`.
        ranking: used to pick default groups and K.
        group_ids: groups to export; defaults to default_groups(ranking).
        K: cluster count; taken from the ranking when omitted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    group_ids = list(dict.fromkeys(group_ids)) if group_ids else default_groups(ranking)
    K = K or ranking.ordered[0].K
    names: Dict[str, str] = {}
    for group_id in group_ids:
        name = _safe_name(group_id)
        if name in names:
            raise ConsistencyError(f"groups {names[name]!r} and {group_id!r} map to the same file name {name!r}")
        names[name] = group_id

    written: Dict[str, List[Path]] = {}
    for name, group_id in names.items():
        projection = out_dir / f"{name}_projection.csv"
        histogram = out_dir / f"{name}_histogram.csv"
        projection_frame(table, assignment, group_id).to_csv(
            projection, index=False, lineterminator="\n", float_format="%.17g"
        )
        histogram_frame(assignment, table, group_id, K).to_csv(
            histogram, index=False, lineterminator="\n", float_format="%.17g"
        )
        written[group_id] = [projection, histogram]
        logger.info("plot data for %s written to %s", group_id, out_dir)
    return written
