"""
Reading and writing pipeline artifacts.

JSON documents are written with sorted keys and full-precision floats so
the same run always produces the same bytes. NDJSON holds one group per
line. Cluster assignments are CSV `patch_id,wsi_id,cluster`.
"""

import json
import os
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd

from dataset import FeatureTable
from errors import ConsistencyError, IngestionError, InputNotFoundError
from services.cluster import Assignment
from services.entropy import GroupEntropy, RankedSelection, rank_groups

ASSIGNMENT_COLUMNS = ("patch_id", "wsi_id", "cluster")


def _require(path: str | os.PathLike) -> Path:
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(str(path))
    return path


def write_json(payload, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: str | os.PathLike):
    path = _require(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path} is not valid JSON: {exc}") from None


def write_ndjson(rows: Iterable[dict], path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def read_ndjson(path: str | os.PathLike) -> List[dict]:
    path = _require(path)
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IngestionError(f"invalid JSON: {exc}", row=line_no) from None
    return rows


# ---------------- ASSIGNMENTS ----------------


def write_assignment(assignment: Assignment, table: FeatureTable, path: str | os.PathLike) -> Path:
    if len(assignment) != len(table):
        raise ConsistencyError(f"{len(assignment)} labels for {len(table)} records")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "patch_id": table.patch_ids,
            "wsi_id": table.group_ids,
            "cluster": np.asarray(assignment.labels, dtype=np.int64),
        }
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_assignment(path: str | os.PathLike, table: FeatureTable) -> Assignment:
    """
    Read cluster labels and check they line up with `table` record by record.

    Raises:
        ConsistencyError: ids or order differ from the table.
    """
    frame = pd.read_csv(
        _require(path),
        dtype={"patch_id": str, "wsi_id": str},
        keep_default_na=False,
    )
    if tuple(frame.columns) != ASSIGNMENT_COLUMNS:
        raise IngestionError(f"assignment header must be {','.join(ASSIGNMENT_COLUMNS)}", row=1)
    if len(frame) != len(table) or tuple(frame["patch_id"]) != table.patch_ids:
        raise ConsistencyError("assignment patch ids do not match the table")
    return Assignment(labels=frame["cluster"].to_numpy(dtype=np.int64))


# ---------------- ENTROPY / RANKING ----------------


def entropy_rows(entropies: Iterable[GroupEntropy]) -> List[dict]:
    return [item.to_dict() for item in entropies]


def ranking_rows(ranking: RankedSelection) -> List[dict]:
    rows = []
    for position, item in enumerate(ranking.ordered):
        row = item.to_dict()
        row["rank"] = position + 1
        row["slice"] = ranking.slice_of(item.group_id)
        rows.append(row)
    return rows


def read_entropies(path: str | os.PathLike) -> List[GroupEntropy]:
    return [GroupEntropy.from_dict(row) for row in read_ndjson(path)]


def read_ranking(path: str | os.PathLike) -> RankedSelection:
    """Rebuild a ranking from `rank` output; the slice size is the High count."""
    rows = read_ndjson(path)
    if not rows:
        raise ConsistencyError(f"{path} holds no ranked groups")
    n = sum(1 for row in rows if row.get("slice") == "high")
    return rank_groups([GroupEntropy.from_dict(row) for row in rows], n)
