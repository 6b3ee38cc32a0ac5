# dataset/table.py
"""
Grouped feature data model.

A FeatureTable holds one feature vector per patch, the WSI (group) each
patch was cropped from, and an optional class label. Tables are immutable:
the arrays are flagged read-only and every operation returns a new table.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from errors import (
    DimensionError,
    EmptyLabelError,
    GroupLookupError,
    IngestionError,
    LabelingError,
)

Domain = Literal["source", "target"]

# Label value stored for unlabeled patches.
UNLABELED: int = -1


@dataclass(frozen=True)
class PatchRecord:
    patch_id: str
    group_id: str
    label: Optional[int]
    features: np.ndarray


@dataclass(frozen=True)
class ClassHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """
    Patch feature vectors grouped by WSI.

    Attributes:
        patch_ids: unique patch identifiers, in file order.
        group_ids: WSI identifier of every patch.
        labels: class index per patch, UNLABELED (-1) when unknown.
        features: N×D matrix of 64-bit reals.
        num_classes: C, declared by the file rather than inferred.
        domain: "source" tables must be fully labeled.
    """
    patch_ids: Tuple[str, ...]
    group_ids: Tuple[str, ...]
    labels: np.ndarray
    features: np.ndarray
    num_classes: int
    domain: Domain = "target"
    group_index: Dict[str, List[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim != 2:
            raise DimensionError(f"features must be a 2-D matrix, got shape {features.shape}")
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        n = features.shape[0]

        if len(self.patch_ids) != n or len(self.group_ids) != n or labels.shape[0] != n:
            raise IngestionError(
                f"column lengths differ: {len(self.patch_ids)} ids, "
                f"{len(self.group_ids)} groups, {labels.shape[0]} labels, {n} feature rows"
            )
        if features.shape[1] < 1:
            raise DimensionError("feature dimension must be positive")
        if self.num_classes < 1:
            raise IngestionError(f"num_classes must be positive, got {self.num_classes}")
        if self.domain not in ("source", "target"):
            raise IngestionError(f"unknown domain tag {self.domain!r}")

        bad_rows = np.flatnonzero(~np.isfinite(features).all(axis=1))
        if bad_rows.size:
            row = int(bad_rows[0])
            col = int(np.flatnonzero(~np.isfinite(features[row]))[0])
            raise IngestionError("non-finite feature value", row=row, field=f"f{col}")

        out_of_range = np.flatnonzero((labels < UNLABELED) | (labels >= self.num_classes))
        if out_of_range.size:
            row = int(out_of_range[0])
            raise IngestionError(
                f"label {labels[row]} outside 0..{self.num_classes - 1}", row=row, field="label"
            )

        if self.domain == "source":
            missing = np.flatnonzero(labels == UNLABELED)
            if missing.size:
                raise LabelingError(
                    f"source table has {missing.size} unlabeled record(s), "
                    f"first is {self.patch_ids[int(missing[0])]!r}"
                )

        index: Dict[str, List[int]] = {}
        seen: Dict[str, int] = {}
        for position, (patch_id, group_id) in enumerate(zip(self.patch_ids, self.group_ids)):
            if patch_id in seen:
                raise IngestionError(
                    f"duplicate patch_id {patch_id!r} (first seen at row {seen[patch_id]})",
                    row=position,
                    field="patch_id",
                )
            seen[patch_id] = position
            index.setdefault(group_id, []).append(position)

        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "patch_ids", tuple(self.patch_ids))
        object.__setattr__(self, "group_ids", tuple(self.group_ids))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "group_index", index)

    # ---------------- SHAPE ----------------

    def __len__(self) -> int:
        return len(self.patch_ids)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def groups(self) -> List[str]:
        """Group ids in first-appearance order."""
        return list(self.group_index)

    def group_sizes(self) -> Dict[str, int]:
        return {group_id: len(rows) for group_id, rows in self.group_index.items()}

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    @property
    def is_fully_labeled(self) -> bool:
        return bool(self.labeled_mask.all())

    def record(self, position: int) -> PatchRecord:
        label = int(self.labels[position])
        return PatchRecord(
            patch_id=self.patch_ids[position],
            group_id=self.group_ids[position],
            label=None if label == UNLABELED else label,
            features=self.features[position],
        )

    def take(self, positions: Sequence[int] | np.ndarray, domain: Optional[Domain] = None) -> "FeatureTable":
        """Return a new table with the records at `positions`, in that order."""
        positions = np.asarray(positions, dtype=np.int64)
        return FeatureTable(
            patch_ids=tuple(self.patch_ids[i] for i in positions),
            group_ids=tuple(self.group_ids[i] for i in positions),
            labels=self.labels[positions],
            features=self.features[positions],
            num_classes=self.num_classes,
            domain=domain or self.domain,
        )


# ---------------- OPERATIONS ----------------


def class_histogram(table: FeatureTable) -> ClassHistogram:
    """
    Count labeled records per class.

    Raises:
        EmptyLabelError: when the table has no labeled record.
    """
    labeled = table.labels[table.labeled_mask]
    if labeled.size == 0:
        raise EmptyLabelError("table has no labeled records")
    return ClassHistogram(counts=np.bincount(labeled, minlength=table.num_classes))


def split_group(table: FeatureTable, group_id: str) -> FeatureTable:
    """
    Extract one WSI's records, preserving their order.

    Raises:
        GroupLookupError: when `group_id` is not in the table.
    """
    if group_id not in table.group_index:
        raise GroupLookupError(f"unknown group_id {group_id!r}")
    return table.take(table.group_index[group_id])


def subset_groups(table: FeatureTable, group_ids: Iterable[str]) -> FeatureTable:
    """Keep the records of several groups, in table order."""
    wanted = set(group_ids)
    unknown = sorted(wanted.difference(table.group_index))
    if unknown:
        raise GroupLookupError(f"unknown group_id(s) {unknown}")
    positions = [i for i, g in enumerate(table.group_ids) if g in wanted]
    return table.take(positions)


def concat_tables(tables: Sequence[FeatureTable], domain: Optional[Domain] = None) -> FeatureTable:
    """Join tables sharing dimension and class count; patch ids must stay unique."""
    if not tables:
        raise IngestionError("nothing to concatenate")
    first = tables[0]
    for other in tables[1:]:
        if other.dim != first.dim:
            raise DimensionError(f"cannot concatenate dim {first.dim} with dim {other.dim}")
        if other.num_classes != first.num_classes:
            raise IngestionError(
                f"cannot concatenate {first.num_classes} classes with {other.num_classes}"
            )
    return FeatureTable(
        patch_ids=tuple(pid for t in tables for pid in t.patch_ids),
        group_ids=tuple(gid for t in tables for gid in t.group_ids),
        labels=np.concatenate([t.labels for t in tables]),
        features=np.vstack([t.features for t in tables]),
        num_classes=first.num_classes,
        domain=domain or first.domain,
    )


def with_features(table: FeatureTable, features: np.ndarray) -> FeatureTable:
    """Same ids, groups and labels with a new feature matrix (e.g. after PCA)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(table):
        raise DimensionError(
            f"expected {len(table)} feature rows, got shape {features.shape}"
        )
    return FeatureTable(
        patch_ids=table.patch_ids,
        group_ids=table.group_ids,
        labels=table.labels,
        features=features,
        num_classes=table.num_classes,
        domain=table.domain,
    )
