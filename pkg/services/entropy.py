"""
Cluster entropy of WSIs.

Each WSI is described by how its patches spread over the K global
clusters. The entropy of that spread (natural log, 0·log 0 = 0) is high
when the WSI covers the whole target distribution and 0 when all of its
patches fall in one cluster.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import entropy as shannon_entropy

from dataset import FeatureTable
from errors import ConsistencyError, EmptyGroupError, SliceError
from services.cluster import Assignment
from services.logger import logger

SLICES = ("high", "med", "low")


@dataclass(frozen=True, eq=False)
class GroupEntropy:
    group_id: str
    counts: np.ndarray
    entropy: Optional[float] = None

    @property
    def n_patches(self) -> int:
        return int(self.counts.sum())

    @property
    def K(self) -> int:
        return int(self.counts.shape[0])

    @property
    def proportions(self) -> np.ndarray:
        total = self.n_patches
        if total == 0:
            return np.zeros(self.K)
        return self.counts / total

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "n": self.n_patches,
            "counts": [int(c) for c in self.counts],
            "entropy": self.entropy,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GroupEntropy":
        entropy = payload.get("entropy")
        return cls(
            group_id=str(payload["group_id"]),
            counts=np.asarray(payload["counts"], dtype=np.int64),
            entropy=None if entropy is None else float(entropy),
        )


@dataclass(frozen=True)
class RankedSelection:
    ordered: List[GroupEntropy]
    slices: Dict[str, List[str]] = field(default_factory=dict)
    slice_size: int = 0

    def rank_of(self, group_id: str) -> int:
        for position, item in enumerate(self.ordered):
            if item.group_id == group_id:
                return position
        raise KeyError(group_id)

    def slice_of(self, group_id: str) -> str:
        """First slice (high, med, low order) containing the group, else "none"."""
        for name in SLICES:
            if group_id in self.slices.get(name, ()):
                return name
        return "none"

    def candidates(self) -> List[str]:
        """Union of all slices, in rank order."""
        members = {g for name in SLICES for g in self.slices.get(name, ())}
        return [item.group_id for item in self.ordered if item.group_id in members]


def group_histograms(assignment: Assignment, table: FeatureTable, K: int) -> List[GroupEntropy]:
    """
    Count each group's patches per cluster, in group first-appearance order.

    Raises:
        ConsistencyError: assignment length differs from the table size, or a
            label falls outside 0..K-1.
    """
    labels = np.asarray(assignment.labels, dtype=np.int64)
    if labels.shape[0] != len(table):
        raise ConsistencyError(
            f"assignment has {labels.shape[0]} labels for a table of {len(table)} records"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise ConsistencyError(f"cluster labels must lie in 0..{K - 1}")
    return [
        GroupEntropy(group_id=group_id, counts=np.bincount(labels[rows], minlength=K))
        for group_id, rows in table.group_index.items()
    ]


def cluster_entropy(counts: Sequence[int] | np.ndarray, base: Optional[float] = None) -> float:
    """
    H = -Σ P(i) log P(i) with P(i) = C_i / Σ C, empty clusters contributing 0.

    Args:
        counts: per-cluster patch counts of one WSI.
        base: logarithm base, natural log by default. Any base rescales every
            H by the same factor, so rankings do not depend on it.

    Raises:
        EmptyGroupError: the counts sum to 0.
        ConsistencyError: a count is negative.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ConsistencyError("cluster counts must be non-negative")
    if counts.sum() < 1:
        raise EmptyGroupError("cannot compute the entropy of an empty group")
    return float(shannon_entropy(counts, base=base))


def compute_entropies(histograms: Sequence[GroupEntropy]) -> List[GroupEntropy]:
    """Fill in the entropy of every histogram, keeping the input order."""
    filled = []
    for item in histograms:
        try:
            filled.append(replace(item, entropy=cluster_entropy(item.counts)))
        except EmptyGroupError:
            raise EmptyGroupError(f"group {item.group_id!r} has no patches") from None
    return filled


def rank_groups(entropies: Sequence[GroupEntropy], n: int) -> RankedSelection:
    """
    Sort by entropy (descending, ties by ascending group_id) and cut slices.

    high is the first n groups, low the last n, and med the n groups centered
    on position floor((m-1)/2), shifted right when n is even.

    Raises:
        SliceError: n < 1 or n exceeds the number of groups.
        EmptyGroupError: an entry has no entropy computed.
    """
    m = len(entropies)
    if n < 1 or n > m:
        raise SliceError(f"slice size {n} is invalid for {m} group(s)")
    missing = [e.group_id for e in entropies if e.entropy is None]
    if missing:
        raise EmptyGroupError(f"entropy not computed for {missing[:5]}")

    ordered = sorted(entropies, key=lambda e: (-e.entropy, e.group_id))
    center = (m - 1) // 2
    start = min(max(center - (n - 1) // 2, 0), m - n)
    ids = [e.group_id for e in ordered]
    slices = {
        "high": ids[:n],
        "med": ids[start : start + n],
        "low": ids[m - n :],
    }
    if 3 * n > m:
        logger.warning("slice size %d with %d groups: High/Med/Low overlap", n, m)
    return RankedSelection(ordered=list(ordered), slices=slices, slice_size=n)


def select_wsi(ranking: RankedSelection) -> str:
    """The highest-entropy WSI: the one to send for annotation."""
    if not ranking.ordered:
        raise SliceError("ranking is empty")
    selected = ranking.ordered[0]
    logger.info("selected WSI %s (entropy %.6f)", selected.group_id, selected.entropy)
    return selected.group_id


def entropy_table(entropies: Sequence[GroupEntropy]) -> pd.DataFrame:
    """One row per group: group_id, n, entropy, then one column per cluster count."""
    if not entropies:
        return pd.DataFrame(columns=["group_id", "n", "entropy"])
    K = entropies[0].K
    frame = pd.DataFrame(
        np.vstack([e.counts for e in entropies]),
        columns=[f"c{k}" for k in range(K)],
    )
    frame.insert(0, "entropy", [e.entropy for e in entropies])
    frame.insert(0, "n", [e.n_patches for e in entropies])
    frame.insert(0, "group_id", [e.group_id for e in entropies])
    return frame
