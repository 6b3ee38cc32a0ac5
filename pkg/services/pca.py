"""
Principal component projection used to shrink patch features before
clustering (e.g. 2048-dim CNN features down to 30).

Components are the top eigenvectors of the sample covariance (divisor
N-1). Each component is sign-normalized so that its largest-magnitude
entry is positive, which makes fitted models reproducible.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dataset import FeatureTable, concat_tables, with_features
from errors import DimensionError, InsufficientDataError
from services.logger import logger

# Eigenvalues above this negative floor are rounding noise and clamp to 0.
EIGENVALUE_FLOOR = -1e-12


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float

    @property
    def d(self) -> int:
        return int(self.components.shape[0])

    @property
    def D(self) -> int:
        return int(self.components.shape[1])

    @property
    def discarded_variance(self) -> float:
        return max(self.total_variance - float(self.eigenvalues.sum()), 0.0)

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / self.total_variance

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "total_variance": self.total_variance,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PcaModel":
        components = np.asarray(payload["components"], dtype=np.float64).reshape(
            int(payload["d"]), int(payload["D"])
        )
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            components=components,
            eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
            total_variance=float(payload["total_variance"]),
        )


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest |entry| (lowest index on ties) is positive."""
    pivots = np.argmax(np.abs(vectors), axis=1)
    signs = np.where(vectors[np.arange(vectors.shape[0]), pivots] < 0, -1.0, 1.0)
    return vectors * signs[:, None]


def fit_pca(table: FeatureTable, d: int) -> PcaModel:
    """
    Fit a d-component PCA on the table's features.

    Args:
        table: fit set, at least two records.
        d: number of components, 1 <= d <= D.

    Raises:
        DimensionError: d outside 1..D.
        InsufficientDataError: fewer than two records.
    """
    if not 1 <= d <= table.dim:
        raise DimensionError(f"cannot keep {d} components of a {table.dim}-dimensional table")
    if len(table) < 2:
        raise InsufficientDataError(f"PCA needs at least 2 records, got {len(table)}")

    x = table.features
    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / (len(table) - 1)
    covariance = (covariance + covariance.T) / 2.0

    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    if eigenvalues[-1] < EIGENVALUE_FLOOR * max(1.0, float(np.trace(covariance))):
        logger.warning("covariance has a negative eigenvalue %.3e; clamping to 0", eigenvalues[-1])
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    components = _normalize_signs(eigenvectors[:, :d].T)
    model = PcaModel(
        mean=mean,
        components=np.ascontiguousarray(components),
        eigenvalues=eigenvalues[:d].copy(),
        total_variance=float(np.trace(covariance)),
    )
    logger.info(
        "PCA fit on %d records: %d -> %d dims, %.1f%% variance kept",
        len(table),
        table.dim,
        d,
        100.0 * float(model.explained_variance_ratio.sum()),
    )
    return model


def fit_pca_joint(tables: Sequence[FeatureTable], d: int) -> PcaModel:
    """Fit on the concatenation of several tables (source + target)."""
    return fit_pca(concat_tables(list(tables)), d)


def transform(model: PcaModel, table: FeatureTable) -> FeatureTable:
    """
    Project every record: z = components · (x - mean).

    Raises:
        DimensionError: table dimension differs from the model's D.
    """
    if table.dim != model.D:
        raise DimensionError(f"model expects {model.D} features, table has {table.dim}")
    return with_features(table, (table.features - model.mean) @ model.components.T)


def reconstruct(model: PcaModel, table: FeatureTable) -> FeatureTable:
    """Map reduced vectors back to the original space: x = mean + componentsᵀ · z."""
    if table.dim != model.d:
        raise DimensionError(f"model produces {model.d} dims, table has {table.dim}")
    return with_features(table, table.features @ model.components + model.mean)
