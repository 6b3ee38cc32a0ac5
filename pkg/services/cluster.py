"""
k-means++ seeding and Lloyd refinement over reduced target features.

Distances are squared Euclidean in float64. Nearest-centroid ties resolve
to the lowest cluster index. Empty clusters are re-seeded at the point
farthest from its current centroid so K stays fixed.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from dataset import FeatureTable
from errors import DimensionError, InfeasibleKError, NumericError
from services.logger import logger

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 300
DEFAULT_RESTARTS = 10

_U64 = 2**64


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    seed: int
    inertia_history: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def K(self) -> int:
        return int(self.centroids.shape[0])

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "d": int(self.centroids.shape[1]),
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "iterations_run": self.iterations_run,
            "seed": self.seed,
            "inertia_history": list(self.inertia_history),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KMeansModel":
        centroids = np.asarray(payload["centroids"], dtype=np.float64).reshape(
            int(payload["K"]), int(payload["d"])
        )
        return cls(
            centroids=centroids,
            inertia=float(payload["inertia"]),
            iterations_run=int(payload.get("iterations_run", 0)),
            seed=int(payload.get("seed", 0)),
            inertia_history=tuple(payload.get("inertia_history", ())),
        )


@dataclass(frozen=True, eq=False)
class Assignment:
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def _random_state(seed: int) -> np.random.RandomState:
    """Legacy RandomState for scikit-learn, seeded from the full 64-bit seed."""
    return np.random.RandomState(np.random.MT19937(np.random.SeedSequence(seed % _U64)))


def _nearest(x: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    distances = cdist(x, centroids, "sqeuclidean")
    labels = np.argmin(distances, axis=1)
    return labels, distances[np.arange(x.shape[0]), labels]


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"{what} contains non-finite values")


def seed_plus_plus(table: FeatureTable, K: int, seed: int) -> np.ndarray:
    """
    k-means++ initial centers (one local trial per step, i.e. plain D² sampling).

    The first center is uniform over records; each later one is drawn with
    probability proportional to its squared distance to the nearest chosen
    center.

    Raises:
        InfeasibleKError: K is not positive or exceeds the number of distinct points.
    """
    if len(table) == 0:
        raise InfeasibleKError("cannot seed centers on an empty table")
    distinct = np.unique(table.features, axis=0).shape[0]
    if not 1 <= K <= distinct:
        raise InfeasibleKError(f"K={K} is infeasible with {distinct} distinct points")
    centers, _ = kmeans_plusplus(
        table.features,
        n_clusters=K,
        random_state=_random_state(seed),
        n_local_trials=1,
    )
    return np.asarray(centers, dtype=np.float64)


def _update_centroids(
    x: np.ndarray, labels: np.ndarray, distances: np.ndarray, previous: np.ndarray
) -> np.ndarray:
    K = previous.shape[0]
    sums = np.zeros((K, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=K)

    centroids = previous.copy()
    filled = counts > 0
    centroids[filled] = sums[filled] / counts[filled, None]

    empty = np.flatnonzero(~filled)
    if empty.size:
        # Farthest points first; a point moved to one empty cluster is not reused.
        order = np.argsort(-distances, kind="stable")
        for k, point in zip(empty, order):
            centroids[k] = x[point]
        logger.warning("re-seeded %d empty cluster(s): %s", empty.size, empty.tolist())
    return centroids


def lloyd(
    table: FeatureTable,
    init: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> Tuple[KMeansModel, Assignment]:
    """
    Refine centroids by alternating assignment and mean updates.

    Stops when the relative inertia improvement drops below `tol` or after
    `max_iter` updates. Inertia never increases between iterations.

    Raises:
        NumericError: non-finite features or initial centers.
        DimensionError: init width differs from the table dimension.
    """
    init = np.asarray(init, dtype=np.float64)
    if init.ndim != 2 or init.shape[0] < 1:
        raise NumericError(f"init must be a non-empty K×d matrix, got shape {init.shape}")
    if init.shape[1] != table.dim:
        raise DimensionError(f"init has {init.shape[1]} columns, table has {table.dim}")
    if not tol > 0 or max_iter < 1:
        raise NumericError(f"need tol > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")
    x = table.features
    _check_finite(x, "features")
    _check_finite(init, "initial centroids")

    centroids = init.copy()
    labels, distances = _nearest(x, centroids)
    inertia = float(distances.sum())
    history = [inertia]
    iterations = 0

    while iterations < max_iter:
        centroids = _update_centroids(x, labels, distances, centroids)
        labels, distances = _nearest(x, centroids)
        new_inertia = float(distances.sum())
        iterations += 1
        history.append(new_inertia)
        improvement = (inertia - new_inertia) / inertia if inertia > 0 else 0.0
        logger.debug("lloyd iteration %d: inertia %.6g", iterations, new_inertia)
        inertia = new_inertia
        if improvement < tol:
            break

    model = KMeansModel(
        centroids=centroids,
        inertia=inertia,
        iterations_run=iterations,
        seed=seed,
        inertia_history=tuple(history),
    )
    return model, Assignment(labels=labels.astype(np.int64))


def _single_run(
    table: FeatureTable, K: int, seed: int, tol: float, max_iter: int
) -> Tuple[KMeansModel, Assignment]:
    init = seed_plus_plus(table, K, seed)
    return lloyd(table, init, tol=tol, max_iter=max_iter, seed=seed)


def fit_kmeans(
    table: FeatureTable,
    K: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    jobs: int = 1,
) -> Tuple[KMeansModel, Assignment]:
    """
    Best of `restarts` k-means++ + Lloyd runs with seeds seed, seed+1, ...

    The run with the lowest inertia wins; ties go to the lowest seed.
    Restarts may run on `jobs` threads; results are compared in seed order,
    so the outcome does not depend on `jobs`.
    """
    if restarts < 1:
        raise NumericError(f"restarts must be >= 1, got {restarts}")
    seeds = [(seed + r) % _U64 for r in range(restarts)]

    if jobs > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs: List[Tuple[KMeansModel, Assignment]] = list(
                pool.map(lambda s: _single_run(table, K, s, tol, max_iter), seeds)
            )
    else:
        runs = [_single_run(table, K, s, tol, max_iter) for s in seeds]

    best = runs[0]
    for run in runs[1:]:
        if run[0].inertia < best[0].inertia:
            best = run
    logger.info(
        "k-means K=%d on %d records: best inertia %.6g (seed %d, %d iterations, %d restarts)",
        K,
        len(table),
        best[0].inertia,
        best[0].seed,
        best[0].iterations_run,
        restarts,
    )
    return best


def assign(model: KMeansModel, table: FeatureTable) -> Assignment:
    """
    Nearest-centroid labels, ties to the lowest index.

    Raises:
        DimensionError: table dimension differs from the centroid dimension.
    """
    if table.dim != model.centroids.shape[1]:
        raise DimensionError(
            f"centroids have {model.centroids.shape[1]} dims, table has {table.dim}"
        )
    labels, _ = _nearest(table.features, model.centroids)
    return Assignment(labels=labels.astype(np.int64))


def inertia_of(model: KMeansModel, table: FeatureTable) -> float:
    """Recomputed assignment cost of `table` under `model`."""
    _, distances = _nearest(table.features, model.centroids)
    return float(distances.sum())
