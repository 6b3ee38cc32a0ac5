from itertools import product

import numpy as np
import pytest

from conftest import make_table
from errors import DimensionError, InfeasibleKError, NumericError
from services.cluster import KMeansModel, assign, fit_kmeans, inertia_of, lloyd, seed_plus_plus


def _optimal_two_partition(x: np.ndarray) -> float:
    best = np.inf
    for bits in product((0, 1), repeat=len(x) - 1):
        mask = np.array((0,) + bits, dtype=bool)
        if mask.all() or not mask.any():
            continue
        cost = sum(((part - part.mean(axis=0)) ** 2).sum() for part in (x[mask], x[~mask]))
        best = min(best, cost)
    return best


# ---------------- SEEDING ----------------


def test_single_center_is_a_data_point(rng):
    table = make_table(rng.normal(size=(20, 3)), ["a"] * 20)
    center = seed_plus_plus(table, 1, seed=5)
    assert center.shape == (1, 3)
    assert any(np.array_equal(center[0], row) for row in table.features)


def test_seeds_land_in_different_far_clusters(rng):
    near = rng.normal(scale=0.01, size=(3, 2))
    far = rng.normal(scale=0.01, size=(3, 2)) + 100.0
    table = make_table(np.vstack([near, far]), ["a"] * 6)
    split = 0
    trials = 2000
    for seed in range(trials):
        centers = seed_plus_plus(table, 2, seed)
        split += int((centers[:, 0] > 50).sum() == 1)
    assert split / trials >= 0.99


def test_second_seed_is_the_only_distinct_point():
    x = np.zeros((9, 2))
    x[4] = [3.0, 4.0]
    table = make_table(x, ["a"] * 9)
    for seed in range(50):
        centers = seed_plus_plus(table, 2, seed)
        assert sorted(map(tuple, centers)) == [(0.0, 0.0), (3.0, 4.0)]


def test_infeasible_k():
    table = make_table(np.ones((5, 2)), ["a"] * 5)
    with pytest.raises(InfeasibleKError):
        seed_plus_plus(table, 2, seed=0)


def test_seeding_is_deterministic(rng):
    table = make_table(rng.normal(size=(50, 3)), ["a"] * 50)
    np.testing.assert_array_equal(seed_plus_plus(table, 4, 99), seed_plus_plus(table, 4, 99))


# ---------------- LLOYD ----------------


def test_rectangle_corners():
    table = make_table([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]], ["a"] * 4)
    model, assignment = lloyd(table, np.array([[0.0, 0.0], [10.0, 0.0]]))
    np.testing.assert_allclose(model.centroids, [[0.0, 0.5], [10.0, 0.5]])
    assert model.inertia == pytest.approx(1.0)
    assert assignment.labels.tolist() == [0, 0, 1, 1]


def test_every_point_its_own_centroid(rng):
    x = rng.normal(size=(5, 2))
    model, assignment = lloyd(make_table(x, ["a"] * 5), x.copy())
    assert model.inertia == 0.0
    assert assignment.labels.tolist() == [0, 1, 2, 3, 4]


def test_single_cluster_is_the_mean(rng):
    x = rng.normal(size=(30, 3))
    model, _ = lloyd(make_table(x, ["a"] * 30), x[:1])
    np.testing.assert_allclose(model.centroids[0], x.mean(axis=0), atol=1e-12)
    assert model.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum(), rel=1e-9)


def test_inertia_never_increases():
    for instance in range(100):
        rng = np.random.default_rng(instance)
        x = rng.normal(size=(60, 2)) + rng.integers(0, 3, size=(60, 1)) * 4.0
        table = make_table(x, ["a"] * 60)
        init = x[rng.choice(60, size=4, replace=False)]
        model, assignment = lloyd(table, init, tol=1e-12, max_iter=100)
        history = np.asarray(model.inertia_history)
        assert np.all(np.diff(history) <= 1e-9 * history[:-1])
        assert model.inertia == pytest.approx(inertia_of(model, table), rel=1e-9)
        assert assignment.labels.max() < 4


def test_empty_cluster_is_reseeded():
    x = np.array([[0.0], [1.0], [10.0], [11.0]])
    table = make_table(x, ["a"] * 4)
    # The third centroid starts far from every point and owns nothing.
    model, assignment = lloyd(table, np.array([[0.5], [10.5], [1000.0]]), tol=1e-12)
    assert model.K == 3
    assert np.isfinite(model.centroids).all()
    assert len(set(assignment.labels.tolist())) == 3


def test_permuted_records_keep_their_centroids(rng):
    x = rng.normal(scale=0.5, size=(45, 2)) + np.repeat([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]], 15, axis=0)
    table = make_table(x, [f"g{i % 5}" for i in range(45)])
    permuted = table.take(rng.permutation(len(table)))
    init = np.array([[1.0, 1.0], [7.0, 1.0], [1.0, 7.0]])

    model, assignment = lloyd(table, init, tol=1e-12)
    permuted_model, permuted_assignment = lloyd(permuted, init, tol=1e-12)

    np.testing.assert_allclose(permuted_model.centroids, model.centroids, atol=1e-12)
    assert permuted_model.inertia == pytest.approx(model.inertia, rel=1e-12)
    by_patch = dict(zip(table.patch_ids, assignment.labels.tolist()))
    assert dict(zip(permuted.patch_ids, permuted_assignment.labels.tolist())) == by_patch
    assert permuted_assignment.labels.tolist() != assignment.labels.tolist()


def test_lloyd_rejects_bad_input(rng):
    table = make_table(rng.normal(size=(5, 2)), ["a"] * 5)
    with pytest.raises(NumericError):
        lloyd(table, np.array([[np.nan, 0.0]]))
    with pytest.raises(DimensionError):
        lloyd(table, np.zeros((2, 3)))
    with pytest.raises(NumericError):
        lloyd(table, np.zeros((2, 2)), tol=0.0)


# ---------------- RESTARTS ----------------


def test_one_restart_equals_a_single_run(rng):
    table = make_table(rng.normal(size=(40, 2)), ["a"] * 40)
    model, assignment = fit_kmeans(table, 3, seed=11, restarts=1)
    single, single_assignment = lloyd(table, seed_plus_plus(table, 3, 11), seed=11)
    np.testing.assert_array_equal(model.centroids, single.centroids)
    np.testing.assert_array_equal(assignment.labels, single_assignment.labels)


def test_best_restart_wins(rng):
    table = make_table(rng.normal(size=(40, 2)), ["a"] * 40)
    model, _ = fit_kmeans(table, 4, seed=3, restarts=6)
    for s in range(3, 9):
        run, _ = lloyd(table, seed_plus_plus(table, 4, s))
        assert model.inertia <= run.inertia


def test_threads_do_not_change_the_result(rng):
    table = make_table(rng.normal(size=(80, 3)), ["a"] * 80)
    serial, a = fit_kmeans(table, 5, seed=1, restarts=8, jobs=1)
    threaded, b = fit_kmeans(table, 5, seed=1, restarts=8, jobs=4)
    assert serial.centroids.tobytes() == threaded.centroids.tobytes()
    np.testing.assert_array_equal(a.labels, b.labels)


def test_restarts_find_the_global_optimum():
    hits = 0
    for outer in range(100):
        rng = np.random.default_rng(10_000 + outer)
        x = rng.normal(size=(int(rng.integers(4, 11)), 2))
        model, _ = fit_kmeans(make_table(x, ["a"] * len(x)), 2, seed=outer, restarts=20)
        hits += int(model.inertia <= _optimal_two_partition(x) * (1 + 1e-9))
    assert hits >= 95


# ---------------- ASSIGN ----------------


def test_assign_matches_brute_force(rng):
    centroids = rng.normal(size=(6, 3))
    model = KMeansModel(centroids=centroids, inertia=0.0, iterations_run=0, seed=0)
    x = rng.normal(size=(200, 3))
    labels = assign(model, make_table(x, ["a"] * 200)).labels
    for i, point in enumerate(x):
        distances = [float(((point - c) ** 2).sum()) for c in centroids]
        assert labels[i] == int(np.argmin(distances))


def test_assign_ties_go_to_lowest_index():
    centroids = np.array([[5.0, 5.0], [-1.0, 0.0], [9.0, 9.0], [1.0, 0.0]])
    model = KMeansModel(centroids=centroids, inertia=0.0, iterations_run=0, seed=0)
    table = make_table([[0.0, 0.0], [9.0, 9.0]], ["a", "a"])
    assert assign(model, table).labels.tolist() == [1, 2]


def test_assign_dimension_mismatch():
    model = KMeansModel(centroids=np.zeros((2, 2)), inertia=0.0, iterations_run=0, seed=0)
    with pytest.raises(DimensionError):
        assign(model, make_table(np.zeros((1, 3)), ["a"]))


def test_assign_reproduces_fit_labels(rng):
    table = make_table(rng.normal(size=(60, 2)), ["a"] * 60)
    model, assignment = fit_kmeans(table, 3, seed=0, restarts=3)
    np.testing.assert_array_equal(assign(model, table).labels, assignment.labels)
