import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import make_table
from errors import DimensionError, InsufficientDataError
from services.pca import PcaModel, fit_pca, fit_pca_joint, reconstruct, transform


@pytest.fixture
def random_table(rng):
    mixing = rng.normal(size=(8, 8))
    return make_table(rng.normal(size=(50, 8)) @ mixing, [f"g{i % 5}" for i in range(50)])


def test_points_on_one_axis():
    table = make_table([[-1.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]], ["a"] * 3)
    model = fit_pca(table, 1)
    np.testing.assert_allclose(model.components, [[1.0, 0.0, 0.0]], atol=1e-12)
    np.testing.assert_allclose(model.eigenvalues, [4.0], rtol=1e-12)
    np.testing.assert_allclose(model.mean, [1.0, 0.0, 0.0])


def test_two_by_two_closed_form():
    # Sample covariance [[2,1],[1,2]] (divisor N-1).
    x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    a, b = np.sqrt(3.0 * 3 / 4), np.sqrt(3.0 * 1 / 4)
    x = x * [a, b]
    rotation = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    x = x @ rotation
    table = make_table(x, ["a"] * 4)
    covariance = np.cov(x, rowvar=False)
    np.testing.assert_allclose(covariance, [[2.0, 1.0], [1.0, 2.0]], atol=1e-12)

    model = fit_pca(table, 2)
    np.testing.assert_allclose(model.eigenvalues, [3.0, 1.0], rtol=1e-12)
    np.testing.assert_allclose(model.components[0], np.array([1.0, 1.0]) / np.sqrt(2.0), atol=1e-12)


def test_components_are_orthonormal(random_table):
    model = fit_pca(random_table, 5)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(5), atol=1e-9)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert np.all(model.eigenvalues >= 0)


def test_sign_convention(random_table):
    model = fit_pca(random_table, 8)
    for row in model.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_transformed_variances_equal_eigenvalues(random_table):
    model = fit_pca(random_table, 4)
    reduced = transform(model, random_table)
    np.testing.assert_allclose(reduced.features.var(axis=0, ddof=1), model.eigenvalues, rtol=1e-9)


def test_full_rank_projection_preserves_distances(random_table):
    model = fit_pca(random_table, random_table.dim)
    reduced = transform(model, random_table)
    np.testing.assert_allclose(pdist(reduced.features), pdist(random_table.features), rtol=1e-9)


def test_trace_and_reconstruction_error(random_table):
    full = fit_pca(random_table, random_table.dim)
    np.testing.assert_allclose(full.eigenvalues.sum(), full.total_variance, rtol=1e-9)

    model = fit_pca(random_table, 3)
    rebuilt = reconstruct(model, transform(model, random_table))
    residual = random_table.features - rebuilt.features
    mean_squared_error = float((residual**2).sum()) / (len(random_table) - 1)
    np.testing.assert_allclose(mean_squared_error, full.eigenvalues[3:].sum(), rtol=1e-9)
    np.testing.assert_allclose(model.discarded_variance, full.eigenvalues[3:].sum(), rtol=1e-9)


def test_transform_matches_naive_projection(random_table):
    model = fit_pca(random_table, 3)
    reduced = transform(model, random_table)
    for i in range(len(random_table)):
        for j in range(3):
            value = 0.0
            for k in range(random_table.dim):
                value += model.components[j, k] * (random_table.features[i, k] - model.mean[k])
            assert reduced.features[i, j] == pytest.approx(value, rel=1e-9, abs=1e-9)


def test_mean_maps_to_origin(random_table):
    model = fit_pca(random_table, 3)
    at_mean = make_table(model.mean[None, :], ["m"], prefix="m")
    np.testing.assert_allclose(transform(model, at_mean).features, 0.0, atol=1e-9)


def test_transform_keeps_groups(random_table):
    reduced = transform(fit_pca(random_table, 2), random_table)
    assert reduced.group_sizes() == random_table.group_sizes()
    assert reduced.patch_ids == random_table.patch_ids


def test_fit_is_deterministic(random_table):
    a, b = fit_pca(random_table, 4), fit_pca(random_table, 4)
    assert a.components.tobytes() == b.components.tobytes()
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()


def test_model_json_round_trip(random_table):
    model = fit_pca(random_table, 3)
    again = PcaModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(again.components, model.components)
    assert again.d == 3 and again.D == 8


def test_joint_fit_uses_both_tables(random_table, rng):
    other = make_table(rng.normal(size=(10, 8)) + 50.0, ["s"] * 10, prefix="s")
    joint = fit_pca_joint([other, random_table], 2)
    assert joint.mean[0] != pytest.approx(fit_pca(random_table, 2).mean[0])


def test_preconditions(random_table):
    with pytest.raises(DimensionError):
        fit_pca(random_table, 9)
    with pytest.raises(InsufficientDataError):
        fit_pca(make_table([[1.0, 2.0]], ["a"]), 1)
    model = fit_pca(random_table, 2)
    with pytest.raises(DimensionError):
        transform(model, make_table(np.zeros((2, 3)), ["a", "a"]))
