"""Shared fixtures for the pipeline test suite."""

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pytest

from dataset import UNLABELED, FeatureTable
from services.simbench import SimConfig, generate


def make_table(
    features,
    groups: Sequence[str],
    labels: Optional[Sequence[int]] = None,
    num_classes: int = 3,
    domain: str = "target",
    prefix: str = "p",
) -> FeatureTable:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    n = features.shape[0]
    if labels is None:
        labels = [UNLABELED] * n
    return FeatureTable(
        patch_ids=tuple(f"{prefix}{i}" for i in range(n)),
        group_ids=tuple(groups),
        labels=np.asarray(labels, dtype=np.int64),
        features=features,
        num_classes=num_classes,
        domain=domain,
    )


def write_csv(path: Path, rows, dim: int, classes: Optional[int] = 3, extra: str = "") -> Path:
    """Write a raw feature CSV; `rows` are (patch_id, wsi_id, label, *features) tuples."""
    lines = []
    if classes is not None:
        lines.append(f"# classes={classes}{extra}")
    lines.append(",".join(["patch_id", "wsi_id", "label"] + [f"f{i}" for i in range(dim)]))
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def grouped_table(rng) -> FeatureTable:
    """40 labeled target patches in 4 interleaved groups, D=5."""
    groups = [f"g{i % 4}" for i in range(40)]
    labels = rng.integers(0, 3, size=40)
    return make_table(rng.normal(size=(40, 5)), groups, labels)


@pytest.fixture(scope="session")
def small_sim_config() -> SimConfig:
    return SimConfig(
        wsis=20,
        patches_per_wsi=(40, 80),
        source_wsis=10,
        source_patches_per_wsi=(40, 60),
        seed=7,
    )


@pytest.fixture(scope="session")
def small_sim(small_sim_config):
    return generate(small_sim_config)


@pytest.fixture
def out_dir(tmp_path) -> Path:
    path = tmp_path / "out"
    path.mkdir()
    return path
