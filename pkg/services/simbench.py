"""
Synthetic source/target benchmark with domain shift.

Every class is a mixture of isotropic Gaussian components. Source patches
are drawn i.i.d. from the source class priors. Each target WSI draws its
own component weights from a Dirichlet, so a small concentration gives a
biased WSI (a few components) and a large one a WSI covering the whole
target distribution. Target components are the source components moved
by a common translation and with a scaled covariance.

Everything is drawn from a single numpy Generator seeded with the config
seed, so a config reproduces its tables exactly.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import entropy as shannon_entropy

from dataset import FeatureTable
from errors import ConfigError
from services.logger import logger

PRIOR_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SimConfig:
    """
    Knobs of the synthetic benchmark.

    Defaults are a small stand-in for histology patch data: three classes
    (non-neoplasm, LSIL, HSIL) with a strongly imbalanced source prior and a
    balanced target pool. A balanced pool keeps every component equally
    likely under a huge alpha, so cluster entropy follows component coverage.
    """
    num_classes: int = 3
    components_per_class: int = 2
    dim: int = 16
    source_priors: Tuple[float, ...] = (0.85, 0.10, 0.05)
    target_priors: Tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    # Within-component standard deviation and pairwise distance of component means.
    sigma: float = 1.0
    separation: float = 8.0
    # Target shift: translation length and covariance scale.
    shift_mean: float = 5.0
    shift_scale: float = 1.25
    wsis: int = 60
    patches_per_wsi: Tuple[int, int] = (100, 300)
    source_wsis: int = 30
    source_patches_per_wsi: Tuple[int, int] = (60, 140)
    # Per-WSI concentration is alpha * alpha_spread**u with u ~ U(-1, 1).
    alpha: float = 0.5
    alpha_spread: float = 20.0
    seed: int = 0

    @property
    def num_components(self) -> int:
        return self.num_classes * self.components_per_class

    def validate(self) -> "SimConfig":
        counts = {
            "num_classes": self.num_classes,
            "components_per_class": self.components_per_class,
            "dim": self.dim,
            "wsis": self.wsis,
            "source_wsis": self.source_wsis,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        for name, priors in (("source_priors", self.source_priors), ("target_priors", self.target_priors)):
            priors = np.asarray(priors, dtype=np.float64)
            if priors.shape != (self.num_classes,):
                raise ConfigError(f"{name} must have {self.num_classes} entries")
            if (priors < 0).any() or abs(priors.sum() - 1.0) > PRIOR_TOLERANCE:
                raise ConfigError(f"{name} must be a probability vector, got {priors.tolist()}")
        for name, (low, high) in (
            ("patches_per_wsi", self.patches_per_wsi),
            ("source_patches_per_wsi", self.source_patches_per_wsi),
        ):
            if not 1 <= low <= high:
                raise ConfigError(f"{name} must be a range 1 <= low <= high, got {(low, high)}")
        if not self.sigma > 0:
            raise ConfigError(f"degenerate covariance: sigma={self.sigma}")
        if not self.shift_scale > 0:
            raise ConfigError(f"degenerate covariance: shift_scale={self.shift_scale}")
        if self.separation < 0 or self.shift_mean < 0:
            raise ConfigError("separation and shift_mean must be non-negative")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.alpha_spread < 1:
            raise ConfigError(f"alpha_spread must be >= 1, got {self.alpha_spread}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        return self

    def to_dict(self) -> dict:
        payload = asdict(self)
        for key, value in payload.items():
            if isinstance(value, tuple):
                payload[key] = list(value)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown simulation setting(s): {unknown}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()}
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SimTruth:
    group_ids: List[str]
    weights: np.ndarray
    alphas: np.ndarray
    component_classes: np.ndarray
    source_means: np.ndarray
    target_means: np.ndarray
    target_components: np.ndarray = field(repr=False)
    source_components: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "group_ids": list(self.group_ids),
            "weights": self.weights.tolist(),
            "alphas": self.alphas.tolist(),
            "diversity": truth_diversity(self),
            "component_classes": self.component_classes.tolist(),
            "source_means": self.source_means.tolist(),
            "target_means": self.target_means.tolist(),
        }


def _component_means(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Means `separation` apart pairwise: scaled orthonormal directions of a
    random frame when there is room, otherwise random normal draws.
    """
    M, d = config.num_components, config.dim
    if M <= d:
        frame, _ = np.linalg.qr(rng.standard_normal((d, d)))
        return config.separation / np.sqrt(2.0) * frame[:, :M].T
    logger.warning("%d components in %d dims: means are random, not equidistant", M, d)
    return rng.standard_normal((M, d)) * config.separation / np.sqrt(2.0)


def _sample_patches(
    rng: np.random.Generator,
    components: np.ndarray,
    means: np.ndarray,
    std: float,
) -> np.ndarray:
    noise = rng.standard_normal((components.shape[0], means.shape[1]))
    return means[components] + std * noise


def _group_names(prefix: str, count: int) -> List[str]:
    width = max(3, len(str(count - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _build_table(
    group_ids: Sequence[str],
    sizes: Sequence[int],
    labels: np.ndarray,
    features: np.ndarray,
    num_classes: int,
    domain: str,
) -> FeatureTable:
    patch_ids: List[str] = []
    groups: List[str] = []
    for group_id, size in zip(group_ids, sizes):
        patch_ids.extend(f"{group_id}_p{j:04d}" for j in range(size))
        groups.extend([group_id] * size)
    return FeatureTable(
        patch_ids=tuple(patch_ids),
        group_ids=tuple(groups),
        labels=labels,
        features=features,
        num_classes=num_classes,
        domain=domain,  # type: ignore[arg-type]
    )


def generate(config: SimConfig) -> Tuple[FeatureTable, FeatureTable, SimTruth]:
    """
    Draw a source table, a target table and the target ground truth.

    Both tables carry labels; target labels stand in for the pathologist's
    annotation and for test metrics.

    Raises:
        ConfigError: invalid config (including a non-positive covariance scale).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    C, M = config.num_classes, config.num_components
    component_classes = np.repeat(np.arange(C), config.components_per_class)

    source_means = _component_means(config, rng)
    direction = rng.standard_normal(config.dim)
    direction /= np.linalg.norm(direction)
    target_means = source_means + config.shift_mean * direction

    # Source: class from the prior, component uniform within the class.
    source_priors = np.asarray(config.source_priors, dtype=np.float64)
    source_component_weights = source_priors[component_classes] / config.components_per_class
    source_ids = _group_names("S", config.source_wsis)
    low, high = config.source_patches_per_wsi
    source_sizes = rng.integers(low, high, endpoint=True, size=config.source_wsis)
    source_components = rng.choice(M, size=int(source_sizes.sum()), p=source_component_weights)
    source_features = _sample_patches(rng, source_components, source_means, config.sigma)

    # Target: each WSI has its own Dirichlet component weights around the target prior.
    target_priors = np.asarray(config.target_priors, dtype=np.float64)
    base = target_priors[component_classes] / config.components_per_class
    target_ids = _group_names("T", config.wsis)
    low, high = config.patches_per_wsi
    target_sizes = rng.integers(low, high, endpoint=True, size=config.wsis)
    exponents = rng.uniform(-1.0, 1.0, size=config.wsis)
    alphas = config.alpha * config.alpha_spread ** exponents

    weights = np.empty((config.wsis, M))
    target_components = []
    for i in range(config.wsis):
        concentration = np.maximum(alphas[i] * M * base, 1e-6)
        w = rng.dirichlet(concentration)
        w = np.clip(w, 0.0, None)
        weights[i] = w / w.sum()
        counts = rng.multinomial(int(target_sizes[i]), weights[i])
        target_components.append(np.repeat(np.arange(M), counts))
    target_components = np.concatenate(target_components)
    target_features = _sample_patches(
        rng, target_components, target_means, config.sigma * config.shift_scale
    )

    source = _build_table(
        source_ids, source_sizes, component_classes[source_components],
        source_features, C, "source",
    )
    target = _build_table(
        target_ids, target_sizes, component_classes[target_components],
        target_features, C, "target",
    )
    truth = SimTruth(
        group_ids=target_ids,
        weights=weights,
        alphas=alphas,
        component_classes=component_classes,
        source_means=source_means,
        target_means=target_means,
        target_components=target_components,
        source_components=source_components,
    )
    logger.info(
        "simulated %d source patches in %d WSIs and %d target patches in %d WSIs (seed %d)",
        len(source),
        config.source_wsis,
        len(target),
        config.wsis,
        config.seed,
    )
    return source, target, truth


def truth_diversity(truth: SimTruth) -> Dict[str, float]:
    """Entropy (natural log) of every target WSI's true component weights."""
    return {
        group_id: float(shannon_entropy(w))
        for group_id, w in zip(truth.group_ids, truth.weights)
    }


def load_sim_config(payload: Optional[dict] = None, **overrides) -> SimConfig:
    """SimConfig from a JSON document with keyword overrides applied on top."""
    values = dict(payload or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig.from_dict(values).validate()
