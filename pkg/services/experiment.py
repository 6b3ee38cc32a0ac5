"""
Retraining experiment comparing annotated WSIs of high, medium and low
cluster entropy.

For every seed five classifiers are trained and scored on the same
held-out target WSIs:

  s_to_t      source only
  high/med/low  source plus one annotated WSI from that slice (the slice
              member rotates with the seed index)
  t_to_t      target only, trained on all candidate WSIs

Target WSIs outside the three slices are split into validation (for early
stopping) and test. No target WSI used for training or validation may
appear in the test split.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dataset import FeatureTable, split_group, subset_groups
from errors import ConsistencyError, DegenerateError, LeakageError, SliceError
from services.classifier import Classifier, TrainConfig, train
from services.entropy import SLICES, RankedSelection
from services.logger import logger
from services.metrics import MACRO_METRICS, evaluate
from services.seeding import derive_seed
from services.stats import bonferroni, welch_test

CONDITIONS = ("s_to_t", "high", "med", "low", "t_to_t")
PAIRS = (("high", "med"), ("high", "low"), ("med", "low"))
SIGNIFICANCE_METRICS = ("mIoU", "mDice")

# derive_seed stream keys. The three slice conditions share one stream so
# they differ only in the annotated WSI.
_SOURCE_ONLY, _RETRAIN, _TARGET_ONLY, _SOURCE_SPLIT = 0, 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    validation_fraction: float = 0.2
    source_folds: int = 5
    source_validation_fraction: float = 0.2
    warm_start: bool = True
    split_seed: int = 0
    jobs: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConditionResult:
    condition: str
    metrics: Dict[str, List[float]]
    wsis: List[Optional[str]]

    @property
    def means(self) -> Dict[str, float]:
        return {k: float(np.mean(v)) for k, v in self.metrics.items()}

    @property
    def stds(self) -> Dict[str, float]:
        return {k: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0 for k, v in self.metrics.items()}

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "per_seed": self.metrics,
            "mean": self.means,
            "std": self.stds,
            "wsis": self.wsis,
        }


@dataclass
class ExperimentSummary:
    seeds: List[int]
    conditions: Dict[str, ConditionResult]
    significance: List[dict]
    splits: Dict[str, List[str]]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seeds": [int(s) for s in self.seeds],
            "conditions": {name: result.to_dict() for name, result in self.conditions.items()},
            "significance": self.significance,
            "splits": self.splits,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSummary":
        conditions = {
            name: ConditionResult(
                condition=name,
                metrics={k: [float(x) for x in v] for k, v in item["per_seed"].items()},
                wsis=list(item.get("wsis", [])),
            )
            for name, item in payload["conditions"].items()
        }
        return cls(
            seeds=[int(s) for s in payload["seeds"]],
            conditions=conditions,
            significance=list(payload.get("significance", [])),
            splits={k: list(v) for k, v in payload.get("splits", {}).items()},
            config=dict(payload.get("config", {})),
        )


# ---------------- SPLITS ----------------


def _check_disjoint(train_groups, test_groups, what: str) -> None:
    overlap = sorted(set(train_groups) & set(test_groups))
    if overlap:
        raise LeakageError(f"{what} groups overlap the test split: {overlap[:5]}")


def split_target(
    target: FeatureTable,
    ranking: RankedSelection,
    validation_fraction: float,
    seed: int,
) -> Tuple[List[str], List[str], List[str]]:
    """
    Partition target groups into (candidates, validation, test).

    Candidates are the union of the High/Med/Low slices. Validation takes
    round(validation_fraction · m) of the remaining groups at random; the
    rest is test.
    """
    ranked = [item.group_id for item in ranking.ordered]
    unknown = sorted(set(ranked) - set(target.group_index))
    if unknown:
        raise ConsistencyError(f"ranking names groups missing from the target table: {unknown[:5]}")
    candidates = ranking.candidates()
    rest = [g for g in target.groups if g not in set(candidates)]
    n_validation = min(int(round(validation_fraction * len(target.groups))), max(len(rest) - 1, 0))
    rng = np.random.default_rng(derive_seed(seed, _SOURCE_SPLIT, 1))
    chosen = set(rng.choice(len(rest), size=n_validation, replace=False).tolist()) if n_validation else set()
    validation = [g for i, g in enumerate(rest) if i in chosen]
    test = [g for i, g in enumerate(rest) if i not in chosen]
    if not test:
        raise SliceError("no target groups left for testing after removing the slices")
    return candidates, validation, test


def _source_folds(source: FeatureTable, folds: int, seed: int) -> List[List[str]]:
    groups = source.groups
    folds = min(folds, len(groups))
    if folds < 2:
        return [groups]
    rng = np.random.default_rng(derive_seed(seed, _SOURCE_SPLIT, 0))
    order = rng.permutation(len(groups))
    return [[groups[i] for i in sorted(part)] for part in np.array_split(order, folds)]


def _source_split(
    source: FeatureTable,
    folds: List[List[str]],
    index: int,
    validation_fraction: float,
    with_validation: bool,
    seed: int,
) -> Tuple[FeatureTable, Optional[FeatureTable]]:
    """Leave fold index mod k out; optionally carve a validation share from the rest."""
    if len(folds) == 1:
        kept = folds[0]
    else:
        left_out = index % len(folds)
        kept = [g for i, part in enumerate(folds) if i != left_out for g in part]
    if not with_validation or len(kept) < 2:
        return subset_groups(source, kept), None
    rng = np.random.default_rng(derive_seed(seed, _SOURCE_SPLIT, 2, index))
    n_validation = max(1, int(round(validation_fraction * len(kept))))
    chosen = set(rng.choice(len(kept), size=min(n_validation, len(kept) - 1), replace=False).tolist())
    train_groups = [g for i, g in enumerate(kept) if i not in chosen]
    validation_groups = [g for i, g in enumerate(kept) if i in chosen]
    return subset_groups(source, train_groups), subset_groups(source, validation_groups)


def _validator(table: Optional[FeatureTable]):
    if table is None or len(table) == 0:
        return None
    return lambda model: evaluate(model, table).m_iou


# ---------------- RUNS ----------------


def _run_seed(
    index: int,
    seed: int,
    source: FeatureTable,
    target: FeatureTable,
    ranking: RankedSelection,
    folds: List[List[str]],
    splits: Dict[str, List[str]],
    tables: Dict[str, Optional[FeatureTable]],
    config: ExperimentConfig,
) -> Dict[str, Tuple[Dict[str, float], Optional[str]]]:
    cfg = config.train
    test_table = tables["test"]
    target_validation = _validator(tables["validation"])

    source_train, source_validation = _source_split(
        source, folds, index, config.source_validation_fraction, cfg.early_stop, config.split_seed
    )
    results: Dict[str, Tuple[Dict[str, float], Optional[str]]] = {}

    baseline = train(
        source_train,
        None,
        cfg,
        seed=derive_seed(seed, _SOURCE_ONLY),
        validate=_validator(source_validation),
    )
    results["s_to_t"] = (evaluate(baseline, test_table).macro(), None)

    for condition in SLICES:
        members = ranking.slices[condition]
        group_id = members[index % len(members)]
        _check_disjoint([group_id], splits["test"], condition)
        model = train(
            source_train,
            split_group(target, group_id),
            cfg,
            seed=derive_seed(seed, _RETRAIN),
            init=baseline if config.warm_start else None,
            validate=target_validation,
        )
        results[condition] = (evaluate(model, test_table).macro(), group_id)

    oracle = train(
        tables["candidates"],
        None,
        cfg,
        seed=derive_seed(seed, _TARGET_ONLY),
        validate=target_validation,
    )
    results["t_to_t"] = (evaluate(oracle, test_table).macro(), None)
    logger.info(
        "seed %d: mIoU %s",
        seed,
        ", ".join(f"{c}={results[c][0]['mIoU']:.3f}" for c in CONDITIONS),
    )
    return results


def _significance(conditions: Dict[str, ConditionResult]) -> List[dict]:
    rows = []
    for metric in SIGNIFICANCE_METRICS:
        for a, b in PAIRS:
            row = {"metric": metric, "a": a, "b": b, "t": None, "p": None, "p_bonferroni": None, "significant": False}
            try:
                t, p = welch_test(conditions[a].metrics[metric], conditions[b].metrics[metric])
            except DegenerateError as exc:
                logger.warning("no significance test for %s %s vs %s: %s", metric, a, b, exc)
            else:
                adjusted = bonferroni(p, len(PAIRS))
                row.update(t=t, p=p, p_bonferroni=adjusted, significant=adjusted < 0.05)
            rows.append(row)
    return rows


def run_experiment(
    source: FeatureTable,
    target: FeatureTable,
    ranking: RankedSelection,
    seeds: Sequence[int],
    config: ExperimentConfig = ExperimentConfig(),
) -> ExperimentSummary:
    """
    Train and evaluate every condition for every seed and aggregate.

    Raises:
        LeakageError: a training or validation WSI is also a test WSI.
        SliceError: no target WSI is left for testing.
        LabelingError: source or target lacks labels.
    """
    if not seeds:
        raise SliceError("at least one seed is required")
    candidates, validation, test = split_target(
        target, ranking, config.validation_fraction, config.split_seed
    )
    _check_disjoint(candidates, test, "candidate")
    _check_disjoint(validation, test, "validation")
    splits = {"candidates": candidates, "validation": validation, "test": test}
    tables = {
        "candidates": subset_groups(target, candidates),
        "validation": subset_groups(target, validation) if validation else None,
        "test": subset_groups(target, test),
    }
    folds = _source_folds(source, config.source_folds, config.split_seed)
    logger.info(
        "experiment: %d seeds, %d candidate / %d validation / %d test target WSIs, %d source fold(s)",
        len(seeds),
        len(candidates),
        len(validation),
        len(test),
        len(folds),
    )

    def job(item):
        index, seed = item
        return _run_seed(index, seed, source, target, ranking, folds, splits, tables, config)

    items = list(enumerate(seeds))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            per_seed = list(pool.map(job, items))
    else:
        per_seed = [job(item) for item in items]

    conditions = {}
    for condition in CONDITIONS:
        conditions[condition] = ConditionResult(
            condition=condition,
            metrics={m: [run[condition][0][m] for run in per_seed] for m in MACRO_METRICS},
            wsis=[run[condition][1] for run in per_seed],
        )
    return ExperimentSummary(
        seeds=list(seeds),
        conditions=conditions,
        significance=_significance(conditions),
        splits=splits,
        config=config.to_dict(),
    )


def summary_table(summary: ExperimentSummary) -> pd.DataFrame:
    """One row per condition with mean and std of each macro metric."""
    rows = []
    for name in CONDITIONS:
        if name not in summary.conditions:
            continue
        result = summary.conditions[name]
        row = {"condition": name, "runs": len(next(iter(result.metrics.values()), []))}
        for metric in MACRO_METRICS:
            row[f"{metric}_mean"] = result.means[metric]
            row[f"{metric}_std"] = result.stds[metric]
        rows.append(row)
    return pd.DataFrame(rows)
