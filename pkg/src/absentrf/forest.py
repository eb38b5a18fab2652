"""Bootstrap ensembles of trees with out-of-bag bookkeeping.

Training is embarrassingly parallel *by construction*: every tree's
bootstrap draw and growth rng come from seeds derived independently of
the other trees, so the same forest materialises whether trees are
grown serially or across any number of worker processes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .data import (
    CLASSIFICATION,
    REGRESSION,
    ColumnSchema,
    Dataset,
    ResponseSpec,
    schema_from_dict,
    schema_to_dict,
)
from .heuristics import Heuristic
from .seeding import BOOTSTRAP, COIN, TREE, Coins, derive, stream
from .tree import (
    GrowConfig,
    PredictionTrace,
    Tree,
    grow_tree,
    route,
    structure_hash,
    tree_from_dict,
    tree_predict,
    tree_to_dict,
    tree_vote,
)

FOREST_FORMAT = "absentrf-forest"
FOREST_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble knobs.  ``sample_size`` defaults to the training-set
    size and ``grow`` to task-standard settings (see
    :func:`default_grow_config`) when left as None."""

    n_trees: int = 500
    sample_size: int | None = None
    seed: int = 0
    grow: GrowConfig | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("a forest needs at least one tree")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive")


def default_grow_config(dataset: Dataset) -> GrowConfig:
    """Task-standard growth defaults: regression samples ``max(1, P//3)``
    predictors per node and stops at 5 rows; classification samples
    ``floor(sqrt(P))`` and grows to purity."""
    p = dataset.n_predictors
    if dataset.task == REGRESSION:
        return GrowConfig(task=REGRESSION, mtry=max(1, p // 3), min_node_size=5)
    return GrowConfig(task=CLASSIFICATION, mtry=max(1, int(math.isqrt(p))), min_node_size=1)


def bootstrap_sample(n_rows: int, sample_size: int, rng: np.random.Generator) -> np.ndarray:
    """``sample_size`` draws with replacement from ``0..n_rows-1``."""
    if n_rows < 1 or sample_size < 1:
        raise ValueError("bootstrap needs at least one row and one draw")
    return rng.integers(0, n_rows, size=sample_size)


@dataclass
class Forest:
    trees: list[Tree]
    in_bag: np.ndarray  # (B, N) multiplicity counts
    config: ForestConfig  # with sample_size and grow resolved
    fingerprint: str
    task: str
    n_classes: int
    schema: tuple[ColumnSchema, ...]
    response: ResponseSpec

    @property
    def n_trees(self) -> int:
        return len(self.trees)


# module-level state for worker processes (set once per worker by the
# pool initializer; fork start method shares the parent's copy anyway)
_WORKER_DATASET: Dataset | None = None
_WORKER_GROW: GrowConfig | None = None


def _init_worker(dataset: Dataset, grow_cfg: GrowConfig) -> None:
    global _WORKER_DATASET, _WORKER_GROW
    _WORKER_DATASET = dataset
    _WORKER_GROW = grow_cfg


def _grow_task(args: tuple[int, int, np.ndarray]) -> Tree:
    tree_id, seed, counts = args
    rows = np.repeat(np.arange(counts.size), counts)
    rng = np.random.default_rng(seed)
    return grow_tree(_WORKER_DATASET, rows, _WORKER_GROW, rng, tree_id=tree_id)


def train_forest(dataset: Dataset, config: ForestConfig, workers: int = 1) -> Forest:
    """Train ``config.n_trees`` trees on independent bootstrap samples.

    Tree ``b`` draws its bootstrap from seed ``derive(seed, BOOTSTRAP, b)``
    and grows from ``derive(seed, TREE, b)``; outputs are identical for
    any ``workers`` count.
    """
    if dataset.y is None:
        raise ValueError("cannot train on an unlabeled dataset")
    grow_cfg = config.grow if config.grow is not None else default_grow_config(dataset)
    if grow_cfg.task != dataset.task:
        raise ValueError(f"grow config task {grow_cfg.task!r} does not match the dataset")
    n = dataset.n_rows
    sample_size = config.sample_size if config.sample_size is not None else n
    resolved = dataclasses.replace(config, sample_size=sample_size, grow=grow_cfg)

    in_bag = np.zeros((config.n_trees, n), dtype=np.int64)
    tasks = []
    for b in range(config.n_trees):
        draws = bootstrap_sample(n, sample_size, stream(config.seed, BOOTSTRAP, b))
        in_bag[b] = np.bincount(draws, minlength=n)
        tasks.append((b, derive(config.seed, TREE, b), in_bag[b]))

    if workers <= 1:
        _init_worker(dataset, grow_cfg)
        trees = [_grow_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(dataset, grow_cfg)
        ) as pool:
            trees = list(pool.map(_grow_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

    return Forest(
        trees=trees,
        in_bag=in_bag,
        config=resolved,
        fingerprint=dataset.fingerprint(),
        task=dataset.task,
        n_classes=dataset.response.n_classes,
        schema=dataset.schema,
        response=dataset.response,
    )


def default_coins(forest: Forest, replication: int = 0) -> Coins:
    return Coins(master=derive(forest.config.seed, COIN), replication=replication)


def forest_predict(
    forest: Forest, x, policy: Heuristic, coins: Coins | None = None, obs_id: int = 0
):
    """Aggregate all trees for one predictor vector.

    Returns ``(prediction, None)`` for regression and
    ``(class_index, vote_shares)`` for classification, where the shares
    are the fraction of trees voting for each class and equal-vote ties
    go to the lowest class index.
    """
    if coins is None:
        coins = default_coins(forest)
    if forest.task == REGRESSION:
        total = 0.0
        for tree in forest.trees:
            total += tree_predict(route(tree, x, policy, coins, obs_id), tree)
        return total / forest.n_trees, None
    votes = np.zeros(forest.n_classes)
    for tree in forest.trees:
        votes[tree_vote(route(tree, x, policy, coins, obs_id), tree) - 1] += 1
    shares = votes / forest.n_trees
    return int(np.argmax(votes)) + 1, shares


@dataclass
class OOBPredictionSet:
    """Out-of-bag aggregates for every training row under one heuristic.

    Rows with no out-of-bag trees are flagged undefined (NaN prediction,
    NaN probabilities) rather than erroring, since single-tree forests
    legitimately produce them.
    """

    heuristic: str
    task: str
    n_classes: int
    predictions: np.ndarray  # float ŷ, or int class index (0 where undefined)
    probabilities: np.ndarray | None  # (N, K) vote shares
    oob_tree_counts: np.ndarray
    absent_tree_counts: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return self.oob_tree_counts > 0


def oob_predict_all(
    forest: Forest, dataset: Dataset, policy: Heuristic, coins: Coins | None = None
) -> OOBPredictionSet:
    """Predict every row using only the trees whose bootstrap missed it."""
    if dataset.fingerprint() != forest.fingerprint:
        raise ValueError("dataset does not match the one this forest was trained on")
    if coins is None:
        coins = default_coins(forest)
    n = dataset.n_rows
    xmat = dataset.matrix()
    oob_counts = np.zeros(n, dtype=np.int64)
    absent_counts = np.zeros(n, dtype=np.int64)
    if forest.task == REGRESSION:
        sums = np.zeros(n)
        for b, tree in enumerate(forest.trees):
            for i in np.flatnonzero(forest.in_bag[b] == 0):
                trace = route(tree, xmat[i], policy, coins, obs_id=int(i))
                sums[i] += tree_predict(trace, tree)
                oob_counts[i] += 1
                absent_counts[i] += trace.absent_encountered
        with np.errstate(invalid="ignore"):
            preds = np.where(oob_counts > 0, sums / np.maximum(oob_counts, 1), np.nan)
        return OOBPredictionSet(
            policy.token, forest.task, 0, preds, None, oob_counts, absent_counts
        )
    votes = np.zeros((n, forest.n_classes), dtype=np.int64)
    for b, tree in enumerate(forest.trees):
        for i in np.flatnonzero(forest.in_bag[b] == 0):
            trace = route(tree, xmat[i], policy, coins, obs_id=int(i))
            votes[i, tree_vote(trace, tree) - 1] += 1
            oob_counts[i] += 1
            absent_counts[i] += trace.absent_encountered
    defined = oob_counts > 0
    with np.errstate(invalid="ignore"):
        probs = votes / np.maximum(oob_counts, 1)[:, None]
    probs[~defined] = np.nan
    preds = np.where(defined, np.argmax(votes, axis=1) + 1, 0).astype(np.int64)
    return OOBPredictionSet(
        policy.token, forest.task, forest.n_classes, preds, probs, oob_counts, absent_counts
    )


def pooled_absence_proportions(sets: list[OOBPredictionSet]) -> np.ndarray:
    """Per-row share of out-of-bag trees that hit an absent level, pooled
    over replications; NaN where a row was never out of bag."""
    if not sets:
        raise ValueError("no prediction sets given")
    absent = sum(s.absent_tree_counts for s in sets)
    oob = sum(s.oob_tree_counts for s in sets)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(oob > 0, absent / np.maximum(oob, 1), np.nan)


def absence_proportion(sets: list[OOBPredictionSet], observation: int) -> float:
    return float(pooled_absence_proportions(sets)[observation])


def forest_tree_hashes(forest: Forest) -> list[str]:
    return [structure_hash(t) for t in forest.trees]


def forest_hash(forest: Forest) -> str:
    h = hashlib.sha256()
    for digest in forest_tree_hashes(forest):
        h.update(digest.encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# serialization


def forest_to_dict(forest: Forest) -> dict:
    cfg = forest.config
    return {
        "format": FOREST_FORMAT,
        "format_version": FOREST_FORMAT_VERSION,
        "library_version": __version__,
        "config": {
            "n_trees": cfg.n_trees,
            "sample_size": cfg.sample_size,
            "seed": cfg.seed,
            "grow": dataclasses.asdict(cfg.grow),
        },
        "task": forest.task,
        "n_classes": forest.n_classes,
        "data": schema_to_dict(forest.schema, forest.response),
        "fingerprint": forest.fingerprint,
        "in_bag": forest.in_bag.tolist(),
        "trees": [tree_to_dict(t) for t in forest.trees],
    }


def forest_from_dict(obj: dict) -> Forest:
    if obj.get("format") != FOREST_FORMAT:
        raise ValueError("not a forest dump")
    cfg_obj = obj["config"]
    grow = GrowConfig(**cfg_obj["grow"])
    config = ForestConfig(
        n_trees=int(cfg_obj["n_trees"]),
        sample_size=int(cfg_obj["sample_size"]),
        seed=int(cfg_obj["seed"]),
        grow=grow,
    )
    schema, response = schema_from_dict(obj["data"])
    return Forest(
        trees=[tree_from_dict(t) for t in obj["trees"]],
        in_bag=np.asarray(obj["in_bag"], dtype=np.int64),
        config=config,
        fingerprint=obj["fingerprint"],
        task=obj["task"],
        n_classes=int(obj["n_classes"]),
        schema=schema,
        response=response,
    )


def save_forest(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_forest(path) -> Forest:
    with open(path, "r", encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
