"""Routing heuristics for levels that were absent when a split was learned.

When a categorical split is asked about a level that never occurred in
the node's training rows, the split itself has no answer; a
:class:`Heuristic` supplies one.  ``ONE_HOT`` is the odd member: it is a
dataset transform (train on dummy columns instead), so it can never be
consulted at routing time.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable


class Heuristic(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    STOP = "stop"
    MAJORITY = "majority"
    RANDOM = "random"
    DBI = "dbi"
    ONE_HOT = "onehot"

    @property
    def token(self) -> str:
        return self.value


#: Heuristics with no systematic directional preference; the baseline
#: set that relative metrics are measured against.
MISSING_DATA_SET: tuple[Heuristic, ...] = (
    Heuristic.STOP,
    Heuristic.MAJORITY,
    Heuristic.RANDOM,
    Heuristic.DBI,
)

_BY_TOKEN = {h.value: h for h in Heuristic}


def parse_heuristic(token: str) -> Heuristic:
    try:
        return _BY_TOKEN[token]
    except KeyError:
        known = ", ".join(sorted(_BY_TOKEN))
        raise ValueError(f"unknown heuristic {token!r} (expected one of: {known})") from None


@dataclass(frozen=True)
class RoutingContext:
    """What a heuristic may look at: the node and its daughter sizes
    (in-bag row counts recorded when the split was learned)."""

    node_id: int
    left_size: int
    right_size: int


@dataclass(frozen=True)
class RoutingOutcome:
    """Single-sided step, a stop at the current node, or a weighted fork."""

    kind: str  # "left" | "right" | "stop" | "both"
    w_left: float = 0.0
    w_right: float = 0.0


GO_LEFT = RoutingOutcome("left")
GO_RIGHT = RoutingOutcome("right")
STOP_HERE = RoutingOutcome("stop")


def resolve(
    heuristic: Heuristic, ctx: RoutingContext, coin: Callable[[], float]
) -> RoutingOutcome:
    """Decide a direction for an absent level.

    ``coin`` must return a uniform draw in [0, 1); it is only invoked by
    Random (always once) and by Majority (once, on an exact size tie),
    so deterministic heuristics consume no randomness.
    """
    if heuristic is Heuristic.LEFT:
        return GO_LEFT
    if heuristic is Heuristic.RIGHT:
        return GO_RIGHT
    if heuristic is Heuristic.STOP:
        return STOP_HERE
    if heuristic is Heuristic.MAJORITY:
        if ctx.left_size > ctx.right_size:
            return GO_LEFT
        if ctx.right_size > ctx.left_size:
            return GO_RIGHT
        return GO_LEFT if coin() < 0.5 else GO_RIGHT
    if heuristic is Heuristic.RANDOM:
        total = ctx.left_size + ctx.right_size
        if total <= 0:
            raise ValueError("routing context has no daughter rows")
        return GO_LEFT if coin() < ctx.left_size / total else GO_RIGHT
    if heuristic is Heuristic.DBI:
        total = ctx.left_size + ctx.right_size
        if total <= 0:
            raise ValueError("routing context has no daughter rows")
        return RoutingOutcome("both", ctx.left_size / total, ctx.right_size / total)
    if heuristic is Heuristic.ONE_HOT:
        raise ValueError(
            "onehot is a dataset transform, not a routing rule; "
            "train on one_hot_transform(dataset) instead"
        )
    raise ValueError(f"unknown heuristic {heuristic!r}")
