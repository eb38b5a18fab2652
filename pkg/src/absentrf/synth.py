"""Synthetic demo datasets.

Three generators produce datasets whose *shape* matches the classic
public benchmarks for the absent-levels problem -- a mid-sized car-price
regression with a many-level make column, a legislative roll-call binary
classification with a 50-level state column containing sole
representatives, and a small seven-class bridge catalogue whose
location column has nearly one level per row.  The values themselves
are synthetic; the generators exist so the experiment pipeline and its
tests can run end to end without fetching the real data.
"""
from __future__ import annotations

import numpy as np

from .data import (
    CATEGORICAL,
    NUMERIC,
    RESPONSE_CLASS,
    RESPONSE_NUMERIC,
    ColumnSchema,
    Dataset,
    ResponseSpec,
    from_arrays,
)


def _assign_levels(rng: np.random.Generator, sizes: list[int]) -> np.ndarray:
    """Level index per row given per-level multiplicities, shuffled."""
    out = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    rng.shuffle(out)
    return out


def price_regression(seed: int = 1409) -> Dataset:
    """159 cars, 25 predictors (5 categorical, 20 numeric), positive price.

    Make has 18 levels with sizes from 2 up to 22, so small makes drop
    out of many bootstrap samples.
    """
    rng = np.random.default_rng(seed)
    n = 159

    make_sizes = [2, 3, 3, 4, 5, 6, 6, 7, 7, 8, 9, 10, 11, 12, 13, 14, 17, 22]
    make = _assign_levels(rng, make_sizes)
    body = _assign_levels(rng, [10, 20, 25, 44, 60])
    drive = _assign_levels(rng, [14, 60, 85])
    engine_type = _assign_levels(rng, [6, 10, 15, 50, 78])
    fuel_system = _assign_levels(rng, [3, 6, 10, 20, 55, 65])

    # latent size factor ties the numeric block together
    size_f = rng.normal(0.0, 1.0, n)
    make_effect = rng.normal(0.0, 1.0, 18)[make - 1]
    numerics = {}
    specs = [
        ("wheelbase", 98.0, 6.0, 0.8),
        ("length", 174.0, 12.0, 0.9),
        ("width", 65.9, 2.1, 0.7),
        ("height", 53.7, 2.4, 0.4),
        ("curb_weight", 2556.0, 520.0, 0.9),
        ("engine_size", 127.0, 41.0, 0.8),
        ("bore", 3.33, 0.27, 0.5),
        ("stroke", 3.26, 0.31, 0.1),
        ("compression", 10.1, 4.0, 0.0),
        ("horsepower", 104.0, 39.0, 0.7),
        ("peak_rpm", 5125.0, 480.0, -0.1),
        ("city_mpg", 25.2, 6.5, -0.7),
        ("highway_mpg", 30.8, 6.9, -0.7),
        ("normalized_losses", 122.0, 35.0, 0.1),
        ("symboling", 0.8, 1.2, -0.2),
        ("door_count", 3.1, 1.0, 0.2),
        ("cylinder_count", 4.4, 1.1, 0.6),
        ("fuel_tank", 14.5, 2.5, 0.6),
        ("final_drive", 3.6, 0.5, -0.3),
        ("valve_count", 12.4, 3.9, 0.4),
    ]
    for name, mu, sd, load in specs:
        noise = rng.normal(0.0, 1.0, n)
        numerics[name] = mu + sd * (load * size_f + load * 0.4 * make_effect + (1 - abs(load)) * noise)

    price = (
        13000.0
        + 5200.0 * make_effect
        + 4100.0 * size_f
        + 28.0 * (numerics["horsepower"] - 104.0)
        + 900.0 * rng.normal(0.0, 1.0, n)
    )
    price = np.maximum(price, 550.0 + 120.0 * rng.random(n))  # keep every price positive

    schema = [
        ColumnSchema("make", CATEGORICAL, tuple(f"make_{i:02d}" for i in range(1, 19))),
        ColumnSchema("body_style", CATEGORICAL, ("hardtop", "wagon", "convertible", "hatchback", "sedan")),
        ColumnSchema("drive_wheels", CATEGORICAL, ("4wd", "rwd", "fwd")),
        ColumnSchema("engine_type", CATEGORICAL, ("rotor", "ohcv", "dohc", "l", "ohc")),
        ColumnSchema("fuel_system", CATEGORICAL, ("spfi", "4bbl", "mfi", "1bbl", "2bbl", "mpfi")),
    ]
    columns = [make, body, drive, engine_type, fuel_system]
    for name, _, _, _ in specs:
        schema.append(ColumnSchema(name, NUMERIC))
        columns.append(numerics[name])
    response = ResponseSpec(RESPONSE_NUMERIC)
    return from_arrays(schema, response, columns, price)


_STATE_SEATS = {
    "AL": 7, "AK": 1, "AZ": 9, "AR": 4, "CA": 53, "CO": 7, "CT": 5, "DE": 1,
    "FL": 27, "GA": 14, "HI": 2, "ID": 2, "IL": 18, "IN": 9, "IA": 4, "KS": 4,
    "KY": 6, "LA": 6, "ME": 2, "MD": 8, "MA": 9, "MI": 14, "MN": 8, "MS": 4,
    "MO": 8, "MT": 1, "NE": 3, "NV": 4, "NH": 2, "NJ": 12, "NM": 3, "NY": 27,
    "NC": 13, "ND": 1, "OH": 16, "OK": 5, "OR": 5, "PA": 18, "RI": 2, "SC": 7,
    "SD": 1, "TN": 9, "TX": 36, "UT": 4, "VT": 1, "VA": 11, "WA": 10, "WV": 3,
    "WI": 8, "WY": 1,
}


def rollcall_binary(seed: int = 2016) -> Dataset:
    """424 voting legislators: party, 50-level state, two ideology scores.

    Several states seat exactly one member, so those rows train no state
    split that knows their level.  Response classes are ("no", "yes")
    with roughly 70% yes.
    """
    rng = np.random.default_rng(seed)
    states = list(_STATE_SEATS)
    seats = np.array([_STATE_SEATS[s] for s in states])
    state_all = np.repeat(np.arange(1, 51), seats)  # 435 seats
    keep = np.sort(rng.choice(state_all.size, size=424, replace=False))
    state = state_all[keep]
    n = state.size

    state_lean = rng.normal(0.0, 0.9, 50)[state - 1]
    party = (rng.normal(0.0, 1.0, n) + 0.9 * state_lean > 0).astype(np.int64) + 1  # 1=d, 2=r
    dim1 = np.where(party == 1, rng.normal(-0.38, 0.14, n), rng.normal(0.45, 0.16, n))
    dim2 = 0.5 * state_lean + rng.normal(0.0, 0.6, n)

    # moderate coefficients leave plenty of label noise, which keeps the
    # trees deep enough that most root-to-leaf paths meet a state split
    logit = 0.9 - 1.6 * dim1 + 1.0 * (party == 1) + 0.5 * dim2 + 0.5 * state_lean
    yes = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    y = yes.astype(np.int64) + 1  # 1=no, 2=yes

    schema = [
        ColumnSchema("party", CATEGORICAL, ("d", "r")),
        ColumnSchema("state", CATEGORICAL, tuple(states)),
        ColumnSchema("dim1", NUMERIC),
        ColumnSchema("dim2", NUMERIC),
    ]
    response = ResponseSpec(RESPONSE_CLASS, ("no", "yes"))
    return from_arrays(schema, response, [party, state, dim1, dim2], y)


def bridge_multiclass(seed: int = 1818) -> Dataset:
    """72 bridges, 7 predictors, 7 construction-type classes.

    Location has 46 levels over 72 rows (30 singletons), the layout that
    makes absent levels the rule rather than the exception.
    """
    rng = np.random.default_rng(seed)
    n = 72

    location_sizes = [1] * 30 + [2] * 10 + [3] * 4 + [5] * 2  # 46 levels, 72 rows
    location = _assign_levels(rng, location_sizes)
    river = _assign_levels(rng, [12, 25, 35])
    purpose = _assign_levels(rng, [10, 24, 38])
    material = _assign_levels(rng, [16, 24, 32])

    year = np.clip(rng.normal(1905.0, 38.0, n), 1818.0, 1986.0)
    lanes = rng.choice([1.0, 2.0, 4.0, 6.0], size=n, p=[0.15, 0.55, 0.25, 0.05])
    length = np.exp(rng.normal(7.0, 0.6, n))

    # construction type drifts with era and shifts with purpose/river,
    # plus a mild location-specific effect so location carries signal
    era = np.digitize(year, [1870.0, 1900.0, 1940.0])  # 0..3
    loc_effect = rng.normal(0.0, 0.8, 46)[location - 1]
    score = (
        1.6 * era
        + 0.8 * (purpose - 2)
        + 0.5 * (river - 2)
        + 0.4 * (material - 2)
        + 0.6 * loc_effect
        + rng.normal(0.0, 0.9, n)
    )
    bins = np.quantile(score, [1 / 7, 2 / 7, 3 / 7, 4 / 7, 5 / 7, 6 / 7])
    y = np.digitize(score, bins) + 1  # classes 1..7

    schema = [
        ColumnSchema("river", CATEGORICAL, ("a", "m", "o")),
        ColumnSchema("location", CATEGORICAL, tuple(f"loc_{i:02d}" for i in range(1, 47))),
        ColumnSchema("purpose", CATEGORICAL, ("walk", "aqueduct", "highway")),
        ColumnSchema("material", CATEGORICAL, ("wood", "iron", "steel")),
        ColumnSchema("erected", NUMERIC),
        ColumnSchema("lanes", NUMERIC),
        ColumnSchema("length", NUMERIC),
    ]
    response = ResponseSpec(RESPONSE_CLASS, tuple(f"type_{i}" for i in range(1, 8)))
    return from_arrays(
        schema, response, [river, location, purpose, material, year, lanes, length], y
    )
