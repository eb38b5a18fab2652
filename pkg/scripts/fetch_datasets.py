#!/usr/bin/env python3
"""Download and preprocess the three public benchmark datasets.

Needs network access.  Produces, under ``data/``:

    auto_imports.csv / auto_imports.schema.json
        1985 Automobile imports (UCI).  Response: price (regression).
        All 25 other attributes are predictors.  Rows with any missing
        field are written with the '?' token intact and dropped at
        ingest, which leaves the standard 159 complete cases.

    bridges.csv / bridges.schema.json
        Pittsburgh bridges, version 1 (UCI).  Response: TYPE (7 design
        classes).  Predictors are the 7 specification columns (river,
        location, erected, purpose, length, lanes, clear-g); the design
        columns other than TYPE are dropped.  Rows with missing fields
        or TYPE = NIL drop at ingest, leaving 72 bridges.  Location is
        categorical with one level per site code, nearly unique per row.

    rollcall.csv / rollcall.schema.json
        U.S. House roll call on the Puerto Rico debt-relief bill
        (HR 5278, vote of 2016-06-09), joined with member party, state,
        and the two DW-NOMINATE ideology scores from Voteview.
        Response: the yea/nay vote of each of the 424 voting members.
        Several states seat a single representative, so their state
        level vanishes from roughly a third of bootstrap samples.

Raw downloads are cached in ``data/raw/`` and reused on re-run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import urllib.request
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
VOTEVIEW = "https://voteview.com/static/data/out"

SOURCES = {
    "imports-85.data": f"{UCI}/autos/imports-85.data",
    "bridges.data.version1": f"{UCI}/bridges/bridges.data.version1",
    "H114_members.csv": f"{VOTEVIEW}/members/H114_members.csv",
    "H114_rollcalls.csv": f"{VOTEVIEW}/rollcalls/H114_rollcalls.csv",
    "H114_votes.csv": f"{VOTEVIEW}/votes/H114_votes.csv",
}


def fetch(raw_dir: Path, name: str) -> Path:
    path = raw_dir / name
    if path.exists():
        print(f"  cached {name}")
        return path
    url = SOURCES[name]
    print(f"  downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        path.write_bytes(resp.read())
    return path


def write_schema(path: Path, columns: list[dict], response: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"columns": columns, "response": response}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# automobile imports


AUTO_MAKES = [
    "alfa-romero", "audi", "bmw", "chevrolet", "dodge", "honda", "isuzu",
    "jaguar", "mazda", "mercedes-benz", "mercury", "mitsubishi", "nissan",
    "peugot", "plymouth", "porsche", "renault", "saab", "subaru", "toyota",
    "volkswagen", "volvo",
]

# (name, kind, levels) in UCI attribute order; the last column (price)
# becomes the response
AUTO_COLUMNS = [
    ("symboling", "numeric", None),
    ("normalized_losses", "numeric", None),
    ("make", "categorical", AUTO_MAKES),
    ("fuel_type", "categorical", ["diesel", "gas"]),
    ("aspiration", "categorical", ["std", "turbo"]),
    ("num_doors", "categorical", ["two", "four"]),
    ("body_style", "categorical", ["hardtop", "wagon", "sedan", "hatchback", "convertible"]),
    ("drive_wheels", "categorical", ["4wd", "fwd", "rwd"]),
    ("engine_location", "categorical", ["front", "rear"]),
    ("wheel_base", "numeric", None),
    ("length", "numeric", None),
    ("width", "numeric", None),
    ("height", "numeric", None),
    ("curb_weight", "numeric", None),
    ("engine_type", "categorical", ["dohc", "dohcv", "l", "ohc", "ohcf", "ohcv", "rotor"]),
    ("num_cylinders", "categorical", ["two", "three", "four", "five", "six", "eight", "twelve"]),
    ("engine_size", "numeric", None),
    ("fuel_system", "categorical", ["1bbl", "2bbl", "4bbl", "idi", "mfi", "mpfi", "spdi", "spfi"]),
    ("bore", "numeric", None),
    ("stroke", "numeric", None),
    ("compression_ratio", "numeric", None),
    ("horsepower", "numeric", None),
    ("peak_rpm", "numeric", None),
    ("city_mpg", "numeric", None),
    ("highway_mpg", "numeric", None),
]


def build_auto(raw_dir: Path, out_dir: Path) -> None:
    src = fetch(raw_dir, "imports-85.data")
    rows = []
    with open(src, newline="", encoding="utf-8") as fh:
        for record in csv.reader(fh):
            if len(record) != 26:
                continue
            rows.append([f.strip() for f in record])
    with open(out_dir / "auto_imports.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for r in rows:
            writer.writerow(r)  # predictors 0..24, price last; '?' kept
    columns = []
    for name, kind, levels in AUTO_COLUMNS:
        entry = {"name": name, "kind": kind}
        if levels is not None:
            entry["levels"] = levels
        columns.append(entry)
    write_schema(out_dir / "auto_imports.schema.json", columns, {"kind": "numeric"})
    print(f"  auto_imports: {len(rows)} raw rows (complete cases drop to 159 at ingest)")


# ---------------------------------------------------------------------------
# pittsburgh bridges


BRIDGE_TYPES = ["WOOD", "SUSPEN", "ARCH", "SIMPLE-T", "CANTILEV", "CONT-T"]


def build_bridges(raw_dir: Path, out_dir: Path) -> None:
    src = fetch(raw_dir, "bridges.data.version1")
    out_rows = []
    with open(src, newline="", encoding="utf-8") as fh:
        for record in csv.reader(fh):
            if len(record) != 13:
                continue
            r = [f.strip() for f in record]
            # version-1 columns: id, river, location, erected, purpose,
            # length, lanes, clear-g, t-or-d, material, span, rel-l, type
            river, location, erected, purpose = r[1], r[2], r[3], r[4]
            length, lanes, clear_g, btype = r[5], r[6], r[7], r[12]
            if btype == "NIL":
                btype = "?"  # unknown design class: drop the row at ingest
            out_rows.append([river, location, erected, purpose, length, lanes, clear_g, btype])
    with open(out_dir / "bridges.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for r in out_rows:
            writer.writerow(r)
    locations = sorted({r[1] for r in out_rows if r[1] != "?"}, key=lambda s: int(s))
    columns = [
        {"name": "river", "kind": "categorical", "levels": ["A", "M", "O", "Y"]},
        {"name": "location", "kind": "categorical", "levels": locations},
        {"name": "erected", "kind": "numeric"},
        {"name": "purpose", "kind": "categorical", "levels": ["WALK", "AQUEDUCT", "RR", "HIGHWAY"]},
        {"name": "length", "kind": "numeric"},
        {"name": "lanes", "kind": "numeric"},
        {"name": "clear_g", "kind": "categorical", "levels": ["N", "G"]},
    ]
    write_schema(
        out_dir / "bridges.schema.json", columns, {"kind": "class", "classes": BRIDGE_TYPES}
    )
    print(f"  bridges: {len(out_rows)} raw rows (complete cases drop to 72 at ingest)")


# ---------------------------------------------------------------------------
# house roll call (Puerto Rico debt relief, HR 5278)


def _read_csv_dicts(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def build_rollcall(raw_dir: Path, out_dir: Path) -> None:
    members = _read_csv_dicts(fetch(raw_dir, "H114_members.csv"))
    rollcalls = _read_csv_dicts(fetch(raw_dir, "H114_rollcalls.csv"))
    votes = _read_csv_dicts(fetch(raw_dir, "H114_votes.csv"))

    target = [
        r
        for r in rollcalls
        if r.get("bill_number", "").replace(" ", "").upper() == "HR5278"
        and r.get("date") == "2016-06-09"
    ]
    if not target:
        raise SystemExit("could not locate the HR 5278 roll call of 2016-06-09")
    rollnumber = target[0]["rollnumber"]
    print(f"  HR 5278 passage vote is rollnumber {rollnumber}")

    by_icpsr = {m["icpsr"]: m for m in members}
    states = sorted({m["state_abbrev"] for m in members if m["chamber"] == "House"})
    out_rows = []
    for v in votes:
        if v["rollnumber"] != rollnumber:
            continue
        code = int(float(v["cast_code"]))
        if code in (1, 2, 3):
            vote = "yea"
        elif code in (4, 5, 6):
            vote = "nay"
        else:
            continue  # present / not voting
        m = by_icpsr.get(v["icpsr"])
        if m is None or not m.get("nominate_dim1") or not m.get("nominate_dim2"):
            continue
        party = {"100": "D", "200": "R"}.get(m["party_code"], "I")
        out_rows.append(
            [party, m["state_abbrev"], m["nominate_dim1"], m["nominate_dim2"], vote]
        )
    with open(out_dir / "rollcall.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for r in out_rows:
            writer.writerow(r)
    columns = [
        {"name": "party", "kind": "categorical", "levels": ["D", "R", "I"]},
        {"name": "state", "kind": "categorical", "levels": states},
        {"name": "dim1", "kind": "numeric"},
        {"name": "dim2", "kind": "numeric"},
    ]
    write_schema(
        out_dir / "rollcall.schema.json", columns, {"kind": "class", "classes": ["nay", "yea"]}
    )
    print(f"  rollcall: {len(out_rows)} voting members")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", default="data", help="output directory (default: data)")
    parser.add_argument(
        "--only",
        choices=["auto", "bridges", "rollcall"],
        default=None,
        help="fetch a single dataset",
    )
    args = parser.parse_args()
    out_dir = Path(args.data_dir)
    raw_dir = out_dir / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)

    builders = {"auto": build_auto, "bridges": build_bridges, "rollcall": build_rollcall}
    chosen = [args.only] if args.only else list(builders)
    for key in chosen:
        print(f"{key}:")
        builders[key](raw_dir, out_dir)
    print("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
