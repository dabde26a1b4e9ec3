#!/usr/bin/env python3
"""Fetch the public prostate cancer study dataset (N=97, P=8).

Source: the Elements of Statistical Learning data archive,
https://hastie.su.domains/ElemStatLearn/datasets/prostate.data
(tab-separated; row index column, eight covariates, the response lpsa, and a
train/test indicator which this script drops).

The dataset is not vendored with the repository. This script downloads it,
validates the structure, converts it to data/prostate.csv, and records a
checksum of the raw download on first use. Subsequent runs verify against the
recorded checksum and refuse silently changed upstream content.

Usage: python3 scripts/fetch_prostate.py [--url URL]
"""

import argparse
import csv
import hashlib
import sys
import urllib.request
from pathlib import Path

DEFAULT_URL = "https://hastie.su.domains/ElemStatLearn/datasets/prostate.data"
EXPECTED_COLUMNS = [
    "lcavol",
    "lweight",
    "age",
    "lbph",
    "svi",
    "lcp",
    "gleason",
    "pgg45",
    "lpsa",
    "train",
]
ROOT = Path(__file__).resolve().parent.parent
OUT_PATH = ROOT / "data" / "prostate.csv"
SUM_PATH = ROOT / "scripts" / "prostate.sha256"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--url", default=DEFAULT_URL)
    args = parser.parse_args()

    print(f"downloading {args.url}")
    try:
        with urllib.request.urlopen(args.url, timeout=60) as resp:
            raw = resp.read()
    except OSError as exc:
        print(f"download failed: {exc}", file=sys.stderr)
        print("(this environment may not have network access; re-run where it does)", file=sys.stderr)
        return 1

    digest = hashlib.sha256(raw).hexdigest()
    if SUM_PATH.exists():
        recorded = SUM_PATH.read_text().split()[0]
        if digest != recorded:
            print(
                f"checksum mismatch: downloaded {digest}, recorded {recorded}",
                file=sys.stderr,
            )
            print("upstream content changed; refusing to overwrite", file=sys.stderr)
            return 1
        print("checksum matches the recorded value")
    else:
        SUM_PATH.write_text(f"{digest}  prostate.data\n")
        print(f"recorded checksum {digest} (first fetch)")

    lines = raw.decode("utf-8").splitlines()
    header = lines[0].split("\t")
    # the header starts with an unnamed row-index column
    names = [h.strip() for h in header if h.strip()]
    if names != EXPECTED_COLUMNS:
        print(f"unexpected columns {names}", file=sys.stderr)
        return 1
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        # drop the leading row index and the trailing train/test flag
        rows.append(cells[1:-1])
    if len(rows) != 97:
        print(f"expected 97 data rows, got {len(rows)}", file=sys.stderr)
        return 1

    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT_PATH, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPECTED_COLUMNS[:-1])
        writer.writerows(rows)
    print(f"wrote {OUT_PATH} ({len(rows)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
