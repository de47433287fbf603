#!/usr/bin/env python3
"""Fetch MovieLens 100K into data/ml-100k/u.data.

Tries the GroupLens zip first. If that host is unreachable, falls back to the
copy bundled in the pytorch-widedeep wheel (fetched with pip).
"""

import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def from_grouplens(dest):
    with urllib.request.urlopen(GROUPLENS, timeout=30) as resp:
        blob = resp.read()
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        with open(dest, "wb") as out:
            out.write(zf.read("ml-100k/u.data"))


def from_widedeep(dest):
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-d", tmp,
             "pytorch-widedeep==1.7.0"],
            check=True,
        )
        wheel = glob.glob(os.path.join(tmp, "*.whl"))[0]
        with zipfile.ZipFile(wheel) as zf:
            name = next(n for n in zf.namelist()
                        if "MovieLens100k_data" in n and ".parquet" in n)
            df = pd.read_parquet(io.BytesIO(zf.read(name)))
    cols = ["user_id", "movie_id", "rating", "timestamp"]
    df[cols].to_csv(dest, sep="\t", header=False, index=False)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/ml-100k/u.data")
    args = ap.parse_args()
    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    try:
        from_grouplens(args.out)
    except Exception as e:
        print(f"grouplens download failed ({e}); trying pytorch-widedeep", file=sys.stderr)
        from_widedeep(args.out)
    with open(args.out) as f:
        n = sum(1 for _ in f)
    print(f"wrote {args.out}: {n} ratings")


if __name__ == "__main__":
    main()
