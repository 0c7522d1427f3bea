#!/usr/bin/env python3
"""Build a9a-style LibSVM files for the UCI Adult income task.

The raw UCI table is read from the parquet file bundled in the
``pytorch-widedeep`` wheel. It holds all 48,842 raw rows: the 16,281
adult.test rows first, then the 32,561 adult.data rows.

Encoding (123 binary features, the layout popularised by the a9a files):
age, fnlwgt, education-num and hours-per-week become 5 training-quantile
bins each; capital-gain and capital-loss become zero / nonzero; each
categorical column becomes one indicator per known category ("?" sets none).

Usage::

    pip download --no-deps pytorch-widedeep -d /tmp/wd
    python scripts/make_adult.py /tmp/wd/pytorch_widedeep-*.whl data/adult
"""
import argparse
import io
import sys
import zipfile
from pathlib import Path

import numpy as np
import pandas as pd

MEMBER = "pytorch_widedeep/datasets/data/adult.parquet.brotli"
SPLIT = 16281  # first SPLIT rows are adult.test

QUANTILE = ["age", "fnlwgt", "educational-num", "hours-per-week"]
ZERO_NONZERO = ["capital-gain", "capital-loss"]
CATEGORICAL = [
    "workclass", "education", "marital-status", "occupation",
    "relationship", "race", "gender", "native-country",
]


def read_raw(source: Path) -> pd.DataFrame:
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as z:
            return pd.read_parquet(io.BytesIO(z.read(MEMBER)))
    return pd.read_parquet(source)


def encode(train: pd.DataFrame, test: pd.DataFrame):
    blocks_tr, blocks_te = [], []
    for col in QUANTILE:
        edges = np.quantile(train[col].to_numpy(float), [0.2, 0.4, 0.6, 0.8])
        for frame, out in ((train, blocks_tr), (test, blocks_te)):
            bins = np.searchsorted(edges, frame[col].to_numpy(float), side="right")
            out.append(np.eye(5)[bins])
    for col in ZERO_NONZERO:
        for frame, out in ((train, blocks_tr), (test, blocks_te)):
            nz = frame[col].to_numpy() != 0
            out.append(np.column_stack([~nz, nz]).astype(float))
    for col in CATEGORICAL:
        cats = sorted(c for c in train[col].unique() if c != "?")
        for frame, out in ((train, blocks_tr), (test, blocks_te)):
            values = frame[col].to_numpy()
            out.append(np.column_stack([values == c for c in cats]).astype(float))
    return np.hstack(blocks_tr), np.hstack(blocks_te)


def write(path: Path, X: np.ndarray, y: np.ndarray):
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(X, y):
            feats = " ".join(f"{j + 1}:1" for j in np.flatnonzero(row))
            fh.write(f"{label:+d} {feats}\n".rstrip() + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", type=Path, help="pytorch-widedeep wheel or adult parquet")
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args(argv)

    df = read_raw(args.source)
    if len(df) != 48842:
        sys.exit(f"expected 48842 rows, got {len(df)}")
    test, train = df.iloc[:SPLIT], df.iloc[SPLIT:]
    Xtr, Xte = encode(train, test)
    if Xtr.shape[1] != 123:
        sys.exit(f"expected 123 features, got {Xtr.shape[1]}")
    ytr = np.where(train["income"].str.startswith(">50K"), 1, -1)
    yte = np.where(test["income"].str.startswith(">50K"), 1, -1)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write(args.out_dir / "adult.train", Xtr, ytr)
    write(args.out_dir / "adult.test", Xte, yte)
    print(f"train {Xtr.shape}, test {Xte.shape} -> {args.out_dir}")


if __name__ == "__main__":
    main()
