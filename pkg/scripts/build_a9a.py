"""Rebuild the LIBSVM ``a9a`` / ``a9a.t`` pair from the raw UCI Adult files.

a9a is Adult with every attribute turned into indicator columns: the six
continuous attributes are quantized (quintiles for age, fnlwgt,
education-num and hours-per-week; zero / non-zero for capital gain and
loss) and the eight categorical attributes are one-hot encoded, giving 123
binary columns. Missing values ("?") set no column. Cut points come from
the training file only.

Usage::

    python scripts/build_a9a.py adult.data adult.test data/

The raw files ship inside the ``responsibly`` wheel
(``responsibly/dataset/adult/``) if the UCI site is unreachable.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

CATEGORIES = {
    "workclass": "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, State-gov, Without-pay, Never-worked",
    "education": "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, Assoc-voc, 9th, 7th-8th, 12th, Masters, 1st-4th, 10th, Doctorate, 5th-6th, Preschool",
    "marital-status": "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, Married-spouse-absent, Married-AF-spouse",
    "occupation": "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, Prof-specialty, Handlers-cleaners, Machine-op-inspct, Adm-clerical, Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, Armed-Forces",
    "relationship": "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried",
    "race": "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black",
    "sex": "Female, Male",
    "native-country": "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, Outlying-US(Guam-USVI-etc), India, Japan, Greece, South, China, Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, Peru, Hong, Holand-Netherlands",
}
CATEGORIES = {k: [s.strip() for s in v.split(",")] for k, v in CATEGORIES.items()}

ATTRIBUTES = [
    ("age", "quintile"),
    ("workclass", "categorical"),
    ("fnlwgt", "quintile"),
    ("education", "categorical"),
    ("education-num", "quintile"),
    ("marital-status", "categorical"),
    ("occupation", "categorical"),
    ("relationship", "categorical"),
    ("race", "categorical"),
    ("sex", "categorical"),
    ("capital-gain", "nonzero"),
    ("capital-loss", "nonzero"),
    ("hours-per-week", "quintile"),
    ("native-country", "categorical"),
]


def read_adult(path: Path) -> list[list[str]]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh, skipinitialspace=True):
            if len(rec) != 15:
                continue  # blank lines and the "|1x3 Cross validator" header
            rows.append([f.strip() for f in rec])
    return rows


def quintile_edges(values: np.ndarray) -> np.ndarray:
    # Heavily tied attributes (education-num) collapse quintiles; bump a
    # colliding edge to the next distinct value so there are always 5 bins.
    distinct = np.unique(values)
    edges: list[float] = []
    for q in (0.2, 0.4, 0.6, 0.8):
        v = float(np.quantile(values, q, method="higher"))
        if edges and v <= edges[-1]:
            v = float(distinct[np.searchsorted(distinct, edges[-1], side="right")])
        edges.append(v)
    return np.array(edges)


def build(train_rows, test_rows):
    train_cols = list(zip(*train_rows))
    edges = {}
    for j, (name, kind) in enumerate(ATTRIBUTES):
        if kind == "quintile":
            e = quintile_edges(np.array(train_cols[j], dtype=float))
            if len(e) != 4:
                raise ValueError(f"{name}: expected 5 quantile bins, got {len(e) + 1}")
            edges[name] = e

    def encode(row):
        active = []
        offset = 0
        for j, (name, kind) in enumerate(ATTRIBUTES):
            value = row[j]
            if kind == "categorical":
                levels = CATEGORIES[name]
                if value != "?":
                    active.append(offset + levels.index(value))
                offset += len(levels)
            elif kind == "quintile":
                active.append(offset + int(np.searchsorted(edges[name], float(value), side="right")))
                offset += 5
            else:
                active.append(offset + (1 if float(value) > 0 else 0))
                offset += 2
        label = "+1" if row[14].rstrip(".") == ">50K" else "-1"
        return label, active, offset

    def lines(rows):
        out = []
        for row in rows:
            label, active, width = encode(row)
            assert width == 123
            out.append(label + "".join(f" {i + 1}:1" for i in sorted(active)))
        return out

    return lines(train_rows), lines(test_rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("train", type=Path)
    ap.add_argument("test", type=Path)
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args(argv)
    train, test = build(read_adult(args.train), read_adult(args.test))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "a9a").write_text("\n".join(train) + "\n")
    (args.out_dir / "a9a.t").write_text("\n".join(test) + "\n")
    print(f"a9a: {len(train)} rows, a9a.t: {len(test)} rows, 123 columns")


if __name__ == "__main__":
    main()
