"""Party data files: a partition directory holds one LIBSVM file per party
plus ``manifest.json``; a plain LIBSVM file is partitioned on the fly."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .libsvm import load_libsvm, write_libsvm
from .partition import id_digest, partition_columns

MANIFEST = "manifest.json"


@dataclass
class PartyData:
    party: int
    x: np.ndarray
    y: np.ndarray | None  # only for the active party
    ids: list[str]
    columns: np.ndarray


def write_partition(src: str, out_dir: str, m: int, seed: int, n_features: int | None = None, task: str = "binary") -> dict:
    x, y, ids = load_libsvm(src, n_features, task=task)
    cols = partition_columns(x.shape[1], m, seed)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for p, c in enumerate(cols):
        name = f"party{p}.svm"
        labels = y if p == 0 else np.zeros_like(y)
        write_libsvm(os.path.join(out_dir, name), x[:, c], labels)
        entries.append({"party": p, "file": name, "columns": [int(v) for v in c], "label_owner": p == 0})
    manifest = {
        "source": os.path.basename(src),
        "rows": int(x.shape[0]),
        "n_features": int(x.shape[1]),
        "seed": seed,
        "task": task,
        "id_digest": id_digest(ids),
        "parties": entries,
    }
    with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def load_party(
    path: str,
    party: int,
    m: int,
    seed: int,
    *,
    n_features: int | None = None,
    task: str = "binary",
    id_prefix: str = "",
) -> PartyData:
    if os.path.isdir(path):
        with open(os.path.join(path, MANIFEST), encoding="utf-8") as fh:
            manifest = json.load(fh)
        entries = {e["party"]: e for e in manifest["parties"]}
        if len(entries) != m:
            raise ValueError(f"{path} was partitioned for {len(entries)} parties, config has {m}")
        e = entries[party]
        cols = np.array(e["columns"], dtype=np.int64)
        x, y, ids = load_libsvm(
            os.path.join(path, e["file"]), len(cols), task=task if e["label_owner"] else "regression", id_prefix=id_prefix
        )
        return PartyData(party, x, y if e["label_owner"] else None, ids, cols)
    x, y, ids = load_libsvm(path, n_features, task=task, id_prefix=id_prefix)
    cols = partition_columns(x.shape[1], m, seed)[party]
    return PartyData(party, x[:, cols], y if party == 0 else None, ids, cols)
