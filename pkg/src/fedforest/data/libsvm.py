from __future__ import annotations

import numpy as np


class LibsvmError(ValueError):
    pass


def load_libsvm(
    path: str,
    n_features: int | None = None,
    *,
    task: str = "binary",
    id_prefix: str = "",
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Dense ``(x, y, ids)`` from a sparse ``label index:value ...`` file.

    Indices are 1-based and must increase within a line; absent entries are
    0.0.  Binary labels -1/+1 (or 0/1) become 0/1.  Row ids are the 1-based
    line numbers, optionally prefixed.  Blank lines are skipped.
    """
    rows: list[tuple[list[int], list[float]]] = []
    labels: list[float] = []
    ids: list[str] = []
    width = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                label = float(parts[0])
            except ValueError:
                raise LibsvmError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            cols, vals = [], []
            prev = 0
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    k, v = int(idx), float(val)
                except ValueError:
                    raise LibsvmError(f"{path}:{lineno}: bad entry {tok!r}") from None
                if not sep or k < 1:
                    raise LibsvmError(f"{path}:{lineno}: bad entry {tok!r}")
                if k <= prev:
                    raise LibsvmError(f"{path}:{lineno}: index {k} does not increase")
                prev = k
                cols.append(k - 1)
                vals.append(v)
            width = max(width, prev)
            rows.append((cols, vals))
            labels.append(label)
            ids.append(f"{id_prefix}{lineno}")
    d = width if n_features is None else n_features
    if width > d:
        raise LibsvmError(f"{path}: feature index {width} exceeds n_features={d}")
    x = np.zeros((len(rows), d))
    for i, (cols, vals) in enumerate(rows):
        x[i, cols] = vals
    y = np.array(labels)
    if task == "binary":
        y = binary_labels(y, path)
    return x, y, ids


def binary_labels(y: np.ndarray, where: str = "labels") -> np.ndarray:
    values = set(np.unique(y).tolist())
    if values <= {-1.0, 1.0}:
        return (y > 0).astype(np.float64)
    if values <= {0.0, 1.0}:
        return y.astype(np.float64)
    raise LibsvmError(f"{where}: binary labels must be -1/+1 or 0/1, got {sorted(values)[:5]}")


def write_libsvm(path: str, x: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(np.asarray(x), np.asarray(y)):
            nz = np.flatnonzero(row)
            body = " ".join(f"{k + 1}:{float(row[k])!r}" for k in nz)
            lab = int(label) if float(label).is_integer() else repr(float(label))
            fh.write(f"{lab} {body}".rstrip() + "\n")
