"""Dataset containers, generators and loaders for the benchmark harness.

The on-disk dataset format is a headed CSV with columns x0..x{D-1}, y and a
split column holding ``train`` or ``test``; values are comma-separated
decimals. Generators are deterministic in their seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .kernels import Kernel, gram, se_kernel

TOY_LAMBDA = 0.25
TOY_THETA_F = 2.0
# The toy setup does not pin an observation noise; this package-wide default
# is what the harness and tests use unless a config overrides it.
TOY_DEFAULT_SIGMA2 = 1e-2


@dataclass(frozen=True)
class Dataset:
    """Train/test split with provenance metadata.

    Train and test sets are disjoint by construction in every generator and
    loader; entries are checked finite.
    """

    X: np.ndarray
    y: np.ndarray
    X_star: np.ndarray
    y_star: np.ndarray
    meta: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        X_star = np.atleast_2d(np.asarray(self.X_star, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        y_star = np.asarray(self.y_star, dtype=float).reshape(-1)
        for name, arr in (("X", X), ("y", y), ("X_star", X_star), ("y_star", y_star)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"dataset field {name} contains non-finite values")
        if X.shape[0] != y.size or X_star.shape[0] != y_star.size:
            raise ValueError("input/target counts are inconsistent")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X_star", X_star)
        object.__setattr__(self, "y_star", y_star)

    @property
    def n_train(self) -> int:
        return self.y.size

    @property
    def n_test(self) -> int:
        return self.y_star.size

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def toy_kernel() -> Kernel:
    return se_kernel([TOY_LAMBDA], TOY_THETA_F)


def _toy_inputs(rng: np.random.Generator, count: int) -> np.ndarray:
    """Half Gaussian-mixture draws, half uniform on [0, 1].

    The mixture has equal-weight components N(0, 1), N(1, 0.1) and
    N(-0.5, 0.05), variances as listed.
    """
    half = count // 2
    means = np.array([0.0, 1.0, -0.5])
    sds = np.sqrt(np.array([1.0, 0.1, 0.05]))
    comp = rng.integers(0, 3, size=half)
    mixture = rng.normal(means[comp], sds[comp])
    uniform = rng.uniform(0.0, 1.0, size=count - half)
    return np.concatenate([mixture, uniform]).reshape(-1, 1)


def gen_toy(seed=0, n_train: int = 100, n_test: int = 100) -> Dataset:
    """The 1-D toy problem: 100 training points, targets drawn from a GP.

    Inputs come half from a three-component Gaussian mixture and half from
    the uniform distribution on [0, 1]; targets for the train and test
    inputs are one joint draw from the zero-mean squared-exponential GP
    (metric 0.25, amplitude 2) via a jittered Cholesky factor.
    """
    rng = np.random.default_rng(seed)
    kernel = toy_kernel()
    X = _toy_inputs(rng, n_train)
    X_star = _toy_inputs(rng, n_test)
    joint = np.vstack([X, X_star])
    factor = linalg.cholesky(gram(kernel, joint))
    targets = factor.L @ rng.standard_normal(joint.shape[0])
    meta = {"source": "toy", "family": kernel.family, "theta_f": kernel.theta_f, "seed": seed}
    return Dataset(
        X=X,
        y=targets[:n_train],
        X_star=X_star,
        y_star=targets[n_train:],
        meta=meta,
        seed=seed,
    )


def load_csv(path, target_column: str, test_fraction: float = 0.5, seed=0) -> Dataset:
    """Load a headed CSV, shuffle deterministically, and split train/test.

    Every non-target column is a feature. Parse failures report the
    offending row and column; a missing target column names the available
    headers.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, a header row is required") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ValueError(
                f"{path}: target column {target_column!r} not found; available: {header}"
            )
        target_idx = header.index(target_column)
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {row_number} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(i for i, cell in enumerate(row) if not _is_float(cell))
                raise ValueError(
                    f"{path}: row {row_number}, column {header[bad]!r}: non-numeric cell {row[bad]!r}"
                ) from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    y_all = data[:, target_idx]
    X_all = np.delete(data, target_idx, axis=1)
    n = data.shape[0]
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    test_idx, train_idx = order[:n_test], order[n_test:]
    meta = {"source": "csv", "path": str(path), "target": target_column, "seed": seed}
    return Dataset(
        X=X_all[train_idx], y=y_all[train_idx],
        X_star=X_all[test_idx], y_star=y_all[test_idx],
        meta=meta, seed=seed,
    )


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_masked_series_csv(path):
    """Load an equispaced series CSV with columns time, value, mask.

    Rows with mask 1 are observed (training); rows with mask 0 are held out.
    Returns (times, values, mask) as arrays over the full grid.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = [h.strip().lower() for h in next(reader)]
        if header[:3] != ["time", "value", "mask"]:
            raise ValueError(f"{path}: expected header time,value,mask, got {header}")
        rows = [(float(r[0]), float(r[1]), int(r[2])) for r in reader if r]
    times = np.asarray([r[0] for r in rows])
    values = np.asarray([r[1] for r in rows])
    mask = np.asarray([r[2] for r in rows], dtype=bool)
    if times.size >= 2:
        gaps = np.diff(times)
        if np.max(np.abs(gaps - gaps[0])) > 1e-9 * max(abs(gaps[0]), 1.0):
            raise ValueError(f"{path}: time column is not equispaced")
    return times, values, mask


def masked_series_dataset(times, values, mask, seed=0) -> Dataset:
    """Dataset view of a masked series: observed rows train, the rest test."""
    times = np.asarray(times, dtype=float).reshape(-1, 1)
    values = np.asarray(values, dtype=float).reshape(-1)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    meta = {"source": "masked-series", "grid_size": mask.size, "seed": seed}
    return Dataset(
        X=times[mask], y=values[mask],
        X_star=times[~mask], y_star=values[~mask],
        meta=meta, seed=seed,
    )


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the harness format (x0.., y, split)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{d}" for d in range(dataset.dim)] + ["y", "split"])
        for row, target in zip(dataset.X, dataset.y):
            writer.writerow([format(v, ".17g") for v in row] + [format(target, ".17g"), "train"])
        for row, target in zip(dataset.X_star, dataset.y_star):
            writer.writerow([format(v, ".17g") for v in row] + [format(target, ".17g"), "test"])


def read_dataset_csv(path) -> Dataset:
    """Read a dataset written by :func:`write_dataset_csv`."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[-2:] != ["y", "split"]:
            raise ValueError(f"{path}: expected trailing columns y,split, got {header}")
        dim = len(header) - 2
        train, test = [], []
        for row in reader:
            if not row:
                continue
            values = [float(c) for c in row[: dim + 1]]
            (train if row[-1] == "train" else test).append(values)
    train = np.asarray(train)
    test = np.asarray(test)
    return Dataset(
        X=train[:, :dim], y=train[:, dim],
        X_star=test[:, :dim], y_star=test[:, dim],
        meta={"source": "csv", "path": str(path)},
    )
