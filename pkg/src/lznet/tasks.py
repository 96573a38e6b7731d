"""Synthetic sequence tasks (addition, memory copy) and UCR-format ingestion."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    pass


# ---------------------------------------------------------------- addition


@dataclass
class AdditionBatch:
    values: np.ndarray  # (B, T) in [0, 1)
    indicators: np.ndarray  # (B, T) two-hot
    targets: np.ndarray  # (B,)

    def inputs(self) -> np.ndarray:
        """Stacked ``(B, T, 2)`` model input: value channel, indicator channel."""
        return np.stack([self.values, self.indicators], axis=-1)


def gen_addition(T: int, B: int, seed) -> AdditionBatch:
    """One marker in ``[0, T//2)`` and one in ``[T//2, T)`` per row."""
    if T < 2:
        raise ValueError(f"addition needs T >= 2, got {T}")
    if B < 1:
        raise ValueError(f"batch size must be >= 1, got {B}")
    rng = np.random.default_rng(seed)
    half = T // 2
    values = rng.random((B, T))
    first = rng.integers(0, half, size=B)
    second = rng.integers(half, T, size=B)
    indicators = np.zeros((B, T))
    rows = np.arange(B)
    indicators[rows, first] = 1.0
    indicators[rows, second] = 1.0
    targets = values[rows, first] + values[rows, second]
    return AdditionBatch(values, indicators, targets)


def addition_baseline_mse() -> float:
    """MSE of always predicting 1: the variance of a sum of two U[0,1)."""
    return 1.0 / 6.0


# ---------------------------------------------------------------- copy


@dataclass
class CopyBatch:
    inputs: np.ndarray  # (B, T + 2N) int tokens
    targets: np.ndarray  # (B, T + 2N) int tokens
    N: int
    M: int
    T: int

    @property
    def blank(self) -> int:
        return 0

    @property
    def delimiter(self) -> int:
        return self.M + 1

    def one_hot(self) -> np.ndarray:
        """``(B, T + 2N, M + 2)`` one-hot encoding of the inputs."""
        return np.eye(self.M + 2)[self.inputs]


def gen_copy(N: int, M: int, T: int, B: int, seed) -> CopyBatch:
    """Blank = 0, symbols = 1..M, delimiter = M + 1."""
    if N < 1 or M < 2 or T < 1 or B < 1:
        raise ValueError(f"invalid copy sizes N={N}, M={M}, T={T}, B={B}")
    rng = np.random.default_rng(seed)
    L = T + 2 * N
    payload = rng.integers(1, M + 1, size=(B, N))
    inputs = np.zeros((B, L), dtype=np.int64)
    inputs[:, :N] = payload
    inputs[:, N + T - 1] = M + 1
    targets = np.zeros((B, L), dtype=np.int64)
    targets[:, N + T :] = payload
    return CopyBatch(inputs, targets, N, M, T)


def copy_baseline_ce(N: int, M: int, T: int) -> float:
    """Cross-entropy of emitting blanks, then a uniform guess over the M symbols."""
    if N < 1 or M < 1 or T < 1:
        raise ValueError(f"invalid copy sizes N={N}, M={M}, T={T}")
    return N * math.log(M) / (T + 2 * N)


def copy_baseline_logits(batch: CopyBatch) -> np.ndarray:
    """Logits over ``M + 1`` output classes realizing :func:`copy_baseline_ce`."""
    B, L = batch.targets.shape
    logits = np.full((B, L, batch.M + 1), -1e9)
    head = batch.N + batch.T
    logits[:, :head, 0] = 0.0
    logits[:, head:, 1:] = 0.0
    return logits


# ---------------------------------------------------------------- UCR


@dataclass
class UcrDataset:
    train: list[tuple[int, np.ndarray]]
    test: list[tuple[int, np.ndarray]] = field(default_factory=list)
    label_values: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.label_values)

    @property
    def series_length(self) -> int:
        return len(self.train[0][1]) if self.train else 0

    def arrays(self, split: str = "train") -> tuple[np.ndarray, np.ndarray]:
        rows = self.train if split == "train" else self.test
        if not rows:
            return np.zeros((0, self.series_length)), np.zeros(0, dtype=np.int64)
        y = np.array([lab for lab, _ in rows], dtype=np.int64)
        X = np.stack([s for _, s in rows])
        return X, y


_SPLIT = re.compile(r"[\t,]")


def _read_rows(path: Path) -> list[tuple[float, np.ndarray]]:
    if not path.exists():
        raise FileNotFoundError(f"UCR file not found: {path}")
    rows = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f for f in _SPLIT.split(line) if f.strip() != ""]
            if len(fields) < 2:
                raise DataFormatError(f"{path}:{lineno}: need a label and at least one value")
            try:
                nums = [float(f) for f in fields]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric field") from None
            if width is None:
                width = len(nums)
            elif len(nums) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: ragged row, {len(nums) - 1} values but expected {width - 1}"
                )
            rows.append((nums[0], np.array(nums[1:])))
    return rows


def load_ucr_tsv(path, test_path=None) -> UcrDataset:
    """Parse UCR-format files: one series per line, label first, tab or comma separated.

    Labels are remapped to ``0..K-1`` in sorted order of the original values,
    using the union of the train and test labels.
    """
    train = _read_rows(Path(path))
    test = _read_rows(Path(test_path)) if test_path is not None else []
    if train and test and len(train[0][1]) != len(test[0][1]):
        raise DataFormatError("train and test series lengths differ")
    labels = sorted({lab for lab, _ in train} | {lab for lab, _ in test})
    index = {lab: i for i, lab in enumerate(labels)}
    shown = [int(lab) if float(lab).is_integer() else lab for lab in labels]
    return UcrDataset(
        train=[(index[lab], s) for lab, s in train],
        test=[(index[lab], s) for lab, s in test],
        label_values=shown,
    )


def _znorm(series: np.ndarray) -> np.ndarray:
    std = series.std()
    if std == 0.0:
        return np.zeros_like(series)
    return (series - series.mean()) / std


def znormalize(dataset: UcrDataset) -> UcrDataset:
    """Per-series zero mean, unit population std; constant series become zeros."""
    return replace(
        dataset,
        train=[(lab, _znorm(s)) for lab, s in dataset.train],
        test=[(lab, _znorm(s)) for lab, s in dataset.test],
    )


def write_ucr_tsv(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        for label, series in rows:
            writer.writerow([label] + [repr(float(v)) for v in series])


def gen_frequency_motifs(n: int, length: int, seed, noise: float = 0.3) -> list[tuple[int, np.ndarray]]:
    """Two-class toy series: a low- or high-frequency burst at a random offset plus noise.

    Labels are 1 (low frequency) and 2 (high frequency), as UCR files usually use.
    """
    rng = np.random.default_rng(seed)
    rows = []
    t = np.arange(length)
    width = length // 2
    for i in range(n):
        label = 1 + (i % 2)
        freq = 1.0 / 16 if label == 1 else 1.0 / 4
        start = rng.integers(0, length - width + 1)
        series = noise * rng.normal(size=length)
        window = slice(start, start + width)
        series[window] += np.sin(2 * np.pi * freq * t[:width] + rng.uniform(0, 2 * np.pi))
        rows.append((label, series))
    order = rng.permutation(n)
    return [rows[i] for i in order]
