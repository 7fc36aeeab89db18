"""Data sources: synthetic Gaussian draws and IDX image ingestion.

IDX files are the standard big-endian MNIST container: a 32-bit magic
(0x00000803 for image tensors, 0x00000801 for label vectors), one 32-bit
size per dimension, then raw bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from convkernel.fileio import format_float, write_text_atomic
from convkernel.regression import psd_sqrt
from convkernel.rng import trial_rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
MIN_NORM_RESIDUAL_RTOL = 1e-8


class IdxFormatError(ValueError):
    """Raised when an IDX file violates the container format."""


@dataclass(frozen=True)
class IdxHeader:
    magic: int
    dims: tuple[int, ...]


@dataclass(frozen=True)
class Dataset:
    """Flattened examples with labels and a provenance note."""

    x: np.ndarray
    y: np.ndarray
    source: str

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError(
                f"need matching row counts, got x {x.shape} and y {y.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains NaN or Inf entries")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.shape[0]


def gaussian_problem(
    covariance: np.ndarray,
    coef: np.ndarray,
    noise_var: float,
    n: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One training draw: n rows x ~ N(0, covariance), y = x.coef + noise."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    coef = np.asarray(coef, dtype=float)
    sqrt_cov = psd_sqrt(covariance)
    rng = trial_rng(seed, 0)
    x = rng.standard_normal((n, coef.shape[0])) @ sqrt_cov
    y = x @ coef + np.sqrt(noise_var) * rng.standard_normal(n)
    return x, y


def _read_idx(path: str | Path, expected_magic: int, what: str) -> tuple[IdxHeader, bytes]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated magic in {what} file")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: unsupported magic 0x{magic:08x} in {what} file, "
            f"expected 0x{expected_magic:08x}"
        )
    ndims = magic & 0xFF
    header_size = 4 + 4 * ndims
    if len(raw) < header_size:
        raise IdxFormatError(f"{path}: truncated dims in {what} file")
    dims = struct.unpack(f">{ndims}I", raw[4:header_size])
    payload = raw[header_size:]
    expected_bytes = int(np.prod(dims, dtype=np.int64))
    if len(payload) != expected_bytes:
        raise IdxFormatError(
            f"{path}: payload of {what} file holds {len(payload)} bytes, "
            f"dims {dims} require {expected_bytes}"
        )
    return IdxHeader(magic, dims), payload


def load_idx_images(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Images plus companion labels; pixels scaled to [0, 1], flattened row-major."""
    images_header, pixels = _read_idx(images_path, IMAGES_MAGIC, "images")
    labels_header, labels = _read_idx(labels_path, LABELS_MAGIC, "labels")
    count, rows, cols = images_header.dims
    if rows != cols:
        raise IdxFormatError(
            f"{images_path}: images must be square, got {rows}x{cols}"
        )
    if labels_header.dims[0] != count:
        raise IdxFormatError(
            f"count mismatch: {images_path} holds {count} images but "
            f"{labels_path} holds {labels_header.dims[0]} labels"
        )
    x = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows * cols) / 255.0
    y = np.frombuffer(labels, dtype=np.uint8).astype(float)
    return Dataset(x, y, f"idx:{images_path}")


def binary_digit_subset(
    dataset: Dataset,
    digit_pos: int,
    digit_neg: int,
    count_per_class: int,
    seed: int = 0,
    shuffle: bool = False,
) -> Dataset:
    """count_per_class examples of each digit, labeled +1 (pos) then -1 (neg).

    Examples are taken in file order; with shuffle=True the selection is a
    seeded draw without replacement instead.
    """
    if count_per_class < 0:
        raise ValueError(f"count_per_class must be >= 0, got {count_per_class}")
    picks = []
    for digit, sign in ((digit_pos, 1.0), (digit_neg, -1.0)):
        indices = np.nonzero(dataset.y == digit)[0]
        if indices.size < count_per_class:
            raise ValueError(
                f"need {count_per_class} examples of digit {digit}, "
                f"found {indices.size}"
            )
        if shuffle:
            indices = trial_rng(seed, digit).permutation(indices)
        picks.append((indices[:count_per_class], sign))
    x = np.vstack([dataset.x[idx] for idx, _ in picks])
    y = np.concatenate([np.full(count_per_class, sign) for _, sign in picks])
    return Dataset(x, y, f"{dataset.source}|digits {digit_pos}/{digit_neg}")


def min_norm_solve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-Euclidean-norm interpolant of an under-determined system."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m, p = x.shape
    if m > p:
        raise ValueError(f"need rows <= columns, got {x.shape}")
    if m == 0:
        return np.zeros(p)
    gram = x @ x.T
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    keep = eigenvalues > m * max(float(eigenvalues[-1]), 0.0) * 1e-12
    basis = eigenvectors[:, keep]
    dual = basis @ ((basis.T @ y) / eigenvalues[keep]) if np.any(keep) else np.zeros(m)
    coef = x.T @ dual
    residual = float(np.linalg.norm(x @ coef - y))
    y_norm = float(np.linalg.norm(y))
    if residual > MIN_NORM_RESIDUAL_RTOL * max(y_norm, 1e-300):
        raise ValueError(
            f"labels are not in the row space: residual {residual:.3e} "
            f"exceeds {MIN_NORM_RESIDUAL_RTOL:.0e} * {y_norm:.3e}"
        )
    return coef


def save_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """Header `label,p0,...` then one row per example, 17 significant digits."""
    p = dataset.x.shape[1]
    header = "label," + ",".join(f"p{i}" for i in range(p))
    lines = [header]
    for label, row in zip(dataset.y, dataset.x):
        lines.append(format_float(label) + "," + ",".join(format_float(v) for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_dataset_csv(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().strip()
        fields = header.split(",")
        if fields[0] != "label" or fields[1:] != [f"p{i}" for i in range(len(fields) - 1)]:
            raise ValueError(f"{path}: unexpected dataset header {header!r}")
        rows = [line.strip().split(",") for line in handle if line.strip()]
    values = np.asarray([[float(v) for v in row] for row in rows], dtype=float)
    if values.size == 0:
        values = values.reshape(0, len(fields))
    if values.shape[1] != len(fields):
        raise ValueError(f"{path}: row width does not match header")
    return Dataset(values[:, 1:], values[:, 0], f"csv:{path}")
