"""Linear convolutional kernel transforms.

The depth-d feature transform of a linear convolutional network is a PSD
matrix evolved by repeatedly applying the convolution overlap operator
(a sum of shift-conjugations, one per filter tap) and renormalizing to
unit Frobenius norm.  This module builds the shift bases, applies the
operator as a direct stencil, iterates the recursion, and provides the
closed-form spectra and infinite-depth limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10
UNIT_NORM_ATOL = 1e-12
CONVERGENCE_TOL = 1e-12
CONVERGENCE_MAX_ITER = 100_000


class GeometryKind(Enum):
    ONE_D = "1d"
    TWO_D = "2d"


class Padding(Enum):
    ZERO = "zero"
    CIRCULAR = "circular"


class Architecture(Enum):
    FLATTENING = "flattening"
    POOLING = "pooling"


@dataclass(frozen=True)
class ConvGeometry:
    """Spatial layout of the input: a line of p pixels or an s-by-s grid.

    For TWO_D, p must be a perfect square and pixels are flattened
    row-major: grid position (i, j) maps to index i*s + j.  Only filter
    halfwidth 1 (filter size 3, or 3x3) is supported.
    """

    kind: GeometryKind
    p: int
    filter_halfwidth: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.kind, GeometryKind):
            raise ValueError(f"unsupported geometry kind: {self.kind!r}")
        if self.p < 1:
            raise ValueError(f"pixel count must be >= 1, got {self.p}")
        if self.filter_halfwidth != 1:
            raise ValueError(
                f"only filter_halfwidth=1 is supported, got {self.filter_halfwidth}"
            )
        if self.kind is GeometryKind.TWO_D and self.side * self.side != self.p:
            raise ValueError(f"2-D geometry needs a perfect-square pixel count, got {self.p}")

    @property
    def side(self) -> int:
        if self.kind is not GeometryKind.TWO_D:
            raise ValueError("side is only defined for 2-D geometry")
        return math.isqrt(self.p)


def _check_symmetric_psd(matrix: np.ndarray, what: str) -> None:
    fro = float(np.linalg.norm(matrix))
    if fro == 0.0:
        return
    asym = float(np.max(np.abs(matrix - matrix.T)))
    if asym > SYMMETRY_RTOL * fro:
        raise ValueError(f"{what} is not symmetric (max asymmetry {asym:.3e})")
    smallest = float(np.linalg.eigvalsh(matrix)[0])
    if smallest < -PSD_RTOL * fro:
        raise ValueError(f"{what} is not PSD (smallest eigenvalue {smallest:.3e})")


@dataclass(frozen=True)
class FeatureTransform:
    """A PSD feature-transform matrix together with how it was produced.

    depth is an integer for finite-depth iterates and math.inf for the
    closed-form limit.  When normalized is true the matrix has unit
    Frobenius norm.
    """

    matrix: np.ndarray
    geometry: ConvGeometry
    padding: Padding
    architecture: Architecture
    depth: int | float
    normalized: bool = True

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        p = self.geometry.p
        if matrix.shape != (p, p):
            raise ValueError(f"matrix shape {matrix.shape} does not match geometry p={p}")
        _check_symmetric_psd(matrix, "feature transform")
        if self.normalized:
            fro = float(np.linalg.norm(matrix))
            if abs(fro - 1.0) > UNIT_NORM_ATOL:
                raise ValueError(f"normalized transform has Frobenius norm {fro!r}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)


@dataclass(frozen=True)
class SpectralSummary:
    """Descending eigenvalues plus the sign-fixed unit leading eigenvector."""

    eigenvalues: np.ndarray
    leading_eigenvector: np.ndarray
    spectral_gap: float


def _shift_matrix_1d(p: int, shift: int, padding: Padding) -> np.ndarray:
    out = np.zeros((p, p))
    for row in range(p):
        col = row - shift
        if padding is Padding.CIRCULAR:
            out[row, col % p] = 1.0
        elif 0 <= col < p:
            out[row, col] = 1.0
    return out


def basis_matrices(geometry: ConvGeometry, padding: Padding) -> list[np.ndarray]:
    """Shift bases of the convolution operator, one per filter tap.

    Returns 3 matrices (1-D) ordered by shift -1, 0, +1, or 9 matrices
    (2-D) ordered row-major over shift pairs.  Conjugating by the shift-k
    basis moves entry (i, j) to (i+k, j+k); zero padding drops
    out-of-range entries, circular padding wraps them.
    """
    if not isinstance(padding, Padding):
        raise ValueError(f"unsupported padding: {padding!r}")
    shifts = (-1, 0, 1)
    if geometry.kind is GeometryKind.ONE_D:
        return [_shift_matrix_1d(geometry.p, k, padding) for k in shifts]
    side = geometry.side
    one_d = {k: _shift_matrix_1d(side, k, padding) for k in shifts}
    return [np.kron(one_d[k], one_d[kp]) for k in shifts for kp in shifts]


def _shift_slices(size: int, shift: int) -> tuple[slice, slice]:
    # Destination and source ranges so dst[d] = src[d + shift] stays in range.
    lo = max(0, -shift)
    hi = size - max(0, shift)
    return slice(lo, hi), slice(lo + shift, hi + shift)


def apply_conv_operator(
    matrix: np.ndarray, geometry: ConvGeometry, padding: Padding
) -> np.ndarray:
    """Apply the convolution overlap operator as a direct index-shift stencil.

    Entry (i, j) of the result sums the input entries shifted by each
    filter tap along both axes at once.  Accumulation order over taps is
    fixed so results are bit-reproducible.
    """
    matrix = np.asarray(matrix, dtype=float)
    p = geometry.p
    if matrix.shape != (p, p):
        raise ValueError(f"matrix shape {matrix.shape} does not match geometry p={p}")
    if not isinstance(padding, Padding):
        raise ValueError(f"unsupported padding: {padding!r}")
    shifts = (-1, 0, 1)
    if geometry.kind is GeometryKind.ONE_D:
        out = np.zeros_like(matrix)
        for k in shifts:
            if padding is Padding.CIRCULAR:
                out += np.roll(matrix, (-k, -k), axis=(0, 1))
            else:
                dst, src = _shift_slices(p, k)
                out[dst, dst] += matrix[src, src]
        return out
    side = geometry.side
    grid = matrix.reshape(side, side, side, side)
    out = np.zeros_like(grid)
    for k in shifts:
        for kp in shifts:
            if padding is Padding.CIRCULAR:
                out += np.roll(grid, (-k, -kp, -k, -kp), axis=(0, 1, 2, 3))
            else:
                dst0, src0 = _shift_slices(side, k)
                dst1, src1 = _shift_slices(side, kp)
                out[dst0, dst1, dst0, dst1] += grid[src0, src1, src0, src1]
    return out.reshape(p, p)


def initial_transform(geometry: ConvGeometry, architecture: Architecture) -> np.ndarray:
    """Depth-0 matrix: identity (flattening) or all-ones (pooling), unit Frobenius."""
    if architecture is Architecture.FLATTENING:
        start = np.eye(geometry.p)
    elif architecture is Architecture.POOLING:
        start = np.ones((geometry.p, geometry.p))
    else:
        raise ValueError(f"unsupported architecture: {architecture!r}")
    return start / np.linalg.norm(start)


def feature_transforms(
    depths: Sequence[int],
    geometry: ConvGeometry,
    padding: Padding,
    architecture: Architecture,
) -> list[FeatureTransform]:
    """Feature transforms at the given strictly increasing depths, in one pass.

    Starts from the architecture's depth-0 matrix and applies the
    convolution operator once per depth step, renormalizing to unit
    Frobenius norm after every application (the recursion's scale factor
    does not affect downstream regression quantities).
    """
    depths = list(depths)
    if not depths:
        raise ValueError("depths must be nonempty")
    if any(d != int(d) or d < 0 for d in depths):
        raise ValueError(f"depths must be non-negative integers, got {depths}")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError(f"depths must be strictly increasing, got {depths}")

    current = initial_transform(geometry, architecture)
    wanted = {int(d) for d in depths}
    snapshots: dict[int, np.ndarray] = {}
    if 0 in wanted:
        snapshots[0] = current.copy()
    for depth in range(1, max(depths) + 1):
        current = apply_conv_operator(current, geometry, padding)
        current /= np.linalg.norm(current)
        if depth in wanted:
            snapshots[depth] = current.copy()
    return [
        FeatureTransform(snapshots[int(d)], geometry, padding, architecture, int(d))
        for d in depths
    ]


def feature_transform(
    depth: int,
    geometry: ConvGeometry,
    padding: Padding,
    architecture: Architecture,
) -> FeatureTransform:
    """Feature transform at a single depth; see feature_transforms."""
    return feature_transforms([depth], geometry, padding, architecture)[0]


def iterate_to_convergence(
    geometry: ConvGeometry,
    padding: Padding,
    architecture: Architecture,
    tol: float = CONVERGENCE_TOL,
    max_iter: int = CONVERGENCE_MAX_ITER,
) -> tuple[FeatureTransform, int]:
    """Iterate until successive normalized transforms differ by < tol in Frobenius.

    Returns the effectively-infinite-depth transform and the number of
    operator applications performed (capped at max_iter).
    """
    current = initial_transform(geometry, architecture)
    for iteration in range(1, max_iter + 1):
        nxt = apply_conv_operator(current, geometry, padding)
        nxt /= np.linalg.norm(nxt)
        delta = float(np.linalg.norm(nxt - current))
        current = nxt
        if delta < tol:
            return (
                FeatureTransform(current, geometry, padding, architecture, iteration),
                iteration,
            )
    return (
        FeatureTransform(current, geometry, padding, architecture, max_iter),
        max_iter,
    )


def sine_profile(dim: int) -> np.ndarray:
    """Entries sin(i*pi/(dim+1)) for i = 1..dim; all strictly positive."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    i = np.arange(1, dim + 1)
    return np.sin(i * np.pi / (dim + 1))


def toeplitz_spectrum(dim: int) -> SpectralSummary:
    """Closed-form spectrum of the all-ones tridiagonal Toeplitz matrix.

    Eigenvalues are 1 + 2*cos(h*pi/(dim+1)) for h = 1..dim (already
    descending); the eigenvector for index h has entries proportional to
    sin(h*j*pi/(dim+1)).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    h = np.arange(1, dim + 1)
    eigenvalues = 1.0 + 2.0 * np.cos(h * np.pi / (dim + 1))
    leading = sine_profile(dim)
    leading = leading / np.linalg.norm(leading)
    gap = float(eigenvalues[0] - eigenvalues[1]) if dim >= 2 else 0.0
    return SpectralSummary(eigenvalues, leading, gap)


def tridiagonal_ones(dim: int) -> np.ndarray:
    """The dim-by-dim matrix with ones on the three central diagonals."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    out = np.eye(dim)
    idx = np.arange(dim - 1)
    out[idx, idx + 1] = 1.0
    out[idx + 1, idx] = 1.0
    return out


def limiting_transform(
    geometry: ConvGeometry, padding: Padding, architecture: Architecture
) -> FeatureTransform:
    """Infinite-depth limit of the normalized recursion.

    Zero padding drives every starting matrix to the same diagonal limit:
    sine-profile pixel weights in 1-D, the outer product of two sine
    profiles over grid coordinates in 2-D.  Circular padding leaves the
    normalized depth-0 matrix fixed, so the limit is identity (flattening)
    or all-ones (pooling).
    """
    if padding is Padding.CIRCULAR:
        limit = initial_transform(geometry, architecture)
    elif geometry.kind is GeometryKind.ONE_D:
        limit = np.diag(sine_profile(geometry.p))
        limit /= np.linalg.norm(limit)
    else:
        profile = sine_profile(geometry.side)
        limit = np.diag(np.outer(profile, profile).ravel())
        limit /= np.linalg.norm(limit)
    return FeatureTransform(limit, geometry, padding, architecture, math.inf)


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(vector)))
    if scale == 0.0:
        return vector
    nonzero = np.nonzero(np.abs(vector) > 1e-12 * scale)[0]
    if nonzero.size and vector[nonzero[0]] < 0:
        return -vector
    return vector


def symmetric_spectrum(matrix: np.ndarray) -> SpectralSummary:
    """Numerical eigendecomposition of a symmetric matrix, descending order."""
    matrix = np.asarray(matrix, dtype=float)
    fro = float(np.linalg.norm(matrix))
    asym = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if fro > 0.0 and asym > SYMMETRY_RTOL * fro:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    eigenvalues = eigenvalues[::-1].copy()
    leading = _fix_sign(eigenvectors[:, -1].copy())
    gap = float(eigenvalues[0] - eigenvalues[1]) if eigenvalues.size >= 2 else 0.0
    return SpectralSummary(eigenvalues, leading, gap)


def spectral_summary(transform: FeatureTransform) -> SpectralSummary:
    """Spectrum of a feature transform; see symmetric_spectrum."""
    return symmetric_spectrum(transform.matrix)
