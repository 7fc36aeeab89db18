"""Feature-transform recursion: initial conditions, normalization, fixed points."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from convkernel import (
    Architecture,
    ConvGeometry,
    FeatureTransform,
    GeometryKind,
    Padding,
    feature_transform,
    feature_transforms,
    initial_transform,
    iterate_to_convergence,
    limiting_transform,
)

ARCHS = (Architecture.FLATTENING, Architecture.POOLING)
PADDINGS = (Padding.ZERO, Padding.CIRCULAR)


def geom_1d(p: int) -> ConvGeometry:
    return ConvGeometry(GeometryKind.ONE_D, p)


class TestInitialConditions:
    def test_pooling_starts_all_ones(self):
        ft = feature_transform(0, geom_1d(5), Padding.ZERO, Architecture.POOLING)
        assert_allclose(ft.matrix, np.ones((5, 5)) / 5.0, atol=0, rtol=0)

    def test_flattening_starts_identity(self):
        ft = feature_transform(0, geom_1d(5), Padding.ZERO, Architecture.FLATTENING)
        assert_allclose(ft.matrix, np.eye(5) / np.sqrt(5.0), atol=0, rtol=0)


class TestCircularFixedPoints:
    def test_flattening_p4_is_half_identity_at_every_depth(self):
        for depth in (0, 1, 2, 7, 33):
            ft = feature_transform(depth, geom_1d(4), Padding.CIRCULAR, Architecture.FLATTENING)
            assert_array_equal(ft.matrix, np.eye(4) / 2.0)

    @pytest.mark.parametrize("arch", ARCHS)
    @pytest.mark.parametrize("p", (3, 6, 11))
    def test_normalized_iterates_never_move(self, p, arch):
        start = initial_transform(geom_1d(p), arch)
        for ft in feature_transforms([0, 1, 2, 5, 20], geom_1d(p), Padding.CIRCULAR, arch):
            assert np.max(np.abs(ft.matrix - start)) <= 1e-12


class TestRecursionPlumbing:
    @pytest.mark.parametrize("arch", ARCHS)
    @pytest.mark.parametrize("padding", PADDINGS)
    def test_snapshots_match_single_calls(self, padding, arch):
        geometry = geom_1d(6)
        batch = feature_transforms([0, 3, 7], geometry, padding, arch)
        for ft in batch:
            single = feature_transform(ft.depth, geometry, padding, arch)
            assert_array_equal(ft.matrix, single.matrix)

    @pytest.mark.parametrize("arch", ARCHS)
    @pytest.mark.parametrize("padding", PADDINGS)
    @pytest.mark.parametrize("geometry", [geom_1d(7), ConvGeometry(GeometryKind.TWO_D, 9)])
    def test_iterates_are_normalized_symmetric_psd(self, geometry, padding, arch):
        for ft in feature_transforms([0, 1, 4, 9], geometry, padding, arch):
            fro = np.linalg.norm(ft.matrix)
            assert abs(fro - 1.0) <= 1e-12
            assert_array_equal(ft.matrix, ft.matrix.T)
            assert np.linalg.eigvalsh(ft.matrix)[0] >= -1e-10
            assert ft.normalized

    def test_depth_list_validation(self):
        geometry = geom_1d(4)
        with pytest.raises(ValueError, match="nonempty"):
            feature_transforms([], geometry, Padding.ZERO, Architecture.POOLING)
        with pytest.raises(ValueError, match="strictly increasing"):
            feature_transforms([1, 2, 2], geometry, Padding.ZERO, Architecture.POOLING)
        with pytest.raises(ValueError, match="non-negative"):
            feature_transforms([-1, 2], geometry, Padding.ZERO, Architecture.POOLING)


class TestConvergenceDetector:
    def test_zero_padding_reaches_limit(self):
        geometry = geom_1d(5)
        ft, iterations = iterate_to_convergence(
            geometry, Padding.ZERO, Architecture.FLATTENING
        )
        assert iterations < 100_000
        limit = limiting_transform(geometry, Padding.ZERO, Architecture.FLATTENING)
        assert np.linalg.norm(ft.matrix - limit.matrix) < 1e-9

    def test_circular_stops_immediately(self):
        ft, iterations = iterate_to_convergence(
            geom_1d(6), Padding.CIRCULAR, Architecture.POOLING
        )
        assert iterations == 1
        assert_allclose(ft.matrix, np.ones((6, 6)) / 6.0, atol=1e-15, rtol=0)

    def test_cap_is_respected(self):
        ft, iterations = iterate_to_convergence(
            geom_1d(10), Padding.ZERO, Architecture.POOLING, tol=0.0, max_iter=25
        )
        assert iterations == 25
        assert ft.depth == 25


class TestFeatureTransformValidation:
    def test_rejects_asymmetric(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        bad /= np.linalg.norm(bad)
        with pytest.raises(ValueError, match="symmetric"):
            FeatureTransform(bad, geom_1d(2), Padding.ZERO, Architecture.POOLING, 1)

    def test_rejects_indefinite(self):
        bad = np.diag([1.0, -1.0])
        bad /= np.linalg.norm(bad)
        with pytest.raises(ValueError, match="PSD"):
            FeatureTransform(bad, geom_1d(2), Padding.ZERO, Architecture.POOLING, 1)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError, match="shape"):
            FeatureTransform(np.eye(3) / np.sqrt(3), geom_1d(2), Padding.ZERO,
                             Architecture.POOLING, 0)

    def test_rejects_unnormalized_when_flagged(self):
        with pytest.raises(ValueError, match="norm"):
            FeatureTransform(np.eye(4), geom_1d(4), Padding.ZERO, Architecture.POOLING, 0)

    def test_accepts_unnormalized_when_not_flagged(self):
        ft = FeatureTransform(
            2.0 * np.eye(4), geom_1d(4), Padding.ZERO, Architecture.POOLING, 0,
            normalized=False,
        )
        assert not ft.normalized

    def test_matrix_is_read_only(self):
        ft = feature_transform(2, geom_1d(4), Padding.ZERO, Architecture.POOLING)
        with pytest.raises(ValueError):
            ft.matrix[0, 0] = 9.0
