"""Experiment runners: sweep records, gallery images, digit regression."""

from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from _digits import make_synthetic_idx
from convkernel.config import EigvecConfig, parse_config
from convkernel.experiments import (
    participation_ratio,
    run_depth_sweep,
    run_eigvec_gallery,
    run_mnist_experiment,
)
from convkernel.fileio import save_matrix_csv
from convkernel.kernels import Architecture, ConvGeometry, GeometryKind, Padding


def sweep_config(tmp_path, body, name="sweep.cfg"):
    path = tmp_path / name
    path.write_text("experiment = sweep\n" + body)
    return parse_config(path)


FAST_TRIALS = (
    "trials_bias = 25\ntrials_var = 25\ntrials_risk = 25\nrisk_test_points = 32\n"
)


class TestDepthSweep:
    def test_aligned_spike_bias_vanishes_at_center(self, tmp_path):
        cfg = sweep_config(
            tmp_path,
            "theta_family = aligned_spike\nfamily_center = 10\n"
            "p = 20\nn = 10\ndepths = 2,5,10,20,40\n"
            f"{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        records = run_depth_sweep(cfg)
        by_depth = {r.depth: r for r in records}
        center = by_depth[10]
        assert center.bias_mean < 1e-20
        assert center.bias_se < 1e-20
        assert center.misalignment < 1e-12
        others = [r.bias_mean for r in records if r.depth != 10]
        assert min(others) > 1e-3
        depths = [r.depth for r in records]
        biases = [r.bias_mean for r in records]
        assert depths[int(np.argmin(biases))] == 10
        left = biases[: depths.index(10) + 1]
        right = biases[depths.index(10):]
        assert all(a > b for a, b in zip(left, left[1:]))
        assert all(b > a for a, b in zip(right, right[1:]))

    def test_circular_flattening_columns_constant(self, tmp_path):
        cfg = sweep_config(
            tmp_path,
            "padding = circular\narchitecture = flattening\n"
            "p = 4\nn = 2\ndepths = 0,3,9\n"
            f"{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        records = run_depth_sweep(cfg)
        first = records[0]
        for r in records[1:]:
            assert r.bias_mean == first.bias_mean
            assert r.var_mean == first.var_mean
            assert r.risk_mean == first.risk_mean
            assert r.misalignment == first.misalignment

    def test_every_row_satisfies_decomposition(self, tmp_path):
        cfg = sweep_config(
            tmp_path,
            "p = 12\nn = 6\ndepths = 1,4,16\n"
            "trials_bias = 150\ntrials_var = 150\ntrials_risk = 150\n"
            f"outdir = {tmp_path / 'out'}\n",
        )
        for r in run_depth_sweep(cfg):
            combined = 3.0 * (r.bias_se + r.var_se + r.risk_se)
            assert abs(r.risk_mean - (r.bias_mean + r.var_mean)) <= combined

    def test_csv_roundtrips_values(self, tmp_path):
        cfg = sweep_config(
            tmp_path,
            f"p = 10\nn = 5\ndepths = 2,7\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        records = run_depth_sweep(cfg)
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert lines[0] == (
            "depth,bias_mean,bias_se,var_mean,var_se,risk_mean,risk_se,misalignment"
        )
        assert len(lines) == 1 + len(records)
        for line, record in zip(lines[1:], records):
            cells = line.split(",")
            assert int(cells[0]) == record.depth
            assert float(cells[1]) == record.bias_mean
            assert float(cells[4]) == record.var_se
            assert float(cells[7]) == record.misalignment

    def test_rerun_is_byte_identical(self, tmp_path):
        outputs = []
        for name in ("a", "b"):
            cfg = sweep_config(
                tmp_path,
                "sigma_source = inverse_theta\nsigma_depth = 4\n"
                f"p = 10\nn = 5\ndepths = 1,4,9\n{FAST_TRIALS}"
                f"outdir = {tmp_path / name}\n",
                name=f"{name}.cfg",
            )
            run_depth_sweep(cfg)
            outputs.append(
                (
                    (tmp_path / name / "sweep.csv").read_bytes(),
                    (tmp_path / name / "sweep_meta.json").read_bytes(),
                )
            )
        assert outputs[0][0] == outputs[1][0]
        assert outputs[0][1] == outputs[1][1]

    def test_meta_records_ridge_for_inverse_sigma(self, tmp_path):
        cfg = sweep_config(
            tmp_path,
            "sigma_source = inverse_theta\nsigma_depth = 3\n"
            f"p = 10\nn = 5\ndepths = 3\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        run_depth_sweep(cfg)
        meta = (tmp_path / "out" / "sweep_meta.json").read_text()
        assert '"ridge_epsilon"' in meta
        assert "time" not in meta.lower()

    def test_matrix_and_vector_files(self, tmp_path):
        rng = np.random.default_rng(3)
        basis = np.linalg.qr(rng.standard_normal((6, 6)))[0]
        covariance = basis @ np.diag(rng.uniform(0.5, 2.0, 6)) @ basis.T
        covariance = (covariance + covariance.T) / 2
        coef = rng.standard_normal(6)
        save_matrix_csv(covariance, tmp_path / "sigma.csv")
        save_matrix_csv(coef.reshape(1, -1), tmp_path / "beta.csv")
        cfg = sweep_config(
            tmp_path,
            f"sigma_source = file\nsigma_file = {tmp_path / 'sigma.csv'}\n"
            f"beta_source = file\nbeta_file = {tmp_path / 'beta.csv'}\n"
            f"p = 6\nn = 3\ndepths = 1,2\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        records = run_depth_sweep(cfg)
        assert all(np.isfinite(r.risk_mean) for r in records)

    def test_wrong_length_coef_file_rejected(self, tmp_path):
        save_matrix_csv(np.ones((1, 4)), tmp_path / "beta.csv")
        cfg = sweep_config(
            tmp_path,
            f"beta_source = file\nbeta_file = {tmp_path / 'beta.csv'}\n"
            f"p = 6\nn = 3\ndepths = 1\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        with pytest.raises(ValueError, match="length 4, expected 6"):
            run_depth_sweep(cfg)

    def test_zero_coef_file_rejected(self, tmp_path):
        save_matrix_csv(np.zeros((1, 6)), tmp_path / "beta.csv")
        cfg = sweep_config(
            tmp_path,
            f"beta_source = file\nbeta_file = {tmp_path / 'beta.csv'}\n"
            f"p = 6\nn = 3\ndepths = 1\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        with pytest.raises(ValueError, match="all zeros"):
            run_depth_sweep(cfg)

    def test_wrong_shape_covariance_file_rejected(self, tmp_path):
        save_matrix_csv(np.eye(4), tmp_path / "sigma.csv")
        cfg = sweep_config(
            tmp_path,
            f"sigma_source = file\nsigma_file = {tmp_path / 'sigma.csv'}\n"
            f"p = 6\nn = 3\ndepths = 1\n{FAST_TRIALS}outdir = {tmp_path / 'out'}\n",
        )
        with pytest.raises(ValueError, match="expected \\(6, 6\\)"):
            run_depth_sweep(cfg)


class TestParticipationRatio:
    def test_uniform_vector_counts_everything(self):
        assert_allclose(participation_ratio(np.ones(16) / 4.0), 16.0)

    def test_single_spike_counts_one(self):
        vector = np.zeros(9)
        vector[4] = 2.0
        assert_allclose(participation_ratio(vector), 1.0)

    def test_scale_invariant(self):
        vector = np.arange(1.0, 6.0)
        assert_allclose(
            participation_ratio(vector), participation_ratio(3.7 * vector)
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero vector"):
            participation_ratio(np.zeros(4))


def eigvec_config(tmp_path, body=""):
    path = tmp_path / "eig.cfg"
    path.write_text("experiment = eigvec\n" + body)
    return parse_config(path)


class TestEigvecGallery:
    def test_requires_2d_geometry(self, tmp_path):
        cfg = EigvecConfig(
            "eigvec",
            ConvGeometry(GeometryKind.ONE_D, 9),
            Padding.ZERO,
            Architecture.POOLING,
            (0, 1),
            tmp_path / "out",
        )
        with pytest.raises(ValueError, match="2-D"):
            run_eigvec_gallery(cfg)

    def test_writes_valid_pgm_files(self, tmp_path):
        cfg = eigvec_config(
            tmp_path, f"p = 25\ndepths = 0,2,8\noutdir = {tmp_path / 'out'}\n"
        )
        records = run_eigvec_gallery(cfg)
        assert [r.depth for r in records] == [0, 2, 8]
        for record in records:
            data = (tmp_path / "out" / record.image_file).read_bytes()
            assert data.startswith(b"P5\n5 5\n255\n")
            assert len(data) == len(b"P5\n5 5\n255\n") + 25

    def test_gallery_csv_matches_records(self, tmp_path):
        cfg = eigvec_config(
            tmp_path, f"p = 16\ndepths = 0,4\noutdir = {tmp_path / 'out'}\n"
        )
        records = run_eigvec_gallery(cfg)
        lines = (tmp_path / "out" / "gallery.csv").read_text().splitlines()
        assert lines[0] == "depth,participation_ratio"
        parsed = [line.split(",") for line in lines[1:]]
        assert [int(row[0]) for row in parsed] == [0, 4]
        for row, record in zip(parsed, records):
            assert float(row[1]) == record.participation_ratio

    def test_concentration_grows_with_depth(self, tmp_path):
        cfg = eigvec_config(
            tmp_path, f"p = 36\ndepths = 0,1,4,16,64\noutdir = {tmp_path / 'out'}\n"
        )
        ratios = [r.participation_ratio for r in run_eigvec_gallery(cfg)]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_rerun_is_byte_identical(self, tmp_path):
        blobs = []
        for name in ("a", "b"):
            cfg = eigvec_config(
                tmp_path, f"p = 16\ndepths = 0,3\noutdir = {tmp_path / name}\n"
            )
            run_eigvec_gallery(cfg)
            blobs.append(
                [
                    (tmp_path / name / f).read_bytes()
                    for f in ("eigvec_D0.pgm", "eigvec_D3.pgm", "gallery.csv")
                ]
            )
        assert blobs[0] == blobs[1]


@pytest.fixture(scope="module")
def idx_paths(tmp_path_factory):
    return make_synthetic_idx(tmp_path_factory.mktemp("idx"), count_per_class=30)


class TestMnistExperiment:
    def mnist_cfg(self, tmp_path, idx_paths, body, name="mnist.cfg"):
        images, labels = idx_paths
        path = tmp_path / name
        path.write_text(
            f"experiment = mnist\nimages = {images}\nlabels = {labels}\n" + body
        )
        return parse_config(path)

    def test_smoke_records_and_outputs(self, tmp_path, idx_paths):
        cfg = self.mnist_cfg(
            tmp_path,
            idx_paths,
            "count_per_class = 25\nn = 8\ntrials = 3\ndepths = 0,8\n"
            f"outdir = {tmp_path / 'out'}\n",
        )
        records = run_mnist_experiment(cfg)
        assert [r.depth for r in records] == [0, 8]
        for r in records:
            assert np.isfinite(r.loss_mean)
            assert r.loss_se >= 0.0
            assert 0.0 <= r.misalignment <= 1.0
        lines = (tmp_path / "out" / "mnist.csv").read_text().splitlines()
        assert lines[0] == "depth,loss_mean,loss_se,misalignment"
        assert len(lines) == 3
        meta = (tmp_path / "out" / "mnist_meta.json").read_text()
        assert '"baseline_identity_loss_mean"' in meta
        assert '"side": 28' in meta

    def test_pooled_ink_carries_no_signal_at_depth_zero(self, tmp_path, idx_paths):
        cfg = self.mnist_cfg(
            tmp_path,
            idx_paths,
            "count_per_class = 25\nn = 8\ntrials = 4\ndepths = 0\n"
            f"outdir = {tmp_path / 'out'}\n",
        )
        record = run_mnist_experiment(cfg)[0]
        assert record.loss_mean > 0.5

    def test_rerun_is_byte_identical(self, tmp_path, idx_paths):
        blobs = []
        for name in ("a", "b"):
            cfg = self.mnist_cfg(
                tmp_path,
                idx_paths,
                "count_per_class = 20\nn = 6\ntrials = 2\ndepths = 0,4\n"
                f"outdir = {tmp_path / name}\n",
                name=f"{name}.cfg",
            )
            run_mnist_experiment(cfg)
            blobs.append(
                (
                    (tmp_path / name / "mnist.csv").read_bytes(),
                    (tmp_path / name / "mnist_meta.json").read_bytes(),
                )
            )
        assert blobs[0][0] == blobs[1][0]
        assert blobs[0][1] == blobs[1][1]
