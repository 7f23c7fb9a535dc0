import numpy as np
import pytest

from fbftrack import (BasisConfig, ContinuousTransferFunction, build_bspline_basis,
                      discretize_zoh, filter_and_partition, lifted_filter,
                      impulse_response, steady_window_blocks)
from fbftrack.basis import BasisError
from fbftrack.lifted import DiscreteStateSpace

from conftest import TS


def gain_model(g=1.0):
    return discretize_zoh(ContinuousTransferFunction([g], [1.0]), TS)


def delay_model():
    return DiscreteStateSpace(np.zeros((1, 1)), np.ones((1, 1)),
                              np.ones((1, 1)), 0.0, TS)


class TestConfig:
    def test_window_must_be_two_batches(self):
        with pytest.raises(BasisError, match="twice"):
            BasisConfig(degree=5, knot_spacing=10, batch_len=70, window_len=150)

    def test_batch_multiple_of_spacing(self):
        with pytest.raises(BasisError, match="multiple"):
            BasisConfig(degree=5, knot_spacing=9, batch_len=70, window_len=140)

    def test_bench_counts(self, bench_basis_cfg):
        assert bench_basis_cfg.n_past == 6
        assert bench_basis_cfg.n_current == 14
        assert bench_basis_cfg.coeffs_per_batch == 7
        assert bench_basis_cfg.support_len == 60


class TestBuildBasis:
    def test_degree_one_hats(self):
        cfg = BasisConfig(degree=1, knot_spacing=1, batch_len=4, window_len=8)
        sampled = build_bspline_basis(cfg, 12)
        # an interior hat function: 1 at its own knot, 0 at the neighbors
        col = sampled.matrix[:, 5]
        peak = int(np.argmax(col))
        assert col[peak] == pytest.approx(1.0)
        assert col[peak - 1] == pytest.approx(0.0)
        assert col[peak + 1] == pytest.approx(0.0)

    def test_partition_of_unity_bench(self, bench_basis_cfg):
        sampled = build_bspline_basis(bench_basis_cfg, 400)
        sums = sampled.matrix.sum(axis=1)
        assert np.abs(sums - 1.0).max() <= 1e-12

    def test_six_supports_cross_each_batch_boundary(self, bench_basis_cfg):
        # count via evaluation: functions still active at the last step before
        # the boundary whose support extends across it
        sampled = build_bspline_basis(bench_basis_cfg, 560)
        for boundary in (140, 210, 280, 350):
            active = [i for i in range(sampled.n_functions)
                      if sampled.matrix[boundary - 1, i] != 0.0
                      and sampled.support_end[i] >= boundary]
            assert len(active) == 6

    def test_horizon_too_short_rejected(self, bench_basis_cfg):
        with pytest.raises(BasisError, match="horizon"):
            build_bspline_basis(bench_basis_cfg, 30)


class TestFilterAndPartition:
    def horizon_for(self, cfg, window_index):
        return (window_index * cfg.batch_len + cfg.window_len
                + cfg.support_len + cfg.knot_spacing)

    def test_gain_model_filtered_equals_raw(self, bench_basis_cfg):
        cfg = bench_basis_cfg
        sampled = build_bspline_basis(cfg, self.horizon_for(cfg, 3))
        blocks = filter_and_partition(sampled, gain_model(), cfg, 3)
        assert np.array_equal(blocks.psit_c, blocks.psi_c)
        assert np.array_equal(blocks.psit_pc, blocks.psi_pc)

    def test_delay_model_shifts_rows(self, bench_basis_cfg):
        cfg = bench_basis_cfg
        sampled = build_bspline_basis(cfg, self.horizon_for(cfg, 3))
        blocks = filter_and_partition(sampled, delay_model(), cfg, 3)
        assert np.allclose(blocks.psit_c[1:], blocks.psi_c[:-1], atol=0)
        assert np.allclose(blocks.psit_c[0], 0.0, atol=0)

    def test_windows_three_and_seven_identical(self, bench_basis_cfg,
                                               axis_x_model):
        cfg = bench_basis_cfg
        sampled = build_bspline_basis(cfg, self.horizon_for(cfg, 7))
        b3 = filter_and_partition(sampled, axis_x_model, cfg, 3)
        b7 = filter_and_partition(sampled, axis_x_model, cfg, 7)
        for name in ("psi_c", "psi_pc", "psit_c", "psit_pc"):
            assert np.abs(getattr(b3, name) - getattr(b7, name)).max() <= 1e-12

    def test_matches_steady_blocks(self, bench_basis_cfg, axis_x_model):
        cfg = bench_basis_cfg
        sampled = build_bspline_basis(cfg, self.horizon_for(cfg, 4))
        extracted = filter_and_partition(sampled, axis_x_model, cfg, 4)
        steady = steady_window_blocks(cfg, axis_x_model)
        for name in ("psi_c", "psi_pc", "psit_c", "psit_pc"):
            assert np.abs(getattr(extracted, name)
                          - getattr(steady, name)).max() <= 1e-12

    def test_boundary_window_rejected(self, bench_basis_cfg, axis_x_model):
        cfg = bench_basis_cfg
        sampled = build_bspline_basis(cfg, self.horizon_for(cfg, 7))
        with pytest.raises(BasisError, match="boundary"):
            filter_and_partition(sampled, axis_x_model, cfg, 0)

    def test_rank_deficient_rejected(self, bench_basis_cfg):
        with pytest.raises(BasisError, match="rank deficient"):
            steady_window_blocks(bench_basis_cfg, gain_model(0.0))


class TestReconstructionConsistency:
    def test_window_output_matches_lifted_filter(self, bench_basis_cfg,
                                                 axis_x_model):
        cfg = bench_basis_cfg
        blocks = steady_window_blocks(cfg, axis_x_model)
        rng = np.random.default_rng(11)
        gamma_p = rng.normal(size=cfg.n_past)
        gamma_c = rng.normal(size=cfg.n_current)
        via_blocks = blocks.psit_c @ gamma_c + blocks.psit_pc @ gamma_p
        # assemble the raw input over [window start - past support, window end)
        # directly from shifted copies of the uniform basis function
        lead = cfg.n_past * cfg.knot_spacing
        span = lead + cfg.window_len
        full = np.zeros((span, cfg.n_past + cfg.n_current))
        from fbftrack.basis import _uniform_bump
        bump = _uniform_bump(cfg.degree, cfg.knot_spacing)
        for t in range(cfg.n_past):
            start = t * cfg.knot_spacing
            full[start:start + bump.size, t] = bump
        for c in range(cfg.n_current):
            start = lead + c * cfg.knot_spacing
            ln = min(bump.size, span - start)
            full[start:start + ln, cfg.n_past + c] = bump[:ln]
        u = full @ np.concatenate([gamma_p, gamma_c])
        h = impulse_response(axis_x_model, span)
        filtered = lifted_filter(h, u)[lead:]
        assert np.abs(filtered - via_blocks).max() <= 1e-10
