import numpy as np
import pytest

from fbftrack import (ClosedLoopSystem, ControllerSettings, Plant, PlantConfig,
                      assemble_closed_loop, build_lift_window, check_stability,
                      run_tracking, spectral_radius, steady_window_blocks)
from fbftrack.stability import pseudo_inverse

from conftest import TS

# reference value for the zero-weight (standard) closed loop at the bench
# configuration, recorded from the dense eigensolver
BENCH_STANDARD_RADIUS = 0.2721110411


def synthetic_system(core_scale: float, dim: int = 8) -> ClosedLoopSystem:
    a = np.eye(dim + 1) * core_scale
    a[dim, dim] = 1.0
    return ClosedLoopSystem(a=a, b=np.zeros((dim + 1, 1)),
                            k=np.zeros((1, dim + 1)), m=np.zeros((1, 2)),
                            batch_len=1, n_p=dim - 6, n_c=1)


@pytest.fixture(scope="module")
def bench_setup(bench_basis_cfg, bench_hybrid_cfg, axis_x_model):
    basis = steady_window_blocks(bench_basis_cfg, axis_x_model)
    zero = np.zeros(bench_hybrid_cfg.feature_len)
    return basis, bench_hybrid_cfg, zero


class TestAssembly:
    def test_state_dimension(self, bench_setup):
        basis, hc, zero = bench_setup
        system = assemble_closed_loop(build_lift_window(hc, zero), basis)
        assert system.state_dim == 6 * 70 + basis.n_p + 1
        assert system.a.shape == (system.state_dim, system.state_dim)

    def test_zero_weight_feedback_structure(self, bench_setup):
        basis, hc, zero = bench_setup
        system = assemble_closed_loop(build_lift_window(hc, zero), basis)
        n, n_p = 70, basis.n_p
        k = system.k
        assert not k[:, 0:n].any()              # no corrected-prediction path
        assert not k[:, 3 * n:4 * n].any()      # no stored-prediction path
        assert not k[:, 4 * n:5 * n].any()
        assert not k[:, -1].any()               # no bias path
        pinv, _ = pseudo_inverse(basis.psit_c)
        expected = -pinv @ basis.psit_pc
        assert np.abs(k[:, 6 * n:6 * n + n_p] - expected).max() < 1e-14

    def test_shared_pseudoinverse_is_m(self, bench_setup):
        basis, hc, zero = bench_setup
        lift = build_lift_window(hc, zero)
        pinv, _ = pseudo_inverse(lift.l_a @ basis.psit_c)
        system = assemble_closed_loop(lift, basis, pinv=pinv)
        assert system.m is pinv

    def test_batch_scope_rejected(self, bench_setup):
        basis, hc, zero = bench_setup
        from fbftrack import build_lift_batch
        with pytest.raises(ValueError, match="window"):
            assemble_closed_loop(build_lift_batch(hc, zero), basis)


class TestSpectralRadius:
    def test_synthetic_half(self):
        assert spectral_radius(synthetic_system(0.5)) == pytest.approx(0.5)

    def test_bench_standard_radius_regression(self, bench_setup):
        basis, hc, zero = bench_setup
        system = assemble_closed_loop(build_lift_window(hc, zero), basis)
        rho = spectral_radius(system, method="dense")
        assert rho < 1.0
        assert rho == pytest.approx(BENCH_STANDARD_RADIUS, abs=1e-6)

    def test_fast_path_agrees_with_dense(self, bench_setup):
        basis, hc, zero = bench_setup
        rng = np.random.default_rng(4)
        for scale in (0.0, 1.0, 8.0):
            w = rng.normal(size=hc.feature_len) * 0.02
            w[1 + hc.q:] *= scale
            system = assemble_closed_loop(build_lift_window(hc, w), basis)
            dense = spectral_radius(system, method="dense")
            fast = spectral_radius(system, method="iterative")
            assert fast == pytest.approx(dense, abs=1e-6 * max(dense, 1.0))

    def test_radius_crosses_one_under_error_scaling(self, bench_setup):
        basis, hc, _ = bench_setup
        rng = np.random.default_rng(5)
        w = rng.normal(size=hc.feature_len) * 0.03

        def rho(scale):
            ws = w.copy()
            ws[1 + hc.q:] *= scale
            system = assemble_closed_loop(build_lift_window(hc, ws), basis)
            return spectral_radius(system)

        lo, hi = 0.0, 1.0
        while rho(hi) < 1.0:
            hi *= 2.0
            assert hi < 1e6
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if rho(mid) < 1.0:
                lo = mid
            else:
                hi = mid
        s_star = 0.5 * (lo + hi)
        assert rho(0.5 * s_star) < 1.0 < rho(2.0 * s_star)


class TestVerdicts:
    def test_stable(self):
        assert check_stability(0.5, 0.97) == "stable"

    def test_warning(self):
        assert check_stability(0.98, 0.97) == "warning"

    def test_alarm_at_unity_regardless_of_threshold(self):
        assert check_stability(1.001, 0.5) == "alarm"
        assert check_stability(float("inf")) == "alarm"

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            check_stability(0.5, 1.5)


class TestClosedLoopFidelity:
    def test_frozen_weights_propagation_matches_live_loop(
            self, bench_basis_cfg, bench_hybrid_cfg, axis_x_model):
        rng = np.random.default_rng(6)
        w = rng.normal(size=bench_hybrid_cfg.feature_len) * 0.03
        basis = steady_window_blocks(bench_basis_cfg, axis_x_model)
        lift = build_lift_window(bench_hybrid_cfg, w)
        system = assemble_closed_loop(lift, basis)
        t = np.arange(0, 3.5, TS)
        y_d = ((1.0 + 0.25 * np.sin(2 * np.pi * 12 * t))
               * np.clip(t / 0.5, 0, 1) ** 3)[:3430]
        settings = ControllerSettings(mode="frozen-hybrid", warmup_batches=0,
                                      mitigation="none")
        rec = run_tracking(y_d, axis_x_model, bench_basis_cfg,
                           bench_hybrid_cfg, settings, plant=None,
                           initial_weights=w)
        n = 70
        y_d_pad = np.concatenate([y_d, np.full(140, y_d[-1])])

        def state_at(j):
            def committed(name, idx):
                arr = getattr(rec, name)
                if idx < 0:
                    return np.zeros(n)
                return arr[idx * n:(idx + 1) * n]

            prov_yh = (rec.yh_provisional[j - 1] if j >= 1 else np.zeros(n))
            prov_ypb = (rec.ypb_provisional[j - 1] if j >= 1 else np.zeros(n))
            return np.concatenate([
                committed("y_hat_h", j - 2), committed("y_hat_h", j - 1),
                prov_yh, committed("y_hat_pb", j - 2),
                committed("y_hat_pb", j - 1), prov_ypb,
                rec.gamma_p[j], [1.0]])

        worst = 0.0
        for j in range(2, rec.n_windows - 1):
            predicted = system.propagate(state_at(j),
                                         y_d_pad[j * n:j * n + 140])
            worst = max(worst,
                        float(np.abs(predicted - state_at(j + 1)).max()))
        assert worst <= 1e-9
