import math
import warnings

import numpy as np
import pytest

from wehrlflux.errors import (
    InvalidCovarianceError,
    SingularBranchError,
    SolverConvergenceError,
    UnstableSystemError,
)
from wehrlflux.dicke_gaussian import (
    DIVERGENCE_WINDOW,
    OMEGA_4,
    CovarianceMatrix,
    DickeParams,
    MeanFieldState,
    critical_coupling,
    dicke_point,
    divergence_scan,
    drift_diffusion,
    fit_power_law,
    gaussian_budget,
    hamiltonian_quadratic_form,
    hp_coefficients,
    kink_detector,
    mc_gaussian_budget,
    mean_field_fixed_point,
    solve_lyapunov,
    unitary_drift_diffusion,
)

FIG3 = dict(omega0=0.005, omega=0.01, kappa=1.0, gamma=1e-3)


def fig3_params(lam):
    return DickeParams(FIG3["omega0"], FIG3["omega"], FIG3["kappa"], lam, FIG3["gamma"])


LAMBDA_C = critical_coupling(fig3_params(0.0))


class TestCriticalCoupling:
    def test_reference_value_against_high_precision(self):
        import mpmath

        mpmath.mp.dps = 40
        expected = 0.5 * mpmath.sqrt(
            (mpmath.mpf("0.005") / mpmath.mpf("0.01"))
            * (mpmath.mpf(1) ** 2 + mpmath.mpf("0.01") ** 2)
        )
        assert LAMBDA_C == pytest.approx(float(expected), abs=1e-15)
        assert LAMBDA_C == pytest.approx(0.3535710678, abs=1e-9)

    def test_closed_system_limit(self):
        # kappa -> 0 with omega0 = omega: lambda_c -> omega / 2
        p = DickeParams(0.01, 0.01, 1e-12, 0.0, 1e-15)
        assert critical_coupling(p) == pytest.approx(0.005, rel=1e-12)

    def test_sqrt_scaling_in_spin_splitting(self):
        p1 = fig3_params(0.0)
        p2 = DickeParams(0.010, 0.01, 1.0, 0.0, 1e-3)
        assert critical_coupling(p2) == pytest.approx(
            math.sqrt(2.0) * critical_coupling(p1), rel=1e-12
        )


class TestMeanField:
    def test_normal_phase(self):
        mf = mean_field_fixed_point(fig3_params(0.5 * LAMBDA_C))
        assert mf.beta == 0.0 and mf.alpha == 0 and mf.w == -0.5

    def test_continuous_onset(self):
        mf = mean_field_fixed_point(fig3_params(LAMBDA_C))
        assert mf.beta == 0.0

    def test_ordered_branch_analytic_point(self):
        # at lam = sqrt(2) lam_c: beta = sqrt(3)/4, w = -1/4
        mf = mean_field_fixed_point(fig3_params(math.sqrt(2.0) * LAMBDA_C))
        assert mf.beta == pytest.approx(math.sqrt(3.0) / 4.0, abs=1e-12)
        assert mf.w == pytest.approx(-0.25, abs=1e-12)

    @pytest.mark.parametrize("ratio", [0.3, 0.9, 1.0, 1.1, 1.7, 3.0])
    def test_constraint_and_residuals(self, ratio):
        p = fig3_params(ratio * LAMBDA_C)
        mf = mean_field_fixed_point(p)
        assert mf.w ** 2 + abs(mf.beta) ** 2 == pytest.approx(0.25, abs=1e-12)
        assert max(mf.residuals(p)) < 1e-12
        assert mf.w <= 0

    def test_order_parameter_slope_jump(self):
        # beta is continuous at lam_c but d(beta^2)/d lam jumps to 1/lam_c
        h = 1e-7
        b_above = mean_field_fixed_point(fig3_params(LAMBDA_C + h)).beta
        assert b_above ** 2 == pytest.approx(h / LAMBDA_C, rel=1e-4)
        assert mean_field_fixed_point(fig3_params(LAMBDA_C - h)).beta == 0.0


class TestBosonization:
    def test_normal_phase_coefficients(self):
        p = fig3_params(0.7 * LAMBDA_C)
        hp = hp_coefficients(mean_field_fixed_point(p), p)
        assert hp.beta_tilde_minus == 0.0
        assert hp.beta_tilde_plus == 1.0
        assert hp.omega0_tilde == p.omega0
        assert hp.lambda_tilde == p.lam
        assert hp.zeta == 0.0

    @pytest.mark.parametrize("ratio", [1.05, math.sqrt(2.0), 2.5])
    def test_identities(self, ratio):
        p = fig3_params(ratio * LAMBDA_C)
        mf = mean_field_fixed_point(p)
        hp = hp_coefficients(mf, p)
        assert hp.beta_tilde_minus ** 2 + hp.beta_tilde_plus ** 2 == pytest.approx(
            1.0, abs=1e-12
        )
        assert hp.beta_tilde_minus * hp.beta_tilde_plus == pytest.approx(
            mf.beta, abs=1e-12
        )

    def test_spin_splitting_renormalizes_up(self):
        p = fig3_params(1.3 * LAMBDA_C)
        mf = mean_field_fixed_point(p)
        hp = hp_coefficients(mf, p)
        assert 2.0 * mf.alpha.real < 0
        assert hp.omega0_tilde > p.omega0

    def test_fully_inverted_spin_rejected(self):
        p = fig3_params(1.3 * LAMBDA_C)
        with pytest.raises(SingularBranchError):
            hp_coefficients(MeanFieldState(alpha=0.0, beta=0.5, w=0.0), p)


class TestDriftDiffusion:
    def test_matrix_layout(self):
        p = fig3_params(0.8 * LAMBDA_C)
        hp = hp_coefficients(mean_field_fixed_point(p), p)
        A, D = drift_diffusion(hp, p)
        wt0, lt, zeta = hp.omega0_tilde, hp.lambda_tilde, hp.zeta
        expected = np.array(
            [[-p.gamma, wt0, 0, 0],
             [4 * zeta - wt0, -p.gamma, -2 * lt, 0],
             [0, 0, -p.kappa, p.omega],
             [-2 * lt, 0, -p.omega, -p.kappa]]
        )
        assert np.allclose(A, expected)
        assert np.allclose(D, np.diag([p.gamma, p.gamma, p.kappa, p.kappa]))

    def test_drift_consistent_with_quadratic_form(self):
        # A = Omega G - diag(damping): the Hamiltonian part is symplectic
        for ratio in (0.6, 1.4):
            p = fig3_params(ratio * LAMBDA_C)
            hp = hp_coefficients(mean_field_fixed_point(p), p)
            A, _ = drift_diffusion(hp, p)
            G = hamiltonian_quadratic_form(hp, p)
            damping = np.diag([p.gamma, p.gamma, p.kappa, p.kappa])
            assert np.allclose(A, OMEGA_4 @ G - damping, atol=1e-14)

    def test_decoupled_normal_phase_blocks(self):
        p = DickeParams(0.005, 0.01, 1.0, 1e-12, 1e-3)
        hp = hp_coefficients(mean_field_fixed_point(p), p)
        A, _ = drift_diffusion(hp, p)
        assert abs(A[1, 2]) < 1e-11 and abs(A[3, 0]) < 1e-11

    def test_stable_below_threshold(self):
        p = fig3_params(0.9 * LAMBDA_C)
        hp = hp_coefficients(mean_field_fixed_point(p), p)
        A, _ = drift_diffusion(hp, p)
        assert np.linalg.eigvals(A).real.max() < 0

    def test_soft_mode_closes_at_critical_coupling(self):
        # with gamma -> 0 the least-damped drift eigenvalue approaches zero
        # exactly at the critical coupling
        decay = {}
        for ratio in (0.9, 0.95, 1.0, 1.05, 1.1):
            p = DickeParams(0.005, 0.01, 1.0, ratio * LAMBDA_C, 1e-9)
            hp = hp_coefficients(mean_field_fixed_point(p), p)
            A, _ = drift_diffusion(hp, p)
            decay[ratio] = -np.linalg.eigvals(A).real.max()
        assert min(decay, key=decay.get) == 1.0
        assert decay[1.0] < 1e-6


class TestLyapunov:
    def test_decoupled_vacuum(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            p = DickeParams(0.005, 0.01, 1.0, 0.0, 1.0)  # gamma = kappa
        hp = hp_coefficients(mean_field_fixed_point(p), p)
        A, D = drift_diffusion(hp, p)
        sigma = solve_lyapunov(A, D)
        assert np.allclose(sigma.sigma, 0.5 * np.eye(4), atol=1e-12)

    def test_random_stable_system_contract(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            A = rng.normal(size=(4, 4)) - 3.0 * np.eye(4)
            D = np.eye(4)
            sigma = solve_lyapunov(A, D, require_physical=False)
            res = np.linalg.norm(A @ sigma.sigma + sigma.sigma @ A.T + D)
            assert res < 1e-10

    def test_unstable_system_rejected(self):
        A = np.diag([0.5, -1.0, -1.0, -1.0])
        with pytest.raises(UnstableSystemError) as err:
            solve_lyapunov(A, np.eye(4))
        assert err.value.eigenvalue.real == pytest.approx(0.5)

    def test_cavity_fluctuations_grow_toward_threshold(self):
        def photon_variance(ratio):
            b, sigma, *_ = dicke_point(fig3_params(ratio * LAMBDA_C))
            s = sigma.sigma
            return (s[2, 2] + s[3, 3] - 1.0) / 2.0

        v = [photon_variance(r) for r in (1.20, 1.10, 1.05)]
        assert v[0] < v[1] < v[2]
        assert v[2] > 10.0

    def test_covariance_symmetry_enforced(self):
        with pytest.raises(InvalidCovarianceError):
            CovarianceMatrix(np.arange(16.0).reshape(4, 4))

    def test_physicality_across_scan(self):
        for ratio in (0.5, 0.99, 1.01, 2.0):
            _, sigma, *_ = dicke_point(fig3_params(ratio * LAMBDA_C))
            assert sigma.validate_physical() > -1e-9


class TestGaussianBudget:
    def test_vacuum_budget(self):
        p = fig3_params(1e-12)
        mf = mean_field_fixed_point(p)
        hp = hp_coefficients(mf, p)
        sigma = CovarianceMatrix(0.5 * np.eye(4))
        b = gaussian_budget(sigma, hp, p, mf, N=1)
        assert b.S == pytest.approx(2.0 * (1.0 + math.log(math.pi)), abs=1e-12)
        assert b.Phi_q == pytest.approx(0.0, abs=1e-12)
        assert b.Pi_d == pytest.approx(0.0, abs=1e-12)
        assert abs(b.Pi_u) < 1e-12

    def test_balance_identity_across_couplings(self):
        # Pi_u + Pi_d(a) + Pi_d(b) = Phi_q(a) + Phi_q(b) at the fixed point
        for ratio in np.linspace(0.2, 2.2, 20):
            if abs(ratio - 1.0) < 1e-9:
                continue
            b, *_ = dicke_point(fig3_params(float(ratio) * LAMBDA_C))
            assert b.balance_rel < 1e-6

    def test_normal_phase_has_no_mean_field_flux(self):
        b, *_ = dicke_point(fig3_params(0.8 * LAMBDA_C))
        assert b.Phi_ext == 0.0

    def test_ordered_phase_mean_field_flux(self):
        p = fig3_params(1.5 * LAMBDA_C)
        b, _, _, mf = dicke_point(p, N=7)
        assert b.Phi_ext == pytest.approx(2.0 * p.kappa * 7 * abs(mf.alpha) ** 2)
        assert b.Pi_ext == b.Phi_ext

    def test_unitary_production_equals_damping_trace_identity(self):
        # at the Lyapunov fixed point: Pi_u = tr(K) - tr(K Sigma^{-1})
        p = fig3_params(1.3 * LAMBDA_C)
        b, sigma, hp, mf = dicke_point(p)
        Sigma = sigma.sigma + 0.5 * np.eye(4)
        K = np.diag([p.gamma, p.gamma, p.kappa, p.kappa])
        identity_value = np.trace(K) - np.trace(K @ np.linalg.inv(Sigma))
        assert b.Pi_u == pytest.approx(identity_value, rel=1e-10)


class TestMonteCarloOracle:
    @pytest.mark.parametrize("ratio", [0.5, 0.8, 1.2, 1.5, 2.0])
    def test_closed_forms_within_one_percent(self, ratio):
        p = fig3_params(ratio * LAMBDA_C)
        b, sigma, hp, mf = dicke_point(p)
        mc = mc_gaussian_budget(sigma, hp, p, samples=10 ** 6, seed=20260810)
        assert mc.S == pytest.approx(b.S, rel=0.01)
        assert mc.Pi_d == pytest.approx(b.Pi_d, rel=0.01)
        assert mc.Pi_u == pytest.approx(b.Pi_u, rel=0.01)

    def test_seeded_reproducibility_and_chunk_invariance(self):
        p = fig3_params(1.2 * LAMBDA_C)
        _, sigma, hp, _ = dicke_point(p)
        a = mc_gaussian_budget(sigma, hp, p, samples=10 ** 5, seed=42)
        b = mc_gaussian_budget(sigma, hp, p, samples=10 ** 5, seed=42)
        assert a == b

    def test_raw_generator_estimator_consistent(self):
        p = fig3_params(1.5 * LAMBDA_C)
        b, sigma, hp, _ = dicke_point(p)
        mc = mc_gaussian_budget(sigma, hp, p, samples=10 ** 6, seed=7)
        assert abs(mc.Pi_u_raw - b.Pi_u) < 5.0 * mc.Pi_u_raw_stderr


class TestCriticalScans:
    def test_divergence_slopes(self):
        rels = np.linspace(0.03, 0.14, 23)
        grid = np.concatenate([(1 - rels) * LAMBDA_C, (1 + rels) * LAMBDA_C])
        fit = divergence_scan(fig3_params(0.0), grid)
        assert fit.left_slope == pytest.approx(-1.0, abs=0.1)
        assert fit.right_slope == pytest.approx(-1.0, abs=0.1)

    def test_doubling_gamma_degrades_scaling(self):
        rels = np.linspace(0.03, 0.14, 23)
        grid = np.concatenate([(1 - rels) * LAMBDA_C, (1 + rels) * LAMBDA_C])
        p2 = DickeParams(0.005, 0.01, 1.0, 0.0, 2e-3)
        fit = divergence_scan(p2, grid)
        assert fit.right_slope > -0.9  # gamma-rounded, shallower than -1

    def test_power_law_fitter_self_test(self):
        lams = LAMBDA_C * np.concatenate(
            [np.linspace(0.85, 0.96, 12), np.linspace(1.04, 1.15, 12)]
        )
        vals = 3.0 / np.abs(LAMBDA_C - lams)
        (ls, le, _), (rs, re, _) = fit_power_law(lams, vals, LAMBDA_C)
        assert ls == pytest.approx(-1.0, abs=1e-6)
        assert rs == pytest.approx(-1.0, abs=1e-6)

    def test_insufficient_points(self):
        lams = LAMBDA_C * np.array([0.90, 0.92, 1.05, 1.08])
        with pytest.raises(SolverConvergenceError):
            fit_power_law(lams, np.ones(4), LAMBDA_C)

    def test_kink(self):
        grid = LAMBDA_C * np.linspace(0.97, 1.03, 25)
        report = kink_detector(fig3_params(0.0), grid)
        noise = report.left_noise + report.right_noise
        assert abs(report.left_slope - report.right_slope) > 10.0 * noise
        assert report.jump_estimate < report.jump_bound

    def test_unitary_small_dissipative_large_near_core(self):
        grid = LAMBDA_C * np.linspace(0.95, 1.05, 21)
        pi_u_vals, pi_d_vals = [], []
        for lam in grid:
            b, *_ = dicke_point(fig3_params(float(lam)))
            pi_u_vals.append(b.Pi_u)
            pi_d_vals.append(b.Pi_d)
        assert max(abs(v) for v in pi_u_vals) < 1.0
        assert max(pi_d_vals) > 1e3
