import math

import numpy as np
import pytest

from llap import (
    CertificateError,
    Nonlinearity,
    RealField,
    SpectralField,
    apply_picard_map,
    certify,
    equation_residual,
    eval_F,
    forward_ft,
    inverse_ft,
    kernel_from_field,
    make_kernel,
    make_nonlinearity,
    norms,
    picard_multiplier,
    picard_solve,
    reciprocal_grid,
    symbol_grid,
    triviality_indicator,
)
from conftest import SQRT_2PI, l2_gap

TWO_PI = 2.0 * math.pi


def linear_nonlinearity(grid, lip, offset):
    """F(u, x) = lip * u + h(x); violates the growth family set on purpose
    and exists only as the independent oracle for the whole pipeline."""
    return Nonlinearity(
        family="linear-test",
        lip=lip,
        growth=lip,
        offset=offset,
        base=lambda u: lip * u,
    )


def annulus_kernel(grid, spec):
    """Kernel whose grid spectrum lives entirely inside the masked annulus."""
    t = symbol_grid(grid, spec.shift)
    coeffs = np.where(np.isfinite(t) & (np.abs(t) < spec.eta), 1.0, 0.0).astype(complex)
    samples = inverse_ft(SpectralField(coeffs, grid))
    return kernel_from_field(samples, family="annulus")


class TestCertify:
    def test_reference_certificate(self, diff_kernel, sine_nonlinearity, spec1):
        cert = certify(diff_kernel, sine_nonlinearity, spec1, eps_user=0.1)
        assert cert.passed
        assert cert.q == cert.gain * SQRT_2PI * 0.1
        assert cert.q_grid <= cert.q
        assert cert.lip_sampled <= cert.lip + 1e-12
        assert cert.masked_modes == 8  # default eta of two mode spacings

    def test_formula_example(self):
        # gain 0.1 and lip 0.5 in one dimension give q = sqrt(2 pi) / 20.
        q = SQRT_2PI * 0.1 * 0.5
        assert q == pytest.approx(0.12533141373155, abs=1e-12)
        assert q <= 1.0 - 0.5

    def test_single_mode_kernel_exact_gain(self, grid1, spec1, bump_offset):
        # A kernel carrying one spectral pair has grid gain exactly
        # |G^(p0)| / |ln p0|.
        k0 = 40
        p0 = grid1.mode_axis()[k0]
        coeffs = np.zeros(grid1.shape, dtype=complex)
        coeffs[k0] = 0.25
        coeffs[-k0] = 0.25
        K = kernel_from_field(inverse_ft(SpectralField(coeffs, grid1)), "single")
        N = make_nonlinearity("saturating_sine", lip=0.1, offset=bump_offset)
        cert = certify(K, N, spec1, eps_user=0.1)
        assert cert.grid_gain == pytest.approx(0.25 / abs(math.log(p0)), rel=1e-12)

    def test_raw_gaussian_fails_on_residual(self, gauss_kernel, sine_nonlinearity, spec1):
        cert = certify(gauss_kernel, sine_nonlinearity, spec1, eps_user=0.1)
        assert not cert.passed
        assert cert.orth_residual == pytest.approx(math.exp(-0.5), abs=1e-6)
        assert cert.divergence_indicator > 1.0

    def test_zero_kernel_passes(self, grid1, sine_nonlinearity, spec1):
        K = make_kernel("gaussian", {"width": 1.0, "amplitude": 0.0}, grid1)
        cert = certify(K, sine_nonlinearity, spec1, eps_user=0.5)
        assert cert.passed
        assert cert.q == 0.0

    def test_eps_validation(self, diff_kernel, sine_nonlinearity, spec1):
        with pytest.raises(ValueError):
            certify(diff_kernel, sine_nonlinearity, spec1, eps_user=0.0)
        with pytest.raises(ValueError):
            certify(diff_kernel, sine_nonlinearity, spec1, eps_user=1.0)


class TestApplyMap:
    def test_zero_fixed_point(self, diff_kernel, zero_offset_nonlinearity, spec1, grid1):
        u = apply_picard_map(RealField.zeros(grid1), diff_kernel, zero_offset_nonlinearity, spec1)
        assert np.all(u.values == 0.0)

    def test_single_mode_linearization(self, diff_kernel, zero_offset_nonlinearity, spec1, grid1):
        # For v = delta cos(p0 x), the first-order response is
        # (2 pi)^(1/2) G^(p0) lip delta cos(p0 x) / (ln p0), error O(delta^3).
        # p0 sits inside the kernel's spectral band and outside the annulus.
        k0 = 4
        p0 = grid1.mode_axis()[k0]
        x = grid1.axis_coords()
        ghat = forward_ft(diff_kernel.samples).coeffs[k0].real
        gain = SQRT_2PI * ghat / math.log(p0) * 0.1
        errs = []
        for delta in (1e-3, 5e-4):
            v = RealField(delta * np.cos(p0 * x), grid1)
            u = apply_picard_map(v, diff_kernel, zero_offset_nonlinearity, spec1)
            pred = RealField(gain * delta * np.cos(p0 * x), grid1)
            errs.append(l2_gap(u, pred) / norms(pred).l2)
        assert errs[0] <= 1e-5
        # cubic absolute error means quadratic relative error in delta
        assert errs[1] <= errs[0] / 3.0

    def test_masked_only_kernel_maps_to_zero(self, grid1, spec1, sine_nonlinearity):
        K = annulus_kernel(grid1, spec1)
        rng = np.random.default_rng(0)
        v = RealField(rng.normal(size=grid1.shape), grid1)
        u = apply_picard_map(v, K, sine_nonlinearity, spec1)
        assert norms(u).l2 <= 1e-14

    def test_multiplier_zero_on_masked_and_dc(self, diff_kernel, spec1, grid1):
        M = picard_multiplier(diff_kernel, spec1)
        _, masked = reciprocal_grid(grid1, spec1)
        assert np.all(M[masked] == 0.0)
        assert M[grid1.dc_index] == 0.0


class TestPicardSolve:
    @pytest.fixture(scope="class")
    @staticmethod
    def reference_report(diff_kernel, sine_nonlinearity, spec1):
        return picard_solve(diff_kernel, sine_nonlinearity, spec1, tol=1e-10)

    def test_converges(self, reference_report):
        assert reference_report.converged
        assert reference_report.residual <= 10.0 * 1e-10

    def test_ratios_below_q(self, reference_report):
        q = reference_report.certificate.q
        assert all(r <= q + 1e-8 for r in reference_report.contraction_ratios)

    def test_updates_positive_until_convergence(self, reference_report):
        assert all(u > 0.0 for u in reference_report.update_norms)

    def test_apriori_bound_dominates(self, reference_report):
        for dist, bound in zip(
            reference_report.distances_to_final, reference_report.apriori_bounds
        ):
            assert dist <= bound + 1e-9

    def test_iterations_match_geometric_prediction(self, reference_report):
        assert reference_report.predicted_iterations is not None
        assert abs(reference_report.iterations - reference_report.predicted_iterations) <= 2

    def test_unique_fixed_point_from_two_starts(
        self, diff_kernel, sine_nonlinearity, spec1, grid1, reference_report
    ):
        rng = np.random.default_rng(42)
        v0 = RealField(rng.normal(0.0, 0.5, grid1.shape), grid1)
        other = picard_solve(diff_kernel, sine_nonlinearity, spec1, v0=v0, tol=1e-10)
        assert l2_gap(other.final, reference_report.final) <= 10.0 * 1e-10

    def test_restart_at_fixed_point_takes_one_iteration(
        self, diff_kernel, sine_nonlinearity, spec1, reference_report
    ):
        again = picard_solve(
            diff_kernel, sine_nonlinearity, spec1, v0=reference_report.final, tol=1e-10
        )
        assert again.iterations == 1
        assert again.update_norms[0] <= 1e-10 * max(1.0, norms(again.final).l2)

    def test_trivial_problem_one_iteration(self, diff_kernel, zero_offset_nonlinearity, spec1):
        report = picard_solve(diff_kernel, zero_offset_nonlinearity, spec1, tol=1e-10)
        assert report.iterations == 1
        assert norms(report.final).l2 == 0.0

    def test_certificate_failure_refused(self, gauss_kernel, sine_nonlinearity, spec1):
        with pytest.raises(CertificateError, match="refused"):
            picard_solve(gauss_kernel, sine_nonlinearity, spec1)

    def test_max_iter_flags_nonconverged(self, diff_kernel, sine_nonlinearity, spec1):
        report = picard_solve(diff_kernel, sine_nonlinearity, spec1, tol=1e-10, max_iter=1)
        assert not report.converged
        assert report.iterations == 1

    def test_validation(self, diff_kernel, sine_nonlinearity, spec1):
        with pytest.raises(ValueError):
            picard_solve(diff_kernel, sine_nonlinearity, spec1, tol=0.0)
        with pytest.raises(ValueError):
            picard_solve(diff_kernel, sine_nonlinearity, spec1, max_iter=0)


class TestContractionSampling:
    def test_hundred_random_pairs(self, diff_kernel, sine_nonlinearity, spec1, grid1):
        cert = certify(diff_kernel, sine_nonlinearity, spec1, eps_user=0.1)
        pref = SQRT_2PI
        rng = np.random.default_rng(7)
        worst_ratio = 0.0
        for _ in range(100):
            v = RealField(rng.normal(0.0, 10.0, grid1.shape), grid1)
            w = RealField(rng.normal(0.0, 10.0, grid1.shape), grid1)
            tv = apply_picard_map(v, diff_kernel, sine_nonlinearity, spec1)
            tw = apply_picard_map(w, diff_kernel, sine_nonlinearity, spec1)
            ratio = l2_gap(tv, tw) / l2_gap(v, w)
            worst_ratio = max(worst_ratio, ratio)
            bound = pref * cert.grid_gain * norms(eval_F(sine_nonlinearity, v)).l2
            assert norms(tv).l2 <= bound + 1e-10
        assert worst_ratio <= cert.q_grid + 1e-10


class TestResidual:
    def test_converged_residual_small(self, diff_kernel, sine_nonlinearity, spec1):
        report = picard_solve(diff_kernel, sine_nonlinearity, spec1, tol=1e-10)
        res = equation_residual(report.final, diff_kernel, sine_nonlinearity, spec1)
        assert res.value <= 10.0 * 1e-10

    def test_zero_field_zero_offset(self, diff_kernel, zero_offset_nonlinearity, spec1, grid1):
        res = equation_residual(
            RealField.zeros(grid1), diff_kernel, zero_offset_nonlinearity, spec1
        )
        assert res.value == 0.0
        assert res.masked_rhs_energy == 0.0

    def test_zero_field_with_offset_formula(self, diff_kernel, sine_nonlinearity, spec1, grid1):
        # At u = 0 the residual is the unmasked L2 mass of
        # (2 pi)^(d/2) G^ h^.
        res = equation_residual(RealField.zeros(grid1), diff_kernel, sine_nonlinearity, spec1)
        ghat = forward_ft(diff_kernel.samples).coeffs
        hhat = forward_ft(sine_nonlinearity.offset).coeffs
        t = symbol_grid(grid1, spec1.shift)
        active = np.isfinite(t) & (np.abs(t) >= spec1.eta)
        expected = math.sqrt(
            grid1.mode_spacing * float(np.sum(np.abs(SQRT_2PI * ghat * hhat)[active] ** 2))
        )
        assert res.value == pytest.approx(expected, rel=1e-12)

    def test_spectral_equals_physical_norm(self, diff_kernel, sine_nonlinearity, spec1, grid1):
        # The reported spectral-side norm equals the physical L2 norm of the
        # transformed-back residual field, by unitarity.
        rng = np.random.default_rng(3)
        u = RealField(rng.normal(0.0, 0.3, grid1.shape), grid1)
        res = equation_residual(u, diff_kernel, sine_nonlinearity, spec1)
        t = symbol_grid(grid1, spec1.shift)
        active = np.isfinite(t) & (np.abs(t) >= spec1.eta)
        uhat = forward_ft(u).coeffs
        what = forward_ft(eval_F(sine_nonlinearity, u)).coeffs
        ghat = forward_ft(diff_kernel.samples).coeffs
        diff = np.zeros(grid1.shape, dtype=complex)
        diff[active] = t[active] * uhat[active] - SQRT_2PI * (ghat * what)[active]
        back = inverse_ft(SpectralField(diff, grid1))
        assert res.value == pytest.approx(norms(back).l2, rel=1e-10)


class TestTriviality:
    def test_zero_offset_trivial(self, diff_kernel, zero_offset_nonlinearity, spec1):
        frac = triviality_indicator(diff_kernel, zero_offset_nonlinearity, spec1, tau=1e-8)
        assert frac == 0.0
        report = picard_solve(diff_kernel, zero_offset_nonlinearity, spec1, tol=1e-10)
        assert norms(report.final).l2 <= 1e-12

    def test_overlapping_supports_nontrivial(self, diff_kernel, sine_nonlinearity, spec1):
        frac = triviality_indicator(diff_kernel, sine_nonlinearity, spec1, tau=1e-8)
        assert frac > 0.0
        report = picard_solve(diff_kernel, sine_nonlinearity, spec1, tol=1e-10)
        assert norms(report.final).l2 > 1e-12

    def test_masked_supports_trivial(self, grid1, spec1, sine_nonlinearity):
        K = annulus_kernel(grid1, spec1)
        frac = triviality_indicator(K, sine_nonlinearity, spec1, tau=1e-8)
        assert frac == 0.0
        # every Picard step maps to zero, so the fixed point is zero
        u = apply_picard_map(
            RealField(np.random.default_rng(1).normal(size=grid1.shape), grid1),
            K,
            sine_nonlinearity,
            spec1,
        )
        assert norms(u).l2 <= 1e-12

    def test_tau_validation(self, diff_kernel, sine_nonlinearity, spec1):
        with pytest.raises(ValueError):
            triviality_indicator(diff_kernel, sine_nonlinearity, spec1, tau=0.0)


class TestLinearOracle:
    def test_picard_matches_direct_spectral_solution(
        self, diff_kernel, spec1, grid1, bump_offset
    ):
        # With F(u, x) = lip u + h(x) the fixed point solves a linear system
        # mode by mode: u^ = M h^ / (1 - lip M).
        lip = 0.1
        N = linear_nonlinearity(grid1, lip, bump_offset)
        report = picard_solve(diff_kernel, N, spec1, tol=1e-13, max_iter=400)
        M = picard_multiplier(diff_kernel, spec1)
        hhat = forward_ft(bump_offset).coeffs
        direct = inverse_ft(SpectralField(M * hhat / (1.0 - lip * M), grid1))
        assert l2_gap(report.final, direct) <= 1e-10
