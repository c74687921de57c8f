import dataclasses
import math

import numpy as np
import pytest

from field import Field, GridSpec, gaussian, hs_seminorm, l2_norm, radial_asymmetry
from functionals import H_closed_form, K_ab, action, nonlinear_integral, weinstein_J
from groundstate import (DEFAULT_MINIMIZER_RESIDUAL_TOL, STATIONARITY_PLATEAU, DegenerateSeedError,
                         GroundStateKind, compute_m, default_seed, euler_residual, groundstate_residual,
                         minimize_J, normalize_unit_pair, petviashvili_solve, rescale_minimizer_to_groundstate,
                         unit_pair_scaling)
from params import InvalidParameterError, ModelParams

# continuum Pohozaev identities miss the periodization error of the box
DILATION_TOL = 1e-2
# ground states from the two routes agree to the periodization error, about 1e-4 at L = 12
ROUTE_TOL = 1e-3


class TestPetviashvili:
    def test_converges(self, phi_record):
        assert phi_record.kind is GroundStateKind.EULER_LAGRANGE_UNIT
        assert phi_record.converged
        assert phi_record.residual < 1e-10
        assert phi_record.iterations <= 1000

    def test_stabilizer_reaches_one(self, phi_record):
        assert abs(phi_record.stabilizer - 1.0) < 1e-8

    def test_residual_monotone_after_transient(self, phi_record):
        assert phi_record.residual_monotone_after(10)
        assert len(phi_record.log_rows) == phi_record.iterations

    def test_residual_recomputed(self, phi_record, subcritical):
        assert groundstate_residual(phi_record.profile, subcritical) < 1e-9

    def test_phase_and_symmetry(self, phi_record):
        values = phi_record.profile.values
        centre = values[phi_record.profile.grid.origin_index]
        assert centre.real > 0.0
        assert np.max(np.abs(values.imag)) < 1e-10 * np.max(np.abs(values))
        assert radial_asymmetry(phi_record.profile) < 1e-10

    def test_amplitude_identity_is_exact(self, phi_record, subcritical):
        K = K_ab(phi_record.profile, subcritical, 1.0, 0.0).K
        assert abs(K) / phi_record.sobolev_norm_squared < 1e-8

    def test_seed_independence(self, phi_record, subcritical, solver_grid):
        other = petviashvili_solve(subcritical, solver_grid, seed=gaussian(solver_grid, width=1.0, amplitude=2.0))
        assert other.converged
        assert other.action_value == pytest.approx(phi_record.action_value, rel=1e-8)

    def test_consistency_beta_matches_J(self, phi_record, subcritical, subcritical_exps):
        J = weinstein_J(phi_record.profile, subcritical, subcritical_exps)
        assert phi_record.consistency_beta == pytest.approx(J, rel=DILATION_TOL)

    def test_off_centre_seed_stays_radial(self, phi_record, subcritical, solver_grid):
        shifted = Field(solver_grid, np.roll(gaussian(solver_grid, width=0.4).values, (5, -3), axis=(0, 1)))
        record = petviashvili_solve(subcritical, solver_grid, seed=shifted)
        assert record.converged
        assert radial_asymmetry(record.profile) < 1e-10
        assert record.action_value == pytest.approx(phi_record.action_value, rel=1e-8)

    def test_supercritical(self, supercritical, solver_grid):
        record = petviashvili_solve(supercritical, solver_grid)
        assert record.converged
        assert record.residual < 1e-8
        assert radial_asymmetry(record.profile) < 1e-10

    def test_zero_seed(self, subcritical, solver_grid):
        with pytest.raises(DegenerateSeedError):
            petviashvili_solve(subcritical, solver_grid, seed=gaussian(solver_grid, amplitude=0.0))

    def test_grid_dimension_mismatch(self, subcritical):
        with pytest.raises(InvalidParameterError):
            petviashvili_solve(subcritical, GridSpec(3, 16, 8.0))

    def test_outside_gn_window(self, solver_grid):
        with pytest.raises(InvalidParameterError):
            petviashvili_solve(ModelParams(N=2, alpha=0.8, gamma=0.1, p=12.0), solver_grid)


class TestComputeM:
    def test_m_is_the_action(self, phi_record, subcritical):
        report = compute_m(phi_record, subcritical)
        assert report.m == pytest.approx(phi_record.action_value, rel=1e-14)
        assert report.m > 0.0
        assert len(report.pairs) == 3

    def test_K_vanishes_for_every_pair(self, phi_record, subcritical):
        report = compute_m(phi_record, subcritical)
        assert report.max_relative_K < DILATION_TOL

    def test_H_equals_action_where_K_vanishes(self, phi_record, subcritical):
        S = action(phi_record.profile, subcritical)
        assert H_closed_form(phi_record.profile, subcritical, 1.0, 0.0) == pytest.approx(S, rel=1e-8)

    def test_rejects_minimizer(self, psi_record, subcritical):
        with pytest.raises(InvalidParameterError):
            compute_m(psi_record, subcritical)


class TestUnitPair:
    def test_normalizes_gaussian(self, subcritical, solver_grid, subcritical_exps):
        u = gaussian(solver_grid, width=0.3, amplitude=2.0)
        v = normalize_unit_pair(u, subcritical)
        assert l2_norm(v) == pytest.approx(1.0, abs=1e-13)
        assert hs_seminorm(v, subcritical.alpha) == pytest.approx(1.0, abs=1e-13)
        J_before = weinstein_J(u, subcritical, subcritical_exps)
        assert weinstein_J(v, subcritical, subcritical_exps) == pytest.approx(J_before, rel=1e-12)
        centre = solver_grid.origin_index
        assert np.allclose(v.values / v.values[centre], u.values / u.values[centre], rtol=1e-13, atol=0.0)

    def test_normalized_field_is_a_fixed_point(self, subcritical, solver_grid):
        v = normalize_unit_pair(gaussian(solver_grid), subcritical)
        lam, mu = unit_pair_scaling(v, subcritical)
        assert lam == pytest.approx(1.0, abs=1e-10)
        assert mu == pytest.approx(1.0, abs=1e-10)

    def test_zero_field(self, subcritical, solver_grid):
        with pytest.raises(ValueError):
            unit_pair_scaling(gaussian(solver_grid, amplitude=0.0), subcritical)


class TestMinimizer:
    def test_converges_on_the_unit_pair(self, psi_record):
        assert psi_record.kind is GroundStateKind.J_MINIMIZER
        assert psi_record.converged
        assert psi_record.mass == pytest.approx(1.0, abs=1e-12)
        assert psi_record.seminorm == pytest.approx(1.0, abs=1e-12)
        assert psi_record.unit_pair_drift < 1e-12
        assert psi_record.stationarity < STATIONARITY_PLATEAU
        assert radial_asymmetry(psi_record.profile) < 1e-12

    def test_runs_on_the_dilated_seed_grid(self, psi_record, subcritical, solver_grid):
        _, mu = unit_pair_scaling(default_seed(solver_grid), subcritical)
        assert psi_record.profile.grid.n == solver_grid.n
        assert psi_record.profile.grid.L == pytest.approx(solver_grid.L / mu, rel=1e-12)

    def test_beta_is_inverse_nonlinear_integral(self, psi_record, subcritical):
        assert psi_record.beta_value * nonlinear_integral(psi_record.profile, subcritical) == pytest.approx(
            1.0, abs=1e-12)
        assert psi_record.weinstein_value == pytest.approx(psi_record.beta_value, rel=1e-7)

    def test_euler_residual_reported(self, psi_record, subcritical):
        assert psi_record.residual < DEFAULT_MINIMIZER_RESIDUAL_TOL
        assert euler_residual(psi_record.profile, subcritical, psi_record.beta_value) == pytest.approx(
            psi_record.residual, rel=1e-12)
        assert euler_residual(psi_record.profile, subcritical, 2.0 * psi_record.beta_value) > 0.1

    @pytest.mark.parametrize("width", [0.1, 0.5, 2.0])
    def test_dominates_gaussians(self, psi_record, subcritical, subcritical_exps, solver_grid, width):
        J = weinstein_J(gaussian(solver_grid, width=width), subcritical, subcritical_exps)
        assert psi_record.beta_value <= J

    def test_below_groundstate_quotient(self, psi_record, phi_record, subcritical, subcritical_exps):
        J_phi = weinstein_J(phi_record.profile, subcritical, subcritical_exps)
        assert J_phi >= psi_record.beta_value * (1.0 - ROUTE_TOL)
        assert psi_record.beta_value >= J_phi * (1.0 - DILATION_TOL)

    def test_log_rows(self, psi_record):
        assert len(psi_record.log_rows) == len(psi_record.residual_history)
        assert all(len(row) == 5 for row in psi_record.log_rows)
        J_values = [row[1] for row in psi_record.log_rows]
        assert J_values[-1] <= J_values[0]
        assert [row[2] for row in psi_record.log_rows] == psi_record.residual_history
        assert psi_record.log_rows[-1][2] == psi_record.stationarity

    def test_J_never_rises(self, psi_record):
        J_values = [row[1] for row in psi_record.log_rows]
        assert all(later <= earlier * (1.0 + 1e-11) for earlier, later in zip(J_values, J_values[1:]))

    def test_euler_residual_falls_with_the_box(self, psi_record, subcritical):
        # same spacing, half the box
        small = minimize_J(subcritical, GridSpec(2, 128, 6.0))
        assert small.converged
        assert psi_record.residual < small.residual / 3.0

    def test_off_centre_seed(self, psi_record, subcritical, solver_grid):
        shifted = Field(solver_grid, np.roll(default_seed(solver_grid).values, 4, axis=1))
        record = minimize_J(subcritical, solver_grid, seed=shifted)
        assert record.converged
        assert radial_asymmetry(record.profile) < 1e-12
        assert record.beta_value == pytest.approx(psi_record.beta_value, rel=ROUTE_TOL)

    def test_summary_carries_the_constraint_drift(self, psi_record):
        summary = psi_record.summary()
        assert summary["unit_pair_drift"] == psi_record.unit_pair_drift
        assert summary["stationarity"] == psi_record.stationarity


class TestRescale:
    def test_scaling_parameters(self, rescaled_record, subcritical_exps, subcritical):
        a, b = rescaled_record.scaling
        ratio = subcritical_exps.A / subcritical_exps.B
        assert b == pytest.approx(ratio ** (1.0 / (2.0 * subcritical.alpha)), rel=1e-14)
        assert a > 0.0
        assert rescaled_record.kind is GroundStateKind.EULER_LAGRANGE_UNIT

    def test_solves_groundstate_equation(self, rescaled_record, psi_record):
        assert rescaled_record.residual < ROUTE_TOL
        assert rescaled_record.profile.grid == psi_record.profile.grid.dilated(1.0 / rescaled_record.scaling[1])

    def test_norm_relation(self, rescaled_record, psi_record, subcritical):
        a, b = rescaled_record.scaling
        expected = a * b ** (-subcritical.N / 2.0) * l2_norm(rescaled_record.profile)
        assert l2_norm(psi_record.profile) == pytest.approx(expected, rel=1e-10)

    def test_routes_agree(self, rescaled_record, phi_record):
        assert rescaled_record.action_value == pytest.approx(phi_record.action_value, rel=ROUTE_TOL)
        assert rescaled_record.m_value == rescaled_record.action_value

    def test_consistency_beta(self, rescaled_record, psi_record, phi_record):
        assert rescaled_record.consistency_beta == pytest.approx(psi_record.beta_value, rel=1e-10)
        assert phi_record.consistency_beta == pytest.approx(psi_record.beta_value, rel=DILATION_TOL)

    def test_rejects_groundstate_record(self, phi_record, subcritical):
        with pytest.raises(InvalidParameterError):
            rescale_minimizer_to_groundstate(phi_record, subcritical)

    def test_rejects_unconverged_minimizer(self, psi_record, subcritical):
        with pytest.raises(InvalidParameterError):
            rescale_minimizer_to_groundstate(dataclasses.replace(psi_record, converged=False), subcritical)


def test_default_seed_has_unit_mass(solver_grid):
    assert l2_norm(default_seed(solver_grid)) == pytest.approx(1.0, rel=1e-12)


def test_summary_is_scalar(phi_record):
    summary = phi_record.summary()
    assert summary["kind"] == "euler_lagrange_unit"
    assert not any(isinstance(v, Field) for v in summary.values())
    assert math.isfinite(summary["m"])
