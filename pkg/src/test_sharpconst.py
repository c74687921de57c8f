import math

import mpmath
import pytest

from field import GridSpec, gaussian
from groundstate import petviashvili_solve
from params import InvalidParameterError, critical_mass_threshold, derive_exponents
from functionals import weinstein_J
from sharpconst import (BATTERY_SIZE, bound_gn_constant, build_test_battery, constant_report,
                        gn_constant_from_groundstate, strauss_constant, strauss_window, verify_gn_inequality,
                        verify_strauss_bound)

# the continuum Pohozaev identity behind C_formula misses the periodization error of the box
DILATION_TOL = 1e-2


def strauss_oracle(N, alpha):
    mpmath.mp.dps = 30
    a = mpmath.mpf(alpha)
    n = mpmath.mpf(N)
    numerator = mpmath.gamma(2 * a - 1) * mpmath.gamma(n / 2 - a) * mpmath.gamma(n / 2)
    denominator = 2 ** (2 * a) * mpmath.pi ** (n / 2) * mpmath.gamma(a) ** 2 * mpmath.gamma(n / 2 - 1 + a)
    return float(mpmath.sqrt(numerator / denominator))


@pytest.mark.parametrize("N, alpha", [(2, 0.8), (2, 0.55), (3, 0.7), (3, 0.95)])
def test_strauss_constant_against_high_precision(N, alpha):
    assert strauss_constant(N, alpha) == pytest.approx(strauss_oracle(N, alpha), rel=1e-12)


def test_strauss_constant_for_gradient_in_three_dimensions():
    # |x|^(1/2) |u(x)| <= ||grad u|| / (2 sqrt(pi)) for radial u in R^3
    assert strauss_constant(3, 1.0) == pytest.approx(0.5 / math.sqrt(math.pi), rel=1e-14)


@pytest.mark.parametrize("N, alpha", [(2, 0.4), (2, 1.0), (1, 0.75)])
def test_strauss_window(N, alpha):
    assert not strauss_window(N, alpha)
    with pytest.raises(InvalidParameterError):
        strauss_constant(N, alpha)


def test_battery_layout(small_grid):
    battery = build_test_battery(small_grid, seed=5)
    labels = [label for label, _ in battery]
    assert len(battery) == BATTERY_SIZE
    assert len(set(labels)) == BATTERY_SIZE
    assert sum(label.startswith("gaussian") for label in labels) == 8
    assert sum(label.startswith("ring") for label in labels) == 3


def test_battery_is_reproducible(small_grid):
    first = build_test_battery(small_grid, seed=5)
    second = build_test_battery(small_grid, seed=5)
    other = build_test_battery(small_grid, seed=6)
    assert all((u.values == v.values).all() for (_, u), (_, v) in zip(first, second))
    assert not (first[-1][1].values == other[-1][1].values).all()


def test_strauss_bound_holds_on_battery(solver_grid):
    battery = build_test_battery(solver_grid, seed=0)
    worst, offenders = verify_strauss_bound(battery, 0.8)
    assert not offenders
    assert worst > 0.0


def test_strauss_bound_in_three_dimensions():
    battery = build_test_battery(GridSpec(3, 64, 10.0), seed=3, count=6)
    worst, offenders = verify_strauss_bound(battery, 0.75)
    assert not offenders
    assert worst > 0.0


def test_bound_constant_dominates_every_route(phi_record, psi_record, subcritical, subcritical_exps):
    C = bound_gn_constant(phi_record, subcritical, subcritical_exps, psi_record)
    assert C >= gn_constant_from_groundstate(phi_record, subcritical_exps)
    assert C >= 1.0 / psi_record.beta_value
    assert C >= 1.0 / weinstein_J(phi_record.profile, subcritical, subcritical_exps)
    assert C == pytest.approx(1.0 / psi_record.beta_value, rel=DILATION_TOL)
    without_minimizer = bound_gn_constant(phi_record, subcritical, subcritical_exps)
    assert without_minimizer <= C


def test_bound_constant_covers_the_groundstate(phi_record, subcritical, subcritical_exps):
    report = verify_gn_inequality([("phi", phi_record.profile)], subcritical, 1e-12, subcritical_exps,
                                  C=bound_gn_constant(phi_record, subcritical, subcritical_exps))
    assert not report.constant_violations


def test_bound_constant_rejects_groundstate_as_minimizer(phi_record, subcritical, subcritical_exps):
    with pytest.raises(InvalidParameterError):
        bound_gn_constant(phi_record, subcritical, subcritical_exps, phi_record)


def test_gn_constant_formula_against_minimizer(phi_record, psi_record, subcritical_exps):
    C = gn_constant_from_groundstate(phi_record, subcritical_exps)
    assert C * psi_record.beta_value == pytest.approx(1.0, rel=DILATION_TOL)


def test_gn_constant_needs_groundstate(psi_record, subcritical_exps):
    with pytest.raises(InvalidParameterError):
        gn_constant_from_groundstate(psi_record, subcritical_exps)


def test_constant_report(phi_record, psi_record, subcritical, subcritical_exps):
    report = constant_report(phi_record, psi_record, subcritical, subcritical_exps)
    assert report.C_variational == pytest.approx(1.0 / psi_record.beta_value, rel=1e-14)
    assert report.product == pytest.approx(report.C_formula * report.beta, rel=1e-14)
    assert report.relative_gap < DILATION_TOL
    assert report.strauss_C == pytest.approx(strauss_constant(2, 0.8), rel=1e-14)
    assert set(report.to_dict()) >= {"C_formula", "C_variational", "relative_gap", "product"}


def test_gn_inequality_on_battery(psi_record, subcritical, subcritical_exps, solver_grid):
    battery = build_test_battery(solver_grid, seed=0)
    beta = psi_record.beta_value
    report = verify_gn_inequality(battery, subcritical, beta, subcritical_exps, C=1.0 / beta)
    assert report.passed
    assert report.min_J >= beta * (1.0 - 1e-3)
    assert report.gap_to_beta > -1e-3
    assert len(report.values) == BATTERY_SIZE


def test_gn_inequality_reports_violations(subcritical, subcritical_exps, small_grid):
    battery = build_test_battery(small_grid, seed=1)
    report = verify_gn_inequality(battery, subcritical, 1e6, subcritical_exps)
    assert not report.passed
    assert report.violations == report.labels
    assert report.to_dict()["count"] == BATTERY_SIZE


def test_gn_constant_check_flags_small_constants(psi_record, subcritical, subcritical_exps, small_grid):
    battery = build_test_battery(small_grid, seed=2)
    report = verify_gn_inequality(battery, subcritical, psi_record.beta_value, subcritical_exps, C=1e-6)
    assert not report.passed
    assert report.constant_violations == report.labels


def test_gn_inequality_skips_zero_fields(subcritical, subcritical_exps, small_grid):
    samples = [("zero", gaussian(small_grid, amplitude=0.0)), ("bump", gaussian(small_grid))]
    report = verify_gn_inequality(samples, subcritical, 1e-6, subcritical_exps)
    assert report.labels == ["bump"]


def test_critical_mass_threshold_is_groundstate_mass(critical):
    grid = GridSpec.default_for(2)
    phi = petviashvili_solve(critical, grid)
    exps = derive_exponents(critical)
    C = gn_constant_from_groundstate(phi, exps)
    assert critical_mass_threshold(critical, exps, C) == pytest.approx(phi.mass, rel=1e-9)
