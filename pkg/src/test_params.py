import math

import numpy as np
import pytest

from params import (Criticality, InvalidParameterError, ModelParams, check_gn_window, classify_criticality,
                    classify_regime, critical_mass_threshold, derive_exponents, effective_exponent,
                    mass_critical_p, require_groundstate_regime, wellposed_alpha)


@pytest.mark.parametrize("gamma, p, B", [(0.1, 2.0, 1.125), (0.1, 2.7, 2.0), (0.4, 4.0, 3.25)])
def test_presets_exponents(gamma, p, B):
    params = ModelParams(N=2, alpha=0.8, gamma=gamma, p=p)
    exps = derive_exponents(params)
    assert exps.B == pytest.approx(B, abs=1e-12)
    assert exps.A == pytest.approx(p + 1.0 - B, abs=1e-12)


def test_criticality_of_presets(subcritical, critical, supercritical):
    assert classify_criticality(derive_exponents(subcritical).B) is Criticality.SUBCRITICAL
    assert classify_criticality(derive_exponents(critical).B) is Criticality.CRITICAL
    assert classify_criticality(derive_exponents(supercritical).B) is Criticality.SUPERCRITICAL


def test_exponent_identity_random_tuples():
    rng = np.random.default_rng(7)
    for _ in range(100):
        params = ModelParams(int(rng.integers(2, 4)), float(rng.uniform(0.55, 0.95)),
                             float(rng.uniform(0.0, 1.0)), float(rng.uniform(1.2, 6.0)))
        exps = derive_exponents(params)
        assert abs(exps.A + exps.B - (params.p + 1.0)) < 1e-12
        assert exps.p == pytest.approx(params.p, abs=1e-12)


def test_mass_critical_p_gives_B_two():
    for N, alpha, gamma in [(2, 0.8, 0.1), (3, 0.7, 0.5), (2, 0.6, 0.0)]:
        params = ModelParams(N, alpha, gamma, mass_critical_p(N, alpha, gamma))
        assert classify_criticality(derive_exponents(params).B) is Criticality.CRITICAL


def test_mu_matches_definition(subcritical):
    exps = derive_exponents(subcritical)
    s = effective_exponent(subcritical)
    assert exps.sigma_exp == pytest.approx(2.5)
    assert exps.mu == pytest.approx(2.0 / 0.8 * (0.5 - 1.0 / s))


def test_gn_window(subcritical):
    window = check_gn_window(subcritical)
    assert window.s == pytest.approx(2.5)
    assert window.upper == pytest.approx(10.0)
    assert window.admissible and window.strict
    # the p-form of the window is stricter than the (p+1)-form
    assert not window.strict_printed


def test_gn_window_endpoint_is_admissible_but_not_strict():
    window = check_gn_window(ModelParams(N=2, alpha=0.8, gamma=0.0, p=1.0))
    assert window.s == 2.0
    assert window.admissible
    assert not window.strict


def test_wellposed_alpha():
    assert wellposed_alpha(ModelParams(2, 0.8, 0.1, 2.0))
    assert not wellposed_alpha(ModelParams(2, 0.6, 0.1, 2.0))
    assert wellposed_alpha(ModelParams(3, 0.7, 0.1, 2.0))
    assert not wellposed_alpha(ModelParams(3, 0.55, 0.1, 2.0))


@pytest.mark.parametrize("kwargs", [
    {"N": 2, "alpha": 1.0, "gamma": 0.0, "p": 2.0},
    {"N": 2, "alpha": 0.0, "gamma": 0.0, "p": 2.0},
    {"N": 1, "alpha": 0.8, "gamma": 0.0, "p": 2.0},
    {"N": 4, "alpha": 0.8, "gamma": 0.0, "p": 2.0},
    {"N": 2, "alpha": 0.8, "gamma": 0.0, "p": 2.0, "epsilon": 0},
    {"N": 2, "alpha": 0.8, "gamma": -2.5, "p": 2.0},
    {"N": 2, "alpha": 0.8, "gamma": 0.0, "p": -1.0},
])
def test_invalid_parameters(kwargs):
    with pytest.raises(InvalidParameterError):
        ModelParams(**kwargs)


def test_debug_mode_admits_classical_cases():
    assert ModelParams(N=1, alpha=0.75, gamma=0.0, p=3.0, debug=True).N == 1
    assert ModelParams(N=2, alpha=1.0, gamma=0.0, p=3.0, debug=True).alpha == 1.0


def test_classify_criticality_tolerance():
    assert classify_criticality(2.0 + 1e-13) is Criticality.CRITICAL
    assert classify_criticality(2.0 - 1e-9) is Criticality.SUBCRITICAL
    assert classify_criticality(2.0 + 1e-9) is Criticality.SUPERCRITICAL


def test_critical_threshold_equals_groundstate_mass(critical):
    # with C from the ground-state formula the threshold is ||phi||^2 whenever B = 2
    exps = derive_exponents(critical)
    phi_norm = 1.7
    C = (1.0 + critical.p) / exps.A * (exps.A / exps.B) ** (exps.B / 2.0) * phi_norm ** (-(critical.p - 1.0))
    assert critical_mass_threshold(critical, exps, C) == pytest.approx(phi_norm ** 2, rel=1e-12)


def test_critical_threshold_rejects_nonpositive_constant(critical):
    with pytest.raises(InvalidParameterError):
        critical_mass_threshold(critical, derive_exponents(critical), 0.0)


def test_classify_regime_reports_threshold_only_when_critical(subcritical, critical):
    assert classify_regime(subcritical, derive_exponents(subcritical), C=1.0).mass_threshold is None
    report = classify_regime(critical, derive_exponents(critical), C=1.0)
    assert report.criticality is Criticality.CRITICAL
    assert math.isfinite(report.mass_threshold)
    assert report.to_dict()["criticality"] == "critical"


@pytest.mark.parametrize("kwargs", [
    {"N": 2, "alpha": 0.8, "gamma": -0.5, "p": 2.0},
    {"N": 2, "alpha": 0.8, "gamma": 0.0, "p": 0.9},
    {"N": 2, "alpha": 0.8, "gamma": 0.1, "p": 12.0},
])
def test_require_groundstate_regime_rejects(kwargs):
    with pytest.raises(InvalidParameterError):
        require_groundstate_regime(ModelParams(**kwargs))
