#!/usr/bin/env python3
"""
Command line of the lab.

    python labcli.py derive|groundstate|constant|evolve|stability|wellcheck|sweep|selftest
                     [--config PATH | --scenario NAME] [--out DIR] [--seed INT] [--threads INT]

Exit code 0 when every gate passed, 2 when a gate failed (findings are
persisted in the RunRecord), 1 on error.
"""

import argparse
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

import evolution
import sharpconst
from field import (Field, GridSpec, apply_fractional_laplacian, boundary_mass_fraction, dilate_on_grid,
                   fourier_l2_norm, gaussian, l2_norm, radial_asymmetry, scale_field_exponent)
from field_container import radial_profile_rows, save_field, write_radial_profile_csv
from functionals import K_ab, action, functional_report, weinstein_J
from groundstate import (GroundStateRecord, compute_m, minimize_J, petviashvili_solve,
                         rescale_minimizer_to_groundstate)
from lab_config import ConfigError, ExperimentConfig, load_config
from params import (Criticality, InvalidParameterError, ModelParams, check_gn_window, classify_criticality,
                    classify_regime, derive_exponents, mass_critical_p, require_groundstate_regime)
from records import RunRecord, write_csv_atomic, write_run_record
from scenarios.critical import get_config as get_critical_config
from scenarios.debug_1d import get_config as get_debug_1d_config
from scenarios.defocusing import get_config as get_defocusing_config
from scenarios.subcritical import get_config as get_subcritical_config
from scenarios.supercritical import get_config as get_supercritical_config

# Configure debug mode from environment
DEBUG_MODE = os.environ.get('DEBUG', 'false').lower() in ('true', '1', 'yes', 'on')

logger = logging.getLogger(__name__)

available_scenarios: Dict[str, Callable[[], ExperimentConfig]] = {
    "subcritical": get_subcritical_config,
    "critical": get_critical_config,
    "supercritical": get_supercritical_config,
    "defocusing": get_defocusing_config,
    "debug_1d": get_debug_1d_config,
}
DEFAULT_SCENARIO = "subcritical"

# acceptance gates
RESIDUAL_GATE = 1e-6
STABILIZER_GATE = 1e-8
UNIT_PAIR_GATE = 1e-8
# identities that compare a field with its dilations hold up to the periodization
# error of the box, which falls like L^-(N + 2 alpha)
K_GATE = 1e-3
ROUTE_AGREEMENT_GATE = 1e-3
PRODUCT_GATE = 1e-2
SCALING_INVARIANCE_GATE = 1e-6
ENERGY_DRIFT_GATE = 1e-6
IDENTITY_GATE = 1e-12
PARSEVAL_GATE = 1e-12
GROUP_LAW_GATE = 1e-12
FD_STEP = 1e-4
FD_GATE_AMPLITUDE = 1e-6
FD_GATE_DILATION = 1e-5
SELFTEST_TUPLES = 100
# (n, L) per dimension
SELFTEST_GRIDS = {1: (1024, 16.0), 2: (256, 16.0), 3: (64, 12.0)}


def configure_logging():
    if DEBUG_MODE:
        logging.basicConfig(
            level=logging.DEBUG,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
    else:
        logging.basicConfig(
            level=logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s'
        )


def get_scenario(name: str) -> ExperimentConfig:
    if name not in available_scenarios:
        raise ConfigError(f"Unknown scenario: {name} (available: {', '.join(available_scenarios)})")
    return available_scenarios[name]()


def _new_record(command: str, config: ExperimentConfig) -> RunRecord:
    return RunRecord(command=command, config=config.echo())


def _save(record: RunRecord, config: ExperimentConfig, key: str, filename: str, u: Field, radial: bool = True):
    save_field(os.path.join(config.output_dir, filename), u)
    record.artifacts[key] = filename
    if radial:
        csv_name = filename.rsplit(".", 1)[0] + "_radial.csv"
        write_radial_profile_csv(os.path.join(config.output_dir, csv_name), u)
        record.artifacts[f"{key}_radial"] = csv_name


def _radially_decreasing(u: Field) -> bool:
    profile = np.array([re for _, re, _ in radial_profile_rows(u)])
    return bool(np.all(np.diff(profile) <= 1e-12 * np.max(np.abs(profile))))


def solve_petviashvili(config: ExperimentConfig) -> GroundStateRecord:
    return petviashvili_solve(config.params, config.grid, tol=config.solver.tol, max_iter=config.solver.max_iter)


def solve_minimizer(config: ExperimentConfig) -> GroundStateRecord:
    solver = config.solver
    return minimize_J(config.params, config.grid, tol=solver.minimizer_tol, max_iter=solver.minimizer_max_iter,
                      step=solver.minimizer_step, stationarity_tol=solver.minimizer_stationarity_tol)


def cmd_derive(config: ExperimentConfig) -> RunRecord:
    record = _new_record("derive", config)
    params = config.params
    exps = derive_exponents(params)
    regime = classify_regime(params, exps)
    window = check_gn_window(params)
    record.update_scalars(exps.to_dict(), prefix="exponents.")
    record.update_scalars(regime.to_dict(), prefix="regime.")
    record.scalars["window.s"] = window.s
    record.scalars["window.upper"] = window.upper
    record.scalars["mass_critical_p"] = mass_critical_p(params.N, params.alpha, params.gamma)
    logger.info(f"A={exps.A:.6g} B={exps.B:.6g} mu={exps.mu:.6g} s={exps.sigma_exp:.6g} "
                f"({regime.criticality.value}, strict GN window: {regime.gn_strict})")

    identity = abs(exps.A + exps.B - (params.p + 1.0))
    record.add_gate("A_plus_B", identity < IDENTITY_GATE, identity, IDENTITY_GATE)
    at_critical_p = abs(params.p - record.scalars["mass_critical_p"]) < IDENTITY_GATE
    record.add_gate("mass_critical_identity", at_critical_p == (regime.criticality is Criticality.CRITICAL))
    return record


def _groundstate_gates(record: RunRecord, config: ExperimentConfig, phi: GroundStateRecord,
                       psi: GroundStateRecord, rescaled: Optional[GroundStateRecord]):
    record.add_gate("petviashvili_converged", phi.converged, phi.residual, config.solver.tol)
    record.add_gate("petviashvili_residual", phi.residual < RESIDUAL_GATE, phi.residual, RESIDUAL_GATE)
    record.add_gate("petviashvili_stabilizer", abs(phi.stabilizer - 1.0) < STABILIZER_GATE,
                    phi.stabilizer, 1.0)
    record.add_gate("petviashvili_residual_monotone", phi.residual_monotone_after(10))
    record.add_gate("minimizer_converged", psi.converged, psi.iterations, config.solver.minimizer_max_iter)
    record.add_gate("minimizer_euler_residual", psi.residual < config.solver.minimizer_residual_tol,
                    psi.residual, config.solver.minimizer_residual_tol)
    violation = max(abs(psi.mass - 1.0), abs(psi.seminorm - 1.0), psi.unit_pair_drift or 0.0)
    record.add_gate("minimizer_unit_pair", violation < UNIT_PAIR_GATE, violation, UNIT_PAIR_GATE)
    if rescaled is not None:
        gap = abs(phi.action_value - rescaled.action_value) / abs(phi.action_value)
        record.scalars["route_action_gap"] = gap
        record.add_gate("route_agreement", gap < ROUTE_AGREEMENT_GATE, gap, ROUTE_AGREEMENT_GATE)


def cmd_groundstate(config: ExperimentConfig) -> RunRecord:
    record = _new_record("groundstate", config)
    params = config.params
    exps = require_groundstate_regime(params)
    record.update_scalars(exps.to_dict(), prefix="exponents.")

    phi = solve_petviashvili(config)
    psi = solve_minimizer(config)
    rescaled = rescale_minimizer_to_groundstate(psi, params) if psi.converged else None
    m_report = compute_m(phi, params, config.solver.pairs)

    record.update_scalars(phi.summary(), prefix="petviashvili.")
    record.update_scalars(psi.summary(), prefix="minimizer.")
    if rescaled is not None:
        record.update_scalars(rescaled.summary(), prefix="rescaled.")
    record.scalars["m"] = m_report.m
    record.scalars["max_relative_K"] = m_report.max_relative_K
    for kh in m_report.pairs:
        record.update_scalars(kh.to_dict(), prefix=f"K_{kh.a:g}_{kh.b:g}.")
    record.scalars["boundary_mass_fraction"] = boundary_mass_fraction(phi.profile)
    record.scalars["radial_asymmetry"] = radial_asymmetry(phi.profile)
    if record.scalars["boundary_mass_fraction"] > 1e-10:
        record.add_finding(f"ground state carries {record.scalars['boundary_mass_fraction']:.3e} "
                           "of its mass in the outer layer of the box")
    if params.gamma == 0.0 and not _radially_decreasing(phi.profile):
        record.add_finding("ground state profile is not radially decreasing")

    _groundstate_gates(record, config, phi, psi, rescaled)
    record.add_gate("m_positive", m_report.m > 0.0, m_report.m, 0.0)
    record.add_gate("K_pairs_vanish", m_report.max_relative_K < K_GATE, m_report.max_relative_K, K_GATE)

    _save(record, config, "phi_petviashvili", "phi_petviashvili.fld", phi.profile)
    _save(record, config, "psi_minimizer", "psi_minimizer.fld", psi.profile)
    if rescaled is not None:
        _save(record, config, "phi_rescaled", "phi_rescaled.fld", rescaled.profile)
    write_csv_atomic(os.path.join(config.output_dir, "petviashvili_log.csv"),
                     ("iteration", "residual", "stabilizer"), phi.log_rows)
    write_csv_atomic(os.path.join(config.output_dir, "minimizer_log.csv"),
                     ("iteration", "J", "stationarity", "euler_residual", "relative_change"), psi.log_rows)
    record.artifacts["petviashvili_log"] = "petviashvili_log.csv"
    record.artifacts["minimizer_log"] = "minimizer_log.csv"
    return record


def _scaling_invariance(battery, params, exps) -> float:
    worst = 0.0
    for _, u in battery:
        scaled = dilate_on_grid(u, 2.0, 3.0)
        J = weinstein_J(u, params, exps)
        worst = max(worst, abs(weinstein_J(scaled, params, exps) - J) / J)
    return worst


def cmd_constant(config: ExperimentConfig) -> RunRecord:
    record = _new_record("constant", config)
    params = config.params
    exps = require_groundstate_regime(params)
    phi = solve_petviashvili(config)
    psi = solve_minimizer(config)
    report = sharpconst.constant_report(phi, psi, params, exps)
    record.update_scalars(report.to_dict(), prefix="constant.")
    record.add_gate("petviashvili_converged", phi.converged, phi.residual, config.solver.tol)
    record.add_gate("minimizer_converged", psi.converged, psi.iterations, config.solver.minimizer_max_iter)
    product_gap = abs(report.product - 1.0)
    record.add_gate("C_times_beta", product_gap < PRODUCT_GATE, report.product, 1.0)

    battery = sharpconst.build_test_battery(config.grid, config.seed)
    inequality = sharpconst.verify_gn_inequality(battery, params, report.beta, exps, C=report.C_formula)
    record.update_scalars(inequality.to_dict(), prefix="inequality.")
    record.add_gate("gn_inequality", not inequality.violations, len(inequality.violations), 0)
    record.add_gate("gn_inequality_with_constant", not inequality.constant_violations,
                    len(inequality.constant_violations), 0)
    invariance = _scaling_invariance(battery, params, exps)
    record.scalars["J_scaling_invariance"] = invariance
    record.add_gate("J_scaling_invariance", invariance < SCALING_INVARIANCE_GATE, invariance,
                    SCALING_INVARIANCE_GATE)

    if report.strauss_C is not None:
        worst, offenders = sharpconst.verify_strauss_bound(battery, params.alpha)
        record.scalars["strauss.worst_ratio"] = worst
        record.add_gate("strauss_bound", not offenders, worst, 1.0 + sharpconst.STRAUSS_SLACK)

    write_csv_atomic(os.path.join(config.output_dir, "constants.csv"),
                     ("N", "alpha", "gamma", "p", "C_formula", "C_variational", "relative_gap", "strauss_C"),
                     [(params.N, params.alpha, params.gamma, params.p, report.C_formula, report.C_variational,
                       report.relative_gap, report.strauss_C if report.strauss_C is not None else "")])
    write_csv_atomic(os.path.join(config.output_dir, "battery.csv"), ("label", "J"),
                     zip(inequality.labels, inequality.values))
    record.artifacts["constants"] = "constants.csv"
    record.artifacts["battery"] = "battery.csv"
    return record


def _initial_data(config: ExperimentConfig, phi: Optional[GroundStateRecord], C: Optional[float]) -> Field:
    initial = config.initial
    if initial.kind == "groundstate":
        u0 = phi.profile.scaled(initial.amplitude)
    else:
        u0 = gaussian(config.grid, width=initial.width, amplitude=initial.amplitude)
    if initial.mass_fraction is not None:
        exps = derive_exponents(config.params)
        if C is None or classify_criticality(exps.B) is not Criticality.CRITICAL:
            raise ConfigError("[initial] mass_fraction needs the mass-critical case B = 2")
        threshold = ((config.params.p + 1.0) / (2.0 * C)) ** (2.0 / exps.A)
        u0 = evolution.scale_to_mass(u0, initial.mass_fraction * threshold)
    return u0


def _groundstate_if_available(config: ExperimentConfig) -> Tuple[Optional[GroundStateRecord], Optional[float]]:
    """Petviashvili ground state and its GN constant, or (None, None) outside the solver regime"""
    try:
        exps = require_groundstate_regime(config.params)
    except InvalidParameterError as e:
        logger.info(f"no ground state for these parameters: {e}")
        return None, None
    ground = ModelParams(config.params.N, config.params.alpha, config.params.gamma, config.params.p,
                         epsilon=1, debug=config.params.debug)
    phi = petviashvili_solve(ground, config.grid, tol=config.solver.tol, max_iter=config.solver.max_iter)
    return phi, sharpconst.bound_gn_constant(phi, ground, exps)


def cmd_evolve(config: ExperimentConfig) -> RunRecord:
    record = _new_record("evolve", config)
    params = config.params
    exps = derive_exponents(params)
    needs_groundstate = config.initial.kind == "groundstate" or params.focusing
    phi, C = _groundstate_if_available(config) if needs_groundstate else (None, None)
    if config.initial.kind == "groundstate" and phi is None:
        raise ConfigError("[initial] kind = \"groundstate\" needs parameters inside the ground-state regime")
    if C is not None:
        record.scalars["C_bound"] = C

    u0 = _initial_data(config, phi, C)
    record.update_scalars(functional_report(u0, params, exps).to_dict(), prefix="initial.")
    record, trace = evolution.run_global_existence_experiment(params, exps, u0, config.evolution, C=C,
                                                              record=record)
    record.add_gate("energy_drift", trace.energy_drift < ENERGY_DRIFT_GATE, trace.energy_drift, ENERGY_DRIFT_GATE)
    _write_trace(record, config, trace, "evolution")
    return record


def _write_trace(record: RunRecord, config: ExperimentConfig, trace: evolution.EvolutionTrace, stem: str):
    write_csv_atomic(os.path.join(config.output_dir, f"{stem}.csv"), trace.csv_header(), trace.csv_rows())
    record.artifacts[stem] = f"{stem}.csv"
    if trace.final is not None:
        _save(record, config, f"{stem}_final", f"{stem}_final.fld", trace.final, radial=False)
    for i, (_, snapshot) in enumerate(trace.snapshots):
        _save(record, config, f"{stem}_snapshot_{i:04d}", f"{stem}_snapshot_{i:04d}.fld", snapshot, radial=False)


def cmd_stability(config: ExperimentConfig) -> RunRecord:
    record = _new_record("stability", config)
    params = config.params
    exps = require_groundstate_regime(params)
    if not params.focusing:
        raise ConfigError("orbital stability is tracked for the focusing equation only")
    phi = solve_petviashvili(config)
    record.add_gate("petviashvili_converged", phi.converged, phi.residual, config.solver.tol)
    stable_regime = classify_criticality(exps.B) is Criticality.SUBCRITICAL
    for delta in config.initial.deltas:
        run = evolution.orbital_stability_run(phi.profile, params, config.evolution, delta)
        label = f"delta_{delta:g}"
        record.update_scalars(run.to_dict(), prefix=f"{label}.")
        if stable_regime:
            record.add_gate(f"{label}.orbital_stability", run.ratio <= evolution.STABILITY_FACTOR,
                            run.ratio, evolution.STABILITY_FACTOR)
        else:
            logger.info(f"B = {exps.B:g} >= 2: distance ratio {run.ratio:.3e} reported without a gate")
        _write_trace(record, config, run.trace, f"stability_{label}")
    return record


def cmd_wellcheck(config: ExperimentConfig) -> RunRecord:
    record = _new_record("wellcheck", config)
    params = config.params
    exps = require_groundstate_regime(params)
    if not params.focusing:
        raise ConfigError("the potential well is defined for the focusing equation only")
    phi = solve_petviashvili(config)
    psi = solve_minimizer(config)
    m_report = compute_m(phi, params, config.solver.pairs)
    C = sharpconst.bound_gn_constant(phi, params, exps, psi)
    record.scalars["m"] = m_report.m
    record.scalars["C_formula"] = sharpconst.gn_constant_from_groundstate(phi, exps)
    record.scalars["C_bound"] = C
    record.add_gate("minimizer_converged", psi.converged, psi.iterations, config.solver.minimizer_max_iter)
    record.add_gate("m_positive", m_report.m > 0.0, m_report.m, 0.0)
    for c, u0 in evolution.well_initial_data(phi.profile, config.initial.well_amplitudes):
        label = f"c_{c:g}"
        for a, b in config.solver.pairs:
            start = evolution.stable_set_membership(u0, params, a, b, m_report.m)
            record.update_scalars(start.to_dict(), prefix=f"{label}.start_{a:g}_{b:g}.")
        record, trace = evolution.run_global_existence_experiment(
            params, exps, u0, config.evolution, C=C, m=m_report.m, pairs=config.solver.pairs,
            record=record, label=label)
        _write_trace(record, config, trace, f"well_{label}")
    return record


def _selftest_grid(params: ModelParams) -> GridSpec:
    n, L = SELFTEST_GRIDS[params.N]
    return GridSpec(params.N, n, L)


def _random_params(rng: np.random.Generator) -> ModelParams:
    N = int(rng.integers(2, 4))
    alpha = float(rng.uniform(0.55, 0.95))
    gamma = float(rng.uniform(0.0, 1.0))
    p = float(rng.uniform(1.2, 6.0))
    return ModelParams(N, alpha, gamma, p)


def cmd_selftest(config: ExperimentConfig) -> RunRecord:
    """Fast property checks on a small grid"""
    record = _new_record("selftest", config)
    rng = np.random.default_rng(config.seed)

    worst_identity = 0.0
    critical_mismatches = 0
    for _ in range(SELFTEST_TUPLES):
        sample = _random_params(rng)
        exps = derive_exponents(sample)
        worst_identity = max(worst_identity, abs(exps.A + exps.B - (sample.p + 1.0)))
        at_critical = ModelParams(sample.N, sample.alpha, sample.gamma,
                                  mass_critical_p(sample.N, sample.alpha, sample.gamma))
        if classify_criticality(derive_exponents(at_critical).B) is not Criticality.CRITICAL:
            critical_mismatches += 1
        sample_critical = classify_criticality(exps.B) is Criticality.CRITICAL
        if sample_critical != (abs(sample.p - at_critical.p) <= IDENTITY_GATE):
            critical_mismatches += 1
    record.add_gate("exponent_identity", worst_identity < IDENTITY_GATE, worst_identity, IDENTITY_GATE)
    record.add_gate("mass_critical_identity", critical_mismatches == 0, critical_mismatches, 0)

    params = config.params
    grid = _selftest_grid(params)
    battery = sharpconst.build_test_battery(grid, config.seed)

    parseval = max(abs(l2_norm(u) - fourier_l2_norm(u)) / l2_norm(u) for _, u in battery)
    record.add_gate("parseval", parseval < PARSEVAL_GATE, parseval, PARSEVAL_GATE)

    u = battery[0][1]
    once = evolution.linear_propagator_step(u, 0.7, params.alpha)
    twice = evolution.linear_propagator_step(evolution.linear_propagator_step(u, 0.3, params.alpha),
                                             0.4, params.alpha)
    group = l2_norm(once - twice) / l2_norm(u)
    record.add_gate("propagator_group_law", group < GROUP_LAW_GATE, group, GROUP_LAW_GATE)

    semigroup = apply_fractional_laplacian(apply_fractional_laplacian(u, 0.3), 0.4)
    direct = apply_fractional_laplacian(u, 0.7)
    record.scalars["laplacian_semigroup"] = l2_norm(semigroup - direct) / l2_norm(direct)

    amplitude_gap, dilation_gap = _k_derivative_oracle(battery[:5], params)
    record.add_gate("K_derivative_amplitude", amplitude_gap < FD_GATE_AMPLITUDE, amplitude_gap, FD_GATE_AMPLITUDE)
    record.add_gate("K_derivative_dilation", dilation_gap < FD_GATE_DILATION, dilation_gap, FD_GATE_DILATION)

    if sharpconst.strauss_window(params.N, params.alpha):
        worst, offenders = sharpconst.verify_strauss_bound(battery, params.alpha)
        record.scalars["strauss.worst_ratio"] = worst
        record.add_gate("strauss_bound", not offenders, worst, 1.0 + sharpconst.STRAUSS_SLACK)
    return record


def _k_derivative_oracle(battery, params: ModelParams) -> Tuple[float, float]:
    """Largest relative gap between K_{a,b} and the central difference of S along the scaling, per b = 0 / b > 0"""
    amplitude_gap = 0.0
    dilation_gap = 0.0
    for _, u in battery:
        for a, b in ((1.0, 0.0), (1.0, 1.0), (2.0, 1.0)):
            K = K_ab(u, params, a, b).K
            ahead = action(scale_field_exponent(u, a, b, 1.0 + FD_STEP, resample=False), params)
            behind = action(scale_field_exponent(u, a, b, 1.0 - FD_STEP, resample=False), params)
            gap = abs((ahead - behind) / (2.0 * FD_STEP) - K) / abs(K)
            if b == 0.0:
                amplitude_gap = max(amplitude_gap, gap)
            else:
                dilation_gap = max(dilation_gap, gap)
    return amplitude_gap, dilation_gap


def _run_sweep_point(task: Tuple[int, str, ExperimentConfig]) -> Dict[str, object]:
    index, command, point = task
    params = point.params
    row = {"index": index, "alpha": params.alpha, "gamma": params.gamma, "p": params.p}
    try:
        record = run_command(command, point)
        row.update(status="ok", all_gates_passed=record.all_gates_passed, scalars=record.to_dict()["scalars"])
    except Exception as e:
        logger.error(f"sweep point {index} failed: {e}")
        row.update(status="error", all_gates_passed=False, scalars={}, error=str(e))
    return row


SweepTask = Tuple[int, str, Optional[ExperimentConfig], Tuple[float, float, float]]


def _sweep_tasks(config: ExperimentConfig) -> List[SweepTask]:
    tasks = []
    for index, (alpha, gamma, p) in enumerate(config.sweep.points()):
        subdir = os.path.join(config.output_dir, f"point_{index:03d}")
        try:
            point = config.with_point(alpha, gamma, p, subdir)
        except InvalidParameterError as e:
            logger.warning(f"sweep point {index} (alpha={alpha}, gamma={gamma}, p={p}) skipped: {e}")
            point = None
        tasks.append((index, config.sweep.command, point, (alpha, gamma, p)))
    return tasks


def cmd_sweep(config: ExperimentConfig) -> RunRecord:
    """Cartesian sweep over (alpha, gamma, p); every point writes its own RunRecord"""
    record = _new_record("sweep", config)
    tasks = _sweep_tasks(config)
    if not tasks:
        raise ConfigError("[sweep] needs non-empty alpha, gamma and p lists")

    runnable = [(index, command, point) for index, command, point, _ in tasks if point is not None]
    if config.sweep.threads > 1:
        with ProcessPoolExecutor(max_workers=config.sweep.threads) as pool:
            results = list(pool.map(_run_sweep_point, runnable))
    else:
        results = [_run_sweep_point(task) for task in runnable]
    by_index = {row["index"]: row for row in results}
    rows = []
    for index, _, point, (alpha, gamma, p) in tasks:
        if point is None:
            rows.append({"index": index, "alpha": alpha, "gamma": gamma, "p": p, "status": "invalid",
                         "all_gates_passed": False, "scalars": {}})
        else:
            rows.append(by_index[index])

    columns = sorted({key for row in rows for key, value in row["scalars"].items()
                      if isinstance(value, (int, float, str, bool))})
    header = ["index", "alpha", "gamma", "p", "status", "all_gates_passed"] + columns
    table = [[row["index"], row["alpha"], row["gamma"], row["p"], row["status"], row["all_gates_passed"]]
             + [row["scalars"].get(key, "") for key in columns] for row in rows]
    write_csv_atomic(os.path.join(config.output_dir, "sweep.csv"), header, table)
    record.artifacts["sweep"] = "sweep.csv"

    completed = sum(1 for row in rows if row["status"] == "ok")
    record.scalars["points"] = len(rows)
    record.scalars["completed"] = completed
    record.add_gate("sweep_completed", completed == len(rows), completed, len(rows))
    failing = [row["index"] for row in rows if row["status"] == "ok" and not row["all_gates_passed"]]
    record.add_gate("sweep_point_gates", not failing, len(failing), 0)
    return record


COMMANDS: Dict[str, Callable[[ExperimentConfig], RunRecord]] = {
    "derive": cmd_derive,
    "groundstate": cmd_groundstate,
    "constant": cmd_constant,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "wellcheck": cmd_wellcheck,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def run_command(command: str, config: ExperimentConfig) -> RunRecord:
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command: {command}")
    os.makedirs(config.output_dir, exist_ok=True)
    logger.info(f"Running {command} ({config.name}) into {config.output_dir}")
    record = COMMANDS[command](config)
    record.finish()
    write_run_record(record, config.output_dir)
    if record.all_gates_passed:
        logger.info(f"{command}: all {len(record.gates)} gates passed")
    else:
        logger.warning(f"{command}: {sum(not g.passed for g in record.gates)} of {len(record.gates)} gates failed")
    return record


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--config", metavar="PATH", help="TOML experiment configuration")
    source.add_argument("--scenario", metavar="NAME", choices=sorted(available_scenarios),
                        help="built-in preset instead of a configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="seed for randomized test fields")
    common.add_argument("--threads", type=int, help="worker processes for sweep")

    parser = argparse.ArgumentParser(prog="labcli", description="Fractional NLS ground-state and evolution lab")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = get_scenario(args.scenario or DEFAULT_SCENARIO)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return config.with_overrides(seed=args.seed, output_dir=args.out, threads=args.threads)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = resolve_config(args)
        record = run_command(args.command, config)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        logger.debug(f"Traceback: {traceback.format_exc()}")
        return 1
    return 0 if record.all_gates_passed else 2


if __name__ == "__main__":
    sys.exit(main())
