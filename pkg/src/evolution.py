"""
Time integration of i u_t - (-Delta)^alpha u + epsilon |x|^gamma u |u|^(p-1) = 0.

Strang splitting of the two exactly solvable sub-flows:
  linear     u^ -> exp(-i t |xi|^(2 alpha)) u^
  nonlinear  u  -> exp(i epsilon t |x|^gamma |u|^(p-1)) u
Both conserve the discrete mass exactly and are invertible by flipping the
sign of t.
"""

import logging
import math
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
from scipy.optimize import brentq

from field import (Field, WeightGrid, fractional_symbol, high_frequency_mask, hs_seminorm, l2_norm,
                   radial_asymmetry, sobolev_inner_product, sobolev_norm, weight_grid)
from functionals import K_ab, action, energy, mass
from params import Criticality, DerivedExponents, InvalidParameterError, ModelParams, classify_criticality, \
    wellposed_alpha
from records import RunRecord

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_BLOWUP_FACTOR = 1e3
DEFAULT_SPECTRAL_TAIL_LIMIT = 0.1

WELL_AMPLITUDES = (0.5, 0.6, 0.7, 0.8, 0.9)
STABILITY_DELTAS = (1e-2, 5e-2)
# engineering gate for the orbital-stability run
STABILITY_FACTOR = 10.0
BOUNDED_GROWTH_FACTOR = 2.0
MASS_DRIFT_GATE = 1e-10
BOUND_SLACK = 1e-2


class Outcome(Enum):
    COMPLETED = "completed"
    BLOWUP_SUSPECTED = "blowup_suspected"
    RESOLUTION_FAILURE = "resolution_failure"


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = DEFAULT_DT
    T: float = 1.0
    record_every: int = 10
    blowup_norm_factor: float = DEFAULT_BLOWUP_FACTOR
    spectral_tail_limit: float = DEFAULT_SPECTRAL_TAIL_LIMIT
    # keep every k-th recorded sample as a field snapshot, 0 disables
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.dt > 0.0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not self.T > 0.0:
            raise InvalidParameterError(f"T must be positive, got {self.T}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise InvalidParameterError(f"record_every must be a positive integer, got {self.record_every}")
        if not self.blowup_norm_factor > 1.0:
            raise InvalidParameterError(f"blowup_norm_factor must exceed 1, got {self.blowup_norm_factor}")
        if not 0.0 < self.spectral_tail_limit <= 1.0:
            raise InvalidParameterError(f"spectral_tail_limit must lie in (0, 1], got {self.spectral_tail_limit}")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 0:
            raise InvalidParameterError(f"snapshot_every must be a nonnegative integer, got {self.snapshot_every}")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def to_dict(self):
        return {
            "dt": self.dt,
            "T": self.T,
            "record_every": self.record_every,
            "blowup_norm_factor": self.blowup_norm_factor,
            "spectral_tail_limit": self.spectral_tail_limit,
            "snapshot_every": self.snapshot_every,
        }


@dataclass
class EvolutionTrace:
    times: List[float] = dataclass_field(default_factory=list)
    mass_series: List[float] = dataclass_field(default_factory=list)
    energy_series: List[float] = dataclass_field(default_factory=list)
    hs_series: List[float] = dataclass_field(default_factory=list)
    action_series: List[float] = dataclass_field(default_factory=list)
    spectral_tail_series: List[float] = dataclass_field(default_factory=list)
    asymmetry_series: List[float] = dataclass_field(default_factory=list)
    orbital_distance_series: Optional[List[float]] = None
    K_series: Optional[Dict[Tuple[float, float], List[float]]] = None
    snapshots: List[Tuple[float, Field]] = dataclass_field(default_factory=list)
    outcome: Optional[Outcome] = None
    final: Optional[Field] = None
    steps_taken: int = 0

    def set_outcome(self, outcome: Outcome):
        if self.outcome is not None:
            raise RuntimeError(f"outcome already set to {self.outcome.value}")
        self.outcome = outcome

    @property
    def K_flags(self) -> Optional[Dict[Tuple[float, float], List[int]]]:
        if self.K_series is None:
            return None
        return {pair: [int(np.sign(k)) for k in values] for pair, values in self.K_series.items()}

    def relative_drift(self, series: Sequence[float]) -> float:
        reference = abs(series[0])
        if reference == 0.0:
            return max(abs(v - series[0]) for v in series)
        return max(abs(v - series[0]) for v in series) / reference

    @property
    def mass_drift(self) -> float:
        return self.relative_drift(self.mass_series)

    @property
    def energy_drift(self) -> float:
        """max |E(t) - E(0)| over max(|E(0)|, ||u0||_dot^2 / 2); E(0) vanishes at the critical ground state"""
        start = self.energy_series[0]
        deviation = max(abs(v - start) for v in self.energy_series)
        reference = max(abs(start), 0.5 * self.hs_series[0] ** 2)
        return deviation / reference if reference > 0.0 else deviation

    def well_membership(self, m: float) -> Dict[Tuple[float, float], List[bool]]:
        """S(u(t)) < m and K_{a,b}(u(t)) > 0 per pair and recorded time"""
        if self.K_series is None:
            return {}
        return {pair: [S < m and k > 0.0 for S, k in zip(self.action_series, values)]
                for pair, values in self.K_series.items()}

    def well_pair_disagreements(self, m: float) -> int:
        """Recorded times at which the pairs disagree on membership of the well"""
        columns = list(self.well_membership(m).values())
        return sum(1 for flags in zip(*columns) if len(set(flags)) > 1)

    @property
    def hs_growth(self) -> float:
        return max(self.hs_series) / self.hs_series[0] if self.hs_series[0] > 0.0 else math.inf

    def csv_header(self) -> List[str]:
        header = ["t", "M", "E", "Hs", "dist", "K_sign", "S", "tail", "asymmetry"]
        if self.K_series:
            header += [f"K_{a:g}_{b:g}" for a, b in self.K_series]
        return header

    def csv_rows(self):
        pairs = list(self.K_series) if self.K_series else []
        for i, t in enumerate(self.times):
            dist = self.orbital_distance_series[i] if self.orbital_distance_series is not None else ""
            k_sign = int(np.sign(self.K_series[pairs[0]][i])) if pairs else ""
            row = [t, self.mass_series[i], self.energy_series[i], self.hs_series[i], dist, k_sign,
                   self.action_series[i], self.spectral_tail_series[i], self.asymmetry_series[i]]
            row += [self.K_series[pair][i] for pair in pairs]
            yield row

    def summary(self) -> Dict[str, object]:
        data = {
            "outcome": self.outcome.value if self.outcome else None,
            "steps_taken": self.steps_taken,
            "final_time": self.times[-1] if self.times else 0.0,
            "mass_drift": self.mass_drift,
            "energy_drift": self.energy_drift,
            "hs_growth": self.hs_growth,
            "max_spectral_tail": max(self.spectral_tail_series),
            "max_asymmetry": max(self.asymmetry_series),
        }
        if self.orbital_distance_series is not None:
            data["max_orbital_distance"] = max(self.orbital_distance_series)
        return data


def linear_propagator_step(u: Field, t: float, alpha: float) -> Field:
    """Free flow exp(-i t (-Delta)^alpha), an exact isometry of L2"""
    phase = np.exp(-1j * t * fractional_symbol(u.grid, alpha))
    return Field.from_fourier(u.grid, phase * u.fourier())


def nonlinear_phase_step(u: Field, t: float, w: WeightGrid, p: float, eps: int) -> Field:
    values = u.values
    return Field(u.grid, values * np.exp(1j * eps * t * w.samples * np.abs(values) ** (p - 1.0)))


def strang_step(u: Field, dt: float, params: ModelParams) -> Field:
    w = weight_grid(u.grid, params.gamma)
    half = linear_propagator_step(u, 0.5 * dt, params.alpha)
    kicked = nonlinear_phase_step(half, dt, w, params.p, params.epsilon)
    return linear_propagator_step(kicked, 0.5 * dt, params.alpha)


class SplitStepIntegrator:
    """Strang splitting on raw sample arrays with the phases cached per step size"""

    def __init__(self, grid, params: ModelParams):
        self.grid = grid
        self.params = params
        self._symbol = fractional_symbol(grid, params.alpha)
        self._weight = weight_grid(grid, params.gamma).samples
        self._half_phases: Dict[float, np.ndarray] = {}

    def _half_phase(self, dt: float) -> np.ndarray:
        if dt not in self._half_phases:
            self._half_phases[dt] = np.exp(-0.5j * dt * self._symbol)
        return self._half_phases[dt]

    def step(self, values: np.ndarray, dt: float) -> np.ndarray:
        half = self._half_phase(dt)
        v = scipy.fft.ifftn(half * scipy.fft.fftn(values, norm="ortho"), norm="ortho")
        v = v * np.exp(1j * self.params.epsilon * dt * self._weight * np.abs(v) ** (self.params.p - 1.0))
        return scipy.fft.ifftn(half * scipy.fft.fftn(v, norm="ortho"), norm="ortho")

    def run(self, values: np.ndarray, dt: float, steps: int) -> np.ndarray:
        for _ in range(steps):
            values = self.step(values, dt)
        return values


def propagate(u0: Field, params: ModelParams, dt: float, steps: int) -> Field:
    """Apply `steps` Strang steps of signed size dt (negative dt runs backwards)"""
    integrator = SplitStepIntegrator(u0.grid, params)
    return Field(u0.grid, integrator.run(np.array(u0.values), dt, steps))


def orbital_distance(u: Field, phi: Field, alpha: float) -> float:
    """min over theta of ||u - exp(i theta) phi||_{H^alpha}"""
    squared = (sobolev_norm(u, alpha) ** 2 + sobolev_norm(phi, alpha) ** 2
               - 2.0 * abs(sobolev_inner_product(u, phi, alpha)))
    return math.sqrt(max(squared, 0.0))


def spectral_tail_fraction(u: Field) -> float:
    power = np.abs(u.fourier()) ** 2
    total = float(np.sum(power))
    if total == 0.0:
        return 0.0
    return float(np.sum(power[high_frequency_mask(u.grid)])) / total


@dataclass(frozen=True)
class WellMembership:
    member: bool
    action: float
    K: float
    m: float
    a: float
    b: float

    def to_dict(self):
        return {"member": self.member, "action": self.action, "K": self.K, "m": self.m, "a": self.a, "b": self.b}


def stable_set_membership(u: Field, params: ModelParams, a: float, b: float, m: float) -> WellMembership:
    """u is in the potential well when S(u) < m and K_{a,b}(u) > 0"""
    if not m > 0.0:
        raise InvalidParameterError(f"m must be positive, got {m}")
    S = action(u, params)
    K = K_ab(u, params, a, b).K
    return WellMembership(member=(S < m and K > 0.0), action=S, K=K, m=m, a=a, b=b)


def evolve(u0: Field, params: ModelParams, cfg: EvolutionConfig, reference: Optional[Field] = None,
           pairs: Sequence[Tuple[float, float]] = ()) -> EvolutionTrace:
    """
    Strang-split evolution with diagnostics every cfg.record_every steps.

    Stops early with blowup_suspected when the H^alpha dot seminorm exceeds
    blowup_norm_factor times its initial value, and with resolution_failure on
    NaN or when the top third of the spectrum carries more than
    spectral_tail_limit of the power.
    """
    if not (wellposed_alpha(params) or params.debug):
        raise InvalidParameterError(
            f"alpha = {params.alpha} is outside the well-posedness window ({params.N}/(2N-1), 1)"
        )
    if u0.grid.dim != params.N:
        raise InvalidParameterError(f"grid dimension {u0.grid.dim} does not match N = {params.N}")

    grid = u0.grid
    integrator = SplitStepIntegrator(grid, params)
    trace = EvolutionTrace()
    if reference is not None:
        trace.orbital_distance_series = []
    if pairs:
        trace.K_series = {(float(a), float(b)): [] for a, b in pairs}

    def record(u: Field, t: float):
        trace.times.append(t)
        trace.mass_series.append(mass(u))
        trace.energy_series.append(energy(u, params))
        trace.hs_series.append(hs_seminorm(u, params.alpha))
        trace.action_series.append(action(u, params))
        trace.spectral_tail_series.append(spectral_tail_fraction(u))
        trace.asymmetry_series.append(radial_asymmetry(u))
        if reference is not None:
            trace.orbital_distance_series.append(orbital_distance(u, reference, params.alpha))
        if trace.K_series is not None:
            for a, b in trace.K_series:
                trace.K_series[(a, b)].append(K_ab(u, params, a, b).K)
        if cfg.snapshot_every and (len(trace.times) - 1) % cfg.snapshot_every == 0:
            trace.snapshots.append((t, u))

    record(u0, 0.0)
    initial_hs = trace.hs_series[0]
    values = np.array(u0.values)
    current = u0
    total = cfg.steps
    step = 0
    while step < total:
        chunk = min(cfg.record_every, total - step)
        values = integrator.run(values, cfg.dt, chunk)
        step += chunk
        t = step * cfg.dt
        if not np.all(np.isfinite(values)):
            logger.warning(f"non-finite samples at t={t:.4f}")
            trace.set_outcome(Outcome.RESOLUTION_FAILURE)
            break
        current = Field(grid, values)
        record(current, t)
        if trace.spectral_tail_series[-1] > cfg.spectral_tail_limit:
            logger.warning(f"spectral tail {trace.spectral_tail_series[-1]:.3e} above limit at t={t:.4f}")
            trace.set_outcome(Outcome.RESOLUTION_FAILURE)
            break
        if initial_hs > 0.0 and trace.hs_series[-1] > cfg.blowup_norm_factor * initial_hs:
            logger.warning(f"H^alpha seminorm grew by {trace.hs_series[-1] / initial_hs:.3e} at t={t:.4f}")
            trace.set_outcome(Outcome.BLOWUP_SUSPECTED)
            break
        logger.debug(f"t={t:.4f} M={trace.mass_series[-1]:.12e} E={trace.energy_series[-1]:.12e}")

    if trace.outcome is None:
        trace.set_outcome(Outcome.COMPLETED)
    trace.steps_taken = step
    trace.final = current
    logger.info(f"evolution finished with outcome {trace.outcome.value} after {step} steps")
    return trace


def self_convergence_order(u0: Field, params: ModelParams, dt: float, T: float) -> Tuple[float, float, float]:
    """
    Errors at dt and dt/2 against a dt/8 reference, and the observed order
    log2(error(dt) / error(dt/2)).
    """
    integrator = SplitStepIntegrator(u0.grid, params)
    start = np.array(u0.values)
    steps = int(round(T / dt))
    reference = integrator.run(start, dt / 8.0, 8 * steps)
    coarse = integrator.run(start, dt, steps)
    fine = integrator.run(start, dt / 2.0, 2 * steps)
    cell = u0.grid.cell_volume
    error_coarse = math.sqrt(float(np.sum(np.abs(coarse - reference) ** 2)) * cell)
    error_fine = math.sqrt(float(np.sum(np.abs(fine - reference) ** 2)) * cell)
    return error_coarse, error_fine, math.log2(error_coarse / error_fine)


def a_priori_bound(params: ModelParams, exps: DerivedExponents, C: Optional[float],
                   mass0: float, energy0: float) -> Optional[float]:
    """
    Bound on ||u(t)||_{H^alpha dot} from 2E >= y^2 - kappa y^B, kappa = 2C/(p+1) M^(A/2).

    Defocusing: y^2 <= 2E. Focusing with 0 < B < 2: largest root of
    y^2 - kappa y^B = 2E. Focusing with B = 2 and kappa < 1: y^2 <= 2E/(1-kappa).
    None where the argument gives no bound.
    """
    if not params.focusing:
        return math.sqrt(max(2.0 * energy0, 0.0))
    if C is None or not exps.B > 0.0:
        return None
    kappa = 2.0 * C / (params.p + 1.0) * mass0 ** (exps.A / 2.0)
    criticality = classify_criticality(exps.B)
    if criticality is Criticality.CRITICAL:
        if kappa >= 1.0:
            return None
        return math.sqrt(max(2.0 * energy0 / (1.0 - kappa), 0.0))
    if criticality is Criticality.SUPERCRITICAL:
        return None

    B = exps.B

    def excess(y):
        return y ** 2 - kappa * y ** B - 2.0 * energy0

    # y^2 - kappa y^B is minimal here
    low = (kappa * B / 2.0) ** (1.0 / (2.0 - B))
    if excess(low) > 0.0:
        return low
    high = max(2.0 * low, 1.0)
    while excess(high) <= 0.0:
        high *= 2.0
    return brentq(excess, low, high, xtol=1e-14, rtol=1e-12)


def global_existence_applies(params: ModelParams, exps: DerivedExponents, C: Optional[float],
                             mass0: float) -> bool:
    if not params.focusing:
        return True
    criticality = classify_criticality(exps.B)
    if criticality is Criticality.SUBCRITICAL:
        return exps.B > 0.0
    if criticality is Criticality.CRITICAL and C is not None:
        return mass0 < ((params.p + 1.0) / (2.0 * C)) ** (2.0 / exps.A)
    return False


def run_global_existence_experiment(params: ModelParams, exps: DerivedExponents, u0: Field,
                                    cfg: EvolutionConfig, C: Optional[float] = None,
                                    m: Optional[float] = None,
                                    pairs: Sequence[Tuple[float, float]] = (),
                                    record: Optional[RunRecord] = None,
                                    label: str = "") -> Tuple[RunRecord, EvolutionTrace]:
    """
    Evolve u0 and check the trapping that applies.

    Mass-controlled regimes (defocusing, B < 2, or B = 2 below the mass
    threshold): the seminorm stays below the a priori bound. Potential well
    (m and pairs given, u0 in the well): S(u(t)) < m and K_{a,b}(u(t)) > 0 at
    every recorded time.
    """
    if record is None:
        record = RunRecord(command="global_existence")
    prefix = f"{label}." if label else ""
    mass0 = mass(u0)
    energy0 = energy(u0, params)
    trace = evolve(u0, params, cfg, pairs=pairs if m is not None else ())
    record.update_scalars(trace.summary(), prefix=prefix)
    record.add_gate(f"{prefix}completed", trace.outcome is Outcome.COMPLETED)
    record.add_gate(f"{prefix}mass_drift", trace.mass_drift < MASS_DRIFT_GATE, trace.mass_drift, MASS_DRIFT_GATE)

    if global_existence_applies(params, exps, C, mass0):
        bound = a_priori_bound(params, exps, C, mass0, energy0)
        record.scalars[f"{prefix}a_priori_bound"] = bound
        if bound is not None:
            peak = max(trace.hs_series)
            record.add_gate(f"{prefix}a_priori_bound", peak <= bound * (1.0 + BOUND_SLACK), peak, bound)
        record.add_gate(f"{prefix}bounded_growth", trace.hs_growth < BOUNDED_GROWTH_FACTOR,
                        trace.hs_growth, BOUNDED_GROWTH_FACTOR)

    if m is not None and pairs:
        for a, b in trace.K_series:
            start = stable_set_membership(u0, params, a, b, m)
            if not start.member:
                record.add_finding(f"{prefix}initial data not in the well for (a,b)=({a:g},{b:g})")
                continue
            trapped = all(S < m for S in trace.action_series) and all(k > 0.0 for k in trace.K_series[(a, b)])
            record.add_gate(f"{prefix}well_trapping_{a:g}_{b:g}", trapped, min(trace.K_series[(a, b)]), 0.0)
        if len(trace.K_series) > 1:
            # the well does not depend on the pair
            disagreements = trace.well_pair_disagreements(m)
            record.add_gate(f"{prefix}well_pairs_agree", disagreements == 0, disagreements, 0)
    return record, trace


@dataclass
class StabilityRun:
    delta: float
    initial_distance: float
    max_distance: float
    trace: EvolutionTrace

    @property
    def ratio(self) -> float:
        if self.initial_distance == 0.0:
            return 0.0 if self.max_distance == 0.0 else math.inf
        return self.max_distance / self.initial_distance

    def to_dict(self):
        return {
            "delta": self.delta,
            "initial_distance": self.initial_distance,
            "max_distance": self.max_distance,
            "ratio": self.ratio,
            "outcome": self.trace.outcome.value,
        }


def orbital_stability_run(phi: Field, params: ModelParams, cfg: EvolutionConfig, delta: float) -> StabilityRun:
    """Evolve phi (1 + delta) and track the distance to the orbit {exp(i theta) phi}"""
    u0 = phi.scaled(1.0 + delta)
    trace = evolve(u0, params, cfg, reference=phi)
    distances = trace.orbital_distance_series
    return StabilityRun(delta=delta, initial_distance=distances[0], max_distance=max(distances), trace=trace)


def well_initial_data(phi: Field, amplitudes: Sequence[float] = WELL_AMPLITUDES) -> List[Tuple[float, Field]]:
    return [(c, phi.scaled(c)) for c in amplitudes]


def scale_to_mass(u: Field, target_mass: float) -> Field:
    current = l2_norm(u) ** 2
    if current == 0.0:
        raise InvalidParameterError("cannot rescale the zero field to a target mass")
    return u.scaled(math.sqrt(target_mass / current))
