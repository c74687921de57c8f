"""
Sharp Gagliardo-Nirenberg constant and the radial (Strauss) decay constant.

The GN constant is computed along two independent routes:
  C_formula     = (1+p)/A (A/B)^(B/2) ||phi||^(-(p-1)) from a ground state phi
  C_variational = 1/beta with beta = inf J from the J-minimizer
"""

import logging
import math
from dataclasses import dataclass, asdict, field as dataclass_field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn

from field import Field, GridSpec, gaussian, hs_seminorm, l2_norm, radial_decay_sup, radial_field, ring
from functionals import nonlinear_integral, weinstein_J
from groundstate import GroundStateKind, GroundStateRecord
from params import DerivedExponents, InvalidParameterError, ModelParams

logger = logging.getLogger(__name__)

# J(u) >= beta (1 - GN_SLACK) on every sample
GN_SLACK = 1e-3
STRAUSS_SLACK = 0.05

BATTERY_SIZE = 20
BATTERY_WIDTHS = (0.2, 4.0)
BATTERY_RING_POWERS = (1.0, 2.0, 3.0)


@dataclass(frozen=True)
class ConstantReport:
    C_formula: float
    C_variational: float
    relative_gap: float
    strauss_C: Optional[float] = None
    beta: Optional[float] = None
    # C_formula * beta, equal to 1 at a sharp pair
    product: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class InequalityReport:
    values: List[float]
    labels: List[str]
    min_J: float
    beta: float
    # min_J / beta - 1, negative means the infimum was undercut
    gap_to_beta: float
    violations: List[str] = dataclass_field(default_factory=list)
    constant_violations: List[str] = dataclass_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.constant_violations

    def to_dict(self):
        return {
            "count": len(self.values),
            "min_J": self.min_J,
            "beta": self.beta,
            "gap_to_beta": self.gap_to_beta,
            "violations": list(self.violations),
            "constant_violations": list(self.constant_violations),
        }


def gn_constant_from_groundstate(phi: GroundStateRecord, exps: DerivedExponents) -> float:
    if phi.kind is not GroundStateKind.EULER_LAGRANGE_UNIT:
        raise InvalidParameterError(f"the GN formula needs a ground state, got {phi.kind.value}")
    if not exps.B > 0.0:
        raise InvalidParameterError(f"the GN formula needs B > 0, got B = {exps.B}")
    p = exps.p
    norm = l2_norm(phi.profile)
    return (1.0 + p) / exps.A * (exps.A / exps.B) ** (exps.B / 2.0) * norm ** (-(p - 1.0))


def bound_gn_constant(phi: GroundStateRecord, params: ModelParams, exps: DerivedExponents,
                      psi: Optional[GroundStateRecord] = None) -> float:
    """
    GN constant for a priori bounds on the grid: max(C_formula, 1/beta, 1/J(phi)).

    C_formula carries the continuum Pohozaev identity and can sit below the
    discrete quotient of phi itself; data c phi then start on the bound.
    """
    candidates = [gn_constant_from_groundstate(phi, exps), 1.0 / weinstein_J(phi.profile, params, exps)]
    if psi is not None:
        if psi.kind is not GroundStateKind.J_MINIMIZER:
            raise InvalidParameterError(f"the variational constant needs a J-minimizer, got {psi.kind.value}")
        candidates.append(1.0 / psi.beta_value)
    return max(candidates)


def verify_gn_inequality(samples: Sequence[Tuple[str, Field]], params: ModelParams, beta: float,
                         exps: DerivedExponents, C: Optional[float] = None) -> InequalityReport:
    """
    Evaluate J on every sample and compare with beta.

    Violations are reported, never raised: they point at solver or quadrature
    defects. With C supplied the inequality P <= C M^(A/2) |u|^B is also checked.
    """
    values, labels, violations, constant_violations = [], [], [], []
    for label, u in samples:
        if l2_norm(u) == 0.0:
            continue
        J = weinstein_J(u, params, exps)
        values.append(J)
        labels.append(label)
        if J < beta * (1.0 - GN_SLACK):
            violations.append(label)
            logger.warning(f"GN sample {label}: J = {J:.8e} below beta = {beta:.8e}")
        if C is not None:
            bound = C * l2_norm(u) ** exps.A * hs_seminorm(u, params.alpha) ** exps.B
            if nonlinear_integral(u, params) > bound * (1.0 + GN_SLACK):
                constant_violations.append(label)
    min_J = min(values) if values else math.inf
    return InequalityReport(values=values, labels=labels, min_J=min_J, beta=beta,
                            gap_to_beta=min_J / beta - 1.0, violations=violations,
                            constant_violations=constant_violations)


def strauss_window(N: int, alpha: float) -> bool:
    return 0.5 < alpha < N / 2.0


def strauss_constant(N: int, alpha: float) -> float:
    """
    C(N, alpha) in sup |x|^(N/2 - alpha) |u(x)| <= C(N, alpha) ||u||_{H^alpha dot} for radial u.
    """
    if not strauss_window(N, alpha):
        raise InvalidParameterError(f"Strauss constant needs 1/2 < alpha < N/2, got N={N}, alpha={alpha}")
    numerator = gamma_fn(2.0 * alpha - 1.0) * gamma_fn(N / 2.0 - alpha) * gamma_fn(N / 2.0)
    denominator = (2.0 ** (2.0 * alpha) * math.pi ** (N / 2.0) * gamma_fn(alpha) ** 2
                   * gamma_fn(N / 2.0 - 1.0 + alpha))
    return math.sqrt(float(numerator / denominator))


def verify_strauss_bound(samples: Sequence[Tuple[str, Field]], alpha: float,
                         slack: float = STRAUSS_SLACK) -> Tuple[float, List[str]]:
    """Largest ratio sup|x|^(N/2-alpha)|u| / (C ||u||_dot) over the samples and the offending labels"""
    worst = 0.0
    offenders = []
    for label, u in samples:
        constant = strauss_constant(u.grid.dim, alpha)
        seminorm = hs_seminorm(u, alpha)
        if seminorm == 0.0:
            continue
        ratio = radial_decay_sup(u, alpha) / (constant * seminorm)
        worst = max(worst, ratio)
        if ratio > 1.0 + slack:
            offenders.append(label)
    return worst, offenders


def build_test_battery(grid: GridSpec, seed: int, count: int = BATTERY_SIZE) -> List[Tuple[str, Field]]:
    """
    Radial test fields: Gaussians exp(-c|x|^2) with c on a log grid, rings
    r^k exp(-r^2) and random positive combinations of Gaussians.
    """
    n_gaussians = max(1, (count - len(BATTERY_RING_POWERS)) // 2)
    battery: List[Tuple[str, Field]] = []
    for c in np.geomspace(*BATTERY_WIDTHS, n_gaussians):
        battery.append((f"gaussian_c{c:.3f}", gaussian(grid, width=float(c))))
    for k in BATTERY_RING_POWERS:
        battery.append((f"ring_k{k:g}", ring(grid, k)))

    rng = np.random.default_rng(seed)
    index = 0
    while len(battery) < count:
        widths = rng.uniform(*BATTERY_WIDTHS, size=3)
        weights = rng.uniform(0.1, 1.0, size=3)
        profile = _gaussian_mixture(widths, weights)
        battery.append((f"mixture_{index}", radial_field(grid, profile)))
        index += 1
    return battery[:count]


def _gaussian_mixture(widths: np.ndarray, weights: np.ndarray):
    def profile(r):
        return sum(w * np.exp(-c * r ** 2) for c, w in zip(widths, weights))
    return profile


def constant_report(phi: GroundStateRecord, psi: GroundStateRecord, params: ModelParams,
                    exps: DerivedExponents) -> ConstantReport:
    if psi.kind is not GroundStateKind.J_MINIMIZER:
        raise InvalidParameterError(f"the variational constant needs a J-minimizer, got {psi.kind.value}")
    C_formula = gn_constant_from_groundstate(phi, exps)
    beta = psi.beta_value
    C_variational = 1.0 / beta
    strauss = strauss_constant(params.N, params.alpha) if strauss_window(params.N, params.alpha) else None
    report = ConstantReport(
        C_formula=C_formula,
        C_variational=C_variational,
        relative_gap=abs(C_formula - C_variational) / C_variational,
        strauss_C=strauss,
        beta=beta,
        product=C_formula * beta,
    )
    logger.info(f"C_formula={C_formula:.10f} C_variational={C_variational:.10f} gap={report.relative_gap:.3e}")
    return report
