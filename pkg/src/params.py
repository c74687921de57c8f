"""
Model parameters, derived exponents and regime classification.

Holds the scalar parameters (N, alpha, gamma, p, epsilon) of the inhomogeneous
fractional Schrodinger equation and the exponents A, B, mu derived from them.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

logger = logging.getLogger(__name__)

# B is compared against 2 with this absolute tolerance
CRITICALITY_TOL = 1e-12

MAX_DIMENSION = 3


class InvalidParameterError(ValueError):
    """Raised when parameters fall outside an admissible window"""
    pass


class Criticality(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModelParams:
    """
    Physical and analytical parameters.

    N = 1 and alpha = 1 are only accepted with debug=True (comparison runs
    against the classical equation).
    """
    N: int
    alpha: float
    gamma: float
    p: float
    epsilon: int = 1
    debug: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1 or self.N > MAX_DIMENSION:
            raise InvalidParameterError(f"N must be an integer in [1, {MAX_DIMENSION}], got {self.N}")
        if self.N == 1 and not self.debug:
            raise InvalidParameterError("N = 1 is only allowed in debug mode")
        if not (0.0 < self.alpha < 1.0):
            if not (self.alpha == 1.0 and self.debug):
                raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon not in (1, -1):
            raise InvalidParameterError(f"epsilon must be +1 or -1, got {self.epsilon}")
        if not self.p > 0.0:
            raise InvalidParameterError(f"p must be positive, got {self.p}")
        if self.gamma < 0.0 and abs(self.gamma) >= self.N:
            raise InvalidParameterError(f"|gamma| must be below N for gamma < 0, got {self.gamma}")
        if not all(math.isfinite(v) for v in (self.alpha, self.gamma, self.p)):
            raise InvalidParameterError("parameters must be finite")

    @property
    def focusing(self) -> bool:
        return self.epsilon == 1

    def to_dict(self):
        return {
            "N": self.N,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "p": self.p,
            "epsilon": self.epsilon,
            "debug": self.debug,
        }


@dataclass(frozen=True)
class DerivedExponents:
    A: float
    B: float
    mu: float
    sigma_exp: float

    @property
    def p(self) -> float:
        # A + B = p + 1 by construction
        return self.A + self.B - 1.0

    def to_dict(self):
        return {"A": self.A, "B": self.B, "mu": self.mu, "sigma_exp": self.sigma_exp}


@dataclass(frozen=True)
class GnWindow:
    """Position of the effective exponent s relative to [2, 2N/(N-2alpha)]"""
    s: float
    upper: float
    admissible: bool
    strict: bool
    # same window with p in place of p+1
    strict_printed: bool


@dataclass(frozen=True)
class RegimeReport:
    gn_admissible: bool
    gn_strict: bool
    gn_strict_printed: bool
    wellposed_alpha: bool
    criticality: Criticality
    mass_threshold: Optional[float] = None

    def to_dict(self):
        return {
            "gn_admissible": self.gn_admissible,
            "gn_strict": self.gn_strict,
            "gn_strict_printed": self.gn_strict_printed,
            "wellposed_alpha": self.wellposed_alpha,
            "criticality": self.criticality.value,
            "mass_threshold": self.mass_threshold,
        }


def _gamma_shift(params: ModelParams) -> float:
    """2 gamma / (N - 2 alpha), zero when gamma vanishes"""
    if params.gamma == 0.0:
        return 0.0
    gap = params.N - 2.0 * params.alpha
    if gap <= 0.0:
        raise InvalidParameterError(
            f"N - 2 alpha must be positive when gamma != 0 (N={params.N}, alpha={params.alpha})"
        )
    return 2.0 * params.gamma / gap


def effective_exponent(params: ModelParams) -> float:
    """s := p + 1 - 2 gamma / (N - 2 alpha)"""
    return params.p + 1.0 - _gamma_shift(params)


def sobolev_upper(params: ModelParams) -> float:
    gap = params.N - 2.0 * params.alpha
    if gap <= 0.0:
        return math.inf
    return 2.0 * params.N / gap


def mass_critical_p(N: int, alpha: float, gamma: float) -> float:
    """Exponent p at which B = 2"""
    return 1.0 + (4.0 * alpha + 2.0 * gamma) / N


def derive_exponents(params: ModelParams) -> DerivedExponents:
    s = effective_exponent(params)
    B = (params.N * (params.p - 1.0) - 2.0 * params.gamma) / (2.0 * params.alpha)
    A = 1.0 + params.p - B
    if s == 0.0:
        raise InvalidParameterError("effective exponent s vanishes")
    mu = (params.N / params.alpha) * (0.5 - 1.0 / s)
    return DerivedExponents(A=A, B=B, mu=mu, sigma_exp=s)


def check_gn_window(params: ModelParams) -> GnWindow:
    s = effective_exponent(params)
    upper = sobolev_upper(params)
    admissible = 2.0 <= s <= upper
    strict = 2.0 < s < upper
    s_printed = s - 1.0
    strict_printed = 2.0 < s_printed < upper
    return GnWindow(s=s, upper=upper, admissible=admissible, strict=strict, strict_printed=strict_printed)


def wellposed_alpha(params: ModelParams) -> bool:
    N = params.N
    return N / (2.0 * N - 1.0) < params.alpha < 1.0


def classify_criticality(B: float) -> Criticality:
    if abs(B - 2.0) <= CRITICALITY_TOL:
        return Criticality.CRITICAL
    if B < 2.0:
        return Criticality.SUBCRITICAL
    return Criticality.SUPERCRITICAL


def critical_mass_threshold(params: ModelParams, exps: DerivedExponents, C: float) -> float:
    """((p+1) / (2C))^(2/A), the mass below which critical solutions are global"""
    if not C > 0.0:
        raise InvalidParameterError(f"GN constant must be positive, got {C}")
    return ((params.p + 1.0) / (2.0 * C)) ** (2.0 / exps.A)


def classify_regime(params: ModelParams, exps: DerivedExponents, C: Optional[float] = None) -> RegimeReport:
    window = check_gn_window(params)
    criticality = classify_criticality(exps.B)
    threshold = None
    if criticality is Criticality.CRITICAL and C is not None:
        threshold = critical_mass_threshold(params, exps, C)
    return RegimeReport(
        gn_admissible=window.admissible,
        gn_strict=window.strict,
        gn_strict_printed=window.strict_printed,
        wellposed_alpha=wellposed_alpha(params),
        criticality=criticality,
        mass_threshold=threshold,
    )


def require_groundstate_regime(params: ModelParams) -> DerivedExponents:
    """
    Validate the hypotheses of the ground-state solvers and return the exponents.

    The solvers need gamma >= 0, p > 1 and the strict GN window.
    """
    if params.gamma < 0.0:
        raise InvalidParameterError(f"ground-state solvers require gamma >= 0, got {params.gamma}")
    if params.p <= 1.0:
        raise InvalidParameterError(f"ground-state solvers require p > 1, got {params.p}")
    window = check_gn_window(params)
    if not window.strict:
        raise InvalidParameterError(
            f"ground-state solvers require 2 < s < {window.upper}, got s = {window.s}"
        )
    exps = derive_exponents(params)
    if exps.B <= 0.0:
        raise InvalidParameterError(f"degenerate exponent B = {exps.B}")
    return exps
