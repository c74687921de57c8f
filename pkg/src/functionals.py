"""
Conserved and variational functionals: mass, energy, action, the Weinstein
quotient J, and the scaling derivatives K_{a,b}, H_{a,b}.

The scaling is phi^lambda_{a,b} := lambda^a phi(. / lambda^b), under which
    M      -> lambda^(2a + N b) M
    |u|^2_{H^alpha dot} -> lambda^(2a + (N - 2 alpha) b) |u|^2
    P      -> lambda^((p+1) a + (N + gamma) b) P
so K_{a,b} = d/dlambda S(phi^lambda)|_{lambda=1} is an exact combination of
the three integrals.
"""

import logging
import math
from dataclasses import dataclass, asdict

from field import Field, hs_seminorm, l2_norm, weight_grid, weighted_power_integral
from params import DerivedExponents, ModelParams

logger = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    """Raised when a functional is evaluated where its denominator vanishes"""
    pass


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    energy: float
    action: float
    weinstein: float
    nonlinear_integral: float
    sigma_norm: float
    seminorm: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class KHReport:
    a: float
    b: float
    K: float
    H: float
    K_quad: float
    K_nonlin: float
    # quadratic part with an (N - alpha) seminorm coefficient instead of (N - 2 alpha)
    K_quad_printed: float

    @property
    def printed_discrepancy(self) -> float:
        return self.K_quad_printed - self.K_quad

    def to_dict(self):
        data = asdict(self)
        data["printed_discrepancy"] = self.printed_discrepancy
        return data


def mass(u: Field) -> float:
    return l2_norm(u) ** 2


def nonlinear_integral(u: Field, params: ModelParams) -> float:
    """P(u) := int |x|^gamma |u|^(p+1)"""
    return weighted_power_integral(u, weight_grid(u.grid, params.gamma), params.p + 1.0)


def energy(u: Field, params: ModelParams) -> float:
    seminorm = hs_seminorm(u, params.alpha)
    return 0.5 * seminorm ** 2 - params.epsilon / (params.p + 1.0) * nonlinear_integral(u, params)


def action(u: Field, params: ModelParams) -> float:
    """S = E + M/2"""
    return energy(u, params) + 0.5 * mass(u)


def weinstein_J(u: Field, params: ModelParams, exps: DerivedExponents) -> float:
    P = nonlinear_integral(u, params)
    if not P > 0.0:
        raise DegenerateInputError("J is undefined for fields with vanishing nonlinear integral")
    return hs_seminorm(u, params.alpha) ** exps.B * l2_norm(u) ** exps.A / P


def functional_report(u: Field, params: ModelParams, exps: DerivedExponents) -> FunctionalReport:
    M = mass(u)
    seminorm = hs_seminorm(u, params.alpha)
    P = nonlinear_integral(u, params)
    E = 0.5 * seminorm ** 2 - params.epsilon / (params.p + 1.0) * P
    J = seminorm ** exps.B * math.sqrt(M) ** exps.A / P if P > 0.0 else math.inf
    return FunctionalReport(
        mass=M,
        energy=E,
        action=E + 0.5 * M,
        weinstein=J,
        nonlinear_integral=P,
        sigma_norm=P ** (1.0 / (params.p + 1.0)),
        seminorm=seminorm,
    )


def scaling_exponents(params: ModelParams, a: float, b: float):
    """Growth rates of (M, seminorm^2, P) along phi^lambda_{a,b}"""
    N, alpha, gamma, p = params.N, params.alpha, params.gamma, params.p
    return (2.0 * a + N * b, 2.0 * a + (N - 2.0 * alpha) * b, (p + 1.0) * a + (N + gamma) * b)


def _kh_from_integrals(params: ModelParams, a: float, b: float, M: float, Q: float, P: float) -> KHReport:
    N, alpha, p = params.N, params.alpha, params.p
    rate_mass, rate_seminorm, rate_nonlinear = scaling_exponents(params, a, b)
    K_quad = 0.5 * rate_mass * M + 0.5 * rate_seminorm * Q
    K_quad_printed = 0.5 * rate_mass * M + 0.5 * (2.0 * a + (N - alpha) * b) * Q
    K_nonlin = -params.epsilon * rate_nonlinear / (p + 1.0) * P
    K = K_quad + K_nonlin
    S = 0.5 * (M + Q) - params.epsilon * P / (p + 1.0)
    if rate_mass == 0.0:
        raise DegenerateInputError(f"H_(a,b) is undefined for 2a + Nb = 0 (a={a}, b={b})")
    H = S - K / rate_mass
    return KHReport(a=a, b=b, K=K, H=H, K_quad=K_quad, K_nonlin=K_nonlin, K_quad_printed=K_quad_printed)


def K_ab(u: Field, params: ModelParams, a: float, b: float) -> KHReport:
    M = mass(u)
    Q = hs_seminorm(u, params.alpha) ** 2
    P = nonlinear_integral(u, params)
    return _kh_from_integrals(params, a, b, M, Q, P)


def _quadratic_coefficient(params: ModelParams, a: float, b: float, printed: bool) -> float:
    denominator = 2.0 * a + params.N * b
    if denominator == 0.0:
        raise DegenerateInputError(f"H_(a,b) is undefined for 2a + Nb = 0 (a={a}, b={b})")
    # the (N - alpha) form of K halves the seminorm coefficient
    return params.alpha * b / ((2.0 if printed else 1.0) * denominator)


def H_closed_form(u: Field, params: ModelParams, a: float, b: float, printed: bool = False) -> float:
    """
    H_{a,b} = alpha b / (2a+Nb) |u|^2_{H^alpha dot} + (b gamma + a(p-1)) / ((1+p)(2a+Nb)) P
    for the focusing action, equal to S - K_{a,b} / (2a+Nb).

    printed=True uses alpha b / (2(2a+Nb)), which matches S - K / (2a+Nb) with
    the (N - alpha) coefficient of K_quad_printed instead.
    """
    gamma, p = params.gamma, params.p
    coefficient = _quadratic_coefficient(params, a, b, printed)
    Q = hs_seminorm(u, params.alpha) ** 2
    P = nonlinear_integral(u, params)
    return coefficient * Q + (b * gamma + a * (p - 1.0)) / ((1.0 + p) * (2.0 * a + params.N * b)) * P


def LH_ab(u: Field, params: ModelParams, a: float, b: float) -> float:
    """Exact lambda-derivative of H_{a,b}(phi^lambda) at lambda = 1 (focusing)"""
    gamma, p = params.gamma, params.p
    coefficient = _quadratic_coefficient(params, a, b, printed=False)
    _, rate_seminorm, rate_nonlinear = scaling_exponents(params, a, b)
    Q = hs_seminorm(u, params.alpha) ** 2
    P = nonlinear_integral(u, params)
    return (coefficient * rate_seminorm * Q
            + (b * gamma + a * (p - 1.0)) * rate_nonlinear / ((1.0 + p) * (2.0 * a + params.N * b)) * P)
