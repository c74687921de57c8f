"""
Periodic Cartesian grids and complex fields sampled on them.

The Fourier convention is the unitary discrete transform with frequencies
xi_k = pi k / L, k in {-n/2, ..., n/2 - 1} per axis. Every quadrature is the
uniform-grid rule sum(...) * h**dim, so Parseval holds exactly. The one
exception is the origin sample of |x|^gamma, which carries the lattice-sum
correction for the cusp (see WeightGrid).

A grid with the same n and the box half-width L / b holds u(b .) with the
samples of u unchanged, so amplitude-dilations are exact on grids
(dilate_on_grid). Resampling onto a fixed grid is the alternative when
fields on different boxes must be compared.
"""

import itertools
import logging
import math
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.fft
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn, rgamma

from params import InvalidParameterError, MAX_DIMENSION

logger = logging.getLogger(__name__)

MIN_POINTS = 16

# mass allowed to fall outside the box when a field is spread out
DEFAULT_SUPPORT_TOL = 1e-12

DEFAULT_GRIDS = {
    1: (1024, 20.0),
    2: (256, 12.0),
    3: (64, 10.0),
}


class InvalidFieldError(ValueError):
    """Raised for non-finite samples or grid/shape mismatches"""
    pass


class SupportOverflowError(ValueError):
    """Raised when a rescaled field no longer fits the computational box"""
    pass


class GridSpec:
    """
    Uniform periodic grid on the box [-L, L)^dim with n points per axis.
    """

    def __init__(self, dim: int, n: int, L: float):
        if int(dim) != dim or not 1 <= dim <= MAX_DIMENSION:
            raise InvalidParameterError(f"grid dimension must be in [1, {MAX_DIMENSION}], got {dim}")
        if int(n) != n or n < MIN_POINTS or (int(n) & (int(n) - 1)) != 0:
            raise InvalidParameterError(f"points per axis must be a power of two >= {MIN_POINTS}, got {n}")
        if not L > 0.0 or not math.isfinite(L):
            raise InvalidParameterError(f"box half-width must be positive, got {L}")
        self._dim = int(dim)
        self._n = int(n)
        self._L = float(L)

    @classmethod
    def default_for(cls, dim: int) -> 'GridSpec':
        """Desk-scale default grid for the given dimension"""
        n, L = DEFAULT_GRIDS[dim]
        return cls(dim, n, L)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n(self) -> int:
        return self._n

    @property
    def L(self) -> float:
        return self._L

    @property
    def h(self) -> float:
        return 2.0 * self._L / self._n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self._n,) * self._dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self._dim

    @property
    def origin_index(self) -> Tuple[int, ...]:
        return (self._n // 2,) * self._dim

    def axis(self) -> np.ndarray:
        return -self._L + self.h * np.arange(self._n)

    def frequencies(self) -> np.ndarray:
        """Angular frequencies pi k / L in FFT ordering"""
        return 2.0 * np.pi * scipy.fft.fftfreq(self._n, d=self.h)

    def dilated(self, b: float) -> 'GridSpec':
        """Grid whose points are x_j / b"""
        if not b > 0.0 or not math.isfinite(b):
            raise InvalidParameterError(f"dilation factor must be positive, got {b}")
        return GridSpec(self._dim, self._n, self._L / b)

    def _key(self):
        return (self._dim, self._n, self._L)

    def __eq__(self, other):
        return isinstance(other, GridSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"GridSpec(dim={self._dim}, n={self._n}, L={self._L})"

    def to_dict(self):
        return {"dim": self._dim, "n": self._n, "L": self._L, "h": self.h}


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=32)
def _coordinates(grid: GridSpec) -> Tuple[np.ndarray, ...]:
    axis = grid.axis()
    return tuple(_readonly(c) for c in np.meshgrid(*([axis] * grid.dim), indexing="ij"))


@lru_cache(maxsize=32)
def radius(grid: GridSpec) -> np.ndarray:
    """|x| at every grid point"""
    squared = sum(c ** 2 for c in _coordinates(grid))
    return _readonly(np.sqrt(squared))


@lru_cache(maxsize=32)
def _xi_squared(grid: GridSpec) -> np.ndarray:
    xi = grid.frequencies()
    meshes = np.meshgrid(*([xi] * grid.dim), indexing="ij")
    return _readonly(sum(m ** 2 for m in meshes))


@lru_cache(maxsize=64)
def fractional_symbol(grid: GridSpec, alpha: float) -> np.ndarray:
    """|xi|^(2 alpha) in FFT ordering; the zero mode maps to zero for alpha > 0"""
    return _readonly(np.power(_xi_squared(grid), alpha))


@lru_cache(maxsize=32)
def high_frequency_mask(grid: GridSpec) -> np.ndarray:
    """Modes whose largest per-axis index lies in the top third of the spectrum"""
    k = np.abs(scipy.fft.fftfreq(grid.n, d=1.0 / grid.n))
    meshes = np.meshgrid(*([k] * grid.dim), indexing="ij")
    top = np.maximum.reduce(meshes) if grid.dim > 1 else meshes[0]
    return _readonly(top > grid.n / 3.0)


class Field:
    """
    Complex samples of a function on a GridSpec.

    Fields are values: the sample array is read-only and every operation
    returns a new Field. The unitary Fourier modes are computed lazily and cached.
    """
    __slots__ = ("grid", "values", "_fourier")

    def __init__(self, grid: GridSpec, values, fourier: Optional[np.ndarray] = None):
        data = np.array(values, dtype=np.complex128, copy=True)
        if data.shape != grid.shape:
            raise InvalidFieldError(f"values of shape {data.shape} do not match grid {grid.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidFieldError("field values must be finite")
        self.grid = grid
        self.values = _readonly(data)
        self._fourier = None
        if fourier is not None:
            self._fourier = _readonly(np.array(fourier, dtype=np.complex128, copy=True))

    @classmethod
    def from_fourier(cls, grid: GridSpec, modes: np.ndarray) -> 'Field':
        values = scipy.fft.ifftn(modes, norm="ortho")
        return cls(grid, values, fourier=modes)

    def fourier(self) -> np.ndarray:
        if self._fourier is None:
            self._fourier = _readonly(scipy.fft.fftn(self.values, norm="ortho"))
        return self._fourier

    def scaled(self, c: complex) -> 'Field':
        return Field(self.grid, c * self.values)

    def __add__(self, other: 'Field') -> 'Field':
        _require_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: 'Field') -> 'Field':
        _require_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> 'Field':
        return self.scaled(c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Field({self.grid!r})"


def _require_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise InvalidFieldError(f"grid mismatch: {u.grid!r} vs {v.grid!r}")


def radial_field(grid: GridSpec, profile: Callable[[np.ndarray], np.ndarray]) -> Field:
    """Sample profile(|x|) on the grid"""
    return Field(grid, profile(radius(grid)))


def gaussian(grid: GridSpec, width: float = 0.5, amplitude: complex = 1.0) -> Field:
    """amplitude * exp(-width |x|^2)"""
    return radial_field(grid, lambda r: amplitude * np.exp(-width * r ** 2))


def ring(grid: GridSpec, k: float, width: float = 1.0, amplitude: float = 1.0) -> Field:
    """amplitude * r^k exp(-width r^2)"""
    return radial_field(grid, lambda r: amplitude * r ** k * np.exp(-width * r ** 2))


def apply_fractional_laplacian(u: Field, order: float) -> Field:
    """(-Delta)^order u through the multiplier |xi|^(2 order)"""
    if not 0.0 < order <= 2.0:
        raise InvalidParameterError(f"fractional order must lie in (0, 2], got {order}")
    return Field.from_fourier(u.grid, fractional_symbol(u.grid, order) * u.fourier())


def l2_norm(u: Field) -> float:
    return math.sqrt(float(np.sum(np.abs(u.values) ** 2)) * u.grid.cell_volume)


def fourier_l2_norm(u: Field) -> float:
    return math.sqrt(float(np.sum(np.abs(u.fourier()) ** 2)) * u.grid.cell_volume)


def inner_product(u: Field, v: Field) -> complex:
    """<u, v> = sum u conj(v) h^dim"""
    _require_same_grid(u, v)
    return complex(np.vdot(v.values, u.values)) * u.grid.cell_volume


def hs_seminorm(u: Field, alpha: float) -> float:
    """||(-Delta)^(alpha/2) u|| computed on the Fourier side"""
    if alpha < 0.0:
        raise InvalidParameterError(f"seminorm order must be nonnegative, got {alpha}")
    weights = fractional_symbol(u.grid, alpha)
    return math.sqrt(float(np.sum(weights * np.abs(u.fourier()) ** 2)) * u.grid.cell_volume)


def sobolev_inner_product(u: Field, v: Field, alpha: float) -> complex:
    """Inner product of the inhomogeneous space H^alpha, symbol 1 + |xi|^(2 alpha)"""
    _require_same_grid(u, v)
    weights = 1.0 + fractional_symbol(u.grid, alpha)
    return complex(np.sum(weights * u.fourier() * np.conj(v.fourier()))) * u.grid.cell_volume


def sobolev_norm(u: Field, alpha: float) -> float:
    return math.sqrt(max(sobolev_inner_product(u, u, alpha).real, 0.0))


def sphere_area(N: int) -> float:
    """Surface measure S_{N-1} of the unit sphere in R^N"""
    return 2.0 * math.pi ** (N / 2.0) / float(gamma_fn(N / 2.0))


THETA_TERMS = 8


def _theta_power_excess(t: float, N: int) -> float:
    # theta(t)^N - 1 with theta(t) = sum_k exp(-pi k^2 t), t >= 1
    k = np.arange(1, THETA_TERMS + 1)
    tail = 2.0 * float(np.sum(np.exp(-math.pi * k ** 2 * t)))
    return math.expm1(N * math.log1p(tail))


def _theta_moment(sigma: float, N: int) -> float:
    value, _ = quad(lambda t: t ** (sigma - 1.0) * _theta_power_excess(t, N), 1.0, np.inf,
                    epsabs=0.0, epsrel=1e-13, limit=200)
    return value


@lru_cache(maxsize=128)
def lattice_zeta(N: int, s: float) -> float:
    """
    Epstein zeta of the integer lattice, Z_N(s) = sum over k != 0 of |k|^(-2 s).

    Continued to all s != N/2 by splitting the theta-function Mellin integral
    at t = 1. Z_N(0) = -1 and Z_N(-m) = 0 for positive integers m.
    """
    if s == N / 2.0:
        raise InvalidParameterError(f"lattice zeta has a pole at s = {s}")
    if s == 0.0:
        return -1.0
    bracket = (_theta_moment(s, N) + _theta_moment(N / 2.0 - s, N)
               + 1.0 / (s - N / 2.0) - 1.0 / s)
    return float(math.pi ** s * rgamma(s) * bracket)


def cusp_origin_weight(N: int, gamma: float, spacing: float) -> float:
    """
    Origin weight that makes the uniform rule for |x|^gamma g(x) exact to
    O(spacing^(N + gamma + 2)) for smooth g: -Z_N(-gamma/2) spacing^gamma.
    """
    return -lattice_zeta(N, -gamma / 2.0) * spacing ** gamma


class WeightGrid:
    """
    Samples of |x|^gamma.

    For gamma > 0 the origin carries the cusp weight -Z_N(-gamma/2) h^gamma
    instead of 0, which removes the O(h^(N+gamma)) quadrature error of the
    cusp and keeps the weights exactly homogeneous under h -> h / b. For
    gamma < 0 the origin holds the average of r^gamma over the ball with the
    volume of one cell, S_{N-1} R^(gamma+N) / ((gamma+N) h^N) with
    omega_N R^N = h^N.
    """

    def __init__(self, grid: GridSpec, gamma: float):
        if gamma < 0.0 and abs(gamma) >= grid.dim:
            raise InvalidParameterError(f"weight |x|^{gamma} is not locally integrable in dimension {grid.dim}")
        r = radius(grid)
        samples = np.ones(grid.shape)
        if gamma != 0.0:
            with np.errstate(divide="ignore"):
                samples = np.power(r, gamma)
            N = grid.dim
            if gamma > 0.0:
                samples[grid.origin_index] = cusp_origin_weight(N, gamma, grid.h)
            else:
                area = sphere_area(N)
                R = (N * grid.cell_volume / area) ** (1.0 / N)
                samples[grid.origin_index] = area * R ** (gamma + N) / ((gamma + N) * grid.cell_volume)
        self.grid = grid
        self.gamma = float(gamma)
        self.samples = _readonly(samples)


@lru_cache(maxsize=32)
def weight_grid(grid: GridSpec, gamma: float) -> WeightGrid:
    return WeightGrid(grid, gamma)


def weighted_power_integral(u: Field, w: WeightGrid, q: float) -> float:
    """sum w |u|^q h^dim"""
    if q < 1.0:
        raise InvalidParameterError(f"power must be at least 1, got {q}")
    if w.grid != u.grid:
        raise InvalidFieldError("weight and field live on different grids")
    return float(np.sum(w.samples * np.abs(u.values) ** q)) * u.grid.cell_volume


def radial_decay_sup(u: Field, alpha: float) -> float:
    """max over x != 0 of |x|^(N/2 - alpha) |u(x)|"""
    N = u.grid.dim
    if not 0.5 < alpha < N / 2.0:
        raise InvalidParameterError(f"radial decay bound needs 1/2 < alpha < N/2, got alpha={alpha}, N={N}")
    r = radius(u.grid)
    nonzero = r > 0.0
    return float(np.max(r[nonzero] ** (N / 2.0 - alpha) * np.abs(u.values[nonzero])))


def boundary_mass_fraction(u: Field, layer_fraction: float = 1.0 / 16.0) -> float:
    """Share of the mass carried by the outer layer of the box"""
    total = float(np.sum(np.abs(u.values) ** 2))
    if total == 0.0:
        return 0.0
    outer = np.zeros(u.grid.shape, dtype=bool)
    limit = (1.0 - layer_fraction) * u.grid.L
    for c in _coordinates(u.grid):
        outer |= np.abs(c) >= limit
    return float(np.sum(np.abs(u.values[outer]) ** 2)) / total


def _quarter_turn(values: np.ndarray) -> np.ndarray:
    # (i, j) -> (j, -i) about the origin index n/2
    turned = np.flip(np.swapaxes(values, 0, 1), axis=0)
    return np.roll(turned, 1, axis=0)


def radial_asymmetry(u: Field) -> float:
    """
    Relative L2 distance between u and its images under grid symmetries.

    Quarter turns in every coordinate plane for N >= 2, reflection for N = 1.
    """
    norm = float(np.linalg.norm(u.values))
    if norm == 0.0:
        return 0.0
    v = u.values
    if u.grid.dim == 1:
        images = [np.roll(np.flip(v), 1)]
    else:
        images = []
        for a in range(u.grid.dim):
            for b in range(a + 1, u.grid.dim):
                moved = np.moveaxis(v, (a, b), (0, 1))
                images.append(np.moveaxis(_quarter_turn(moved), (0, 1), (a, b)))
    return max(float(np.linalg.norm(v - w)) for w in images) / norm


def symmetrize_values(values: np.ndarray) -> np.ndarray:
    """
    Average of an array over the symmetries of the grid about the origin index.

    Reflections of every axis and permutations of the axes. The index maps are
    the same for samples and for FFT-ordered modes, so either can be passed.
    """
    v = np.asarray(values)
    for axis in range(v.ndim):
        v = 0.5 * (v + np.roll(np.flip(v, axis=axis), 1, axis=axis))
    if v.ndim > 1:
        orders = list(itertools.permutations(range(v.ndim)))
        v = sum(np.transpose(v, order) for order in orders) / len(orders)
    return v


def symmetrize(u: Field) -> Field:
    return Field(u.grid, symmetrize_values(u.values))


def dilate_on_grid(u: Field, a: float, b: float) -> Field:
    """
    u^{a,b}(x) := a u(b x) without resampling: the samples a u(x_j) sit on the
    grid with half-width L / b. Exact for every b > 0.
    """
    return Field(u.grid.dilated(b), a * u.values)


def _evaluation_matrix(grid: GridSpec, b: float) -> np.ndarray:
    """
    Rows evaluate the band-limited interpolant of one axis at b * x_j.

    Points that land outside [-L, L) are set to zero. The Nyquist mode is
    split symmetrically so real data stay real.
    """
    y = b * grid.axis()
    xi = grid.frequencies()
    matrix = np.exp(1j * np.outer(y + grid.L, xi)) / grid.n
    nyquist = grid.n // 2
    matrix[:, nyquist] = np.cos(xi[nyquist] * (y + grid.L)) / grid.n
    outside = (y < -grid.L) | (y >= grid.L)
    matrix[outside, :] = 0.0
    return matrix


def _lost_mass_fraction(u: Field, b: float) -> float:
    """Share of the mass of u outside [-bL, bL)^dim"""
    total = float(np.sum(np.abs(u.values) ** 2))
    if total == 0.0 or b >= 1.0:
        return 0.0
    inside = np.ones(u.grid.shape, dtype=bool)
    for c in _coordinates(u.grid):
        inside &= (c >= -b * u.grid.L) & (c < b * u.grid.L)
    return float(np.sum(np.abs(u.values[~inside]) ** 2)) / total


def scale_field_amplitude_dilation(u: Field, a: float, b: float,
                                   support_tol: float = DEFAULT_SUPPORT_TOL) -> Field:
    """u^{a,b}(x) := a u(b x), resampled by Fourier interpolation"""
    if not b > 0.0:
        raise InvalidParameterError(f"dilation factor must be positive, got {b}")
    if b == 1.0:
        return u.scaled(a)
    lost = _lost_mass_fraction(u, b)
    if lost > support_tol:
        raise SupportOverflowError(
            f"dilation by {b} drops {lost:.3e} of the mass (tolerance {support_tol:.1e})"
        )
    coefficients = scipy.fft.fftn(u.values)
    matrix = _evaluation_matrix(u.grid, b)
    for axis in range(u.grid.dim):
        coefficients = np.moveaxis(np.tensordot(matrix, coefficients, axes=([1], [axis])), 0, axis)
    return Field(u.grid, a * coefficients)


def scale_field_exponent(u: Field, a: float, b: float, lam: float,
                         support_tol: float = DEFAULT_SUPPORT_TOL, resample: bool = True) -> Field:
    """
    phi^lambda_{a,b} := lambda^a phi(. / lambda^b)

    With resample=False the result lives on the dilated grid (dilate_on_grid).
    """
    if not lam > 0.0:
        raise InvalidParameterError(f"scaling parameter must be positive, got {lam}")
    if not resample:
        return dilate_on_grid(u, lam ** a, lam ** (-b))
    return scale_field_amplitude_dilation(u, lam ** a, lam ** (-b), support_tol=support_tol)
