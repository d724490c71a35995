"""
Observables, fits and reference oracles for walk states and ensembles.

Positions are always measured relative to the lattice origin; densities may
be passed as arrays or as WalkState objects.
"""
import logging
import math
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import linregress

from .exceptions import (
    DomainError,
    ShapeMismatchError,
    UndefinedCOGError,
    WindowInvalidError,
)
from .models import (
    AlphaFit,
    EnsembleDensity,
    LaplaceFit,
    PowerLawFit,
    TimeSeries,
    WalkState,
)
from .walk import density as state_density

logger = logging.getLogger(__name__)

DensityLike = Union[WalkState, np.ndarray, Sequence[float]]

HEAT_KERNEL_CONSTANT = math.sqrt(1.0 / (2.0 * math.pi))
KONNO_EDGE = 1.0 / math.sqrt(2.0)
LAPLACE_FLOOR = 1e-6
LAPLACE_FRONT_MARGIN = 10
ALPHA_RANGE = (-0.2, 1.2)


def _resolve(density: DensityLike, origin: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(density, WalkState):
        values = state_density(density)
        origin = density.origin_index if origin is None else origin
    else:
        values = np.asarray(density, dtype=np.float64)
        if values.ndim != 1:
            raise ShapeMismatchError(f"Density must be 1-D, got shape {values.shape}")
        origin = values.size // 2 if origin is None else origin
    return values, np.arange(values.size) - origin


# ---------------------------------------------------------------------------
# single-density observables
# ---------------------------------------------------------------------------

def cog_half(density: DensityLike, origin: Optional[int] = None) -> float:
    """
    Centre of gravity of the half-side n >= 0 (origin included).

    Raises:
        UndefinedCOGError: If the half-side carries no probability
    """
    values, positions = _resolve(density, origin)
    right = positions >= 0
    mass = values[right].sum()
    if mass <= 0:
        raise UndefinedCOGError("Half-side density is zero; COG undefined")
    return float(np.dot(positions[right], values[right]) / mass)


def std_dev(density: DensityLike, origin: Optional[int] = None) -> float:
    """Standard deviation of the position distribution."""
    values, positions = _resolve(density, origin)
    mean = np.dot(positions, values)
    second = np.dot(positions.astype(np.float64) ** 2, values)
    return float(math.sqrt(max(second - mean * mean, 0.0)))


def window_density(density: DensityLike, origin: Optional[int] = None, half_width: int = 50) -> float:
    """
    Probability inside [-half_width, half_width].

    Raises:
        DomainError: If the window does not fit on the lattice
    """
    values, positions = _resolve(density, origin)
    if half_width < 0 or -half_width < positions[0] or half_width > positions[-1]:
        raise DomainError(
            f"Window of half-width {half_width} exceeds the lattice [{positions[0]}, {positions[-1]}]"
        )
    return float(values[np.abs(positions) <= half_width].sum())


def correlation_eta(state: WalkState) -> float:
    """Real part of Σ_{n>=0} σ⁺_n conj(σ⁻_n)."""
    start = state.origin_index
    return float(np.real(np.vdot(state.minus[start:], state.plus[start:])))


def front_peaks(density: DensityLike, origin: Optional[int] = None) -> Tuple[int, int]:
    """Positions of the density maximum left and right of the origin."""
    values, positions = _resolve(density, origin)
    left = positions < 0
    right = positions > 0
    if values[left].sum() <= 0 or values[right].sum() <= 0:
        raise DomainError("Density has no weight on one side of the origin")
    return (
        int(positions[left][np.argmax(values[left])]),
        int(positions[right][np.argmax(values[right])]),
    )


# ---------------------------------------------------------------------------
# time series and fits
# ---------------------------------------------------------------------------

def cog_exponent_series(cog: TimeSeries, window: int = 5) -> TimeSeries:
    """
    Local exponent α(t) = (t/COG) dCOG/dt.

    The derivative is taken as a central difference of log COG against log t
    over ±window recorded points, shrinking to one-sided differences at the
    ends. A pure power law is reproduced exactly.

    Raises:
        DomainError: On non-positive times or COG values, or fewer than 3 points
    """
    if len(cog) < 3:
        raise DomainError("Need at least 3 points to differentiate COG")
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    if np.any(cog.times <= 0) or np.any(cog.values <= 0):
        raise DomainError("COG exponent needs strictly positive times and values")

    log_t = np.log(cog.times.astype(np.float64))
    log_c = np.log(cog.values)
    last = len(cog) - 1
    lower = np.clip(np.arange(len(cog)) - window, 0, last)
    upper = np.clip(np.arange(len(cog)) + window, 0, last)
    alpha = (log_c[upper] - log_c[lower]) / (log_t[upper] - log_t[lower])
    return TimeSeries(times=cog.times, values=alpha, label="alpha")


def _alpha_model(kappa: float, times: np.ndarray) -> np.ndarray:
    return 1.0 / (kappa * times + 1.0)


def fit_alpha_model(alpha: TimeSeries, fit_range: Optional[Tuple[int, int]] = None) -> AlphaFit:
    """
    Least-squares fit of α(t) = 1/(κt + 1) with κ >= 0.

    A constant-α fit is reported next to it so a flat series can be told
    apart from a slowly decaying one.

    Raises:
        DomainError: If values leave [-0.2, 1.2] or fewer than 2 points remain
    """
    series = alpha if fit_range is None else alpha.between(*fit_range)
    if len(series) < 2:
        raise DomainError("Not enough points to fit α(t)")
    values = series.values
    if np.any(values < ALPHA_RANGE[0]) or np.any(values > ALPHA_RANGE[1]):
        raise DomainError(f"α(t) values outside {list(ALPHA_RANGE)}")

    times = series.times.astype(np.float64)
    span = (int(series.times[0]), int(series.times[-1]))
    constant = float(np.mean(values))
    constant_residual = float(np.sum((values - constant) ** 2))

    if np.all(values == 1.0):
        logger.warning("α(t) is identically 1; returning κ = 0")
        return AlphaFit(
            kappa=0.0, residual=0.0, constant_alpha=1.0, constant_residual=0.0,
            degenerate=True, fit_range=span,
        )

    usable = (values > 0) & (values <= 1)
    guesses = (1.0 / values[usable] - 1.0) / times[usable]
    initial = float(np.median(guesses)) if guesses.size else 1e-3
    initial = max(initial, 1e-9)

    result = least_squares(
        lambda p: _alpha_model(p[0], times) - values,
        x0=[initial],
        bounds=([0.0], [np.inf]),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
    )
    kappa = max(float(result.x[0]), 0.0)
    residual = float(np.sum((_alpha_model(kappa, times) - values) ** 2))
    return AlphaFit(
        kappa=kappa,
        residual=residual,
        constant_alpha=constant,
        constant_residual=constant_residual,
        degenerate=False,
        fit_range=span,
    )


def fit_power_law(series: TimeSeries) -> PowerLawFit:
    """
    Fit COG(t) = β t^α by linear regression on a log-log scale.

    Raises:
        DomainError: On non-positive times or values
    """
    if len(series) < 2:
        raise DomainError("Need at least 2 points for a power-law fit")
    if np.any(series.times <= 0) or np.any(series.values <= 0):
        raise DomainError("Power-law fit needs strictly positive times and values")
    fit = linregress(np.log(series.times.astype(np.float64)), np.log(series.values))
    return PowerLawFit(beta=float(math.exp(fit.intercept)), alpha=float(fit.slope), r_squared=float(fit.rvalue ** 2))


def smooth_series(series: TimeSeries, span: int) -> TimeSeries:
    """Centred moving average over all points with |t_i - t| <= span."""
    if span <= 0:
        return series
    times = series.times
    left = np.searchsorted(times, times - span, side="left")
    right = np.searchsorted(times, times + span, side="right")
    cumulative = np.concatenate([[0.0], np.cumsum(series.values)])
    smoothed = (cumulative[right] - cumulative[left]) / (right - left)
    return TimeSeries(times=times, values=smoothed, label=series.label)


# ---------------------------------------------------------------------------
# Laplace profile
# ---------------------------------------------------------------------------

def default_laplace_window(
    density: DensityLike,
    origin: Optional[int] = None,
    t: Optional[int] = None,
    floor: float = LAPLACE_FLOOR,
    margin: int = LAPLACE_FRONT_MARGIN,
) -> Tuple[int, int]:
    """
    Region where the density exceeds `floor`, kept `margin` sites inside the
    ballistic fronts at ±t/√2.
    """
    values, positions = _resolve(density, origin)
    above = positions[values > floor]
    if above.size == 0:
        raise WindowInvalidError(f"Density never exceeds {floor}")
    low, high = int(above[0]), int(above[-1])
    if t is not None:
        front = int(math.floor(t * KONNO_EDGE)) - margin
        low, high = max(low, -front), min(high, front)
    if low >= high:
        raise WindowInvalidError(f"Empty Laplace window [{low}, {high}]")
    return low, high


def fit_laplace(
    density: DensityLike,
    origin: Optional[int] = None,
    window: Optional[Tuple[int, int]] = None,
    t: Optional[int] = None,
    same_parity: bool = True,
) -> LaplaceFit:
    """
    Fit P(x) = A/(2δ) exp(-|x - x0|/δ) on a window.

    x0 is the density argmax. log P is regressed on |x - x0|, so the slope is
    -1/δ. With `same_parity` only sites of the argmax's parity are used,
    since a walk at time t only occupies sites with n ≡ t (mod 2).

    Raises:
        WindowInvalidError: If the window holds a zero or fewer than 3 points,
            or if the density does not decay away from x0
    """
    values, positions = _resolve(density, origin)
    if window is None:
        window = default_laplace_window(values, int(-positions[0]), t)
    low, high = window
    x0 = int(positions[np.argmax(values)])

    mask = (positions >= low) & (positions <= high)
    if same_parity:
        mask &= (positions - x0) % 2 == 0
    selected = values[mask]
    if selected.size < 3:
        raise WindowInvalidError(f"Window [{low}, {high}] holds fewer than 3 usable sites")
    if np.any(selected <= 0):
        raise WindowInvalidError(f"Density vanishes inside window [{low}, {high}]")

    distance = np.abs(positions[mask] - x0).astype(np.float64)
    if np.all(distance == distance[0]):
        raise WindowInvalidError("Window has no spread in |x - x0|")
    log_values = np.log(selected)
    fit = linregress(distance, log_values)
    if fit.slope >= 0:
        raise WindowInvalidError("Density does not decay away from its maximum")

    delta = -1.0 / fit.slope
    predicted = fit.intercept + fit.slope * distance
    return LaplaceFit(
        amplitude=float(2.0 * delta * math.exp(fit.intercept)),
        x0=x0,
        delta_t=float(delta),
        residual=float(math.sqrt(np.mean((log_values - predicted) ** 2))),
        r_squared=float(fit.rvalue ** 2),
        window=(int(low), int(high)),
    )


# ---------------------------------------------------------------------------
# reference oracles
# ---------------------------------------------------------------------------

def hadamard_asymmetry(plus: complex = KONNO_EDGE, minus: complex = KONNO_EDGE) -> float:
    """
    Drift coefficient λ of the Hadamard limit law for a localized start
    (plus, minus), with the upper component moving right.
    """
    plus, minus = complex(plus), complex(minus)
    return float(abs(plus) ** 2 - abs(minus) ** 2 + 2.0 * (plus * minus.conjugate()).real)


def konno_limit_density(x, asymmetry: float = 0.0, printed: bool = False):
    """
    Weak-limit density of X_t/t for the Hadamard walk,

        (1 + λx) / (π (1 - x²) √(1 - 2x²))   on |x| < 1/√2,

    zero outside and +inf on the edges. `printed=True` returns the form
    1/(π √(1 - x²) √(1 - 2x²)), which does not integrate to 1.
    """
    arr = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(1.0 - 2.0 * arr ** 2)
        if printed:
            inner = 1.0 / (math.pi * np.sqrt(1.0 - arr ** 2) * root)
        else:
            inner = (1.0 + asymmetry * arr) / (math.pi * (1.0 - arr ** 2) * root)
    edge = np.isclose(np.abs(arr), KONNO_EDGE, rtol=0.0, atol=1e-15)
    result = np.where(np.abs(arr) < KONNO_EDGE, inner, 0.0)
    result = np.where(edge, np.inf, result)
    if result.ndim == 0:
        return float(result)
    return result


def konno_cdf(x, asymmetry: float = 0.0):
    """Closed-form distribution function of konno_limit_density."""
    arr = np.clip(np.asarray(x, dtype=np.float64), -KONNO_EDGE, KONNO_EDGE)
    root = np.sqrt(np.maximum(1.0 - 2.0 * arr ** 2, 0.0))
    with np.errstate(divide="ignore"):
        central = np.arctan2(arr, root)
    result = 0.5 + central / math.pi - asymmetry / math.pi * np.arctan(root)
    result = np.clip(result, 0.0, 1.0)
    if result.ndim == 0:
        return float(result)
    return result


def ks_distance_to_konno(
    density: DensityLike,
    origin: Optional[int] = None,
    t: int = 1,
    asymmetry: float = 0.0,
) -> float:
    """Kolmogorov-Smirnov distance between the law of X_t/t and the Konno limit."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    values, positions = _resolve(density, origin)
    scaled = positions / float(t)
    after = np.cumsum(values)
    before = after - values
    reference = konno_cdf(scaled, asymmetry)
    return float(max(np.max(np.abs(after - reference)), np.max(np.abs(before - reference))))


def heat_kernel_cog(t, constant: float = HEAT_KERNEL_CONSTANT):
    """
    Half-side COG of a heat kernel, c·√t.

    Raises:
        DomainError: If t <= 0
    """
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr <= 0):
        raise DomainError("heat_kernel_cog needs t > 0")
    result = constant * np.sqrt(arr)
    if result.ndim == 0:
        return float(result)
    return result


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def average_ensemble(runs: Sequence[np.ndarray], times: Sequence[int]) -> EnsembleDensity:
    """
    Pointwise mean of per-seed density snapshots.

    Args:
        runs: One array per seed, shape (len(times), N), in a fixed order
        times: Recorded steps shared by every run

    Raises:
        ShapeMismatchError: If runs differ in shape or disagree with `times`
    """
    if not runs:
        raise ShapeMismatchError("No runs to average")
    arrays = [np.asarray(run, dtype=np.float64) for run in runs]
    expected = arrays[0].shape
    if len(expected) != 2 or expected[0] != len(times):
        raise ShapeMismatchError(f"Run shape {expected} does not match {len(times)} snapshots")
    for index, arr in enumerate(arrays):
        if arr.shape != expected:
            raise ShapeMismatchError(f"Run {index} has shape {arr.shape}, expected {expected}")
    mean = np.mean(np.stack(arrays), axis=0)
    return EnsembleDensity(times=list(times), mean_density=mean, seed_count=len(arrays))


class DensityMoments:
    """
    Linear functionals of the density recorded along one run.

    Columns are the half-side mass and first moment, the full moments 0-2,
    the window mass and η. All are linear in the density (η in σ⁺ conj σ⁻),
    so averaging them over seeds and then forming COG, SD and window density
    equals evaluating those observables on the mean density.

    Instances are callable and can be passed to walk.evolve as observers.
    """

    COLUMNS = ("half_mass", "half_first", "mass", "first", "second", "window_mass", "eta")

    def __init__(self, times: Iterable[int], window_half_width: int = 50):
        self.times = sorted(set(int(t) for t in times))
        self.window_half_width = window_half_width
        self._index = {t: i for i, t in enumerate(self.times)}
        self.table = np.full((len(self.times), len(self.COLUMNS)), np.nan)

    def __call__(self, t: int, state: WalkState) -> None:
        row = self._index.get(t)
        if row is None:
            return
        values = state_density(state)
        positions = state.positions().astype(np.float64)
        right = positions >= 0
        inside = np.abs(positions) <= self.window_half_width
        self.table[row] = (
            values[right].sum(),
            np.dot(positions[right], values[right]),
            values.sum(),
            np.dot(positions, values),
            np.dot(positions ** 2, values),
            values[inside].sum(),
            correlation_eta(state),
        )

    @property
    def complete(self) -> bool:
        return not np.isnan(self.table).any()

    @classmethod
    def mean(cls, items: Sequence["DensityMoments"]) -> "DensityMoments":
        """Average in the given order; callers pass a seed-sorted list."""
        if not items:
            raise ShapeMismatchError("No moment tables to average")
        first = items[0]
        for other in items[1:]:
            if other.times != first.times or other.window_half_width != first.window_half_width:
                raise ShapeMismatchError("Moment tables were recorded on different schedules")
        merged = cls(first.times, first.window_half_width)
        merged.table = np.mean(np.stack([item.table for item in items]), axis=0)
        return merged

    def _column(self, name: str) -> np.ndarray:
        return self.table[:, self.COLUMNS.index(name)]

    def _series(self, values: np.ndarray, label: str) -> TimeSeries:
        return TimeSeries(times=self.times, values=values, label=label)

    def cog(self) -> TimeSeries:
        mass = self._column("half_mass")
        if np.any(mass <= 0):
            raise UndefinedCOGError("Half-side density is zero at some recorded step")
        return self._series(self._column("half_first") / mass, "cog")

    def sd(self) -> TimeSeries:
        first = self._column("first")
        variance = np.maximum(self._column("second") - first ** 2, 0.0)
        return self._series(np.sqrt(variance), "sd")

    def window(self) -> TimeSeries:
        return self._series(self._column("window_mass"), "window")

    def eta(self) -> TimeSeries:
        return self._series(self._column("eta"), "eta")

    def max_norm_error(self) -> float:
        return float(np.max(np.abs(self._column("mass") - 1.0)))

