"""
Tests for observables, fits and reference oracles.
"""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from qwalk.analysis import (
    HEAT_KERNEL_CONSTANT,
    KONNO_EDGE,
    DensityMoments,
    average_ensemble,
    cog_exponent_series,
    cog_half,
    correlation_eta,
    fit_alpha_model,
    fit_laplace,
    fit_power_law,
    front_peaks,
    hadamard_asymmetry,
    heat_kernel_cog,
    konno_cdf,
    konno_limit_density,
    ks_distance_to_konno,
    smooth_series,
    std_dev,
    window_density,
)
from qwalk.coins import build_field, make_rng
from qwalk.exceptions import (
    DomainError,
    ShapeMismatchError,
    UndefinedCOGError,
    WindowInvalidError,
)
from qwalk.models import CoinFamily, TimeSeries
from qwalk.walk import default_lattice_size, density, evolve, make_initial_state, step

HADAMARD = CoinFamily(tag="Hadamard")


def delta(size, position):
    """Unit mass at a coordinate relative to the centre."""
    values = np.zeros(size)
    values[size // 2 + position] = 1.0
    return values


def hadamard_run(horizon, observers=()):
    size = default_lattice_size(horizon)
    return evolve(make_initial_state(size), build_field(HADAMARD, size), horizon, observers=observers)


class TestCenterOfGravity:
    """Test the half-side centre of gravity."""

    def test_delta(self):
        """Test a delta at n = +5."""
        assert cog_half(delta(21, 5)) == 5.0

    def test_uniform_right_side(self):
        """Test uniform mass on n ∈ {0, 1, 2}."""
        values = np.zeros(21)
        values[10:13] = 1 / 3
        assert cog_half(values) == pytest.approx(1.0)

    def test_origin_included(self):
        """Test that the origin counts toward the half-side mass."""
        values = np.zeros(21)
        values[10] = 0.5
        values[14] = 0.5
        assert cog_half(values) == pytest.approx(2.0)

    def test_mirror(self):
        """Test the half-side COG of an explicitly mirrored density."""
        rng = np.random.default_rng(0)
        values = rng.random(41)
        values /= values.sum()
        mirrored = values[::-1]
        symmetric = (values + mirrored) / 2
        assert cog_half(symmetric) == pytest.approx(cog_half(symmetric[::-1]))

    def test_left_only_is_undefined(self):
        """Test zero half-side mass."""
        with pytest.raises(UndefinedCOGError, match="undefined"):
            cog_half(delta(21, -3))

    def test_accepts_state(self):
        """Test that a WalkState can be passed directly."""
        assert cog_half(make_initial_state(9)) == 0.0


class TestStandardDeviation:
    """Test the standard deviation."""

    def test_delta_at_origin(self):
        """Test zero spread."""
        assert std_dev(delta(11, 0)) == 0.0

    def test_symmetric_pair(self):
        """Test deltas at ±a with weight 1/2 each."""
        values = (delta(31, 7) + delta(31, -7)) / 2
        assert std_dev(values) == pytest.approx(7.0)


class TestWindowDensity:
    """Test the central window mass."""

    def test_initial_state(self):
        """Test that the initial state is fully inside."""
        assert window_density(make_initial_state(201), half_width=50) == pytest.approx(1.0, abs=1e-15)

    def test_hadamard_escapes(self):
        """Test ballistic escape at t = 3000."""
        final = hadamard_run(3000)
        assert window_density(final, half_width=50) < 0.05

    def test_window_too_wide(self):
        """Test a window larger than the lattice."""
        with pytest.raises(DomainError, match="exceeds the lattice"):
            window_density(delta(21, 0), half_width=11)


class TestCorrelation:
    """Test the half-side correlation η."""

    def test_first_steps(self):
        """Test η at t = 0, 1, 3 of the Hadamard walk."""
        field = build_field(HADAMARD, 11)
        state = make_initial_state(11)
        assert correlation_eta(state) == pytest.approx(0.5)
        state = step(state, field)
        assert correlation_eta(state) == pytest.approx(0.0)
        state = step(step(state, field), field)
        assert correlation_eta(state) == pytest.approx(0.25)

    def test_hadamard_plateau(self):
        """Test that η settles to a plateau at late times."""
        values = []

        def record(t, state):
            if t >= 2000 and t % 25 == 0:
                values.append(correlation_eta(state))

        hadamard_run(3000, observers=[record])
        assert max(values) - min(values) < 0.05


class TestCogExponent:
    """Test the local COG exponent α(t)."""

    def test_linear(self):
        """Test α = 1 for COG = c t."""
        times = np.arange(100, 3001, 25)
        alpha = cog_exponent_series(TimeSeries(times=times, values=0.7 * times, label="cog"))
        np.testing.assert_allclose(alpha.values, 1.0, atol=1e-10)

    def test_square_root(self):
        """Test α = 1/2 for COG = c √t."""
        times = np.arange(100, 3001)
        alpha = cog_exponent_series(TimeSeries(times=times, values=3.0 * np.sqrt(times), label="cog"))
        np.testing.assert_allclose(alpha.values, 0.5, atol=1e-3)

    def test_scale_invariance(self):
        """Test that multiplying COG by a constant leaves α and κ unchanged."""
        times = np.arange(200, 3001, 25)
        values = times / (0.002 * times + 1) ** 0.5
        base = cog_exponent_series(TimeSeries(times=times, values=values, label="cog"))
        scaled = cog_exponent_series(TimeSeries(times=times, values=42.0 * values, label="cog"))
        np.testing.assert_allclose(base.values, scaled.values, atol=1e-12)
        assert fit_alpha_model(base).kappa == pytest.approx(fit_alpha_model(scaled).kappa, rel=1e-6)

    def test_non_positive_values(self):
        """Test that log-differences need positive COG values."""
        with pytest.raises(DomainError, match="strictly positive"):
            cog_exponent_series(TimeSeries(times=[1, 2, 3], values=[1.0, 0.0, 2.0], label="cog"))

    def test_too_short(self):
        """Test that at least 3 points are needed."""
        with pytest.raises(DomainError, match="at least 3"):
            cog_exponent_series(TimeSeries(times=[1, 2], values=[1.0, 2.0], label="cog"))


class TestAlphaFit:
    """Test the κ fit of α(t) = 1/(κt + 1)."""

    def test_recovers_kappa(self):
        """Test exact recovery of κ = 0.003."""
        times = np.arange(200, 3001, 25)
        series = TimeSeries(times=times, values=1 / (0.003 * times + 1), label="alpha")
        fit = fit_alpha_model(series)
        assert fit.kappa == pytest.approx(0.003, abs=1e-6)
        assert fit.residual < 1e-12
        assert not fit.degenerate

    def test_constant_one(self):
        """Test the degenerate α ≡ 1 case."""
        series = TimeSeries(times=np.arange(1, 50), values=np.ones(49), label="alpha")
        fit = fit_alpha_model(series)
        assert fit.kappa == 0.0
        assert fit.degenerate

    def test_fit_range(self):
        """Test restriction to a fit range."""
        times = np.arange(25, 3001, 25)
        series = TimeSeries(times=times, values=1 / (0.05 * times + 1), label="alpha")
        fit = fit_alpha_model(series, (200, 3000))
        assert fit.fit_range == (200, 3000)
        assert fit.kappa == pytest.approx(0.05, rel=1e-6)

    def test_out_of_range_values(self):
        """Test that wild values are rejected."""
        series = TimeSeries(times=[1, 2, 3], values=[1.0, 1.5, 0.9], label="alpha")
        with pytest.raises(DomainError, match="outside"):
            fit_alpha_model(series)


class TestPowerLaw:
    """Test the log-log power-law fit."""

    def test_exact_power_law(self):
        """Test β t^α recovery."""
        times = np.arange(10, 1000, 10)
        fit = fit_power_law(TimeSeries(times=times, values=2.5 * times ** 0.8, label="cog"))
        assert fit.alpha == pytest.approx(0.8, abs=1e-12)
        assert fit.beta == pytest.approx(2.5, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0)


class TestLaplaceFit:
    """Test the Laplace profile fit."""

    def setup_method(self):
        """Setup method for each test."""
        positions = np.arange(-200, 201)
        self.values = np.exp(-np.abs(positions) / 25.0) / (2 * 25.0)
        self.values /= self.values.sum()

    def test_exact_profile(self):
        """Test δ recovery on exact Laplace samples."""
        fit = fit_laplace(self.values, window=(-100, 100), same_parity=False)
        assert fit.delta_t == pytest.approx(25.0, abs=1e-9)
        assert fit.x0 == 0
        assert fit.r_squared == pytest.approx(1.0)

    def test_parity_mask(self):
        """Test the fit on one parity class only."""
        fit = fit_laplace(self.values, window=(-100, 100), same_parity=True)
        assert fit.delta_t == pytest.approx(25.0, abs=1e-9)

    def test_amplitude(self):
        """Test that A matches the normalisation of the profile."""
        fit = fit_laplace(self.values, window=(-100, 100), same_parity=False)
        expected = 2 * 25.0 * self.values[200]
        assert fit.amplitude == pytest.approx(expected, rel=1e-9)

    def test_delta_distribution(self):
        """Test that zeros inside the window are rejected."""
        with pytest.raises(WindowInvalidError, match="vanishes"):
            fit_laplace(delta(101, 0), window=(-10, 10))

    def test_default_window(self):
        """Test the default window keeps away from the fronts."""
        fit = fit_laplace(self.values, t=100, same_parity=False)
        front = math.floor(100 / math.sqrt(2)) - 10
        assert fit.window[0] >= -front and fit.window[1] <= front


class TestKonnoOracle:
    """Test the Hadamard weak-limit density."""

    def test_centre_value(self):
        """Test f(0) = 1/π."""
        assert konno_limit_density(0.0) == pytest.approx(1 / math.pi)

    def test_outside_support(self):
        """Test zero outside |x| < 1/√2."""
        assert konno_limit_density(0.8) == 0.0
        assert konno_limit_density(-0.8) == 0.0

    def test_edge_is_infinite(self):
        """Test the integrable singularity at the edge."""
        assert math.isinf(konno_limit_density(KONNO_EDGE))

    def test_normalized(self):
        """Test that the density integrates to 1 over its support."""
        # algebraic weight (x+b)^-1/2 (b-x)^-1/2 carries the edge singularity
        total, _ = quad(
            lambda x: 1 / (math.pi * math.sqrt(2) * (1 - x * x)),
            -KONNO_EDGE, KONNO_EDGE, weight="alg", wvar=(-0.5, -0.5),
        )
        assert total == pytest.approx(1.0, abs=1e-6)
        direct, _ = quad(konno_limit_density, -KONNO_EDGE, KONNO_EDGE, limit=200)
        assert direct == pytest.approx(1.0, abs=1e-6)

    def test_printed_form_not_normalized(self):
        """Test that the printed form integrates to less than 1."""
        total, _ = quad(lambda x: konno_limit_density(x, printed=True), -KONNO_EDGE, KONNO_EDGE, limit=200)
        assert total < 0.9

    def test_asymmetric_density_normalized(self):
        """Test that the drift term integrates to zero."""
        total, _ = quad(lambda x: konno_limit_density(x, asymmetry=1.0), -KONNO_EDGE, KONNO_EDGE, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_cdf(self):
        """Test the closed-form distribution function."""
        assert konno_cdf(-KONNO_EDGE) == pytest.approx(0.0, abs=1e-7)
        assert konno_cdf(KONNO_EDGE, asymmetry=1.0) == pytest.approx(1.0)
        assert konno_cdf(0.0) == pytest.approx(0.5)
        for x in (-0.5, -0.1, 0.3, 0.65):
            integral, _ = quad(lambda u: konno_limit_density(u, asymmetry=1.0), -KONNO_EDGE, x, limit=200)
            assert konno_cdf(x, asymmetry=1.0) == pytest.approx(integral, abs=1e-7)

    def test_asymmetry_of_default_state(self):
        """Test λ = 1 for the (1/√2, 1/√2) start and λ = ±1 for pure components."""
        assert hadamard_asymmetry() == pytest.approx(1.0)
        assert hadamard_asymmetry(1.0, 0.0) == pytest.approx(1.0)
        assert hadamard_asymmetry(0.0, 1.0) == pytest.approx(-1.0)
        assert hadamard_asymmetry(1 / math.sqrt(2), 1j / math.sqrt(2)) == pytest.approx(0.0)

    def test_hadamard_walk_ks_distance(self):
        """Test the walk at t = 3000 against the weak limit."""
        horizon = 3000
        final = hadamard_run(horizon)
        distance = ks_distance_to_konno(final, t=horizon, asymmetry=hadamard_asymmetry())
        assert distance <= 0.05

    def test_symmetric_start_ks_distance(self):
        """Test a symmetric start against the symmetric limit."""
        horizon = 2000
        size = default_lattice_size(horizon)
        start = make_initial_state(size, plus=1 / math.sqrt(2), minus=1j / math.sqrt(2))
        final = evolve(start, build_field(HADAMARD, size), horizon)
        assert ks_distance_to_konno(final, t=horizon) <= 0.05

    def test_hadamard_front_peaks(self):
        """Test density peaks near ±t/√2."""
        horizon = 3000
        left, right = front_peaks(density(hadamard_run(horizon)))
        assert abs(right - horizon / math.sqrt(2)) < 60
        assert abs(left + horizon / math.sqrt(2)) < 60


class TestHeatKernel:
    """Test the heat-kernel COG."""

    def test_exponent(self):
        """Test that the fitted exponent is exactly 1/2."""
        times = np.arange(1, 1001)
        series = TimeSeries(times=times, values=heat_kernel_cog(times), label="cog")
        assert fit_power_law(series).alpha == pytest.approx(0.5, abs=1e-12)

    def test_scaling(self):
        """Test √t scaling."""
        assert heat_kernel_cog(400.0) / heat_kernel_cog(100.0) == pytest.approx(2.0)

    def test_constant(self):
        """Test the default constant √(1/2π)."""
        assert heat_kernel_cog(1.0) == pytest.approx(math.sqrt(1 / (2 * math.pi)))
        assert heat_kernel_cog(1.0, constant=2.0) == 2.0
        assert HEAT_KERNEL_CONSTANT == pytest.approx(0.3989422804014327)

    def test_domain(self):
        """Test t <= 0."""
        with pytest.raises(DomainError, match="t > 0"):
            heat_kernel_cog(0.0)


class TestEnsemble:
    """Test ensemble averaging."""

    def test_single_run(self):
        """Test that one run averages to itself."""
        run = np.vstack([delta(11, 0), delta(11, 2)])
        ensemble = average_ensemble([run], [0, 2])
        np.testing.assert_array_equal(ensemble.mean_density, run)
        assert ensemble.seed_count == 1

    def test_mirror_runs(self):
        """Test that mirror-image runs give a symmetric mean."""
        rng = np.random.default_rng(3)
        values = rng.random(21)
        values /= values.sum()
        ensemble = average_ensemble([values[None, :], values[::-1][None, :]], [10])
        np.testing.assert_allclose(ensemble.at(10), ensemble.at(10)[::-1], atol=1e-15)

    def test_shape_mismatch(self):
        """Test runs on different lattices."""
        with pytest.raises(ShapeMismatchError, match="shape"):
            average_ensemble([delta(11, 0)[None, :], delta(13, 0)[None, :]], [0])

    def test_snapshot_count_mismatch(self):
        """Test a run that disagrees with the snapshot schedule."""
        with pytest.raises(ShapeMismatchError, match="snapshots"):
            average_ensemble([delta(11, 0)[None, :]], [0, 1])

    def test_missing_snapshot(self):
        """Test lookup of an unrecorded step."""
        ensemble = average_ensemble([delta(11, 0)[None, :]], [0])
        with pytest.raises(KeyError, match="t=5"):
            ensemble.at(5)


class TestDensityMoments:
    """Test linear moment accumulators."""

    def setup_method(self):
        """Setup method for each test."""
        self.horizon = 120
        self.size = default_lattice_size(self.horizon)
        self.times = list(range(0, self.horizon + 1, 20))
        family = CoinFamily(tag="RandomB", gamma=0.5, impurity_count=25)
        self.moments = []
        self.densities = []
        for seed in (1, 2, 3):
            moments = DensityMoments(self.times, window_half_width=10)
            rows = {}

            def keep(t, state, rows=rows):
                if t in self.times:
                    rows[t] = density(state)

            field = build_field(family, self.size, make_rng(seed))
            evolve(make_initial_state(self.size), field, self.horizon, observers=[moments, keep])
            self.moments.append(moments)
            self.densities.append(np.vstack([rows[t] for t in self.times]))

    def test_complete(self):
        """Test every scheduled step was recorded."""
        assert all(m.complete for m in self.moments)
        assert self.moments[0].max_norm_error() < 1e-12

    def test_ensemble_observables_equal_mean_density(self):
        """Test that averaged moments reproduce observables of the mean density."""
        merged = DensityMoments.mean(self.moments)
        ensemble = average_ensemble(self.densities, self.times)
        origin = self.size // 2
        for row, t in enumerate(self.times):
            mean_density = ensemble.at(t)
            assert merged.cog().values[row] == pytest.approx(cog_half(mean_density, origin), abs=1e-10)
            assert merged.sd().values[row] == pytest.approx(std_dev(mean_density, origin), abs=1e-9)
            assert merged.window().values[row] == pytest.approx(
                window_density(mean_density, origin, 10), abs=1e-12
            )

    def test_schedule_mismatch(self):
        """Test that tables on different schedules cannot be merged."""
        other = DensityMoments([0, 10], window_half_width=10)
        with pytest.raises(ShapeMismatchError, match="different schedules"):
            DensityMoments.mean([self.moments[0], other])


class TestSmoothing:
    """Test centred moving averages."""

    def test_constant_series(self):
        """Test that a constant series is unchanged."""
        series = TimeSeries(times=np.arange(0, 500, 25), values=np.full(20, 0.3), label="window")
        np.testing.assert_allclose(smooth_series(series, 25).values, 0.3)

    def test_three_point_average(self):
        """Test a span covering the two neighbours."""
        series = TimeSeries(times=[0, 25, 50, 75], values=[0.0, 3.0, 6.0, 9.0], label="window")
        smoothed = smooth_series(series, 25)
        np.testing.assert_allclose(smoothed.values, [1.5, 3.0, 6.0, 7.5])
