"""
Tests for coin matrices, impurity sampling and field construction.
"""
import numpy as np
import pytest

from qwalk.coins import (
    ALGORITHM_ID,
    a_impurity_coin,
    b_impurity_coin,
    build_field,
    hadamard_coin,
    make_rng,
    relocate_collision,
    sample_impurity_sites,
    seed_schedule,
)
from qwalk.exceptions import InvalidLatticeError, OverOccupationError
from qwalk.models import CoinFamily, unitarity_residual


class TestCoins:
    """Test the coin matrices."""

    def test_hadamard_entries(self):
        """Test the Hadamard coin."""
        expected = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        np.testing.assert_allclose(hadamard_coin().entries, expected, atol=1e-16)

    @pytest.mark.parametrize("gamma", [-np.pi + 1e-3, -0.3, 0.0, 0.2, 0.5, np.pi])
    def test_impurity_coins_unitary(self, gamma):
        """Test unitarity within 1e-15 for every phase."""
        for coin in (a_impurity_coin(gamma), b_impurity_coin(gamma)):
            assert unitarity_residual(coin.entries) < 1e-15

    def test_zero_phase_reduces_to_hadamard(self):
        """Test that both impurities are the Hadamard coin at γ = 0."""
        assert a_impurity_coin(0.0) == hadamard_coin()
        assert b_impurity_coin(0.0) == hadamard_coin()

    def test_phase_positions(self):
        """Test where the phase enters each impurity."""
        gamma = 0.3
        delta = np.exp(1j * gamma)
        a = a_impurity_coin(gamma).entries * np.sqrt(2)
        b = b_impurity_coin(gamma).entries * np.sqrt(2)
        assert a[0, 0] == pytest.approx(delta)
        assert a[1, 1] == pytest.approx(-np.conj(delta))
        assert b[0, 1] == pytest.approx(delta)
        assert b[1, 0] == pytest.approx(np.conj(delta))

    def test_non_finite_phase(self):
        """Test that a NaN phase is rejected."""
        with pytest.raises(ValueError, match="finite"):
            b_impurity_coin(float("nan"))


class TestRng:
    """Test seeded random streams."""

    def test_same_seed_same_stream(self):
        """Test reproducibility from the seed alone."""
        first = make_rng(42).generator.integers(0, 1000, 20)
        second = make_rng(42).generator.integers(0, 1000, 20)
        np.testing.assert_array_equal(first, second)

    def test_neighbouring_seeds_differ(self):
        """Test that seeds 1 and 2 give different streams."""
        first = make_rng(1).generator.integers(0, 10 ** 9, 5)
        second = make_rng(2).generator.integers(0, 10 ** 9, 5)
        assert not np.array_equal(first, second)

    def test_negative_seed(self):
        """Test that seeds must be unsigned."""
        with pytest.raises(ValueError, match="64-bit unsigned"):
            make_rng(-1)

    def test_seed_schedule(self):
        """Test the default 1..100 schedule."""
        seeds = seed_schedule()
        assert seeds[0] == 1 and seeds[-1] == 100 and len(seeds) == 100
        with pytest.raises(ValueError, match="Empty"):
            seed_schedule(5, 4)


class TestRelocation:
    """Test collision relocation."""

    def test_free_site_kept(self):
        """Test that a free site is returned unchanged."""
        assert relocate_collision({3}, 5, 10) == 5

    def test_positive_direction_first(self):
        """Test that +d is tried before -d."""
        assert relocate_collision({5}, 5, 10) == 6
        assert relocate_collision({5, 6}, 5, 10) == 4
        assert relocate_collision({4, 5, 6}, 5, 10) == 7

    def test_upper_edge(self):
        """Test relocation at the last site goes left."""
        assert relocate_collision({9}, 9, 10) == 8

    def test_full_lattice(self):
        """Test that a full lattice raises."""
        with pytest.raises(OverOccupationError, match="occupied"):
            relocate_collision(set(range(4)), 2, 4)


class TestSampling:
    """Test impurity site sampling."""

    @pytest.mark.parametrize("mode", ["relocate", "distinct"])
    def test_distinct_sorted_sites(self, mode):
        """Test that M distinct sorted sites are returned."""
        sites = sample_impurity_sites(6000, 300, make_rng(7), mode)
        assert len(sites) == 300
        assert sites == sorted(set(sites))
        assert 0 <= sites[0] and sites[-1] < 6000

    def test_dense_relocation(self):
        """Test relocation still fills M distinct sites at high density."""
        sites = sample_impurity_sites(20, 19, make_rng(3), "relocate")
        assert len(set(sites)) == 19

    def test_over_occupation(self):
        """Test that M >= N raises."""
        with pytest.raises(OverOccupationError, match="Cannot place 10"):
            sample_impurity_sites(10, 10, make_rng(1))

    def test_unknown_mode(self):
        """Test that an unknown sampling mode raises."""
        with pytest.raises(ValueError, match="Unknown sampling mode"):
            sample_impurity_sites(10, 2, make_rng(1), "poisson")

    @pytest.mark.parametrize("mode", ["relocate", "distinct"])
    def test_uniform_over_seeds(self, mode):
        """Test per-site occupation counts over many seeds against a binomial."""
        size, count, seeds = 100, 5, 4000
        hits = np.zeros(size)
        for seed in range(1, seeds + 1):
            hits[sample_impurity_sites(size, count, make_rng(seed), mode)] += 1
        p = count / size
        expected = seeds * p
        standard_error = np.sqrt(seeds * p * (1 - p))
        z = np.abs(hits - expected) / standard_error
        assert np.mean(z <= 3.0) >= 0.95
        assert np.all(z <= 4.5)


class TestBuildField:
    """Test coin-field construction per family."""

    def test_hadamard_field(self):
        """Test a uniform Hadamard field."""
        field = build_field(CoinFamily(tag="Hadamard"), 9)
        assert field.size == 9
        assert all(field.coin(i) == hadamard_coin() for i in range(9))
        assert field.provenance.impurity_count == 0
        assert field.provenance.seed is None

    @pytest.mark.parametrize("tag,maker", [("AImpurity", a_impurity_coin), ("BImpurity", b_impurity_coin)])
    def test_single_impurity_at_origin(self, tag, maker):
        """Test that only the centre site carries the impurity."""
        field = build_field(CoinFamily(tag=tag, gamma=0.3), 11)
        assert field.coin(5) == maker(0.3)
        assert field.coin(4) == hadamard_coin()
        assert field.coin(6) == hadamard_coin()
        assert field.provenance.sites == [5]

    def test_random_field_reproducible(self):
        """Test that the same seed rebuilds the same field."""
        family = CoinFamily(tag="RandomB", gamma=0.3, impurity_count=300)
        first = build_field(family, 6000, make_rng(5))
        second = build_field(family, 6000, make_rng(5))
        np.testing.assert_array_equal(first.coins, second.coins)
        assert first.provenance == second.provenance
        assert first.provenance.seed == 5
        assert first.provenance.algorithm_id == ALGORITHM_ID
        assert first.provenance.impurity_count == 300

    def test_random_field_places_b_impurities(self):
        """Test the coins at sampled sites."""
        family = CoinFamily(tag="RandomB", gamma=0.5, impurity_count=30)
        field = build_field(family, 500, make_rng(9))
        for site in field.provenance.sites:
            assert field.coin(site) == b_impurity_coin(0.5)
        untouched = sorted(set(range(500)) - set(field.provenance.sites))
        assert field.coin(untouched[0]) == hadamard_coin()

    def test_random_field_from_density(self):
        """Test that a density resolves to M = round(pN)."""
        family = CoinFamily(tag="RandomB", gamma=0.2, density=0.05)
        field = build_field(family, 6000, make_rng(1))
        assert field.provenance.impurity_count == 300

    def test_random_field_needs_rng(self):
        """Test that RandomB without a stream is rejected."""
        with pytest.raises(ValueError, match="seeded rng"):
            build_field(CoinFamily(tag="RandomB", impurity_count=3), 50)

    def test_random_over_occupation(self):
        """Test M >= N for a RandomB field."""
        with pytest.raises(OverOccupationError):
            build_field(CoinFamily(tag="RandomB", impurity_count=10), 10, make_rng(1))

    def test_small_lattice(self):
        """Test that N < 3 is rejected."""
        with pytest.raises(InvalidLatticeError):
            build_field(CoinFamily(tag="Hadamard"), 2)
