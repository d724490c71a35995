"""
Coin matrices and coin-field construction.

Every function returns complex128 arrays; fields are wrapped in CoinField
with a provenance record so results can be traced to the exact configuration.

Available coins
---------------
- hadamard_coin(): (1/√2)[[1, 1], [1, -1]]
- a_impurity_coin(γ): (1/√2)[[e^{iγ}, 1], [1, -e^{-iγ}]]
- b_impurity_coin(γ): (1/√2)[[1, e^{iγ}], [e^{-iγ}, -1]]
"""
import logging
from typing import AbstractSet, List, Optional

import numpy as np

from .exceptions import InvalidLatticeError, OverOccupationError
from .models import Coin, CoinFamily, CoinField, FieldProvenance

logger = logging.getLogger(__name__)

ALGORITHM_ID = "numpy.PCG64+SeedSequence"
SAMPLING_MODES = ("relocate", "distinct")


def hadamard_coin() -> Coin:
    """Return the Hadamard coin."""
    return Coin(entries=np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0))


def a_impurity_coin(gamma: float) -> Coin:
    """
    Return the A-impurity coin: phase on the diagonal.

    Parameters
    ----------
    gamma: float
        Phase γ in radians.
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    delta = np.exp(1j * gamma)
    return Coin(
        entries=np.array([[delta, 1.0], [1.0, -np.conj(delta)]], dtype=np.complex128) / np.sqrt(2.0)
    )


def b_impurity_coin(gamma: float) -> Coin:
    """
    Return the B-impurity coin: phase on the off-diagonal.

    Parameters
    ----------
    gamma: float
        Phase γ in radians.
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    delta = np.exp(1j * gamma)
    return Coin(
        entries=np.array([[1.0, delta], [np.conj(delta), -1.0]], dtype=np.complex128) / np.sqrt(2.0)
    )


class SeededRng:
    """
    Seeded pseudo-random stream.

    PCG64 is fed through numpy's SeedSequence, which mixes the integer seed so
    neighbouring seeds give decorrelated streams. The same seed always yields
    the same stream for a given numpy release.
    """

    algorithm_id = ALGORITHM_ID

    def __init__(self, seed: int):
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, algorithm_id={self.algorithm_id!r})"


def make_rng(seed: int) -> SeededRng:
    """Create a fresh stream for one seed; never share it between tasks."""
    return SeededRng(seed)


def seed_schedule(first: int = 1, last: int = 100) -> List[int]:
    """Inclusive range of consecutive seeds used for an ensemble."""
    if last < first:
        raise ValueError(f"Empty seed schedule {first}..{last}")
    return list(range(first, last + 1))


def relocate_collision(occupied: AbstractSet[int], site: int, lattice_size: int) -> int:
    """
    Nearest free site to `site`, scanning d = 1, 2, ... with +d before -d.

    Args:
        occupied: Sites already holding an impurity
        site: Requested site
        lattice_size: Number of sites N

    Returns:
        `site` itself when free, otherwise the nearest free site

    Raises:
        OverOccupationError: If every site is occupied
    """
    if len(occupied) >= lattice_size:
        raise OverOccupationError(f"All {lattice_size} sites are occupied")
    if site not in occupied:
        return site
    for distance in range(1, lattice_size):
        upper = site + distance
        if upper < lattice_size and upper not in occupied:
            return upper
        lower = site - distance
        if lower >= 0 and lower not in occupied:
            return lower
    raise OverOccupationError(f"No free site near {site}")


def sample_impurity_sites(
    lattice_size: int,
    count: int,
    rng: SeededRng,
    mode: str = "relocate",
) -> List[int]:
    """
    Choose `count` distinct impurity sites uniformly at random.

    "relocate" draws i.i.d. uniform sites and moves each collision to the
    nearest empty point in draw order; "distinct" samples without replacement.

    Returns:
        Sorted list of distinct sites
    """
    if mode not in SAMPLING_MODES:
        raise ValueError(f"Unknown sampling mode '{mode}'")
    if count >= lattice_size:
        raise OverOccupationError(
            f"Cannot place {count} impurities on {lattice_size} sites"
        )
    if count <= 0:
        return []

    if mode == "distinct":
        return sorted(int(s) for s in rng.generator.choice(lattice_size, size=count, replace=False))

    occupied: set = set()
    for drawn in rng.generator.integers(0, lattice_size, size=count):
        occupied.add(relocate_collision(occupied, int(drawn), lattice_size))
    return sorted(occupied)


def _uniform_field(coin: Coin, lattice_size: int) -> np.ndarray:
    return np.repeat(coin.entries[np.newaxis, :, :], lattice_size, axis=0)


def build_field(
    family: CoinFamily,
    lattice_size: int,
    rng: Optional[SeededRng] = None,
    sampling: str = "relocate",
) -> CoinField:
    """
    Build the coin field for a family on N sites.

    Hadamard puts the Hadamard coin everywhere; AImpurity/BImpurity replace
    the coin at the centre; RandomB places M B-impurities uniformly at random.

    Raises:
        InvalidLatticeError: If N < 3
        OverOccupationError: If M >= N
        ValueError: If RandomB is requested without an rng
    """
    if lattice_size < 3:
        raise InvalidLatticeError(f"Lattice needs at least 3 sites, got {lattice_size}")

    coins = _uniform_field(hadamard_coin(), lattice_size)
    origin = lattice_size // 2
    sites: List[int] = []
    seed = None
    mode = None

    if family.tag == "AImpurity":
        coins[origin] = a_impurity_coin(family.gamma).entries
        sites = [origin]
    elif family.tag == "BImpurity":
        coins[origin] = b_impurity_coin(family.gamma).entries
        sites = [origin]
    elif family.tag == "RandomB":
        if rng is None:
            raise ValueError("RandomB fields need a seeded rng")
        count = family.count_for(lattice_size)
        if count >= lattice_size:
            raise OverOccupationError(
                f"Cannot place {count} impurities on {lattice_size} sites"
            )
        family = family.resolve(lattice_size)
        sites = sample_impurity_sites(lattice_size, count, rng, sampling)
        coins[sites] = b_impurity_coin(family.gamma).entries
        seed = rng.seed
        mode = sampling
        logger.debug(f"Placed {count} B-impurities for seed {seed}")

    provenance = FieldProvenance(
        family=family.tag,
        gamma=family.gamma,
        lattice_size=lattice_size,
        impurity_count=len(sites),
        sites=sites,
        seed=seed,
        sampling=mode,
        algorithm_id=ALGORITHM_ID if seed is not None else None,
    )
    return CoinField(coins=coins, provenance=provenance)
