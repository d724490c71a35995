"""
Walk state construction and time evolution under a quantum-coin operator.

One step maps σ to τσ with

    (τσ)_n^(+) = τ_{n-1}^(++) σ_{n-1}^(+) + τ_{n-1}^(+-) σ_{n-1}^(-)
    (τσ)_n^(-) = τ_{n+1}^(-+) σ_{n+1}^(+) + τ_{n+1}^(--) σ_{n+1}^(-)

so the upper component moves right and the lower one moves left.
"""
import logging
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from .exceptions import BoundaryOverflowError, InvalidLatticeError
from .models import CoinField, WalkState

logger = logging.getLogger(__name__)

INV_SQRT2 = 1.0 / np.sqrt(2.0)
# Edge amplitudes below the smallest normal double count as empty.
AMPLITUDE_FLOOR = np.finfo(np.float64).tiny

Observer = Callable[[int, WalkState], None]


def default_lattice_size(time_horizon: int) -> int:
    """Smallest odd lattice whose support never reaches the edge within T steps."""
    return 2 * time_horizon + 3


def make_initial_state(
    lattice_size: int,
    plus: complex = INV_SQRT2,
    minus: complex = INV_SQRT2,
) -> WalkState:
    """
    Localized initial state at the lattice centre.

    Args:
        lattice_size: Number of sites N (>= 3)
        plus: Upper component at the origin
        minus: Lower component at the origin

    Returns:
        Normalized WalkState with all weight at origin_index = floor(N/2)
    """
    if lattice_size < 3:
        raise InvalidLatticeError(f"Lattice needs at least 3 sites, got {lattice_size}")

    origin = lattice_size // 2
    upper = np.zeros(lattice_size, dtype=np.complex128)
    lower = np.zeros(lattice_size, dtype=np.complex128)
    upper[origin] = plus
    lower[origin] = minus
    return WalkState(plus=upper, minus=lower, origin_index=origin)


def _wrap(plus: np.ndarray, minus: np.ndarray, origin: int) -> WalkState:
    plus.setflags(write=False)
    minus.setflags(write=False)
    return WalkState.model_construct(plus=plus, minus=minus, origin_index=origin)


def _coin_columns(field: CoinField) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    coins = field.coins
    return coins[:, 0, 0], coins[:, 0, 1], coins[:, 1, 0], coins[:, 1, 1]


def _advance(plus: np.ndarray, minus: np.ndarray, columns) -> Tuple[np.ndarray, np.ndarray]:
    edges = np.abs((plus[0], minus[0], plus[-1], minus[-1]))
    if np.any(edges >= AMPLITUDE_FLOOR):
        raise BoundaryOverflowError("Amplitude reached the lattice boundary")

    tpp, tpm, tmp, tmm = columns
    new_plus = np.zeros_like(plus)
    new_minus = np.zeros_like(minus)
    new_plus[1:] = tpp[:-1] * plus[:-1] + tpm[:-1] * minus[:-1]
    new_minus[:-1] = tmp[1:] * plus[1:] + tmm[1:] * minus[1:]
    return new_plus, new_minus


def _check_sizes(state: WalkState, field: CoinField) -> None:
    if state.size != field.size:
        raise InvalidLatticeError(
            f"State has {state.size} sites but the coin field has {field.size}"
        )


def step(state: WalkState, field: CoinField) -> WalkState:
    """
    Apply the quantum-coin operator once.

    Raises:
        InvalidLatticeError: If state and field lengths differ
        BoundaryOverflowError: If an edge site carries amplitude
    """
    _check_sizes(state, field)
    new_plus, new_minus = _advance(state.plus, state.minus, _coin_columns(field))
    return _wrap(new_plus, new_minus, state.origin_index)


def density(state: WalkState) -> np.ndarray:
    """Per-site probability |σ⁺|² + |σ⁻|²."""
    return np.abs(state.plus) ** 2 + np.abs(state.minus) ** 2


def norm(state: WalkState) -> float:
    """Total probability."""
    return float(np.sum(density(state)))


def support_parity_ok(state: WalkState, t: int) -> bool:
    """True when every site of parity different from t holds exactly zero."""
    offsets = state.positions()
    wrong = (offsets - t) % 2 != 0
    return bool(np.all(state.plus[wrong] == 0) and np.all(state.minus[wrong] == 0))


def evolve(
    state: WalkState,
    field: CoinField,
    steps: int,
    observers: Iterable[Observer] = (),
    seed: Optional[int] = None,
) -> WalkState:
    """
    Apply `steps` time steps, notifying observers along the way.

    Observers are called as observer(t, state) for the initial state (t=0)
    and after every step.

    Args:
        state: Initial state
        field: Coin field of the same length
        steps: Number of steps T (>= 0)
        observers: Callbacks receiving (t, state)
        seed: Seed of the field, only used to label overflow errors

    Returns:
        State after T steps
    """
    if steps < 0:
        raise ValueError(f"Number of steps must be non-negative, got {steps}")
    _check_sizes(state, field)

    observers = list(observers)
    for observer in observers:
        observer(0, state)

    columns = _coin_columns(field)
    plus, minus = state.plus, state.minus
    current = state
    for t in range(1, steps + 1):
        try:
            plus, minus = _advance(plus, minus, columns)
        except BoundaryOverflowError as exc:
            logger.error(f"Boundary overflow at t={t} (seed={seed})")
            raise BoundaryOverflowError(str(exc), t=t, seed=seed) from exc
        if observers:
            current = _wrap(plus, minus, state.origin_index)
            for observer in observers:
                observer(t, current)

    if steps == 0:
        return state
    if observers:
        return current
    return _wrap(plus, minus, state.origin_index)
