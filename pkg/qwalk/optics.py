"""
One-dimensional multilayer optics: transfer matrices, S-matrices and path sums.

A stack is a list of segments 0..N with wavevectors k_n and widths a_n;
interface n (1..N) separates segment n-1 from segment n. Amplitudes (u, d)
are the right- and left-moving waves. The outer segments are semi-infinite,
so only the phases α_1..α_{N-1} of internal segments enter a stack.

S-matrices use the amplitude convention

    [[t, r], [r', t']]  : (u_left_in, d_right_in) -> (u_right_out, d_left_out)

which is not unitary unless flux-normalized (see SMatrix.flux_normalized).
"""
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .exceptions import (
    ConfigError,
    DivergenceError,
    InvalidScattererError,
    SingularInterfaceError,
    TotalReflectionError,
)
from .models import UNITARY_TOL, Coin, CoinField, FieldProvenance, Segment, SMatrix, TransferMatrix
from .utils import complex_record, read_yaml, validation_field

logger = logging.getLogger(__name__)

DEFAULT_MAX_BOUNCES = 60


def interface_transfer(k_prev: float, k_next: float) -> TransferMatrix:
    """
    Transfer matrix (1/t̂)[[1, r̂], [r̂, 1]] across one interface.

    r̂ = (k_next - k_prev)/(k_next + k_prev), t̂ = 2 k_next/(k_next + k_prev).

    Raises:
        SingularInterfaceError: If k_prev + k_next = 0 or t̂ = 0
    """
    total = k_next + k_prev
    if total == 0:
        raise SingularInterfaceError(f"k_prev + k_next vanishes ({k_prev} + {k_next})")
    r_hat = (k_next - k_prev) / total
    t_hat = 2.0 * k_next / total
    if t_hat == 0:
        raise SingularInterfaceError("Interface transmission vanishes")
    return TransferMatrix(entries=np.array([[1.0, r_hat], [r_hat, 1.0]], dtype=np.complex128) / t_hat)


def s_from_t(transfer: TransferMatrix) -> SMatrix:
    """
    Convert a transfer matrix to S = (1/T22)[[det T, T12], [-T21, 1]].

    Raises:
        TotalReflectionError: If T22 = 0
    """
    entries = transfer.entries
    t22 = entries[1, 1]
    if t22 == 0:
        raise TotalReflectionError("T22 vanishes; no S-matrix exists")
    det = entries[0, 0] * entries[1, 1] - entries[0, 1] * entries[1, 0]
    return SMatrix(entries=np.array([[det, entries[0, 1]], [-entries[1, 0], 1.0]]) / t22)


def t_from_s(scattering: SMatrix) -> TransferMatrix:
    """Inverse of s_from_t: T = (1/t')[[t t' - r r', r], [-r', 1]]."""
    if scattering.t_prime == 0:
        raise TotalReflectionError("t' vanishes; no transfer matrix exists")
    det = scattering.t * scattering.t_prime - scattering.r * scattering.r_prime
    entries = np.array([[det, scattering.r], [-scattering.r_prime, 1.0]]) / scattering.t_prime
    return TransferMatrix(entries=entries)


def _propagation(alpha: complex) -> np.ndarray:
    return np.diag([alpha, 1.0 / alpha]).astype(np.complex128)


def _check_stack(stack: Sequence[Segment]) -> None:
    if len(stack) < 2:
        raise ValueError(f"A stack needs at least two segments, got {len(stack)}")


def interface_matrices(stack: Sequence[Segment]) -> List[SMatrix]:
    """Raw S-matrix of every interface, left to right."""
    _check_stack(stack)
    return [
        s_from_t(interface_transfer(left.k, right.k))
        for left, right in zip(stack[:-1], stack[1:])
    ]


def composite_transfer(stack: Sequence[Segment]) -> TransferMatrix:
    """Product T_N P_{N-1} ... T_2 P_1 T_1 with P_n = diag(α_n, 1/α_n)."""
    _check_stack(stack)
    product = interface_transfer(stack[0].k, stack[1].k).entries
    for index in range(1, len(stack) - 1):
        dressed = interface_transfer(stack[index].k, stack[index + 1].k).entries @ _propagation(
            stack[index].alpha
        )
        product = dressed @ product
    return TransferMatrix(entries=product)


def composite_s(stack: Sequence[Segment]) -> SMatrix:
    """
    S-matrix of a whole stack through the transfer-matrix product.

    Raises:
        TotalReflectionError: If the product has T22 = 0
    """
    return s_from_t(composite_transfer(stack))


def cascade_s(left: SMatrix, right: SMatrix, alpha: complex) -> SMatrix:
    """
    Combine two S-matrices joined by a segment with phase α.

    The multiple reflections inside the joint sum to the loop factor
    L = 1/(1 - α² r_left r'_right).

    Raises:
        TotalReflectionError: If the loop factor diverges
    """
    a, b = left.entries, right.entries
    denominator = 1.0 - alpha ** 2 * a[0, 1] * b[1, 0]
    if denominator == 0:
        raise TotalReflectionError("Resonant joint: loop factor diverges")
    loop = 1.0 / denominator
    entries = np.array(
        [
            [alpha * b[0, 0] * loop * a[0, 0], b[0, 1] + alpha ** 2 * b[0, 0] * loop * a[0, 1] * b[1, 1]],
            [a[1, 0] + alpha ** 2 * a[1, 1] * b[1, 0] * loop * a[0, 0], alpha * a[1, 1] * loop * b[1, 1]],
        ],
        dtype=np.complex128,
    )
    return SMatrix(entries=entries)


def two_interface_s(k0: float, k1: float, k2: float, a1: float) -> SMatrix:
    """
    Closed form for a single slab (two interfaces), with α = e^{i k1 a1}:

        t   = t₂ α t₁ / (1 + r₁ r₂ α²)
        r   = r₂ + t₂ t₂' r₁ α² / (1 + r₁ r₂ α²)
        r'  = r₁' + t₁' r₂' t₁ α² / (1 + r₁ r₂ α²)
        t'  = t₁' α t₂' / (1 + r₁ r₂ α²)

    using r_n' = -r_n for real wavevectors.
    """
    first = s_from_t(interface_transfer(k0, k1))
    second = s_from_t(interface_transfer(k1, k2))
    alpha = complex(np.exp(1j * k1 * a1))
    r1, r2 = first.r, second.r
    t1, t1p = first.t, first.t_prime
    t2, t2p = second.t, second.t_prime
    loop = 1.0 / (1.0 + r1 * r2 * alpha ** 2)
    entries = np.array(
        [
            [t2 * alpha * t1 * loop, r2 + t2 * t2p * r1 * alpha ** 2 * loop],
            [-r1 - t1p * r2 * t1 * alpha ** 2 * loop, t1p * alpha * t2p * loop],
        ],
        dtype=np.complex128,
    )
    return SMatrix(entries=entries)


def path_sum_from_s(
    interfaces: Sequence[SMatrix],
    alphas: Sequence[complex],
    max_bounces: int = DEFAULT_MAX_BOUNCES,
) -> SMatrix:
    """
    Sum amplitudes over all reflection/transmission paths through a stack.

    Args:
        interfaces: Raw S-matrix of each interface, left to right
        alphas: Phase of each internal segment, len(interfaces) - 1 entries
        max_bounces: Internal round trips kept; a path may carry at most
            2*max_bounces + 1 reflections

    Raises:
        DivergenceError: If any interface reflects with modulus >= 1
    """
    count = len(interfaces)
    if count < 1:
        raise ValueError("Path sum needs at least one interface")
    if len(alphas) != count - 1:
        raise ValueError(f"Expected {count - 1} internal phases, got {len(alphas)}")
    if max_bounces < 0:
        raise ValueError(f"max_bounces must be non-negative, got {max_bounces}")
    for index, scattering in enumerate(interfaces, start=1):
        if abs(scattering.r) >= 1 or abs(scattering.r_prime) >= 1:
            raise DivergenceError(f"Interface {index} reflects with modulus >= 1; path sum diverges")

    limit = 2 * max_bounces + 1
    # phase of internal segment n sits between interfaces n and n+1 (1-based)
    phase = {n: complex(alphas[n - 1]) for n in range(1, count)}

    def run(start: Tuple[int, bool]) -> Tuple[complex, complex]:
        out_right = 0j
        out_left = 0j
        frontier: Dict[Tuple[int, bool, int], complex] = {(start[0], start[1], 0): 1.0 + 0j}
        while frontier:
            following: Dict[Tuple[int, bool, int], complex] = defaultdict(complex)
            for (n, rightward, bounces), amplitude in frontier.items():
                scattering = interfaces[n - 1]
                if rightward:
                    passed = amplitude * scattering.t
                    reflected = amplitude * scattering.r_prime
                    if n == count:
                        out_right += passed
                    else:
                        following[(n + 1, True, bounces)] += passed * phase[n]
                    if bounces + 1 <= limit:
                        if n == 1:
                            out_left += reflected
                        else:
                            following[(n - 1, False, bounces + 1)] += reflected * phase[n - 1]
                else:
                    passed = amplitude * scattering.t_prime
                    reflected = amplitude * scattering.r
                    if n == 1:
                        out_left += passed
                    else:
                        following[(n - 1, False, bounces)] += passed * phase[n - 1]
                    if bounces + 1 <= limit:
                        if n == count:
                            out_right += reflected
                        else:
                            following[(n + 1, True, bounces + 1)] += reflected * phase[n]
            frontier = following
        return out_right, out_left

    t, r_prime = run((1, True))
    r, t_prime = run((count, False))
    return SMatrix(entries=np.array([[t, r], [r_prime, t_prime]], dtype=np.complex128))


def path_sum_s(stack: Sequence[Segment], max_bounces: int = DEFAULT_MAX_BOUNCES) -> SMatrix:
    """
    Path-sum S-matrix of a stack; converges geometrically to composite_s.

    Raises:
        DivergenceError: If a loop factor has modulus >= 1
    """
    interfaces = interface_matrices(stack)
    alphas = [segment.alpha for segment in stack[1:-1]]
    return path_sum_from_s(interfaces, alphas, max_bounces)


def qw_coin_from_s(scattering: SMatrix, alpha_left: complex = 1.0, alpha_right: complex = 1.0) -> Coin:
    """
    Quantum-walk coin of a scatterer: [[α_R t, α_R r], [α_L r', α_L t']].

    The upper component of the walk is the right-moving wave, so transmitted
    and reflected waves leaving to the right pick up the phase of the right
    segment, and those leaving to the left the phase of the left one.

    Raises:
        InvalidScattererError: If S is not unitary or a phase is not unimodular
    """
    residual = scattering.unitarity_residual()
    if residual > UNITARY_TOL:
        raise InvalidScattererError(f"S-matrix is not unitary (residual {residual:.3e})")
    for name, phase in (("alpha_left", alpha_left), ("alpha_right", alpha_right)):
        if abs(abs(complex(phase)) - 1.0) > UNITARY_TOL:
            raise InvalidScattererError(f"{name} must have modulus 1, got {abs(complex(phase))}")
    entries = scattering.entries
    coin = np.array(
        [
            [alpha_right * entries[0, 0], alpha_right * entries[0, 1]],
            [alpha_left * entries[1, 0], alpha_left * entries[1, 1]],
        ],
        dtype=np.complex128,
    )
    return Coin(entries=coin)


def coin_field_from_stack(stack: Sequence[Segment]) -> CoinField:
    """
    Coin field with one site per interface.

    Each site carries the flux-normalized interface S-matrix dressed with the
    phases of its neighbouring segments.
    """
    interfaces = interface_matrices(stack)
    if len(interfaces) < 3:
        raise ValueError("A coin field needs a stack with at least three interfaces")
    coins = []
    for n, scattering in enumerate(interfaces, start=1):
        normalized = scattering.flux_normalized(stack[n - 1].k, stack[n].k)
        coins.append(qw_coin_from_s(normalized, stack[n - 1].alpha, stack[n].alpha).entries)
    provenance = FieldProvenance(family="Stack", lattice_size=len(coins))
    return CoinField(coins=np.stack(coins), provenance=provenance)


def energy_balance(scattering: SMatrix) -> float:
    """|t t' - r r'|, which equals 1 for a lossless scatterer."""
    return abs(scattering.t * scattering.t_prime - scattering.r * scattering.r_prime)


def load_stack(path: Path) -> Tuple[List[Segment], int]:
    """
    Read a stack file.

    Format::

        segments:
          - {k: 1.0, a: 0.0}
          - {k: 2.0, a: 1.5}
        max_bounces: 60      # optional

    Returns:
        Segments and max_bounces
    """
    document = read_yaml(path)
    if not isinstance(document, dict) or "segments" not in document:
        raise ConfigError(f"{Path(path).name} must define 'segments'", field="segments")
    try:
        segments = [Segment(**item) for item in document["segments"]]
    except (TypeError, ValidationError) as exc:
        field = validation_field(exc) if isinstance(exc, ValidationError) else ""
        raise ConfigError(f"Invalid segment in {Path(path).name}: {exc}", field=f"segments.{field}".rstrip(".")) from exc
    if len(segments) < 2:
        raise ConfigError("A stack needs at least two segments", field="segments")
    max_bounces = int(document.get("max_bounces", DEFAULT_MAX_BOUNCES))
    logger.debug(f"Loaded {len(segments)} segments from {path}")
    return segments, max_bounces


def s_matrix_record(scattering: SMatrix, k_left: float = None, k_right: float = None) -> dict:
    """JSON-ready S-matrix: the four entries, determinant and unitarity residual."""
    record = {
        "t": complex_record(scattering.t),
        "r": complex_record(scattering.r),
        "r_prime": complex_record(scattering.r_prime),
        "t_prime": complex_record(scattering.t_prime),
        "determinant": complex_record(scattering.determinant()),
        "raw_unitarity_residual": scattering.unitarity_residual(),
    }
    if k_left is not None and k_right is not None:
        record["unitarity_residual"] = scattering.flux_normalized(k_left, k_right).unitarity_residual()
    return record


def intensity_balance(stack: Sequence[Segment], u_in: complex, d_in: complex) -> float:
    """
    Outgoing minus incoming energy flux for given incoming amplitudes,
    weighting each intensity by its segment's wavevector.
    """
    scattering = composite_s(stack)
    u_out, d_out = scattering.entries @ np.array([u_in, d_in], dtype=np.complex128)
    k_left, k_right = stack[0].k, stack[-1].k
    incoming = k_left * abs(u_in) ** 2 + k_right * abs(d_in) ** 2
    outgoing = k_right * abs(u_out) ** 2 + k_left * abs(d_out) ** 2
    return float(outgoing - incoming)


def reflectance(stack: Sequence[Segment]) -> float:
    """Fraction of flux reflected for light entering from the left."""
    scattering = composite_s(stack)
    return float(abs(scattering.r_prime) ** 2)


def transmittance(stack: Sequence[Segment]) -> float:
    """Fraction of flux transmitted for light entering from the left."""
    scattering = composite_s(stack)
    return float(abs(scattering.t) ** 2 * stack[-1].k / stack[0].k)

