"""
Kubelka-Munk two-flux model of diffuse light in paint layers.

Depth x is negative below the surface. Downward flux i and upward flux j obey

    d/dx (i, j) = S (i, j),   S = [[s + k, -s], [s, -(s + k)]]

S² = q² I with q = √(k² + 2sk), so exp(Sx) = cosh(qx) I + sinh(qx)/q S.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .exceptions import ConfigError, DomainError
from .models import FluxPair, KMLayer
from .utils import read_yaml, validation_field

logger = logging.getLogger(__name__)

SMALL_ARGUMENT = 1e-8


def km_generator(layer: KMLayer) -> np.ndarray:
    """Generator matrix S of a layer."""
    total = layer.s + layer.k
    return np.array([[total, -layer.s], [layer.s, -total]], dtype=np.float64)


def km_decay_rate(layer: KMLayer) -> float:
    """q = √((s + k)² - s²)."""
    return math.sqrt(layer.k * layer.k + 2.0 * layer.s * layer.k)


def km_transfer(layer: KMLayer, x: float) -> np.ndarray:
    """exp(Sx) in closed form; I + Sx once q|x| is below 1e-8."""
    generator = km_generator(layer)
    q = km_decay_rate(layer)
    if q * abs(x) < SMALL_ARGUMENT:
        return np.eye(2) + generator * x
    return math.cosh(q * x) * np.eye(2) + (math.sinh(q * x) / q) * generator


def _check_depth(layer: KMLayer, x: float) -> None:
    if abs(x) > layer.d * (1.0 + 1e-12):
        raise DomainError(f"Depth {x} exceeds layer thickness {layer.d}")


def km_propagate(layer: KMLayer, boundary: FluxPair, x: float) -> FluxPair:
    """
    Fluxes at signed depth x given the fluxes at x = 0: exp(Sx)·(i₀, j₀).

    Raises:
        DomainError: If |x| exceeds the layer thickness
    """
    _check_depth(layer, x)
    i, j = km_transfer(layer, x) @ boundary.as_array()
    return FluxPair(i=float(i), j=float(j))


def km_propagate_inverse(layer: KMLayer, flux: FluxPair, x: float) -> FluxPair:
    """
    Undo km_propagate: exp(-Sx)·(i, j).

    Raises:
        DomainError: If |x| exceeds the layer thickness
    """
    _check_depth(layer, x)
    i, j = km_transfer(layer, -x) @ flux.as_array()
    return FluxPair(i=float(i), j=float(j))


def km_r_infinity(k_over_s: float) -> float:
    """
    Reflectance of a semi-infinite layer, 1 + k/s - √(k²/s² + 2k/s).

    Evaluated as 1/(1 + k/s + √(k²/s² + 2k/s)) to avoid cancellation.

    Raises:
        DomainError: If the ratio is negative
    """
    if math.isnan(k_over_s) or k_over_s < 0:
        raise DomainError(f"k/s must be non-negative, got {k_over_s}")
    if math.isinf(k_over_s):
        return 0.0
    return 1.0 / (1.0 + k_over_s + math.sqrt(k_over_s * k_over_s + 2.0 * k_over_s))


def km_invert(r_infinity: float) -> float:
    """
    k/s = (1 - R∞)²/(2R∞).

    Raises:
        DomainError: If R∞ is outside (0, 1]
    """
    if not 0.0 < r_infinity <= 1.0:
        raise DomainError(f"R_inf must lie in (0, 1], got {r_infinity}")
    return (1.0 - r_infinity) ** 2 / (2.0 * r_infinity)


def km_multilayer(layers: Sequence[KMLayer], exit_flux: FluxPair) -> FluxPair:
    """
    Surface fluxes (i₀, j₀) of a stack, layer 1 on top.

    The bottom plane sits at depth -(d₁ + ... + d_n); walking up through each
    layer applies exp(S_i d_i), so

        (i₀, j₀) = exp(S₁d₁) ⋯ exp(S_n d_n) · (i_exit, j_exit).
    """
    if not layers:
        raise ValueError("km_multilayer needs at least one layer")
    flux = exit_flux.as_array()
    for layer in reversed(layers):
        flux = km_transfer(layer, layer.d) @ flux
    return FluxPair(i=float(flux[0]), j=float(flux[1]))


def km_reflectance(layers: Sequence[KMLayer], backing_reflectance: float = 0.0) -> float:
    """
    Diffuse reflectance j₀/i₀ of a stack over a backing.

    A black backing (reflectance 0) gives exit fluxes (1, 0); a thick stack
    tends to km_r_infinity(k/s) of its top layer.
    """
    if not 0.0 <= backing_reflectance <= 1.0:
        raise DomainError(f"Backing reflectance must lie in [0, 1], got {backing_reflectance}")
    surface = km_multilayer(layers, FluxPair(i=1.0, j=backing_reflectance))
    if surface.i == 0:
        raise DomainError("No downward flux at the surface")
    return surface.j / surface.i


def km_reflectance_curve(ratios: Sequence[float]) -> Dict[str, List[float]]:
    """Table of (index, k/s, R∞) for a list of ratios, one row per input."""
    return {
        "index": list(range(len(ratios))),
        "k_over_s": [float(r) for r in ratios],
        "r_infinity": [km_r_infinity(float(r)) for r in ratios],
    }


def load_layers(path: Path) -> Tuple[List[KMLayer], float]:
    """
    Read a layer file.

    Format::

        layers:
          - {s: 1.0, k: 0.2, d: 0.5}
        backing_reflectance: 0.0   # optional

    Returns:
        Layers top to bottom and the backing reflectance
    """
    document = read_yaml(path)
    if not isinstance(document, dict) or "layers" not in document:
        raise ConfigError(f"{Path(path).name} must define 'layers'", field="layers")
    try:
        layers = [KMLayer(**item) for item in document["layers"]]
    except (TypeError, ValidationError) as exc:
        field = validation_field(exc) if isinstance(exc, ValidationError) else ""
        raise ConfigError(f"Invalid layer in {Path(path).name}: {exc}", field=f"layers.{field}".rstrip(".")) from exc
    if not layers:
        raise ConfigError("At least one layer is required", field="layers")
    backing = float(document.get("backing_reflectance", 0.0))
    logger.debug(f"Loaded {len(layers)} layers from {path}")
    return layers, backing
