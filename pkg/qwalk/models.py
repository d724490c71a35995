"""
Pydantic models for the quantum-walk toolkit.
"""
import math
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator, validator

UNITARY_TOL = 1e-12
NORM_TOL = 1e-12
DENSITY_SUM_TOL = 1e-9

DEFAULT_SNAPSHOTS = (0, 500, 1000, 2000, 3000)
OBSERVABLES = ("density", "cog", "alpha", "sd", "laplace", "window", "eta")
PAPER_COMPAT_FLAGS = ("lattice-6000", "printed-konno")


def _frozen_array(value, dtype, ndim: Optional[int] = None) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"Expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def unitarity_residual(matrix: np.ndarray) -> float:
    """Max-abs deviation of M·Mᴴ from the identity (batched over leading axes)."""
    product = matrix @ np.conj(np.swapaxes(matrix, -1, -2))
    return float(np.max(np.abs(product - np.eye(matrix.shape[-1]))))


# ---------------------------------------------------------------------------
# walk-core
# ---------------------------------------------------------------------------

class Coin(BaseModel):
    """A 2×2 unitary quantum-coin matrix, rows (++, +−) and (−+, −−)."""
    entries: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("entries", pre=True)
    def validate_entries(cls, v):
        """Ensure a unitary 2×2 complex matrix."""
        arr = _frozen_array(v, np.complex128, ndim=2)
        if arr.shape != (2, 2):
            raise ValueError(f"Coin must be 2x2, got {arr.shape}")
        if unitarity_residual(arr) > UNITARY_TOL:
            raise ValueError("Coin matrix is not unitary")
        return arr

    def __eq__(self, other) -> bool:
        return isinstance(other, Coin) and np.array_equal(self.entries, other.entries)


class FieldProvenance(BaseModel):
    """How a coin field was built; echoed into every result file."""
    family: str
    gamma: float = 0.0
    lattice_size: int = Field(..., ge=3)
    impurity_count: int = Field(0, ge=0)
    sites: List[int] = Field(default_factory=list)
    seed: Optional[int] = None
    sampling: Optional[str] = None
    algorithm_id: Optional[str] = None

    @validator("sites")
    def validate_sites(cls, v, values):
        """Sites must be distinct, sorted and inside the lattice."""
        if list(v) != sorted(set(v)):
            raise ValueError("Impurity sites must be distinct and sorted")
        size = values.get("lattice_size")
        if size is not None and v and (v[0] < 0 or v[-1] >= size):
            raise ValueError("Impurity site outside the lattice")
        return v


class CoinField(BaseModel):
    """Per-site coin assignment, shape (N, 2, 2)."""
    coins: np.ndarray
    provenance: FieldProvenance

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("coins", pre=True)
    def validate_coins(cls, v):
        """Every site must carry a unitary 2×2 matrix."""
        arr = _frozen_array(v, np.complex128, ndim=3)
        if arr.shape[1:] != (2, 2):
            raise ValueError(f"Coin field must have shape (N, 2, 2), got {arr.shape}")
        if unitarity_residual(arr) > UNITARY_TOL:
            raise ValueError("Coin field contains a non-unitary matrix")
        return arr

    @model_validator(mode="after")
    def validate_length(self):
        """Field length equals the lattice size recorded in provenance."""
        if self.coins.shape[0] != self.provenance.lattice_size:
            raise ValueError("Coin field length differs from provenance lattice size")
        return self

    @property
    def size(self) -> int:
        return self.coins.shape[0]

    def coin(self, index: int) -> Coin:
        return Coin(entries=self.coins[index])


class WalkState(BaseModel):
    """Two-component amplitudes over sites 0..N-1, centre at floor(N/2)."""
    plus: np.ndarray
    minus: np.ndarray
    origin_index: int

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("plus", "minus", pre=True)
    def validate_component(cls, v):
        return _frozen_array(v, np.complex128, ndim=1)

    @model_validator(mode="after")
    def validate_state(self):
        """Equal lengths, centred origin, unit norm."""
        if self.plus.shape != self.minus.shape:
            raise ValueError("plus and minus components differ in length")
        if self.origin_index != self.plus.shape[0] // 2:
            raise ValueError("origin_index must equal floor(N/2)")
        total = float(np.sum(np.abs(self.plus) ** 2 + np.abs(self.minus) ** 2))
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"State is not normalized (norm={total!r})")
        return self

    @property
    def size(self) -> int:
        return self.plus.shape[0]

    def positions(self) -> np.ndarray:
        """Site coordinates relative to the origin."""
        return np.arange(self.size) - self.origin_index

    def amplitude(self, n: int) -> Tuple[complex, complex]:
        """Amplitude pair at coordinate n relative to the origin."""
        i = self.origin_index + n
        return complex(self.plus[i]), complex(self.minus[i])


# ---------------------------------------------------------------------------
# coin-config
# ---------------------------------------------------------------------------

class CoinFamily(BaseModel):
    """Which coin configuration to build."""
    tag: Literal["Hadamard", "AImpurity", "BImpurity", "RandomB"]
    gamma: float = 0.0
    impurity_count: Optional[int] = Field(None, gt=0)
    density: Optional[float] = Field(None, gt=0.0, lt=1.0)

    @validator("gamma")
    def validate_gamma(cls, v):
        """Phase lives in (-pi, pi]."""
        if not math.isfinite(v) or not (-math.pi < v <= math.pi):
            raise ValueError("gamma must lie in (-pi, pi]")
        return v

    @model_validator(mode="after")
    def validate_random(self):
        """RandomB needs a count or a density."""
        if self.tag == "RandomB" and self.impurity_count is None and self.density is None:
            raise ValueError("RandomB requires impurity_count or density")
        return self

    def count_for(self, lattice_size: int) -> int:
        """Number of impurities M on a lattice of the given size."""
        if self.tag != "RandomB":
            return 0
        if self.impurity_count is not None:
            return self.impurity_count
        return int(round(self.density * lattice_size))

    def resolve(self, lattice_size: int) -> "CoinFamily":
        """Fill in both M and p = M/N for a given lattice size."""
        if self.tag != "RandomB":
            return self
        count = self.count_for(lattice_size)
        density = count / lattice_size
        if (
            self.impurity_count is not None
            and self.density is not None
            and abs(self.density - density) > 1e-12
        ):
            raise ValueError(
                f"density {self.density} inconsistent with {count} impurities on {lattice_size} sites"
            )
        return CoinFamily(tag=self.tag, gamma=self.gamma, impurity_count=count, density=density)


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------

class TimeSeries(BaseModel):
    """Observable values indexed by time step."""
    times: np.ndarray
    values: np.ndarray
    label: str

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("times", pre=True)
    def validate_times(cls, v):
        arr = _frozen_array(v, np.int64, ndim=1)
        if arr.size > 1 and np.any(np.diff(arr) <= 0):
            raise ValueError("times must be strictly increasing")
        return arr

    @validator("values", pre=True)
    def validate_values(cls, v):
        return _frozen_array(v, np.float64, ndim=1)

    @model_validator(mode="after")
    def validate_lengths(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")
        return self

    def __len__(self) -> int:
        return int(self.times.size)

    def between(self, start: int, stop: int) -> "TimeSeries":
        """Restrict to start <= t <= stop."""
        mask = (self.times >= start) & (self.times <= stop)
        return TimeSeries(times=self.times[mask], values=self.values[mask], label=self.label)


class EnsembleDensity(BaseModel):
    """Seed-averaged density snapshots, one row per recorded step."""
    times: np.ndarray
    mean_density: np.ndarray
    seed_count: int = Field(..., ge=1)

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("times", pre=True)
    def validate_times(cls, v):
        return _frozen_array(v, np.int64, ndim=1)

    @validator("mean_density", pre=True)
    def validate_mean_density(cls, v):
        arr = _frozen_array(v, np.float64, ndim=2)
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > DENSITY_SUM_TOL):
            raise ValueError("Each density snapshot must sum to 1")
        return arr

    @model_validator(mode="after")
    def validate_rows(self):
        if self.mean_density.shape[0] != self.times.shape[0]:
            raise ValueError("One density row is required per recorded time")
        return self

    def at(self, t: int) -> np.ndarray:
        """Mean density at recorded step t."""
        hits = np.flatnonzero(self.times == t)
        if hits.size == 0:
            raise KeyError(f"No snapshot recorded at t={t}")
        return self.mean_density[hits[0]]


class LaplaceFit(BaseModel):
    """P(x) = A/(2δ) exp(-|x - x0|/δ) fitted on a window."""
    amplitude: float
    x0: int
    delta_t: float = Field(..., gt=0.0)
    residual: float
    r_squared: float
    window: Tuple[int, int]


class AlphaFit(BaseModel):
    """α(t) = 1/(κt + 1) least-squares fit."""
    kappa: float = Field(..., ge=0.0)
    residual: float
    constant_alpha: float
    constant_residual: float
    degenerate: bool = False
    fit_range: Tuple[int, int]


class PowerLawFit(BaseModel):
    """COG(t) = β t^α on a log-log scale."""
    beta: float
    alpha: float
    r_squared: float


# ---------------------------------------------------------------------------
# optics
# ---------------------------------------------------------------------------

class Segment(BaseModel):
    """Piecewise-constant slab: wavevector k and width a."""
    k: float = Field(..., gt=0.0)
    a: float = Field(..., ge=0.0)

    @property
    def alpha(self) -> complex:
        """Phase factor e^{ika} picked up crossing the segment."""
        return complex(np.exp(1j * self.k * self.a))


class TransferMatrix(BaseModel):
    """Maps (u, d) on the left of an interface to (u, d) on its right."""
    entries: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("entries", pre=True)
    def validate_entries(cls, v):
        arr = _frozen_array(v, np.complex128, ndim=2)
        if arr.shape != (2, 2):
            raise ValueError("Transfer matrix must be 2x2")
        if abs(np.linalg.det(arr)) == 0.0:
            raise ValueError("Transfer matrix is singular")
        return arr


class SMatrix(BaseModel):
    """
    Scattering matrix [[t, r], [r', t']] mapping (incoming from left,
    incoming from right) to (outgoing right, outgoing left).

    Entries are raw amplitude ratios; `flux_normalized` gives the unitary form.
    """
    entries: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("entries", pre=True)
    def validate_entries(cls, v):
        arr = _frozen_array(v, np.complex128, ndim=2)
        if arr.shape != (2, 2):
            raise ValueError("S-matrix must be 2x2")
        return arr

    @property
    def t(self) -> complex:
        return complex(self.entries[0, 0])

    @property
    def r(self) -> complex:
        return complex(self.entries[0, 1])

    @property
    def r_prime(self) -> complex:
        return complex(self.entries[1, 0])

    @property
    def t_prime(self) -> complex:
        return complex(self.entries[1, 1])

    def flux_normalized(self, k_left: float, k_right: float) -> "SMatrix":
        """Rescale amplitudes by √k so intensity equals energy flux."""
        out_scale = np.diag([math.sqrt(k_right), math.sqrt(k_left)])
        in_scale = np.diag([1.0 / math.sqrt(k_left), 1.0 / math.sqrt(k_right)])
        return SMatrix(entries=out_scale @ self.entries @ in_scale)

    def unitarity_residual(self) -> float:
        return unitarity_residual(self.entries)

    def determinant(self) -> complex:
        return complex(np.linalg.det(self.entries))


# ---------------------------------------------------------------------------
# kubelka-munk
# ---------------------------------------------------------------------------

class KMLayer(BaseModel):
    """Paint layer with scattering s, absorption k and thickness d."""
    s: float = Field(..., ge=0.0)
    k: float = Field(..., ge=0.0)
    d: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def validate_coefficients(self):
        if self.s == 0.0 and self.k == 0.0:
            raise ValueError("s and k cannot both be zero")
        return self


class FluxPair(BaseModel):
    """Downward intensity i and upward intensity j."""
    i: float
    j: float

    class Config:
        frozen = True

    def as_array(self) -> np.ndarray:
        return np.array([self.i, self.j], dtype=np.float64)


# ---------------------------------------------------------------------------
# cli
# ---------------------------------------------------------------------------

class OpticsSection(BaseModel):
    """Stack for optics scenarios, inline or from a file."""
    segments: Optional[List[Segment]] = None
    stack_file: Optional[Path] = None
    max_bounces: int = Field(60, ge=0)

    @model_validator(mode="after")
    def validate_source(self):
        if self.segments is None and self.stack_file is None:
            raise ValueError("optics needs segments or stack_file")
        if self.segments is not None and len(self.segments) < 2:
            raise ValueError("optics stack needs at least two segments")
        return self


class KMSection(BaseModel):
    """Layers and k/s inputs for Kubelka-Munk scenarios."""
    layers: Optional[List[KMLayer]] = None
    layers_file: Optional[Path] = None
    ratios: List[float] = Field(default_factory=list)
    backing_reflectance: float = Field(0.0, ge=0.0, le=1.0)

    @validator("ratios")
    def validate_ratios(cls, v):
        if any(r < 0 for r in v):
            raise ValueError("k/s ratios must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_source(self):
        if self.layers is None and self.layers_file is None and not self.ratios:
            raise ValueError("km needs layers, layers_file or ratios")
        return self


class ScenarioConfig(BaseModel):
    """Full experiment description, one YAML file per scenario."""
    name: str = Field(..., min_length=1)
    description: str = ""
    kind: Literal["walk", "optics", "km"] = "walk"
    family: Optional[CoinFamily] = None
    lattice_size: Optional[int] = Field(None, ge=3)
    time_horizon: int = Field(3000, ge=1)
    seeds: List[int] = Field(default_factory=list)
    snapshot_times: Optional[List[int]] = None
    series_every: int = Field(25, ge=1)
    observables: List[str] = Field(default_factory=lambda: list(OBSERVABLES))
    sampling: Literal["relocate", "distinct"] = "relocate"
    window_half_width: int = Field(50, ge=0)
    window_smoothing: int = Field(25, ge=1)
    alpha_window: int = Field(5, ge=1)
    alpha_fit_range: Tuple[int, int] = (200, 3000)
    laplace_times: List[int] = Field(default_factory=lambda: [1000, 2000, 3000])
    laplace_half_width: Optional[int] = Field(None, ge=1)
    output_dir: Optional[Path] = None
    paper_compat_flags: List[str] = Field(default_factory=list)
    optics: Optional[OpticsSection] = None
    km: Optional[KMSection] = None

    @validator("seeds", pre=True)
    def validate_seeds(cls, v):
        """Accept a list or an inclusive "A..B" range."""
        if isinstance(v, str):
            from .utils import parse_seed_range
            return parse_seed_range(v)
        if isinstance(v, int):
            return [v]
        return v

    @validator("observables")
    def validate_observables(cls, v):
        unknown = set(v) - set(OBSERVABLES)
        if unknown:
            raise ValueError(f"Unknown observables: {sorted(unknown)}")
        return [name for name in OBSERVABLES if name in set(v)]

    @validator("paper_compat_flags")
    def validate_flags(cls, v):
        unknown = set(v) - set(PAPER_COMPAT_FLAGS)
        if unknown:
            raise ValueError(f"Unknown paper-compat flags: {sorted(unknown)}")
        return sorted(set(v))

    @model_validator(mode="after")
    def validate_scenario(self):
        """Cross-field rules of the experimental protocol."""
        if self.kind == "walk":
            if self.family is None:
                raise ValueError("walk scenarios require family")
            if self.family.tag == "RandomB" and not self.seeds:
                raise ValueError("seeds must be non-empty for RandomB")
            if self.snapshot_times is not None:
                bad = [t for t in self.snapshot_times if t < 0 or t > self.time_horizon]
                if bad:
                    raise ValueError(
                        f"snapshot_times {bad} outside [0, {self.time_horizon}]"
                    )
            if self.family.tag == "RandomB":
                size = self.resolved_lattice_size()
                if self.family.count_for(size) >= size:
                    raise ValueError("impurity_count must be smaller than lattice_size")
        elif self.kind == "optics" and self.optics is None:
            raise ValueError("optics scenarios require an optics section")
        elif self.kind == "km" and self.km is None:
            raise ValueError("km scenarios require a km section")
        return self

    def resolved_lattice_size(self) -> int:
        """Explicit size, 6000 under the lattice-6000 flag, else 2T+3."""
        if self.lattice_size is not None:
            return self.lattice_size
        if "lattice-6000" in self.paper_compat_flags:
            return 6000
        return 2 * self.time_horizon + 3

    def resolved_snapshots(self) -> List[int]:
        """Snapshot schedule clipped to the horizon, always ending at T."""
        if self.snapshot_times is not None:
            return sorted(set(self.snapshot_times))
        times = {t for t in DEFAULT_SNAPSHOTS if t <= self.time_horizon}
        times.add(self.time_horizon)
        return sorted(times)

    def resolved_seeds(self) -> List[Optional[int]]:
        """Deterministic families run once with no seed."""
        if self.family is not None and self.family.tag == "RandomB":
            return list(self.seeds)
        return [None]


class RunRecord(BaseModel):
    """Everything needed to re-run a scenario bit-identically."""
    scenario: str
    config: dict
    provenance: List[FieldProvenance] = Field(default_factory=list)
    outputs: Dict[str, str] = Field(default_factory=dict)
    software_version: str
    numpy_version: str
    algorithm_id: Optional[str] = None
    workers: int = 1
    started_at: datetime
    wall_clock_seconds: float = 0.0
    run_hash: str

    class Config:
        json_encoders = {
            datetime: lambda v: v.isoformat()
        }
