"""
Scenario execution services for the quantum-walk toolkit.
"""
import time
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .analysis import (
    DensityMoments,
    average_ensemble,
    cog_exponent_series,
    fit_alpha_model,
    fit_laplace,
    fit_power_law,
    front_peaks,
    hadamard_asymmetry,
    konno_limit_density,
    ks_distance_to_konno,
    smooth_series,
)
from .coins import ALGORITHM_ID, build_field, make_rng
from .config import get_settings
from .exceptions import BoundaryOverflowError, DomainError, QWalkError, WindowInvalidError
from .kubelka_munk import km_reflectance, km_reflectance_curve, load_layers
from .models import FieldProvenance, RunRecord, ScenarioConfig
from .optics import (
    composite_s,
    path_sum_s,
    s_matrix_record,
    two_interface_s,
    load_stack,
)
from .utils import (
    now_in_timezone,
    record_hash,
    setup_logging,
    write_csv,
    write_json,
)
from .walk import evolve, make_initial_state

logger = setup_logging()


class SeedOutcome:
    """Everything one seed contributes to the ensemble."""

    def __init__(
        self,
        seed: Optional[int],
        provenance: FieldProvenance,
        moments: DensityMoments,
        snapshots: np.ndarray,
    ):
        self.seed = seed
        self.provenance = provenance
        self.moments = moments
        self.snapshots = snapshots


def series_times(config: ScenarioConfig) -> List[int]:
    """Steps at which scalar observables are recorded."""
    times = set(range(0, config.time_horizon + 1, config.series_every))
    times.add(config.time_horizon)
    return sorted(times)


def density_times(config: ScenarioConfig) -> List[int]:
    """Steps at which full densities are kept: snapshots plus Laplace fits."""
    times = set(config.resolved_snapshots())
    if "laplace" in config.observables:
        times.update(t for t in config.laplace_times if 0 <= t <= config.time_horizon)
    return sorted(times)


def run_seed(config: ScenarioConfig, seed: Optional[int]) -> SeedOutcome:
    """
    Build the field for one seed, evolve it and record observables.

    Module-level so it can be shipped to worker processes.
    """
    size = config.resolved_lattice_size()
    rng = make_rng(seed) if seed is not None else None
    field = build_field(config.family, size, rng, config.sampling)

    moments = DensityMoments(series_times(config), config.window_half_width)
    kept = density_times(config)
    rows = {t: i for i, t in enumerate(kept)}
    snapshots = np.zeros((len(kept), size), dtype=np.float64)

    def record_density(t, state):
        row = rows.get(t)
        if row is not None:
            snapshots[row] = np.abs(state.plus) ** 2 + np.abs(state.minus) ** 2

    evolve(
        make_initial_state(size),
        field,
        config.time_horizon,
        observers=(moments, record_density),
        seed=seed,
    )
    label = f"seed {seed}" if seed is not None else config.family.tag
    logger.info(f"{label} done (t={config.time_horizon})")
    return SeedOutcome(seed, field.provenance, moments, snapshots)


def _seed_order(outcome: SeedOutcome) -> Tuple[int, int]:
    return (0, 0) if outcome.seed is None else (1, outcome.seed)


class ScenarioService:
    """Service class for running scenarios and writing their results."""

    def __init__(self):
        self.settings = get_settings()

    def run_scenario(
        self,
        config: ScenarioConfig,
        workers: Optional[int] = None,
        out_dir: Optional[Path] = None,
        base_dir: Optional[Path] = None,
    ) -> RunRecord:
        """
        Run a scenario end to end.

        Args:
            config: Validated scenario
            workers: Worker processes, defaults to the settings value
            out_dir: Root output directory; results go to <out_dir>/<name>/
            base_dir: Directory relative stack/layer files refer to

        Returns:
            Run record, also written to summary.json

        Raises:
            BoundaryOverflowError: If any seed reaches the lattice edge
            QWalkError: On any other failure
        """
        workers = workers or self.settings.resolved_workers()
        root = Path(out_dir or config.output_dir or self.settings.output_dir)
        target = root / config.name
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        started_at = now_in_timezone()
        clock = time.perf_counter()

        try:
            if config.kind == "walk":
                record, summary = self._run_walk(config, workers, target)
            elif config.kind == "optics":
                record, summary = self._run_optics(config, target, base_dir)
            else:
                record, summary = self._run_km(config, target, base_dir)
        except BoundaryOverflowError as e:
            logger.error(f"Boundary overflow in {config.name}: seed={e.seed}, t={e.t}")
            raise
        except (ValueError, KeyError):
            raise
        except Exception as e:
            logger.error(f"Error running scenario {config.name}: {str(e)}")
            raise QWalkError(f"Failed to run scenario {config.name}: {e}") from e

        record.workers = workers
        record.started_at = started_at
        record.wall_clock_seconds = time.perf_counter() - clock
        write_json(target / "summary.json", {"record": record.model_dump(mode="json"), "results": summary})
        logger.info(f"Wrote {target / 'summary.json'}")
        return record

    def _make_record(
        self,
        config: ScenarioConfig,
        provenance: List[FieldProvenance],
        algorithm_id: Optional[str],
    ) -> RunRecord:
        echo = config.model_dump(mode="json", exclude={"output_dir"})
        payload = {
            "config": echo,
            "provenance": [p.model_dump(mode="json") for p in provenance],
            "software_version": __version__,
            "numpy_version": np.__version__,
            "algorithm_id": algorithm_id,
        }
        return RunRecord(
            scenario=config.name,
            config=echo,
            provenance=provenance,
            software_version=__version__,
            numpy_version=np.__version__,
            algorithm_id=algorithm_id,
            started_at=now_in_timezone(),
            run_hash=record_hash(payload),
        )

    # ------------------------------------------------------------------
    # walk scenarios
    # ------------------------------------------------------------------

    def run_ensemble(self, config: ScenarioConfig, workers: int = 1) -> List[SeedOutcome]:
        """
        Run every seed and return outcomes sorted by seed.

        The order of the returned list never depends on the worker count, so
        the ensemble means are identical for any number of workers.
        """
        seeds = config.resolved_seeds()
        tasks = [(config, seed) for seed in seeds]
        if workers <= 1 or len(tasks) == 1:
            outcomes = [run_seed(*task) for task in tasks]
        else:
            with Pool(processes=min(workers, len(tasks))) as pool:
                outcomes = pool.starmap(run_seed, tasks)
        return sorted(outcomes, key=_seed_order)

    def _run_walk(self, config: ScenarioConfig, workers: int, target: Path) -> Tuple[RunRecord, dict]:
        logger.info(
            f"Running {config.name}: {config.family.tag}, N={config.resolved_lattice_size()}, "
            f"T={config.time_horizon}, {len(config.resolved_seeds())} run(s), {workers} worker(s)"
        )
        outcomes = self.run_ensemble(config, workers)

        random = config.family.tag == "RandomB"
        record = self._make_record(
            config,
            [outcome.provenance for outcome in outcomes],
            ALGORITHM_ID if random else None,
        )
        run_hash = record.run_hash

        kept = density_times(config)
        ensemble = average_ensemble([outcome.snapshots for outcome in outcomes], kept)
        moments = DensityMoments.mean([outcome.moments for outcome in outcomes])
        origin = config.resolved_lattice_size() // 2
        positions = np.arange(config.resolved_lattice_size()) - origin
        observables = set(config.observables)
        outputs: Dict[str, str] = {}
        summary: dict = {"seed_count": ensemble.seed_count, "max_norm_error": moments.max_norm_error()}

        def emit(name: str, columns: dict):
            path = write_csv(target / f"{name}.csv", columns, run_hash)
            outputs[name] = str(path.relative_to(target))
            logger.info(f"Wrote {path}")

        if "density" in observables:
            snapshot_times = config.resolved_snapshots()
            rows = np.vstack([ensemble.at(t) for t in snapshot_times])
            emit("density", {
                "t": np.repeat(snapshot_times, positions.size),
                "n": np.tile(positions, len(snapshot_times)),
                "value": rows.ravel(),
            })

        cog = moments.cog()
        if observables & {"cog", "alpha"}:
            emit("cog", {"t": cog.times, "cog": cog.values})
            positive = cog.between(1, config.time_horizon)
            try:
                power = fit_power_law(positive.between(*config.alpha_fit_range))
                summary["power_law"] = power.model_dump()
            except DomainError as e:
                logger.warning(f"Power-law fit skipped: {e}")
                summary["power_law_skipped"] = str(e)

        if "alpha" in observables:
            try:
                alpha = cog_exponent_series(cog.between(1, config.time_horizon), config.alpha_window)
                emit("alpha", {"t": alpha.times, "alpha": alpha.values})
                fit = fit_alpha_model(alpha, tuple(config.alpha_fit_range))
                summary["alpha_fit"] = fit.model_dump()
                if fit.degenerate:
                    logger.warning("Alpha fit is degenerate (α ≡ 1)")
            except DomainError as e:
                logger.warning(f"Alpha series skipped: {e}")
                summary["alpha_fit_skipped"] = str(e)

        if "sd" in observables:
            sd = moments.sd()
            emit("sd", {"t": sd.times, "sd": sd.values})

        if "window" in observables:
            window = moments.window()
            smoothed = smooth_series(window, config.window_smoothing)
            emit("window", {"t": window.times, "window": window.values, "smoothed": smoothed.values})
            summary["window_half_width"] = config.window_half_width

        if "eta" in observables:
            eta = moments.eta()
            emit("eta", {"t": eta.times, "eta": eta.values})

        if "laplace" in observables:
            fits = []
            for t in sorted(set(config.laplace_times)):
                if t > config.time_horizon or t <= 0:
                    continue
                mean_density = ensemble.at(t)
                window = None
                if config.laplace_half_width is not None:
                    peak = int(positions[np.argmax(mean_density)])
                    window = (peak - config.laplace_half_width, peak + config.laplace_half_width)
                try:
                    fits.append((t, fit_laplace(mean_density, origin, window=window, t=t)))
                except WindowInvalidError as e:
                    logger.warning(f"Laplace fit at t={t} skipped: {e}")
            if fits:
                emit("laplace", {
                    "t": [t for t, _ in fits],
                    "amplitude": [f.amplitude for _, f in fits],
                    "x0": [f.x0 for _, f in fits],
                    "delta_t": [f.delta_t for _, f in fits],
                    "residual": [f.residual for _, f in fits],
                    "r_squared": [f.r_squared for _, f in fits],
                    "window_low": [f.window[0] for _, f in fits],
                    "window_high": [f.window[1] for _, f in fits],
                })

        final = ensemble.at(config.time_horizon) if config.time_horizon in kept else None
        if final is not None:
            try:
                summary["front_peaks"] = list(front_peaks(final, origin))
            except DomainError as e:
                logger.warning(f"Front peaks unavailable: {e}")
            if config.family.tag == "Hadamard":
                asymmetry = hadamard_asymmetry()
                printed = "printed-konno" in config.paper_compat_flags
                horizon = config.time_horizon
                reach = positions[np.abs(positions) <= horizon]
                x = reach / float(horizon)
                emit("konno", {
                    "n": reach,
                    "x": x,
                    "density": konno_limit_density(x, asymmetry=asymmetry, printed=printed),
                    "walk": final[origin + reach],
                })
                summary["konno_form"] = "printed" if printed else "normalized"
                summary["ks_distance_to_konno"] = ks_distance_to_konno(final, origin, horizon, asymmetry)

        record.outputs = outputs
        return record, summary

    # ------------------------------------------------------------------
    # optics and Kubelka-Munk scenarios
    # ------------------------------------------------------------------

    def _run_optics(self, config: ScenarioConfig, target: Path, base_dir: Path) -> Tuple[RunRecord, dict]:
        section = config.optics
        segments = section.segments
        max_bounces = section.max_bounces
        if segments is None:
            segments, max_bounces = load_stack(base_dir / section.stack_file)
        record = self._make_record(config, [], None)

        k_left, k_right = segments[0].k, segments[-1].k
        composite = composite_s(segments)
        summary = {
            "interfaces": len(segments) - 1,
            "composite": s_matrix_record(composite, k_left, k_right),
            "path_sum": s_matrix_record(path_sum_s(segments, max_bounces), k_left, k_right),
        }
        if len(segments) == 3:
            closed = two_interface_s(segments[0].k, segments[1].k, segments[2].k, segments[1].a)
            summary["closed_form"] = s_matrix_record(closed, k_left, k_right)

        bounces = list(range(max_bounces + 1))
        errors = [
            float(np.max(np.abs(path_sum_s(segments, b).entries - composite.entries)))
            for b in bounces
        ]
        path = write_csv(
            target / "path_sum_convergence.csv",
            {"max_bounces": bounces, "max_abs_error": errors},
            record.run_hash,
        )
        record.outputs = {"path_sum_convergence": str(path.relative_to(target))}
        logger.info(f"Wrote {path}")
        return record, summary

    def _run_km(self, config: ScenarioConfig, target: Path, base_dir: Path) -> Tuple[RunRecord, dict]:
        section = config.km
        layers = section.layers
        backing = section.backing_reflectance
        if layers is None and section.layers_file is not None:
            layers, backing = load_layers(base_dir / section.layers_file)
        record = self._make_record(config, [], None)
        outputs: Dict[str, str] = {}
        summary: dict = {}

        if section.ratios:
            path = write_csv(target / "r_infinity.csv", km_reflectance_curve(section.ratios), record.run_hash)
            outputs["r_infinity"] = str(path.relative_to(target))
            logger.info(f"Wrote {path}")

        if layers:
            depths = list(range(1, len(layers) + 1))
            values = [km_reflectance(layers[:count], backing) for count in depths]
            path = write_csv(
                target / "stack_reflectance.csv",
                {"top_layers": depths, "reflectance": values},
                record.run_hash,
            )
            outputs["stack_reflectance"] = str(path.relative_to(target))
            summary["reflectance"] = values[-1]
            summary["backing_reflectance"] = backing
            logger.info(f"Wrote {path}")

        record.outputs = outputs
        return record, summary


# Global service instance
_service_instance = None


def get_scenario_service() -> ScenarioService:
    """Get the scenario service instance."""
    global _service_instance
    if _service_instance is None:
        _service_instance = ScenarioService()
    return _service_instance
