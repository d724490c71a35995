"""
Command-line front end for the quantum-walk toolkit.

Exit codes: 0 success, 2 usage or configuration error, 3 boundary overflow,
1 any other failure.
"""
import json
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
from pydantic import ValidationError

from . import __version__
from .analysis import (
    KONNO_EDGE,
    hadamard_asymmetry,
    konno_cdf,
    konno_limit_density,
    ks_distance_to_konno,
)
from .coins import build_field
from .config import get_settings
from .exceptions import BoundaryOverflowError, ConfigError, QWalkError
from .kubelka_munk import km_reflectance, km_reflectance_curve, load_layers
from .models import PAPER_COMPAT_FLAGS, CoinFamily, ScenarioConfig
from .optics import composite_s, path_sum_s, load_stack, s_matrix_record
from .scenarios import get_registry, validate_config
from .services import get_scenario_service
from .utils import parse_seed_range, setup_logging, validation_field, write_csv, write_json, record_hash
from .walk import default_lattice_size, density, evolve, make_initial_state

# Setup logging
logger = setup_logging()

EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_OVERFLOW = 3


def _fail(message: str, code: int):
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def _override(config: ScenarioConfig, seeds: Optional[str], paper_compat: bool) -> ScenarioConfig:
    """Re-validate a scenario with command-line overrides applied."""
    data = config.model_dump()
    if seeds is not None:
        data["seeds"] = parse_seed_range(seeds)
    if paper_compat:
        data["paper_compat_flags"] = sorted(set(data["paper_compat_flags"]) | set(PAPER_COMPAT_FLAGS))
    return ScenarioConfig(**data)


@click.group()
@click.version_option(__version__, prog_name="qwalk")
def cli():
    """Quantum walks with position-dependent coins, optics and Kubelka-Munk."""


@cli.command("run")
@click.argument("scenario")
@click.option("--seeds", default=None, help="Inclusive seed range, e.g. 1..100.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Root output directory.")
@click.option("--paper-compat", is_flag=True, help="Use the 6000-site lattice and the printed weak-limit curve.")
def run_command(scenario: str, seeds: Optional[str], workers: Optional[int], out_dir: Optional[Path],
                paper_compat: bool):
    """Run a bundled scenario by name or a scenario file by path."""
    try:
        config, base_dir = get_registry().resolve(scenario)
        config = _override(config, seeds, paper_compat)
    except KeyError as e:
        _fail(str(e).strip("'\""), EXIT_USAGE)
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except ValidationError as e:
        _fail(f"Invalid override: {e.errors()[0].get('msg')} (field '{validation_field(e)}')", EXIT_USAGE)
    except ValueError as e:
        _fail(str(e), EXIT_USAGE)

    try:
        record = get_scenario_service().run_scenario(config, workers=workers, out_dir=out_dir, base_dir=base_dir)
    except BoundaryOverflowError as e:
        _fail(f"boundary overflow at t={e.t} (seed={e.seed})", EXIT_OVERFLOW)
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except QWalkError as e:
        _fail(str(e), EXIT_FAILURE)
    except Exception as e:
        logger.error(f"Unhandled exception: {str(e)}")
        _fail(str(e), EXIT_FAILURE)

    click.echo(f"{record.scenario}: run_hash {record.run_hash}")
    for name, path in sorted(record.outputs.items()):
        click.echo(f"  {name}: {path}")


@cli.command("list")
def list_command():
    """List bundled scenarios."""
    registry = get_registry()
    for name in registry.list_names():
        description = registry.get(name).description
        click.echo(f"{name}\t{description}" if description else name)


@cli.command("validate")
@click.argument("path", type=click.Path(path_type=Path))
def validate_command(path: Path):
    """Check a scenario file without running it."""
    diagnostics = validate_config(path)
    if diagnostics:
        for line in diagnostics:
            click.echo(line, err=True)
        sys.exit(EXIT_USAGE)
    click.echo(f"{path}: OK")


@cli.group("oracle")
def oracle_group():
    """Reference curves."""


@oracle_group.command("konno")
@click.option("--t", "t", type=click.IntRange(min=1), required=True, help="Time step the curve is scaled to.")
@click.option("--walk", is_flag=True, help="Also run the Hadamard walk and report the KS distance.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--paper-compat", is_flag=True, help="Emit the printed, unnormalized density.")
def konno_command(t: int, walk: bool, out_dir: Optional[Path], paper_compat: bool):
    """Emit the Hadamard weak-limit density of X_t/t on sites -t..t."""
    out_dir = out_dir or get_settings().output_dir
    asymmetry = hadamard_asymmetry()
    positions = np.arange(-t, t + 1)
    x = positions / float(t)
    columns = {
        "n": positions,
        "x": x,
        "density": konno_limit_density(x, asymmetry=asymmetry, printed=paper_compat),
        "cdf": konno_cdf(x, asymmetry),
    }
    payload = {"oracle": "konno", "t": t, "asymmetry": asymmetry, "printed": paper_compat, "walk": walk}

    ks = None
    if walk:
        size = default_lattice_size(t)
        field = build_field(CoinFamily(tag="Hadamard"), size)
        try:
            final = evolve(make_initial_state(size), field, t)
        except BoundaryOverflowError as e:
            _fail(f"boundary overflow at t={e.t}", EXIT_OVERFLOW)
        values = density(final)
        origin = size // 2
        columns["walk"] = values[origin - t: origin + t + 1]
        ks = ks_distance_to_konno(values, origin, t, asymmetry)

    path = write_csv(Path(out_dir) / "oracle-konno" / f"konno_t{t}.csv", columns, record_hash(payload))
    click.echo(f"Wrote {path}")
    click.echo(f"support edge: ±{KONNO_EDGE * t:.1f} sites")
    if ks is not None:
        click.echo(f"KS distance: {ks:.6f}")


@cli.group("optics")
def optics_group():
    """Multilayer optics."""


@optics_group.command("s-matrix")
@click.argument("stack_file", type=click.Path(path_type=Path))
@click.option("--max-bounces", type=click.IntRange(min=0), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
def s_matrix_command(stack_file: Path, max_bounces: Optional[int], out_dir: Optional[Path]):
    """Composite and path-sum S-matrices of a stack file."""
    try:
        segments, file_bounces = load_stack(stack_file)
        bounces = file_bounces if max_bounces is None else max_bounces
        k_left, k_right = segments[0].k, segments[-1].k
        result = {
            "composite": s_matrix_record(composite_s(segments), k_left, k_right),
            "path_sum": s_matrix_record(path_sum_s(segments, bounces), k_left, k_right),
            "max_bounces": bounces,
        }
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except QWalkError as e:
        _fail(str(e), EXIT_FAILURE)

    if out_dir is not None:
        path = write_json(Path(out_dir) / f"{stack_file.stem}.s_matrix.json", result)
        click.echo(f"Wrote {path}", err=True)
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@cli.group("km")
def km_group():
    """Kubelka-Munk reflectance."""


@km_group.command("reflect")
@click.argument("layers_file", type=click.Path(path_type=Path))
@click.option("--ratio", "ratios", type=float, multiple=True, help="k/s ratio for an R∞ curve; repeatable.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
def km_reflect_command(layers_file: Path, ratios, out_dir: Optional[Path]):
    """Diffuse reflectance of a layer stack over its backing."""
    try:
        layers, backing = load_layers(layers_file)
        value = km_reflectance(layers, backing)
        curve = km_reflectance_curve(list(ratios)) if ratios else None
    except ConfigError as e:
        _fail(str(e), EXIT_USAGE)
    except QWalkError as e:
        _fail(str(e), EXIT_FAILURE)

    click.echo(f"reflectance: {value:.17g}")
    if curve is not None:
        for ratio, r_inf in zip(curve["k_over_s"], curve["r_infinity"]):
            click.echo(f"  k/s={ratio:.17g}  R_inf={r_inf:.17g}")
        if out_dir is not None:
            payload = {"layers_file": layers_file.name, "ratios": curve["k_over_s"]}
            path = write_csv(Path(out_dir) / f"{layers_file.stem}.r_infinity.csv", curve, record_hash(payload))
            click.echo(f"Wrote {path}", err=True)


if __name__ == "__main__":
    cli()
