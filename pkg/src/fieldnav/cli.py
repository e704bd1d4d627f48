"""Batch entry points: scene generation, rollouts, slice export, serving.

Exit codes are a stable contract: 0 success, 1 usage or configuration
problems, 2 domain rejections (uncertifiable scenes, invalid goals).  Every
command echoes its effective configuration so a run can be reproduced from
its own output.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DomainError,
    InvalidGoalError,
    SceneRejectedError,
    ValidationError,
)
from .field import build_field
from .grid import save_field
from .scene import generate_scene, load_manifest, manifest_to_grid, save_manifest
from .sim import evaluate, run_rollout, write_summary, write_summary_csv, write_trace

# Usage problems exit 1 per the CLI contract (click defaults to 2).
click.UsageError.exit_code = 1


def _load_run_config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _echo_config(cfg: RunConfig, overrides: dict) -> None:
    effective = cfg.effective_dict()
    effective["overrides"] = overrides
    click.echo("# config " + json.dumps(effective, sort_keys=True))


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ValidationError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except (SceneRejectedError, DomainError, InvalidGoalError) as exc:
            click.echo(f"rejected: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
def main():
    """Voxel potential-field navigation toolkit."""


@main.command("gen-scene")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="scenes", show_default=True)
@_exit_codes
def gen_scene(config_path, seed, difficulty, count, out_dir):
    """Generate certified scenes: a manifest JSON and an occupancy .vxf each."""
    cfg = _load_run_config(config_path)
    if not 0.0 <= difficulty <= 1.0:
        raise ConfigError(f"difficulty {difficulty} outside [0, 1]")
    if count < 1:
        raise ConfigError("count must be >= 1")
    _echo_config(cfg, {"seed": seed, "difficulty": difficulty, "count": count})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in range(seed, seed + count):
        manifest, grid = generate_scene(s, difficulty, cfg.scene)
        stem = out / f"scene_{s:05d}"
        save_manifest(stem.with_suffix(".json"), manifest)
        save_field(stem.with_suffix(".vxf"), grid)
        click.echo(f"wrote {stem}.json / .vxf")


@main.command("rollout")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--scene", "scene_paths", type=click.Path(), multiple=True, required=True)
@click.option("--trials", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--reverse-field", is_flag=True, help="Diagnostic: follow the positive gradient.")
@_exit_codes
def rollout(config_path, scene_paths, trials, out_dir, reverse_field):
    """Run field-following rollouts over scenes and report SR / DE."""
    cfg = _load_run_config(config_path)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    manifests = []
    for path in scene_paths:
        if not Path(path).exists():
            raise ConfigError(f"scene file not found: {path}")
        manifests.append(load_manifest(path))
    _echo_config(
        cfg,
        {"scenes": list(scene_paths), "trials": trials, "reverse_field": reverse_field},
    )
    rollout_cfg = cfg.rollout
    if reverse_field:
        import dataclasses

        rollout_cfg = dataclasses.replace(rollout_cfg, reverse_field=True)
    summary = evaluate(
        manifests,
        cfg.agent,
        cfg.field_params,
        rollout_cfg,
        trials=trials,
        scene_cfg=cfg.scene,
    )
    click.echo(f"sr = {summary['sr']:.1f}%  de_mean = {summary['de_mean']:.3f} m")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out / "summary.json", summary)
        write_summary_csv(out / "summary.csv", summary)
        if len(manifests) == 1:
            result = run_rollout(manifests[0], cfg.agent, cfg.field_params, rollout_cfg)
            write_trace(out / "trace.jsonl", result)
        click.echo(f"wrote summaries under {out}")


@main.command("export-slice")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--scene", "scene_path", type=click.Path(), required=True)
@click.option(
    "--field",
    "field_kind",
    type=click.Choice(["u", "sdf", "grad"]),
    default="u",
    show_default=True,
)
@click.option("--z", "z_height", type=float, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@_exit_codes
def export_slice(config_path, scene_path, field_kind, z_height, out_path):
    """Emit one z-slice of the potential, signed distance, or guidance field as CSV."""
    cfg = _load_run_config(config_path)
    if not Path(scene_path).exists():
        raise ConfigError(f"scene file not found: {scene_path}")
    manifest = load_manifest(scene_path)
    spec = manifest.grid_spec()
    zs = spec.origin[2] + (np.arange(spec.dims[2]) + 0.5) * spec.resolution
    if not zs[0] - spec.resolution / 2 <= z_height <= zs[-1] + spec.resolution / 2:
        raise ConfigError(f"z={z_height} outside grid range [0, {spec.extent[2]}]")
    _echo_config(cfg, {"scene": scene_path, "field": field_kind, "z": z_height})
    iz = int(np.argmin(np.abs(zs - z_height)))
    grid = manifest_to_grid(manifest)
    fld = build_field(grid, manifest.goal, cfg.field_params)
    slope = cfg.field_params.attract_gain if cfg.field_params.attract_gain > 0 else 1.0
    bump = 10.0 * spec.resolution * slope
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if field_kind == "grad":
            writer.writerow(["x", "y", "fx", "fy", "fz"])
            data = fld.guidance.vectors[:, :, iz, :]
        else:
            writer.writerow(["x", "y", "value"])
            source = fld.potential.filled(bump) if field_kind == "u" else fld.sdf
            data = source.values[:, :, iz]
        for iy in range(spec.dims[1]):
            for ix in range(spec.dims[0]):
                x = spec.origin[0] + (ix + 0.5) * spec.resolution
                y = spec.origin[1] + (iy + 0.5) * spec.resolution
                row = data[ix, iy]
                if field_kind == "grad":
                    writer.writerow([f"{x:.4f}", f"{y:.4f}", *(f"{v:.9g}" for v in row)])
                else:
                    writer.writerow([f"{x:.4f}", f"{y:.4f}", f"{row:.9g}"])
    click.echo(f"wrote {out_path}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--scene", "scene_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--difficulty", type=float, default=0.2, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@_exit_codes
def serve(config_path, scene_path, seed, difficulty, host, port):
    """Run the click-to-navigate teleoperation server."""
    import uvicorn

    from .server import create_app

    cfg = _load_run_config(config_path)
    if scene_path:
        if not Path(scene_path).exists():
            raise ConfigError(f"scene file not found: {scene_path}")
        manifest = load_manifest(scene_path)
    else:
        if not 0.0 <= difficulty <= 1.0:
            raise ConfigError(f"difficulty {difficulty} outside [0, 1]")
        manifest, _ = generate_scene(seed, difficulty, cfg.scene)
    _echo_config(cfg, {"scene": scene_path, "seed": seed, "difficulty": difficulty})
    app = create_app(cfg, default_manifest=manifest)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
