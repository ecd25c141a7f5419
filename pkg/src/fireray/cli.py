"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 data or contract error.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np

from . import __version__
from .cloud import (
    CloudParseError, EmptyCloudError, PointCloud, ViewPlane, default_planes, format_cloud,
    load_cloud, normalize_cloud, partition_view,
)
from .fireworks import MutationConfig, RandomStream, optimize_plane
from .objective import UtilizationReport, l_sparks
from .predictor import PredictorWeights, WeightError, predict_kappa
from .projection import RayParams
from .raster import REAL, SEMANTIC, MissingLabelError, coverage_count, render_view, write_ppm
from .scenes import SceneSpec, SceneSpecError, preset, sweep_csv, sweep_grid, synth_room

EXIT_USAGE = 2
EXIT_DATA = 3


class DataError(click.ClickException):
    exit_code = EXIT_DATA


class InputError(click.ClickException):
    exit_code = EXIT_USAGE


def canonical(obj):
    """Round floats to 6 significant digits; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(f"{x:.6g}")
        return 0.0 if x == 0 else x
    return obj


def dumps_canonical(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2) + "\n"


class Scene:
    """A loaded, normalized cloud plus the bookkeeping a run report needs."""

    def __init__(self, cloud: PointCloud, name: str, digest: str):
        self.cloud = normalize_cloud(cloud)
        self.name = name
        self.digest = digest


def load_scene(input_path: Optional[str], preset_name: Optional[str], scene_file: Optional[str]) -> Scene:
    given = [x for x in (input_path, preset_name, scene_file) if x is not None]
    if len(given) != 1:
        raise click.UsageError("give exactly one of --input, --preset, --scene")
    try:
        if input_path is not None:
            path = Path(input_path)
            if not path.is_file():
                raise InputError(f"input file not found: {path}")
            data = path.read_bytes()
            cloud = load_cloud(path)
            return Scene(cloud, path.stem, hashlib.sha256(data).hexdigest())
        spec = preset(preset_name) if preset_name is not None else SceneSpec.load(scene_file)
        cloud = synth_room(spec)
        text = format_cloud(cloud).encode("utf-8")
        return Scene(cloud, spec.name, hashlib.sha256(text).hexdigest())
    except (CloudParseError, EmptyCloudError) as exc:
        raise DataError(str(exc)) from None
    except SceneSpecError as exc:
        raise InputError(str(exc)) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from None


def _check_kappa(kh: float, kw: float, kmin: float, kmax: float) -> RayParams:
    try:
        return RayParams(kh, kw, kmin, kmax)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def parse_plane_kappas(values: Sequence[str]) -> Dict[int, Tuple[float, float]]:
    """``ID:KH,KW`` entries to a plane -> (kh, kw) map."""
    out = {}
    for v in values:
        try:
            pid, rest = v.split(":", 1)
            kh, kw = rest.split(",")
            out[int(pid)] = (float(kh), float(kw))
        except ValueError:
            raise click.BadParameter(f"expected ID:KH,KW, got {v!r}", param_hint="--kappa") from None
    return out


def parse_grid(text: str) -> List[float]:
    """``START:STOP:COUNT`` to evenly spaced values, rounded to 12 decimals."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise click.BadParameter(f"expected START:STOP:COUNT, got {text!r}", param_hint="--grid") from None
    if n < 1:
        raise click.BadParameter("grid count must be at least 1", param_hint="--grid")
    if n == 1:
        return [a]
    return [round(a + (b - a) * i / (n - 1), 12) for i in range(n)]


def run_planes(fn: Callable[[ViewPlane], dict], planes: Sequence[ViewPlane], threads: int) -> List[dict]:
    """Apply ``fn`` per plane; results keep plane order whatever the thread count."""
    if threads <= 1 or len(planes) <= 1:
        return [fn(p) for p in planes]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, planes))


def score_plane(scene: Scene, plane: ViewPlane, ray: RayParams, H: int, W: int, tau: float) -> UtilizationReport:
    subset = partition_view(scene.cloud, plane)
    frac = coverage_count(scene.cloud, subset, plane, ray, H, W) / (H * W)
    return UtilizationReport.build(plane.id, frac, tau, ray)


def render_plane(scene: Scene, plane: ViewPlane, ray: RayParams, H: int, W: int, out: Path) -> None:
    subset = partition_view(scene.cloud, plane)
    for mode in (REAL, SEMANTIC):
        img = render_view(scene.cloud, subset, plane, ray, H, W, mode=mode)
        write_ppm(img, out / f"{scene.name}_{plane.id}_{mode}.ppm")


def plane_entry(rep: UtilizationReport) -> dict:
    return {
        "id": rep.plane_id,
        "kappa_h": rep.kappa.kappa_h,
        "kappa_w": rep.kappa.kappa_w,
        "semantic_fraction": rep.semantic_fraction,
        "u_space": rep.u_space,
        "reg_value": rep.reg_value,
        "degenerate": rep.degenerate,
    }


def write_report(out: Path, scene: Scene, settings: dict, reports: List[UtilizationReport], extra: Optional[dict] = None) -> dict:
    report = {
        "version": __version__,
        "input_digest": scene.digest,
        "settings": settings,
        "planes": [plane_entry(r) for r in reports],
        "l_sparks": l_sparks(reports),
    }
    if extra:
        report.update(extra)
    (out / "report.json").write_text(dumps_canonical(report), encoding="utf-8")
    return report


def _check_labels(scene: Scene) -> None:
    if not scene.cloud.has_labels:
        raise DataError("semantic rendering needs a label on every point")


def _guard(fn):
    """Map library exceptions raised inside a command to exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (MissingLabelError, WeightError) as exc:
            raise DataError(str(exc)) from None
    return wrapper


def scene_options(fn):
    fn = click.option("--scene", "scene_file", type=str, help="SceneSpec JSON file.")(fn)
    fn = click.option("--preset", "preset_name", type=str, help="Built-in scene preset, e.g. two-wall.")(fn)
    fn = click.option("--input", "input_path", type=str, help="xyz-ascii point cloud.")(fn)
    return fn


def common_options(fn):
    opts = [
        click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True),
        click.option("--planes", "m", type=click.IntRange(1, 6), default=4, show_default=True),
        click.option("--height", "H", type=click.IntRange(min=1), default=224, show_default=True),
        click.option("--width", "W", type=click.IntRange(min=1), default=224, show_default=True),
        click.option("--tau", type=click.FloatRange(min=0), default=0.8, show_default=True),
        click.option("--lam", "lam", type=click.FloatRange(min=0), default=0.2, show_default=True),
        click.option("--omega", type=click.FloatRange(0, 1), default=0.8, show_default=True),
        click.option("--samples", "S", type=click.IntRange(min=1), default=32, show_default=True),
        click.option("--radius", "r", type=click.FloatRange(min=0, min_open=True), default=0.2, show_default=True),
        click.option("--kmin", type=float, default=-5.0, show_default=True),
        click.option("--kmax", type=float, default=5.0, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--threads", type=click.IntRange(min=1), default=None, help="Default: one per plane."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def settings_echo(command: str, **kw) -> dict:
    keys = ("H", "W", "tau", "lam", "omega", "S", "r", "kmin", "kmax", "seed", "m")
    names = {"lam": "lambda", "kmin": "kappa_min", "kmax": "kappa_max", "m": "M"}
    s = {names.get(k, k): kw[k] for k in keys}
    s["command"] = command
    return s


def _prepare(out, kmin, kmax, threads, m):
    if not kmin < kmax:
        raise click.BadParameter("--kmin must be below --kmax")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out, default_planes(m), threads or min(m, os.cpu_count() or 1)


@click.group()
@click.version_option(__version__)
def main():
    """Curved-ray point cloud projection, utilization scoring and ray search."""


@main.command()
@scene_options
@common_options
@click.option("--kh", type=float, default=0.0, show_default=True, help="Height curvature for all planes.")
@click.option("--kw", type=float, default=0.0, show_default=True, help="Width curvature for all planes.")
@click.option("--kappa", "kappas", multiple=True, help="Per-plane override ID:KH,KW.")
@_guard
def project(input_path, preset_name, scene_file, out, m, H, W, tau, lam, omega, S, r, kmin, kmax, seed, threads, kh, kw, kappas):
    """Render every plane at fixed curvature and score it."""
    out, planes, threads = _prepare(out, kmin, kmax, threads, m)
    per_plane = parse_plane_kappas(kappas)
    rays = {p.id: _check_kappa(*per_plane.get(p.id, (kh, kw)), kmin, kmax) for p in planes}
    scene = load_scene(input_path, preset_name, scene_file)
    _check_labels(scene)

    def work(plane):
        ray = rays[plane.id]
        render_plane(scene, plane, ray, H, W, out)
        return score_plane(scene, plane, ray, H, W, tau)

    reports = run_planes(work, planes, threads)
    settings = settings_echo("project", **locals())
    write_report(out, scene, settings, reports)
    click.echo(f"wrote {2 * len(planes)} images and report.json to {out}")


@main.command()
@scene_options
@common_options
@click.option("--pop", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--iters", type=click.IntRange(min=0), default=30, show_default=True)
@click.option("--kh", type=float, default=0.0, show_default=True, help="Initial height curvature.")
@click.option("--kw", type=float, default=0.0, show_default=True, help="Initial width curvature.")
@_guard
def optimize(input_path, preset_name, scene_file, out, m, H, W, tau, lam, omega, S, r, kmin, kmax, seed, threads, pop, iters, kh, kw):
    """Search per-plane curvature maximizing space utilization."""
    out, planes, threads = _prepare(out, kmin, kmax, threads, m)
    init = _check_kappa(kh, kw, kmin, kmax)
    scene = load_scene(input_path, preset_name, scene_file)
    _check_labels(scene)

    def work(plane):
        subset = partition_view(scene.cloud, plane)
        cfg = MutationConfig(kmin, kmax, seed)
        best, trace = optimize_plane(scene.cloud, subset, plane, H, W, tau, cfg, pop, iters, init,
                                     stream_key=(plane.id,))
        render_plane(scene, plane, best, H, W, out)
        return score_plane(scene, plane, best, H, W, tau), trace

    results = run_planes(work, planes, threads)
    reports = [rep for rep, _ in results]
    traces = [{"id": p.id, "best_per_iteration": t.best_scores, "evaluations": len(t.all_scores())}
              for p, (_, t) in zip(planes, results)]
    settings = settings_echo("optimize", **locals())
    settings.update(pop=pop, iters=iters)
    write_report(out, scene, settings, reports, {"traces": traces})
    for rep in reports:
        click.echo(f"plane {rep.plane_id}: kappa=({rep.kappa.kappa_h:.4f}, {rep.kappa.kappa_w:.4f}) u_space={rep.u_space:.4f}")


@main.command()
@scene_options
@common_options
@click.option("--weights", "weights_path", type=str, required=True, help="Predictor weight JSON.")
@click.option("--mutate/--no-mutate", default=False, show_default=True)
@_guard
def predict(input_path, preset_name, scene_file, out, m, H, W, tau, lam, omega, S, r, kmin, kmax, seed, threads, weights_path, mutate):
    """Predict curvature per plane from loaded weights."""
    out, planes, threads = _prepare(out, kmin, kmax, threads, m)
    if not Path(weights_path).is_file():
        raise InputError(f"weight file not found: {weights_path}")
    try:
        weights = PredictorWeights.load(weights_path)
    except json.JSONDecodeError as exc:
        raise DataError(f"weight file is not JSON: {exc}") from None
    scene = load_scene(input_path, preset_name, scene_file)
    _check_labels(scene)

    def work(plane):
        n = len(partition_view(scene.cloud, plane))
        if n == 0:
            ray = RayParams(0.0, 0.0, kmin, kmax)
        else:
            rng = RandomStream(seed, plane.id)
            ray = predict_kappa(scene.cloud, plane, weights, min(S, n), r, omega, kmin, kmax, rng, mutate)
        render_plane(scene, plane, ray, H, W, out)
        return score_plane(scene, plane, ray, H, W, tau)

    reports = run_planes(work, planes, threads)
    settings = settings_echo("predict", **locals())
    settings["mutate"] = mutate
    write_report(out, scene, settings, reports)
    for rep in reports:
        click.echo(f"plane {rep.plane_id}: kappa=({rep.kappa.kappa_h:.6g}, {rep.kappa.kappa_w:.6g})")


@main.command()
@scene_options
@click.option("--grid", "grid_text", default="-5:5:11", show_default=True, help="START:STOP:COUNT per axis.")
@click.option("--plane", "plane_id", type=click.IntRange(1, 6), default=1, show_default=True)
@click.option("--height", "H", type=click.IntRange(min=1), default=224, show_default=True)
@click.option("--width", "W", type=click.IntRange(min=1), default=224, show_default=True)
@click.option("--tau", type=click.FloatRange(min=0), default=0.8, show_default=True)
@click.option("--kmin", type=float, default=-5.0, show_default=True)
@click.option("--kmax", type=float, default=5.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path; stdout when omitted.")
@_guard
def sweep(input_path, preset_name, scene_file, grid_text, plane_id, H, W, tau, kmin, kmax, out):
    """Score a kappa grid on one plane and emit CSV."""
    grid = parse_grid(grid_text)
    if not kmin < kmax:
        raise click.BadParameter("--kmin must be below --kmax")
    if min(grid) < kmin or max(grid) > kmax:
        raise click.BadParameter(f"grid leaves [{kmin}, {kmax}]", param_hint="--grid")
    scene = load_scene(input_path, preset_name, scene_file)
    _check_labels(scene)
    plane = default_planes(plane_id)[-1]
    rows, best = sweep_grid(scene.cloud, plane, grid, None, H, W, tau, kmin, kmax)
    text = sweep_csv(rows)
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
    b = rows[best]
    click.echo(f"best: kappa=({b.kappa_h:.6g}, {b.kappa_w:.6g}) u_space={b.u_space:.6g} {b.direction}", err=True)


@main.command()
@click.option("--preset", "preset_name", type=str, default=None)
@click.option("--scene", "scene_file", type=str, default=None, help="SceneSpec JSON file.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="xyz-ascii output path.")
@click.option("--dump-spec", type=click.Path(dir_okay=False), default=None, help="Also write the SceneSpec JSON.")
def synth(preset_name, scene_file, out, dump_spec):
    """Generate a synthetic scene as xyz-ascii."""
    if (preset_name is None) == (scene_file is None):
        raise click.UsageError("give exactly one of --preset, --scene")
    try:
        spec = preset(preset_name) if preset_name is not None else SceneSpec.load(scene_file)
    except (SceneSpecError, OSError, json.JSONDecodeError, TypeError) as exc:
        raise InputError(str(exc)) from None
    cloud = synth_room(spec)
    Path(out).write_text(format_cloud(cloud), encoding="utf-8")
    if dump_spec:
        spec.dump(dump_spec)
    click.echo(f"wrote {len(cloud)} points to {out}")


@main.command("init-weights")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--random", "random_seed", type=int, default=None, help="Gaussian weights from this seed instead of zeros.")
def init_weights(out, random_seed):
    """Write a predictor weight file (all zeros by default)."""
    w = PredictorWeights.zeros() if random_seed is None else PredictorWeights.random(random_seed)
    w.save(out)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
