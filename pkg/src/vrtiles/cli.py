"""Command-line entry point: mesh, manifest, allocate and simulate.

Settings come from built-in defaults, then an optional ``--config`` JSON
file, then command-line flags, each layer overriding the previous one.
Output files are written atomically and carry no timestamps, so repeated
runs with the same settings are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace

from .allocation import allocate_exact, allocate_greedy, load_input, plan_to_json
from .errors import DegenerateParameterError, MisalignmentError, VRTilesError
from .geometry import HexafaceConfig, build_hexaface, generate_sphere_mesh
from .manifest import build_tileset, find_video, load_catalog, load_manifest, write_manifest
from .simulator import SessionConfig, Trace, compare_benchmarks, dumps_json, synthesize_tour_trace


@dataclass(frozen=True)
class CliConfig:
    catalog: str = None  # None selects the bundled benchmark list
    trace: str = None
    out: str = "out"
    alpha_deg: float = 90.0
    beta_deg: float = 45.0
    stacks: int = 64
    slices: int = 128
    hfov_deg: float = 96.0
    vfov_deg: float = 90.0
    levels: int = 4
    degrade_exponent: float = 2.0
    coefficients: tuple = (4.0, 2.0, 1.0)
    packing: bool = True
    interval_ms: int = 1000
    tour_ms: int = 5000
    budget: object = "reference"

    def check_files(self):
        for name in ("catalog", "trace"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise FileNotFoundError(f"{name} file not found: {path}")

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            interval_ms=self.interval_ms,
            budget=self.budget,
            packing=self.packing,
            coefficients=tuple(self.coefficients),
            hfov=math.radians(self.hfov_deg),
            vfov=math.radians(self.vfov_deg),
        )


class UsageError(Exception):
    """Invalid parameter; reported with exit code 2."""


def parse_budget(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    text = str(value).strip().lower()
    if text in ("reference", "viewport"):
        return text
    if text in ("inf", "infinity", "unlimited"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"budget must be a number, 'inf', 'reference' or 'viewport', got {value!r}") from None


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path}: expected a JSON object")
    known = {f.name for f in fields(CliConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"config file {path}: unknown keys {', '.join(unknown)}")
    return data


def resolve_config(args) -> CliConfig:
    """Defaults, then the config file, then flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in fields(CliConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    if getattr(args, "tour_ms", None) is not None:
        # an explicit tour beats a trace named in the config file
        values["trace"] = None
    if "coefficients" in values:
        values["coefficients"] = tuple(float(c) for c in values["coefficients"])
    if "budget" in values:
        values["budget"] = parse_budget(values["budget"])
    return replace(CliConfig(), **values)


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _hexaface(cfg: CliConfig):
    try:
        mesh = generate_sphere_mesh(cfg.stacks, cfg.slices)
        return build_hexaface(mesh, HexafaceConfig.from_degrees(cfg.alpha_deg, cfg.beta_deg))
    except (DegenerateParameterError, MisalignmentError) as exc:
        raise UsageError(str(exc)) from None


def _slug(name):
    return "".join(c if c.isalnum() else "_" for c in name.strip().lower()).strip("_") or "video"


def cmd_mesh(cfg: CliConfig, args):
    h = _hexaface(cfg)
    mesh_path = os.path.join(cfg.out, "mesh.obj")
    table_path = os.path.join(cfg.out, "segments.json")
    atomic_write(mesh_path, h.mesh.to_obj())
    atomic_write(table_path, dumps_json(h.segment_table()))
    print(f"wrote {mesh_path} ({len(h.mesh.vertices)} vertices, {len(h.mesh.triangles)} triangles)")
    print(f"wrote {table_path} ({len(h.segments)} segments)")


def cmd_manifest(cfg: CliConfig, args):
    h = _hexaface(cfg)
    catalog = load_catalog(cfg.catalog)
    try:
        video = find_video(catalog, args.video)
    except KeyError as exc:
        raise VRTilesError(exc.args[0]) from None
    ts = build_tileset(video, h, cfg.levels, cfg.degrade_exponent)
    path = os.path.join(cfg.out, f"{_slug(video.name)}.mpd")
    atomic_write(path, write_manifest(ts))
    print(f"wrote {path} ({len(ts.tiles)} tiles x {ts.levels} representations)")


def cmd_allocate(cfg: CliConfig, args):
    problem = load_input(args.input)
    if args.method == "greedy":
        plan = allocate_greedy(problem)
    else:
        plan = allocate_exact(problem)
    path = os.path.join(cfg.out, "plan.json")
    atomic_write(path, dumps_json(plan_to_json(plan)))
    levels = " ".join(f"{t.tile_id}:{t.level}" for t in plan.tiles)
    print(f"{plan.method}: {levels}  bitrate={float(plan.total_bitrate):g} Mbps  quality={float(plan.total_quality):g}")
    print(f"wrote {path}")


def _format_table(rows):
    header = f"{'video':<12} {'adaptive Mbit':>14} {'baseline Mbit':>14} {'savings':>9} {'quality':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['video']:<12} {r['adaptive_mbit']:>14.3f} {r['baseline_mbit']:>14.3f} "
            f"{r['savings_ratio']:>9.4f} {r['mean_quality']:>9.3f}"
        )
    return "\n".join(lines)


def cmd_simulate(cfg: CliConfig, args):
    h = _hexaface(cfg)
    session = cfg.session_config()
    if args.manifest:
        videos = [load_manifest(p) for p in args.manifest]
    else:
        videos = load_catalog(cfg.catalog)
    if cfg.trace is not None:
        with open(cfg.trace, encoding="utf-8") as fh:
            trace = Trace.from_csv(fh.read())
    else:
        trace = synthesize_tour_trace(h, dwell_ms=cfg.tour_ms)
    result = compare_benchmarks(
        videos, session, h, levels=cfg.levels, degrade_exponent=cfg.degrade_exponent, trace=trace
    )
    report = result.to_json()
    report["config"] = _config_json(cfg)
    atomic_write(os.path.join(cfg.out, "report.json"), dumps_json(report))
    atomic_write(os.path.join(cfg.out, "summary.csv"), result.to_csv())
    print(_format_table(result.rows))
    for f in result.failures:
        print(f"error: {f['video']}: {f['error']}", file=sys.stderr)
    if result.failures:
        return 1
    return 0


def _config_json(cfg: CliConfig):
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    d["coefficients"] = list(cfg.coefficients)
    if cfg.budget == math.inf:
        d["budget"] = "inf"
    elif isinstance(cfg.budget, tuple):
        d["budget"] = list(cfg.budget)
    # the output location does not change results
    d.pop("out")
    return d


def _add_common(p, *, geometry=True, ladder=False, session=False):
    p.add_argument("--config", help="JSON file with CliConfig fields")
    p.add_argument("--out", help="output directory (default: out)")
    if geometry:
        p.add_argument("--stacks", type=int)
        p.add_argument("--slices", type=int)
        p.add_argument("--alpha-deg", type=float, dest="alpha_deg")
        p.add_argument("--beta-deg", type=float, dest="beta_deg")
    if ladder:
        p.add_argument("--catalog", help="video catalog JSON (default: bundled benchmarks)")
        p.add_argument("--levels", type=int)
        p.add_argument("--degrade-exponent", type=float, dest="degrade_exponent")
    if session:
        p.add_argument("--hfov-deg", type=float, dest="hfov_deg")
        p.add_argument("--vfov-deg", type=float, dest="vfov_deg")
        p.add_argument("--interval-ms", type=int, dest="interval_ms")
        p.add_argument("--budget-mbps", dest="budget", help="Mbps, 'inf', 'reference' or 'viewport'")
        p.add_argument(
            "--coefficients", type=float, nargs=3, metavar=("C1", "C2", "C3"), help="priority coefficients"
        )
        p.add_argument("--pack", action=argparse.BooleanOptionalAction, dest="packing", default=None)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--trace", help="head-orientation CSV (t_ms,yaw_deg,pitch_deg,roll_deg)")
        src.add_argument("--tour", type=int, dest="tour_ms", metavar="DWELL_MS", help="synthetic tour dwell")


def build_parser():
    parser = argparse.ArgumentParser(prog="vrtiles", description="Viewport-adaptive tiled 360 video streaming.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="export the sphere mesh and segment table")
    _add_common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("manifest", help="write the DASH manifest of one catalog video")
    _add_common(p, ladder=True)
    p.add_argument("--video", required=True)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("allocate", help="solve one bitrate allocation instance")
    _add_common(p, geometry=False)
    p.add_argument("--input", required=True, help="allocation instance JSON")
    p.add_argument("--method", choices=("greedy", "exact"), default="greedy")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="run streaming sessions and compare against the baseline")
    _add_common(p, ladder=True, session=True)
    p.add_argument("--manifest", nargs="+", help="MPD files to simulate instead of the catalog")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.check_files()
        if args.command == "simulate":
            try:
                cfg.session_config()
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        return args.func(cfg, args) or 0
    except (UsageError, FileNotFoundError) as exc:
        print(f"vrtiles {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (VRTilesError, ValueError, KeyError, OSError) as exc:
        print(f"vrtiles {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
