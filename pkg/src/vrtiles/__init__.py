"""Viewport-adaptive tiled 360 degree video streaming."""

from .allocation import AllocationInput, AllocationPlan, TileOption, allocate_exact, allocate_greedy
from .geometry import (
    AngularRect,
    HexafaceConfig,
    HexafaceSphere,
    SphereMesh,
    build_hexaface,
    default_hexaface,
    generate_sphere_mesh,
)
from .manifest import TileSet, VideoSource, build_tileset, load_catalog, parse_manifest, write_manifest
from .simulator import SessionConfig, Trace, compare_benchmarks, run_session, synthesize_tour_trace
from .viewport import EulerAngles, Quaternion, Viewport, euler_to_quaternion, quaternion_to_euler, visible_tiles

__all__ = [
    "AllocationInput",
    "AllocationPlan",
    "AngularRect",
    "EulerAngles",
    "HexafaceConfig",
    "HexafaceSphere",
    "Quaternion",
    "SessionConfig",
    "SphereMesh",
    "TileOption",
    "TileSet",
    "Trace",
    "VideoSource",
    "Viewport",
    "allocate_exact",
    "allocate_greedy",
    "build_hexaface",
    "build_tileset",
    "compare_benchmarks",
    "default_hexaface",
    "euler_to_quaternion",
    "generate_sphere_mesh",
    "load_catalog",
    "parse_manifest",
    "quaternion_to_euler",
    "run_session",
    "synthesize_tour_trace",
    "visible_tiles",
    "write_manifest",
]

__version__ = "0.1.0"
