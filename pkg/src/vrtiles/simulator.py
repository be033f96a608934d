"""Interval-stepped streaming sessions over head-orientation traces.

Each interval samples the orientation at its start (sample-and-hold), finds
the visible tiles, classifies priorities and runs the greedy allocation.
Bits are accumulated for the adaptive plan and for a baseline that sends
every tile at one fixed level.

The per-interval budget ``W`` is one of

* a number in Mbps (``math.inf`` for unconstrained), or a list of numbers
  with one entry per interval;
* ``"reference"``: a constant link sized to carry the forward-facing
  viewport at the top level and every other tile at the lowest level;
* ``"viewport"``: the same rule re-evaluated for the current viewport of
  each interval.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .allocation import (
    AllocationInput,
    TileOption,
    allocate_greedy,
    classify_priorities,
    priority_classes,
)
from .errors import InfeasibleBudgetError, TraceError, VRTilesError
from .geometry import HexafaceSphere
from .manifest import TileSet, build_tileset, exact_mbps
from .viewport import EulerAngles, Viewport, visible_tiles


@dataclass(frozen=True)
class TraceSample:
    t_ms: int
    orientation: EulerAngles


@dataclass(frozen=True)
class Trace:
    samples: tuple
    duration_ms: int

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise TraceError("trace has no samples")
        if self.samples[0].t_ms != 0:
            raise TraceError("trace must start at t = 0")
        for a, b in zip(self.samples, self.samples[1:]):
            if b.t_ms <= a.t_ms:
                raise TraceError(f"timestamps must strictly increase ({a.t_ms} -> {b.t_ms})")
        if self.duration_ms < self.samples[-1].t_ms or self.duration_ms <= 0:
            raise TraceError("duration must cover the last sample")

    def orientation_at(self, t_ms):
        """Most recent sample at or before ``t_ms``."""
        current = self.samples[0].orientation
        for s in self.samples:
            if s.t_ms > t_ms:
                break
            current = s.orientation
        return current

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_ms", "yaw_deg", "pitch_deg", "roll_deg"])
        for s in self.samples:
            o = s.orientation
            w.writerow([s.t_ms, repr(math.degrees(o.yaw)), repr(math.degrees(o.pitch)), repr(math.degrees(o.roll))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, duration_ms=None, hold_ms=1000):
        """Parse ``t_ms,yaw_deg,pitch_deg,roll_deg`` rows (header required).

        Without ``duration_ms`` the last sample is held for ``hold_ms``.
        """
        reader = csv.reader(io.StringIO(text))
        rows = [r for r in reader if r and any(c.strip() for c in r)]
        if not rows or [c.strip() for c in rows[0]] != ["t_ms", "yaw_deg", "pitch_deg", "roll_deg"]:
            raise TraceError("trace CSV needs the header t_ms,yaw_deg,pitch_deg,roll_deg")
        samples = []
        for lineno, row in enumerate(rows[1:], start=2):
            try:
                t, yaw, pitch, roll = row
                samples.append(
                    TraceSample(int(float(t)), EulerAngles.from_degrees(float(yaw), float(pitch), float(roll)))
                )
            except ValueError:
                raise TraceError(f"line {lineno}: bad trace row {row!r}") from None
        if not samples:
            raise TraceError("trace CSV has no samples")
        if duration_ms is None:
            duration_ms = samples[-1].t_ms + hold_ms
        return cls(tuple(samples), duration_ms)


def synthesize_tour_trace(hexaface: HexafaceSphere, tile_order=None, dwell_ms=5000) -> Trace:
    """Piecewise-constant trace looking at each listed segment for ``dwell_ms``.

    The default order is every middle segment by id, then the top and bottom
    caps.
    """
    if dwell_ms <= 0:
        raise TraceError("dwell must be positive")
    if tile_order is None:
        tile_order = hexaface.ids
    samples = []
    for i, sid in enumerate(tile_order):
        if isinstance(sid, str):
            sid = hexaface.by_name(sid).segment_id
        yaw, pitch = hexaface[sid].center
        samples.append(TraceSample(i * dwell_ms, EulerAngles(yaw, pitch, 0.0)))
    return Trace(tuple(samples), len(samples) * dwell_ms)


@dataclass(frozen=True)
class SessionConfig:
    interval_ms: int = 1000
    budget: object = "reference"
    packing: bool = True
    coefficients: tuple = (4.0, 2.0, 1.0)
    baseline_level: int = 1
    hfov: float = math.radians(96.0)
    vfov: float = math.radians(90.0)

    def __post_init__(self):
        if not self.interval_ms > 0:
            raise ValueError("interval must be positive")
        if isinstance(self.budget, str):
            if self.budget not in ("reference", "viewport"):
                raise ValueError(f"unknown budget mode {self.budget!r}")
        elif isinstance(self.budget, (list, tuple)):
            object.__setattr__(self, "budget", tuple(self.budget))
            if not all(b > 0 for b in self.budget):
                raise ValueError("budgets must be positive")
        elif not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.baseline_level < 1:
            raise ValueError("baseline_level must be ≥ 1")
        priority_classes(*self.coefficients)

    def to_json(self):
        budget = self.budget
        if budget == math.inf:
            budget = "inf"
        elif isinstance(budget, tuple):
            budget = list(budget)
        return {
            "interval_ms": self.interval_ms,
            "budget_mbps": budget,
            "packing": self.packing,
            "coefficients": list(self.coefficients),
            "baseline_level": self.baseline_level,
            "hfov_deg": math.degrees(self.hfov),
            "vfov_deg": math.degrees(self.vfov),
        }


@dataclass(frozen=True)
class IntervalRecord:
    index: int
    start_ms: int
    duration_ms: int
    orientation: EulerAngles
    visible: tuple
    classes: dict
    budget: object  # Mbps
    plan: object
    adaptive_mbps: Fraction
    baseline_mbps: Fraction

    @property
    def adaptive_bits(self):
        return float(self.adaptive_mbps * self.duration_ms * 1000)

    @property
    def baseline_bits(self):
        return float(self.baseline_mbps * self.duration_ms * 1000)

    @property
    def quality(self):
        """Plan quality score, bitrates in Mbps."""
        return float(self.plan.total_quality)

    def to_json(self):
        o = self.orientation
        return {
            "index": self.index,
            "start_ms": self.start_ms,
            "duration_ms": self.duration_ms,
            "yaw_deg": math.degrees(o.yaw),
            "pitch_deg": math.degrees(o.pitch),
            "roll_deg": math.degrees(o.roll),
            "visible": list(self.visible),
            "budget_mbps": "inf" if self.budget == math.inf else float(self.budget),
            "tiles": [
                {
                    "tile_id": t.tile_id,
                    "class": self.classes[t.tile_id],
                    "priority": t.priority,
                    "level": t.level,
                    "bitrate_mbps": float(t.bitrate),
                }
                for t in self.plan.tiles
            ],
            "adaptive_bits": self.adaptive_bits,
            "baseline_bits": self.baseline_bits,
            "quality": self.quality,
        }


@dataclass(frozen=True)
class SessionReport:
    video: str
    config: SessionConfig
    intervals: tuple = field(repr=False)

    @property
    def _adaptive(self):
        return sum(r.adaptive_mbps * r.duration_ms for r in self.intervals)

    @property
    def _baseline(self):
        return sum(r.baseline_mbps * r.duration_ms for r in self.intervals)

    @property
    def adaptive_bits(self):
        return float(self._adaptive * 1000)

    @property
    def baseline_bits(self):
        return float(self._baseline * 1000)

    @property
    def savings_ratio(self):
        return float(1 - Fraction(self._adaptive) / Fraction(self._baseline))

    @property
    def mean_quality(self):
        total = sum(r.duration_ms for r in self.intervals)
        return sum(r.quality * r.duration_ms for r in self.intervals) / total

    def summary(self):
        return {
            "video": self.video,
            "adaptive_mbit": self.adaptive_bits / 1_000_000,
            "baseline_mbit": self.baseline_bits / 1_000_000,
            "savings_ratio": self.savings_ratio,
            "mean_quality": self.mean_quality,
        }

    def to_json(self):
        return {
            "video": self.video,
            "config": self.config.to_json(),
            "totals": self.summary(),
            "intervals": [r.to_json() for r in self.intervals],
        }


def _viewport_budget(tileset: TileSet, visible):
    """Visible tiles at the top level, every other tile at the lowest."""
    seen = set(visible)
    return sum(
        t.ladder[0].bitrate if t.segment_id in seen else t.ladder[-1].bitrate for t in tileset.tiles
    )


def reference_budget(tileset: TileSet, hexaface: HexafaceSphere, hfov, vfov):
    """Budget (Mbps) of the forward-facing viewport rule."""
    vp = Viewport.from_euler(EulerAngles(0.0, 0.0, 0.0), hfov, vfov)
    return _viewport_budget(tileset, visible_tiles(vp, hexaface))


def _exact_budget(mbps):
    if mbps == math.inf:
        return math.inf
    return exact_mbps(mbps)


def run_session(
    tileset: TileSet, hexaface: HexafaceSphere, trace: Trace, config: SessionConfig = None, video=None
) -> SessionReport:
    config = config or SessionConfig()
    classes = priority_classes(*config.coefficients)
    by_segment = tileset.by_segment()
    if config.baseline_level > tileset.levels:
        raise ValueError(f"baseline_level {config.baseline_level} exceeds the {tileset.levels}-level ladder")
    baseline = sum(t.ladder[config.baseline_level - 1].bitrate for t in tileset.tiles)

    starts = list(range(0, trace.duration_ms, config.interval_ms))
    if isinstance(config.budget, tuple) and len(config.budget) < len(starts):
        raise ValueError(f"budget list has {len(config.budget)} entries for {len(starts)} intervals")
    fixed = None
    if config.budget == "reference":
        fixed = reference_budget(tileset, hexaface, config.hfov, config.vfov)
    elif not isinstance(config.budget, (str, tuple)):
        fixed = _exact_budget(config.budget)

    records = []
    for index, start in enumerate(starts):
        duration = min(config.interval_ms, trace.duration_ms - start)
        euler = trace.orientation_at(start)
        vp = Viewport.from_euler(euler, config.hfov, config.vfov)
        visible = visible_tiles(vp, hexaface)
        prio = classify_priorities(visible, hexaface, classes)
        if config.budget == "viewport":
            budget = _viewport_budget(tileset, visible)
        elif isinstance(config.budget, tuple):
            budget = _exact_budget(config.budget[index])
        else:
            budget = fixed

        options = tuple(
            TileOption(t.tile_id, prio[t.segment_id].coefficient, tuple(t.bitrates()))
            for t in tileset.tiles
        )
        groups = ()
        if config.packing and len(visible) > 1:
            groups = (tuple(by_segment[s].tile_id for s in visible),)
        try:
            plan = allocate_greedy(AllocationInput(options, budget, groups))
        except InfeasibleBudgetError as exc:
            raise InfeasibleBudgetError(exc.budget, exc.w_min, interval=index) from None
        tile_class = {by_segment[s].tile_id: prio[s].class_id for s in prio}
        records.append(
            IntervalRecord(
                index,
                start,
                duration,
                euler,
                tuple(visible),
                tile_class,
                budget,
                plan,
                plan.total_bitrate,
                baseline,
            )
        )
    return SessionReport(video or tileset.source.name, config, tuple(records))


@dataclass
class BenchmarkResult:
    rows: list
    reports: list
    failures: list

    def to_json(self):
        return {
            "summary": self.rows,
            "failures": self.failures,
            "sessions": [r.to_json() for r in self.reports],
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["video", "adaptive_mbit", "baseline_mbit", "savings_ratio", "mean_quality"])
        for r in self.rows:
            w.writerow(
                [
                    r["video"],
                    f"{r['adaptive_mbit']:.6f}",
                    f"{r['baseline_mbit']:.6f}",
                    f"{r['savings_ratio']:.6f}",
                    f"{r['mean_quality']:.6f}",
                ]
            )
        return buf.getvalue()


def compare_benchmarks(
    catalog,
    config: SessionConfig = None,
    hexaface: HexafaceSphere = None,
    levels=4,
    degrade_exponent=2.0,
    dwell_ms=5000,
    tile_order=None,
    trace: Trace = None,
) -> BenchmarkResult:
    """Run one tour session per catalog video; failures are recorded, not raised."""
    from .geometry import default_hexaface

    if not catalog:
        raise ValueError("catalog is empty")
    config = config or SessionConfig()
    hexaface = hexaface or default_hexaface()
    trace = trace or synthesize_tour_trace(hexaface, tile_order, dwell_ms)
    rows, reports, failures = [], [], []
    for video in catalog:
        try:
            ts = video if isinstance(video, TileSet) else build_tileset(video, hexaface, levels, degrade_exponent)
            report = run_session(ts, hexaface, trace, config)
        except VRTilesError as exc:
            name = video.source.name if isinstance(video, TileSet) else video.name
            failures.append({"video": name, "error": str(exc)})
            continue
        reports.append(report)
        rows.append(report.summary())
    return BenchmarkResult(rows, reports, failures)


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
