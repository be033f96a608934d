"""Equirectangular tile grid, SRD descriptors and a minimal DASH MPD.

Representation bitrates are exact rationals in Mbps, so the area
proportional bitrate model holds without rounding drift.  The MPD carries
the DASH ``@bandwidth`` (integer bits/s, rounded up) plus the exact value in
a ``vrt:bitrate`` attribute so manifests round-trip losslessly.

The horizontal SRD coordinate is taken modulo the frame width: a tile
straddling the +-180 degree seam (the back tile with the default layout)
starts near the right edge and continues at ``x = 0``.
"""

from __future__ import annotations

import json
import math
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .errors import DivisibilityError, LadderError, ManifestParseError
from .geometry import HALF_PI, TWO_PI, AngularRect, HexafaceSphere

MPD_NS = "urn:mpeg:dash:schema:mpd:2011"
SRD_SCHEME = "urn:mpeg:dash:srd:2014"
SOURCE_SCHEME = "urn:vrtiles:source:2017"
SEGMENT_SCHEME = "urn:vrtiles:segment:2017"
VRT_NS = "urn:vrtiles:2017"
_PIXEL_TOL = 1e-6


@dataclass(frozen=True)
class VideoSource:
    name: str
    width: int
    height: int
    bitrate: float  # Mbps, full frame
    fps: float = 30

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if not self.bitrate > 0:
            raise ValueError("bitrate must be positive")
        if self.width != 2 * self.height:
            warnings.warn(
                f"{self.name}: {self.width}x{self.height} is not a 2:1 equirectangular frame",
                stacklevel=3,
            )

    @property
    def exact_bitrate(self) -> Fraction:
        return exact_mbps(self.bitrate)

    def to_json(self):
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "bitrate_mbps": self.bitrate,
            "fps": self.fps,
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["name"], int(d["width"]), int(d["height"]), float(d["bitrate_mbps"]), d.get("fps", 30))


@dataclass(frozen=True)
class SrdDescriptor:
    source_id: int
    object_x: int
    object_y: int
    object_width: int
    object_height: int
    total_width: int
    total_height: int

    def __post_init__(self):
        vals = (
            self.source_id,
            self.object_x,
            self.object_y,
            self.object_width,
            self.object_height,
            self.total_width,
            self.total_height,
        )
        if any(not isinstance(v, int) or v < 0 for v in vals):
            raise ValueError(f"SRD values must be non-negative integers: {vals}")
        if not (
            self.object_x < self.total_width
            and 0 < self.object_width <= self.total_width
            and 0 < self.object_height
            and self.object_y + self.object_height <= self.total_height
        ):
            raise ValueError(f"SRD object rect outside the reference space: {vals}")

    @property
    def area(self):
        return self.object_width * self.object_height

    def x_pieces(self):
        """Column ranges of the object, split at the horizontal seam."""
        end = self.object_x + self.object_width
        if end <= self.total_width:
            return [(self.object_x, end)]
        return [(self.object_x, self.total_width), (0, end - self.total_width)]


def srd_value_string(d: SrdDescriptor) -> str:
    return ",".join(
        str(v)
        for v in (
            d.source_id,
            d.object_x,
            d.object_y,
            d.object_width,
            d.object_height,
            d.total_width,
            d.total_height,
        )
    )


def parse_srd_value(value: str) -> SrdDescriptor:
    parts = value.split(",")
    if len(parts) != 7:
        raise ManifestParseError(f"SRD value needs 7 fields, got {len(parts)}")
    try:
        return SrdDescriptor(*(int(p) for p in parts))
    except ValueError as exc:
        raise ManifestParseError(f"bad SRD value {value!r}: {exc}") from None


def exact_mbps(value) -> Fraction:
    """Exact rational for a bitrate given as int, Fraction, float or string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Representation:
    rep_id: int
    width: int
    height: int
    bitrate: Fraction  # Mbps

    @property
    def bandwidth(self) -> int:
        """DASH ``@bandwidth`` in bits/s."""
        return math.ceil(self.bitrate * 1_000_000)


@dataclass(frozen=True)
class Tile:
    tile_id: int
    segment_id: int
    srd: SrdDescriptor
    ladder: tuple

    def bitrates(self):
        return [r.bitrate for r in self.ladder]

    def rep(self, level):
        return self.ladder[level - 1]


@dataclass(frozen=True)
class TileSet:
    tiles: tuple
    source: VideoSource

    @property
    def levels(self):
        return len(self.tiles[0].ladder)

    def by_segment(self):
        return {t.segment_id: t for t in self.tiles}

    def tile(self, tile_id):
        for t in self.tiles:
            if t.tile_id == tile_id:
                return t
        raise KeyError(tile_id)


def rect_to_pixels(rect: AngularRect, width: int, height: int):
    """Pixel (x, y, w, h) of an angular rect under equirectangular mapping."""
    x = (rect.yaw_min + math.pi) / TWO_PI * width
    w = rect.yaw_span / TWO_PI * width
    y = (HALF_PI - rect.pitch_max) / math.pi * height
    h = rect.pitch_span / math.pi * height
    out = []
    for v in (x, y, w, h):
        r = round(v)
        if abs(v - r) > _PIXEL_TOL:
            raise DivisibilityError(
                f"tile boundary at {v:.6f} px is fractional for a {width}x{height} frame"
            )
        out.append(r)
    x, y, w, h = out
    return x % width, y, w, h


def pixels_to_rect(srd: SrdDescriptor):
    """Inverse of :func:`rect_to_pixels` (angles in radians)."""
    W, H = srd.total_width, srd.total_height
    yaw_min = srd.object_x / W * TWO_PI - math.pi
    yaw_max = (srd.object_x + srd.object_width) / W * TWO_PI - math.pi
    pitch_max = HALF_PI - srd.object_y / H * math.pi
    pitch_min = HALF_PI - (srd.object_y + srd.object_height) / H * math.pi
    return yaw_min, yaw_max, pitch_min, pitch_max


def _level_scale(k, exponent):
    if float(exponent).is_integer():
        return Fraction(1, k ** int(exponent))
    return exact_mbps(k ** (-float(exponent)))


def build_ladder(width, height, rep1_bitrate, levels, degrade_exponent):
    """Ladder where level k is scaled 1/k per axis and (1/k)**exponent in bitrate."""
    rep1_bitrate = exact_mbps(rep1_bitrate)
    ladder = []
    for k in range(1, levels + 1):
        rate = rep1_bitrate * _level_scale(k, degrade_exponent)
        ladder.append(Representation(k, round(width / k), round(height / k), rate))
    for a, b in zip(ladder, ladder[1:]):
        if not (b.bitrate < a.bitrate and b.width < a.width and b.height < a.height):
            raise LadderError(
                f"{width}x{height} tile cannot hold {levels} strictly decreasing levels"
            )
    if ladder[-1].bitrate <= 0 or ladder[-1].width <= 0 or ladder[-1].height <= 0:
        raise LadderError(f"{width}x{height} tile degrades to an empty representation")
    return tuple(ladder)


def build_tileset(
    source: VideoSource, h: HexafaceSphere, levels: int = 4, degrade_exponent: float = 2.0
) -> TileSet:
    if levels < 1:
        raise LadderError("levels must be ≥ 1")
    if not degrade_exponent > 0:
        raise LadderError("degrade_exponent must be positive")
    rects = []
    for seg in h.segments:
        x, y, w, hh = rect_to_pixels(seg.rect, source.width, source.height)
        rects.append((seg, SrdDescriptor(0, x, y, w, hh, source.width, source.height)))
    frame = source.width * source.height
    tiles = []
    for seg, srd in rects:
        rep1 = source.exact_bitrate * Fraction(srd.area, frame)
        ladder = build_ladder(srd.object_width, srd.object_height, rep1, levels, degrade_exponent)
        tiles.append(Tile(seg.segment_id, seg.segment_id, srd, ladder))
    ts = TileSet(tuple(tiles), source)
    validate_tileset(ts)
    return ts


def validate_tileset(ts: TileSet):
    """Check that tile pixel rects are disjoint and cover the frame exactly."""
    W, H = ts.source.width, ts.source.height
    boxes = []
    for t in ts.tiles:
        if (t.srd.total_width, t.srd.total_height) != (W, H):
            raise ValueError(f"tile {t.tile_id}: SRD reference space differs from the source")
        y0, y1 = t.srd.object_y, t.srd.object_y + t.srd.object_height
        boxes.extend((x0, x1, y0, y1, t.tile_id) for x0, x1 in t.srd.x_pieces())
    area = 0
    for i, (ax0, ax1, ay0, ay1, aid) in enumerate(boxes):
        area += (ax1 - ax0) * (ay1 - ay0)
        for bx0, bx1, by0, by1, bid in boxes[i + 1 :]:
            if min(ax1, bx1) > max(ax0, bx0) and min(ay1, by1) > max(ay0, by0):
                raise ValueError(f"tiles {aid} and {bid} overlap")
    if area != W * H:
        raise ValueError(f"tiles cover {area} px of a {W * H} px frame")


# -- MPD persistence -------------------------------------------------------


def _q(tag):
    return f"{{{MPD_NS}}}{tag}"


def _num(text):
    v = float(text)
    return int(v) if v.is_integer() and "." not in text else v


def _fraction_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def write_manifest(ts: TileSet) -> str:
    ET.register_namespace("", MPD_NS)
    ET.register_namespace("vrt", VRT_NS)
    src = ts.source
    mpd = ET.Element(
        _q("MPD"),
        {
            "profiles": "urn:mpeg:dash:profile:isoff-live:2011",
            "type": "static",
            "minBufferTime": "PT2S",
        },
    )
    info = ET.SubElement(mpd, _q("ProgramInformation"))
    ET.SubElement(info, _q("Title")).text = src.name
    period = ET.SubElement(mpd, _q("Period"), {"id": "0"})
    ET.SubElement(
        period,
        _q("SupplementalProperty"),
        {
            "schemeIdUri": SOURCE_SCHEME,
            "value": f"{src.width},{src.height},{float(src.bitrate)!r},{src.fps!r}",
        },
    )
    for t in ts.tiles:
        aset = ET.SubElement(
            period,
            _q("AdaptationSet"),
            {"id": str(t.tile_id), "contentType": "video", "frameRate": repr(src.fps)},
        )
        ET.SubElement(
            aset,
            _q("SupplementalProperty"),
            {"schemeIdUri": SRD_SCHEME, "value": srd_value_string(t.srd)},
        )
        ET.SubElement(aset, _q("Viewpoint"), {"schemeIdUri": SEGMENT_SCHEME, "value": str(t.segment_id)})
        for r in t.ladder:
            ET.SubElement(
                aset,
                _q("Representation"),
                {
                    "id": f"{t.tile_id}.{r.rep_id}",
                    "width": str(r.width),
                    "height": str(r.height),
                    "bandwidth": str(r.bandwidth),
                    f"{{{VRT_NS}}}bitrate": _fraction_text(r.bitrate),
                },
            )
    ET.indent(mpd)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(mpd, encoding="unicode") + "\n"


def _int_attr(el, name, ctx):
    raw = el.get(name)
    if raw is None:
        raise ManifestParseError(f"{ctx}: missing @{name}")
    try:
        return int(raw)
    except ValueError:
        raise ManifestParseError(f"{ctx}: @{name}={raw!r} is not an integer") from None


def parse_manifest(document: str) -> TileSet:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ManifestParseError(f"malformed XML at line {line}, column {col}: {exc}") from None
    if root.tag != _q("MPD"):
        raise ManifestParseError(f"root element is {root.tag!r}, expected MPD")
    period = root.find(_q("Period"))
    if period is None:
        raise ManifestParseError("MPD: no Period element")
    title = root.find(f"{_q('ProgramInformation')}/{_q('Title')}")
    name = title.text if title is not None and title.text else ""

    source_prop = None
    for prop in period.findall(_q("SupplementalProperty")):
        if prop.get("schemeIdUri") == SOURCE_SCHEME:
            source_prop = prop
    if source_prop is None:
        raise ManifestParseError("Period: missing source SupplementalProperty")
    try:
        w, h, br, fps = source_prop.get("value", "").split(",")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            source = VideoSource(name, int(w), int(h), float(br), _num(fps))
    except ValueError as exc:
        raise ManifestParseError(f"Period: bad source descriptor ({exc})") from None

    tiles = []
    for aset in period.findall(_q("AdaptationSet")):
        ctx = f"AdaptationSet id={aset.get('id')!r}"
        tile_id = _int_attr(aset, "id", ctx)
        srd = None
        for prop in list(aset.findall(_q("SupplementalProperty"))) + list(
            aset.findall(_q("EssentialProperty"))
        ):
            scheme = prop.get("schemeIdUri")
            if scheme != SRD_SCHEME:
                raise ManifestParseError(f"{ctx}: unknown property scheme {scheme!r}")
            try:
                srd = parse_srd_value(prop.get("value", ""))
            except ValueError as exc:
                raise ManifestParseError(f"{ctx}: bad SRD value ({exc})") from None
        if srd is None:
            raise ManifestParseError(f"{ctx}: missing SRD SupplementalProperty")
        vp = aset.find(_q("Viewpoint"))
        segment_id = tile_id
        if vp is not None and vp.get("schemeIdUri") == SEGMENT_SCHEME:
            segment_id = _int_attr(vp, "value", ctx + " Viewpoint")
        ladder = []
        for rep in aset.findall(_q("Representation")):
            rctx = f"{ctx} Representation id={rep.get('id')!r}"
            rid = rep.get("id", "")
            try:
                level = int(rid.rsplit(".", 1)[1])
            except (IndexError, ValueError):
                level = len(ladder) + 1
            bandwidth = _int_attr(rep, "bandwidth", rctx)
            exact = rep.get(f"{{{VRT_NS}}}bitrate")
            try:
                rate = Fraction(exact) if exact is not None else Fraction(bandwidth, 1_000_000)
            except (ValueError, ZeroDivisionError):
                raise ManifestParseError(f"{rctx}: bad vrt:bitrate {exact!r}") from None
            ladder.append(
                Representation(level, _int_attr(rep, "width", rctx), _int_attr(rep, "height", rctx), rate)
            )
        if not ladder:
            raise ManifestParseError(f"{ctx}: no Representation elements")
        ladder.sort(key=lambda r: r.rep_id)
        if any(b.bitrate >= a.bitrate for a, b in zip(ladder, ladder[1:])):
            raise ManifestParseError(f"{ctx}: representation bitrates must strictly decrease")
        tiles.append(Tile(tile_id, segment_id, srd, tuple(ladder)))
    if not tiles:
        raise ManifestParseError("Period: no AdaptationSet elements")
    if len({len(t.ladder) for t in tiles}) != 1:
        raise ManifestParseError("all AdaptationSets must carry the same number of levels")
    return TileSet(tuple(tiles), source)


def load_manifest(path) -> TileSet:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read())


# -- catalog -----------------------------------------------------------------


def load_catalog(path=None):
    """Video catalog from a JSON array; the bundled benchmark list when ``path`` is None."""
    if path is None:
        text = resources.files("vrtiles.data").joinpath("benchmarks.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [VideoSource.from_json(d) for d in json.loads(text)]


def find_video(catalog, name):
    key = name.strip().lower().replace(" ", "")
    for v in catalog:
        if v.name.lower().replace(" ", "") == key:
            return v
    raise KeyError(f"video {name!r} not in catalog")
