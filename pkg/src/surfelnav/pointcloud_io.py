"""ASCII PCD / PLY reading and writing, plus cost colorization of clouds.

Only ASCII encodings are handled; binary PCD/PLY files are rejected with
:class:`UnsupportedFormat`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import CloudIOError, EmptyVolume, InvalidCloud, ParseError, UnsupportedFormat

if TYPE_CHECKING:
    from .surfel_map import ElevationVolume

NEUTRAL_GRAY = (128, 128, 128)


@dataclass(eq=False)
class PointCloud:
    """Ordered 3D points (float64, shape ``(n, 3)``) with optional uint8 RGB."""

    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidCloud(f"points must have shape (n, 3), got {pts.shape}")
        self.points = pts
        if self.colors is not None:
            cols = np.asarray(self.colors)
            if cols.size == 0:
                cols = cols.reshape(0, 3)
            if cols.shape != pts.shape:
                raise InvalidCloud(
                    f"colors length {len(cols)} does not match points length {len(pts)}"
                )
            if np.any(cols < 0) or np.any(cols > 255):
                raise InvalidCloud("colors must be bytes in [0, 255]")
            self.colors = cols.astype(np.uint8)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if (self.colors is None) != (other.colors is None):
            return False
        return self.colors is None or np.array_equal(self.colors, other.colors)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.points)):
            raise InvalidCloud("point cloud contains non-finite coordinates")


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".pcd":
        return "pcd-ascii"
    if suffix == ".ply":
        return "ply-ascii"
    with open(path, "rb") as fh:
        head = fh.read(3)
    if head == b"ply":
        return "ply-ascii"
    return "pcd-ascii"


def load_cloud(path: str | Path, format: str = "auto") -> PointCloud:
    path = Path(path)
    if format == "auto":
        format = _detect_format(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CloudIOError(str(exc)) from exc
    if format == "pcd-ascii":
        return _parse_pcd(raw)
    if format == "ply-ascii":
        return _parse_ply(raw)
    raise UnsupportedFormat(f"unknown cloud format {format!r}")


def _finite_or_raise(values: list[float], lineno: int) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ParseError("non-finite coordinate", lineno)


def _parse_pcd(raw: bytes) -> PointCloud:
    header: dict[str, list[str]] = {}
    lines = raw.split(b"\n")
    body_start = None
    for i, bline in enumerate(lines):
        line = bline.decode("ascii", errors="replace").strip()
        if not line or line.startswith("#"):
            continue
        key, *vals = line.split()
        key = key.upper()
        header[key] = vals
        if key == "DATA":
            if not vals:
                raise ParseError("DATA line without encoding", i + 1)
            if vals[0].lower() != "ascii":
                raise UnsupportedFormat(f"PCD DATA {vals[0]} is not supported, only ascii")
            body_start = i + 1
            break
    if body_start is None:
        raise ParseError("PCD header has no DATA line")
    for required in ("FIELDS", "POINTS"):
        if required not in header:
            raise ParseError(f"PCD header is missing {required}")

    fields = header["FIELDS"]
    counts = [int(c) for c in header.get("COUNT", ["1"] * len(fields))]
    types = header.get("TYPE", ["F"] * len(fields))
    if len(counts) != len(fields) or len(types) != len(fields):
        raise ParseError("PCD FIELDS/COUNT/TYPE lengths disagree")
    try:
        n_points = int(header["POINTS"][0])
    except (ValueError, IndexError):
        raise ParseError("PCD POINTS is not an integer") from None

    offsets = {}
    col = 0
    for name, count in zip(fields, counts):
        offsets[name] = col
        col += count
    n_cols = col
    for axis in ("x", "y", "z"):
        if axis not in offsets:
            raise ParseError(f"PCD FIELDS lacks {axis}")

    color_mode = None
    if "rgb" in offsets or "rgba" in offsets:
        color_mode = "rgb" if "rgb" in offsets else "rgba"
    elif all(c in offsets for c in ("r", "g", "b")):
        color_mode = "split"

    points, colors = [], []
    for i in range(body_start, len(lines)):
        line = lines[i].decode("ascii", errors="replace").strip()
        if not line:
            continue
        lineno = i + 1
        toks = line.split()
        if len(toks) != n_cols:
            raise ParseError(f"expected {n_cols} values, got {len(toks)}", lineno)
        try:
            xyz = [float(toks[offsets[a]]) for a in ("x", "y", "z")]
        except ValueError:
            raise ParseError("malformed coordinate", lineno) from None
        _finite_or_raise(xyz, lineno)
        points.append(xyz)
        if color_mode is not None:
            try:
                colors.append(_pcd_color(toks, offsets, types, fields, color_mode))
            except ValueError:
                raise ParseError("malformed color value", lineno) from None
        if len(points) > n_points:
            raise ParseError(f"body has more records than POINTS {n_points}", lineno)
    if len(points) != n_points:
        raise ParseError(
            f"header declares POINTS {n_points} but body has {len(points)} records "
            f"({n_points - len(points)} missing)"
        )
    return PointCloud(np.array(points, dtype=np.float64).reshape(-1, 3),
                      np.array(colors, dtype=np.uint8).reshape(-1, 3) if color_mode else None)


def _pcd_color(toks, offsets, types, fields, mode) -> tuple[int, int, int]:
    if mode == "split":
        return tuple(int(float(toks[offsets[c]])) for c in ("r", "g", "b"))
    name = mode
    tok = toks[offsets[name]]
    ftype = types[fields.index(name)].upper()
    if ftype == "F":
        packed = int(np.array([float(tok)], dtype=np.float32).view(np.uint32)[0])
    else:
        packed = int(float(tok)) if "." in tok or "e" in tok.lower() else int(tok)
    return (packed >> 16) & 0xFF, (packed >> 8) & 0xFF, packed & 0xFF


def _parse_ply(raw: bytes) -> PointCloud:
    lines = raw.split(b"\n")
    if not lines or lines[0].strip() != b"ply":
        raise ParseError("missing 'ply' magic", 1)
    elements: list[tuple[str, int, list[tuple[str, ...]]]] = []
    body_start = None
    for i in range(1, len(lines)):
        line = lines[i].decode("ascii", errors="replace").strip()
        lineno = i + 1
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        toks = line.split()
        if toks[0] == "format":
            if len(toks) < 2:
                raise ParseError("malformed format line", lineno)
            if toks[1] != "ascii":
                raise UnsupportedFormat(f"PLY format {toks[1]} is not supported, only ascii")
        elif toks[0] == "element":
            if len(toks) != 3:
                raise ParseError("malformed element line", lineno)
            try:
                elements.append((toks[1], int(toks[2]), []))
            except ValueError:
                raise ParseError("element count is not an integer", lineno) from None
        elif toks[0] == "property":
            if not elements:
                raise ParseError("property before any element", lineno)
            elements[-1][2].append(tuple(toks[1:]))
        elif toks[0] == "end_header":
            body_start = i + 1
            break
        else:
            raise ParseError(f"unexpected header keyword {toks[0]!r}", lineno)
    if body_start is None:
        raise ParseError("PLY header has no end_header")

    row = body_start
    points, colors = [], []
    has_color = False
    for name, count, props in elements:
        prop_names = [p[-1] for p in props]
        is_vertex = name == "vertex"
        if is_vertex:
            for axis in ("x", "y", "z"):
                if axis not in prop_names:
                    raise ParseError(f"vertex element lacks property {axis}")
            has_color = all(c in prop_names for c in ("red", "green", "blue"))
        has_list = any(p[0] == "list" for p in props)
        read = 0
        while read < count:
            if row >= len(lines):
                raise ParseError(
                    f"element {name} declares {count} records but body has {read} "
                    f"({count - read} missing)"
                )
            line = lines[row].decode("ascii", errors="replace").strip()
            row += 1
            if not line:
                continue
            read += 1
            if not is_vertex:
                continue
            toks = line.split()
            if not has_list and len(toks) != len(props):
                raise ParseError(f"expected {len(props)} values, got {len(toks)}", row)
            vals = dict(zip(prop_names, toks))
            try:
                xyz = [float(vals[a]) for a in ("x", "y", "z")]
            except (ValueError, KeyError):
                raise ParseError("malformed vertex record", row) from None
            _finite_or_raise(xyz, row)
            points.append(xyz)
            if has_color:
                try:
                    colors.append([int(float(vals[c])) for c in ("red", "green", "blue")])
                except ValueError:
                    raise ParseError("malformed color value", row) from None
    for j in range(row, len(lines)):
        if lines[j].strip():
            raise ParseError("trailing data after last declared element", j + 1)
    return PointCloud(np.array(points, dtype=np.float64).reshape(-1, 3),
                      np.array(colors, dtype=np.uint8).reshape(-1, 3) if has_color else None)


def _fmt(v: float) -> str:
    # repr gives the shortest string that round-trips a float64 exactly
    return repr(float(v))


def save_cloud(cloud: PointCloud, path: str | Path, format: str = "auto") -> None:
    cloud.validate()
    path = Path(path)
    if format == "auto":
        format = "ply-ascii" if path.suffix.lower() == ".ply" else "pcd-ascii"
    if format == "pcd-ascii":
        text = _format_pcd(cloud)
    elif format == "ply-ascii":
        text = _format_ply(cloud)
    else:
        raise UnsupportedFormat(f"cannot write format {format!r}")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CloudIOError(str(exc)) from exc


def _format_pcd(cloud: PointCloud) -> str:
    n = len(cloud)
    colored = cloud.colors is not None
    fields = "x y z rgb" if colored else "x y z"
    sizes = "8 8 8 4" if colored else "8 8 8"
    types = "F F F U" if colored else "F F F"
    counts = "1 1 1 1" if colored else "1 1 1"
    out = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION 0.7",
        f"FIELDS {fields}",
        f"SIZE {sizes}",
        f"TYPE {types}",
        f"COUNT {counts}",
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    if colored:
        packed = (cloud.colors[:, 0].astype(np.uint32) << 16) | (
            cloud.colors[:, 1].astype(np.uint32) << 8) | cloud.colors[:, 2].astype(np.uint32)
        for p, c in zip(cloud.points.tolist(), packed.tolist()):
            out.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} {c}")
    else:
        for p in cloud.points.tolist():
            out.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    return "\n".join(out) + "\n"


def _format_ply(cloud: PointCloud) -> str:
    n = len(cloud)
    colored = cloud.colors is not None
    out = ["ply", "format ascii 1.0", f"element vertex {n}",
           "property double x", "property double y", "property double z"]
    if colored:
        out += ["property uchar red", "property uchar green", "property uchar blue"]
    out.append("end_header")
    if colored:
        for p, c in zip(cloud.points.tolist(), cloud.colors.tolist()):
            out.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} {c[0]} {c[1]} {c[2]}")
    else:
        for p in cloud.points.tolist():
            out.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    return "\n".join(out) + "\n"


def cost_to_rgb(cost, max_cost: float, traversable=True) -> np.ndarray:
    """Piecewise-linear green -> yellow -> red colormap over ``[0, max_cost]``.

    Works on scalars or arrays; returns uint8 RGB with a trailing axis of 3.
    Non-traversable entries are pure red regardless of cost.
    """
    c = np.clip(np.asarray(cost, dtype=np.float64) / max_cost, 0.0, 1.0)
    red = np.where(c < 0.5, 2.0 * c, 1.0)
    green = np.where(c <= 0.5, 1.0, 2.0 * (1.0 - c))
    rgb = np.stack([red, green, np.zeros_like(c)], axis=-1)
    rgb = np.rint(rgb * 255.0)
    blocked = ~np.asarray(traversable, dtype=bool)
    rgb = np.where(blocked[..., None], np.array([255.0, 0.0, 0.0]), rgb)
    return rgb.astype(np.uint8)


def colorize_by_cost(cloud: PointCloud, volume: ElevationVolume) -> PointCloud:
    """Color every point by the cost of its nearest (unelevated) surfel.

    Points farther than the volume's snap radius from every surfel get
    neutral gray. Point count and order are preserved.
    """
    if volume.size == 0:
        raise EmptyVolume("cannot colorize against an empty volume")
    colors = np.empty((len(cloud), 3), dtype=np.uint8)
    colors[:] = NEUTRAL_GRAY
    if len(cloud):
        dist, idx = volume.ground_tree.query(cloud.points, k=1,
                                             distance_upper_bound=volume.snap_radius)
        hit = np.isfinite(dist)
        sel = idx[hit]
        colors[hit] = cost_to_rgb(volume.costs[sel], volume.max_cost, volume.traversable[sel])
    return PointCloud(cloud.points.copy(), colors)
