"""Scene files, dataset manifests and the synthetic road generator.

A scene file is line-delimited JSON: a header line with scene metadata
followed by one line per map element. Floats are written with ``repr``
precision so a save/load round trip is lossless.
"""
from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import BevRange, MapClass, MapElement, VectorMap, clip_to_bev


class SceneFormatError(ValueError):
    pass


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class Scene:
    scene_id: str
    map: VectorMap
    split: Split = Split.VAL

    def __post_init__(self):
        object.__setattr__(self, "split", Split(self.split))


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    split: Split

    def __post_init__(self):
        object.__setattr__(self, "split", Split(self.split))


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    seed: int = 0
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def scene_to_lines(scene: Scene) -> list[str]:
    header = {
        "scene_id": scene.scene_id,
        "split": scene.split.value,
        "bev_range": scene.map.bev_range.as_list(),
    }
    lines = [_dumps(header)]
    for e in scene.map.elements:
        lines.append(_dumps({
            "id": e.id,
            "class": e.cls.value,
            "closed": e.closed,
            "points": [[float(c) for c in p] for p in e.points],
            "left_neighbor": e.left_neighbor,
            "right_neighbor": e.right_neighbor,
        }))
    return lines


def dump_scene(scene: Scene) -> str:
    return "".join(line + "\n" for line in scene_to_lines(scene))


def save_scene(scene: Scene, path) -> None:
    write_text_atomic(path, dump_scene(scene))


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _require(record: dict, key: str, lineno: int):
    if key not in record:
        raise SceneFormatError(f"missing field {key} at line {lineno}")
    return record[key]


def parse_scene(text: str, source: str = "<string>") -> Scene:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SceneFormatError(f"{source}: empty scene file")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"malformed JSON at line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise SceneFormatError(f"record at line {lineno} is not an object")
        records.append(rec)

    header = records[0]
    scene_id = _require(header, "scene_id", 1)
    split = _require(header, "split", 1)
    try:
        split = Split(split)
    except ValueError:
        raise SceneFormatError(f"invalid field split at line 1: {split!r}") from None
    try:
        bev = BevRange.from_list(_require(header, "bev_range", 1))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"invalid field bev_range at line 1: {exc}") from None

    elements = []
    for lineno, rec in enumerate(records[1:], start=2):
        eid = _require(rec, "id", lineno)
        cls_name = _require(rec, "class", lineno)
        try:
            cls = MapClass(cls_name)
        except ValueError:
            raise SceneFormatError(f"unknown class {cls_name!r} at line {lineno}") from None
        closed = _require(rec, "closed", lineno)
        points = _require(rec, "points", lineno)
        try:
            elements.append(MapElement(
                id=str(eid), cls=cls, points=points, closed=bool(closed),
                left_neighbor=rec.get("left_neighbor"),
                right_neighbor=rec.get("right_neighbor"),
            ))
        except ValueError as exc:
            raise SceneFormatError(f"invalid field points at line {lineno}: {exc}") from None
    try:
        vmap = VectorMap(tuple(elements), bev)
    except ValueError as exc:
        raise SceneFormatError(f"{source}: {exc}") from None
    return Scene(str(scene_id), vmap, split)


def load_scene(path) -> Scene:
    path = Path(path)
    return parse_scene(path.read_text(encoding="utf-8"), source=str(path))


def load_manifest(path, seed: int = 0) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: malformed manifest: {exc.msg}") from None
    if not isinstance(raw, list):
        raise SceneFormatError(f"{path}: manifest must be a JSON array")
    entries = []
    seen = set()
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict) or "path" not in rec or "split" not in rec:
            raise SceneFormatError(f"{path}: manifest entry {i} needs path and split")
        if rec["path"] in seen:
            raise SceneFormatError(f"{path}: duplicate manifest entry {rec['path']}")
        seen.add(rec["path"])
        try:
            entries.append(ManifestEntry(rec["path"], rec["split"]))
        except ValueError:
            raise SceneFormatError(f"{path}: invalid split in manifest entry {i}") from None
    return DatasetManifest(entries, seed=seed, root=path.parent)


def save_manifest(manifest: DatasetManifest, path) -> None:
    body = [{"path": e.path, "split": e.split.value} for e in manifest.entries]
    write_text_atomic(path, json.dumps(body, indent=1) + "\n")


def load_manifest_scenes(manifest: DatasetManifest) -> list[Scene]:
    scenes = [load_scene(manifest.resolve(e)) for e in manifest.entries]
    ids = [s.scene_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise SceneFormatError("manifest lists the same scene id twice")
    return scenes


# -- synthetic scenes ---------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    lane_count: int = 2
    lane_width: float = 3.5
    curvature: float = 0.0
    crossing_count: int = 0
    dash_probability: float = 0.5
    seed: int = 0
    bev_range: BevRange = field(default_factory=BevRange)
    point_spacing: float = 1.0

    def __post_init__(self):
        if not 1 <= self.lane_count <= 4:
            raise ValueError("lane_count must be in [1, 4]")
        if not -0.02 <= self.curvature <= 0.02:
            raise ValueError("curvature must be in [-0.02, 0.02]")
        if not 0 <= self.crossing_count <= 2:
            raise ValueError("crossing_count must be in [0, 2]")
        if not 0.0 <= self.dash_probability <= 1.0:
            raise ValueError("dash_probability must be in [0, 1]")
        if self.lane_width <= 0 or self.point_spacing <= 0:
            raise ValueError("lane_width and point_spacing must be positive")


def ego_lane_index(lane_count: int) -> int:
    """0-based index (counted from the right) of the lane holding the ego."""
    return math.ceil(lane_count / 2) - 1


class _Road:
    """Constant-curvature reference arc mapped so that the ego sits at the origin."""

    def __init__(self, curvature, heading, ego_offset):
        self.k = curvature
        c, s = math.cos(heading), math.sin(heading)
        self.rot = np.array([[c, -s], [s, c]])
        self.ego_offset = ego_offset

    def frame(self, s):
        s = np.asarray(s, dtype=float)
        if self.k == 0.0:
            center = np.column_stack([s, np.zeros_like(s)])
            normal = np.column_stack([np.zeros_like(s), np.ones_like(s)])
        else:
            th = self.k * s
            center = np.column_stack([np.sin(th) / self.k, (1.0 - np.cos(th)) / self.k])
            normal = np.column_stack([-np.sin(th), np.cos(th)])
        return center, normal

    def curve(self, s, lateral):
        center, normal = self.frame(s)
        local = center + np.asarray(lateral, dtype=float)[..., None] * normal
        local[:, 1] -= self.ego_offset
        xy = local @ self.rot.T
        return np.column_stack([xy, np.zeros(len(xy))])


def generate_synthetic(config: SynthConfig, scene_id: Optional[str] = None,
                       split: Split = Split.VAL) -> Scene:
    """Deterministic straight or circular-arc road with known lane topology.

    Lanes are numbered from the right; centerlines run along +x. Separators
    carry the centerline to their left/right as neighbors, centerlines carry
    their adjacent centerlines.
    """
    rng = np.random.default_rng(config.seed)
    k, w = config.lane_count, config.lane_width
    ego = ego_lane_index(k)
    heading = rng.uniform(-0.1, 0.1)
    ego_offset = rng.uniform(-0.15, 0.15) * w
    road = _Road(config.curvature, heading, ego_offset)

    half = math.hypot(
        max(abs(config.bev_range.x_min), abs(config.bev_range.x_max)),
        max(abs(config.bev_range.y_min), abs(config.bev_range.y_max)),
    ) + 15.0
    n_pts = int(math.ceil(2 * half / config.point_spacing)) + 1
    s = np.linspace(-half, half, n_pts)

    def lane_center(j):
        return (j - ego) * w

    def sep_offset(m):
        return (m - ego - 0.5) * w

    elements = []
    for j in range(k):
        elements.append(MapElement(
            id=f"cl_{j}", cls=MapClass.CENTERLINE,
            points=road.curve(s, np.full(n_pts, lane_center(j))),
            left_neighbor=f"cl_{j + 1}" if j + 1 < k else None,
            right_neighbor=f"cl_{j - 1}" if j > 0 else None,
        ))
    for m in range(k + 1):
        if m in (0, k):
            cls = MapClass.BOUNDARY
        elif rng.random() < config.dash_probability:
            cls = MapClass.DASHED_DIVIDER
        else:
            cls = MapClass.SOLID_DIVIDER
        elements.append(MapElement(
            id=f"sep_{m}", cls=cls,
            points=road.curve(s, np.full(n_pts, sep_offset(m))),
            left_neighbor=f"cl_{m}" if m < k else None,
            right_neighbor=f"cl_{m - 1}" if m > 0 else None,
        ))

    depth = 3.0
    centers: list[float] = []
    while len(centers) < config.crossing_count:
        c = rng.uniform(-20.0, 20.0)
        if all(abs(c - o) > depth + 2.0 for o in centers):
            centers.append(c)
    right, left = sep_offset(0), sep_offset(k)
    for i, c in enumerate(sorted(centers)):
        ss = np.array([c - depth / 2, c + depth / 2, c + depth / 2, c - depth / 2])
        dd = np.array([right, right, left, left])
        elements.append(MapElement(
            id=f"ped_{i}", cls=MapClass.PED_CROSSING, points=road.curve(ss, dd), closed=True,
        ))

    vmap = clip_to_bev(VectorMap(tuple(elements), config.bev_range))
    sid = scene_id if scene_id is not None else f"synth_{config.seed}"
    return Scene(sid, vmap, split)
