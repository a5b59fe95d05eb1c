"""Map prior scenarios: split a ground-truth map into prior and complement.

Every scenario is a whole-element partition of the ground truth. The two
regimes decide which (scene, scenario) pairs make up a training or
evaluation set.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

from .geometry import (
    DIVIDER_CLASSES,
    MapClass,
    MapElement,
    VectorMap,
    point_to_polyline,
)
from .scene_io import ManifestEntry, DatasetManifest, Scene


class PriorError(ValueError):
    pass


class ScenarioId(str, enum.Enum):
    MASK_EGO_LANE = "mask_ego_lane"
    MASK_EGO_ROAD = "mask_ego_road"
    ONLY_BOUNDARIES = "only_boundaries"
    ONLY_CENTERLINES = "only_centerlines"
    NO_PRIOR = "no_prior"
    MASK_CENTERLINES = "mask_centerlines"
    MASK_PED_CROSSINGS = "mask_ped_crossings"
    MASK_BOUNDARIES = "mask_boundaries"
    MASK_DIVIDERS = "mask_dividers"


ALL_SCENARIOS = tuple(ScenarioId)
# the five scenarios reported per method in the main benchmark table
BENCHMARK_SCENARIOS = ALL_SCENARIOS[:5]


def parse_scenarios(spec: str | Iterable[str]) -> list[ScenarioId]:
    """Parse ``"all"``, ``"benchmark"`` or a comma separated list of scenario names."""
    if isinstance(spec, str):
        if spec == "all":
            return list(ALL_SCENARIOS)
        if spec == "benchmark":
            return list(BENCHMARK_SCENARIOS)
        spec = [s for s in spec.split(",") if s.strip()]
    out = []
    for s in spec:
        try:
            out.append(ScenarioId(s.strip()))
        except ValueError:
            raise PriorError(f"unknown scenario {s.strip()!r}") from None
    return out


@dataclass(frozen=True)
class PriorParams:
    """Tolerances for locating the ego lane; the lane width is nominal."""

    lane_width: float = 3.5
    margin: float = 0.5


@dataclass(frozen=True)
class PriorScenario:
    scenario: ScenarioId
    prior: VectorMap
    complement: VectorMap
    scene_id: str

    def __post_init__(self):
        a, b = set(self.prior.ids), set(self.complement.ids)
        if a & b:
            raise PriorError(f"prior and complement share ids {sorted(a & b)}")


class Regime(str, enum.Enum):
    NAIVE_SPLIT = "naive"
    AUGMENTATION = "augmentation"


@dataclass(frozen=True)
class RegimeConfig:
    mode: Regime
    scenario_list: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Regime(self.mode))
        scen = tuple(ScenarioId(s) for s in self.scenario_list)
        if not scen:
            raise PriorError("scenario list is empty")
        if len(set(scen)) != len(scen):
            raise PriorError("scenario list contains duplicates")
        object.__setattr__(self, "scenario_list", scen)


# -- ego lane / road ----------------------------------------------------------

def _lateral_frame(element: MapElement, point=(0.0, 0.0)):
    dist, foot, tangent = point_to_polyline(point, element.points)
    normal = np.array([-tangent[1], tangent[0]])
    return dist, foot, normal


def _nearest_by_side(candidates: Sequence[MapElement], foot, normal, reach: float):
    """Nearest candidate on the left and on the right of ``foot``."""
    best: dict[int, tuple[float, MapElement]] = {}
    for c in candidates:
        d, q, _ = point_to_polyline(foot, c.points, c.closed)
        if d > reach or d <= 1e-9:
            continue
        side = 1 if float(np.dot(q - foot, normal)) > 0 else -1
        if side not in best or d < best[side][0]:
            best[side] = (d, c)
    return best.get(1, (None, None))[1], best.get(-1, (None, None))[1]


def find_ego_lane(vmap: VectorMap, params: PriorParams = PriorParams()) -> MapElement:
    best, best_d = None, np.inf
    for cl in vmap.of_class(MapClass.CENTERLINE):
        d = point_to_polyline((0.0, 0.0), cl.points)[0]
        if d < best_d:
            best, best_d = cl, d
    if best is None or best_d > params.lane_width / 2 + params.margin:
        raise PriorError("no ego lane")
    return best


def _has_topology(vmap: VectorMap) -> bool:
    return any(e.left_neighbor or e.right_neighbor for e in vmap.of_class(MapClass.CENTERLINE))


def lane_separators(vmap: VectorMap, lane: MapElement,
                    params: PriorParams = PriorParams()) -> list[MapElement]:
    """Separators (dividers or boundaries) directly left and right of a lane."""
    seps = [e for e in vmap.elements if e.cls.is_separator]
    left = right = None
    for s in seps:
        # a separator's right neighbor is the lane to its right, i.e. the lane it bounds on the left
        if s.right_neighbor == lane.id and left is None:
            left = s
        if s.left_neighbor == lane.id and right is None:
            right = s
    if left is None or right is None:
        _, foot, normal = _lateral_frame(lane)
        geo_left, geo_right = _nearest_by_side(seps, foot, normal, params.lane_width + params.margin)
        left = left or geo_left
        right = right or geo_right
    return [s for s in (left, right) if s is not None]


def _lane_neighbors(vmap: VectorMap, lane: MapElement, params: PriorParams,
                    topology: bool) -> list[MapElement]:
    centerlines = vmap.of_class(MapClass.CENTERLINE)
    if topology:
        known = {c.id: c for c in centerlines}
        return [known[n] for n in (lane.left_neighbor, lane.right_neighbor) if n in known]
    others = [c for c in centerlines if c.id != lane.id]
    _, foot, normal = _lateral_frame(lane)
    left, right = _nearest_by_side(others, foot, normal, params.lane_width + params.margin)
    return [c for c in (left, right) if c is not None]


def ego_road_lanes(vmap: VectorMap, params: PriorParams = PriorParams()) -> list[MapElement]:
    """Centerlines laterally connected to the ego lane (transitive closure)."""
    ego = find_ego_lane(vmap, params)
    topology = _has_topology(vmap)
    seen = {ego.id: ego}
    frontier = [ego]
    while frontier:
        lane = frontier.pop()
        for n in _lane_neighbors(vmap, lane, params, topology):
            if n.id not in seen:
                seen[n.id] = n
                frontier.append(n)
    return [e for e in vmap.of_class(MapClass.CENTERLINE) if e.id in seen]


def corridor(lanes: Sequence[MapElement], params: PriorParams = PriorParams()):
    strips = [
        LineString(lane.xy).buffer(params.lane_width / 2, cap_style="flat")
        for lane in lanes
    ]
    return shapely.union_all(strips)


def crossings_in(vmap: VectorMap, area) -> list[MapElement]:
    return [
        e for e in vmap.of_class(MapClass.PED_CROSSING)
        if Polygon(e.xy).intersects(area)
    ]


def _masked_lane_ids(vmap: VectorMap, lanes: Sequence[MapElement], params: PriorParams) -> set[str]:
    ids = {lane.id for lane in lanes}
    for lane in lanes:
        ids.update(s.id for s in lane_separators(vmap, lane, params))
    ids.update(e.id for e in crossings_in(vmap, corridor(lanes, params)))
    return ids


# -- prior generators ---------------------------------------------------------

def complement_ids(vmap: VectorMap, scenario: ScenarioId,
                   params: PriorParams = PriorParams()) -> set[str]:
    """Ids of the elements a scenario withholds from the prior."""
    scenario = ScenarioId(scenario)
    ids = set(vmap.ids)

    def of(*classes):
        return {e.id for e in vmap.of_class(*classes)}

    if scenario is ScenarioId.NO_PRIOR:
        return ids
    if scenario is ScenarioId.ONLY_BOUNDARIES:
        return ids - of(MapClass.BOUNDARY)
    if scenario is ScenarioId.ONLY_CENTERLINES:
        return ids - of(MapClass.CENTERLINE)
    if scenario is ScenarioId.MASK_CENTERLINES:
        return of(MapClass.CENTERLINE)
    if scenario is ScenarioId.MASK_PED_CROSSINGS:
        return of(MapClass.PED_CROSSING)
    if scenario is ScenarioId.MASK_BOUNDARIES:
        return of(MapClass.BOUNDARY)
    if scenario is ScenarioId.MASK_DIVIDERS:
        return of(*DIVIDER_CLASSES)
    if scenario is ScenarioId.MASK_EGO_LANE:
        return _masked_lane_ids(vmap, [find_ego_lane(vmap, params)], params)
    if scenario is ScenarioId.MASK_EGO_ROAD:
        return _masked_lane_ids(vmap, ego_road_lanes(vmap, params), params)
    raise PriorError(f"unhandled scenario {scenario}")


def apply_prior(scene: Scene, scenario: ScenarioId,
                params: PriorParams = PriorParams()) -> PriorScenario:
    scenario = ScenarioId(scenario)
    masked = complement_ids(scene.map, scenario, params)
    gt = scene.map
    prior = VectorMap(tuple(e for e in gt if e.id not in masked), gt.bev_range)
    complement = VectorMap(tuple(e for e in gt if e.id in masked), gt.bev_range)
    return PriorScenario(scenario, prior, complement, scene.scene_id)


# -- scenario sets ------------------------------------------------------------

def build_scenario_set(manifest: DatasetManifest | Sequence[ManifestEntry],
                       regime: RegimeConfig) -> list[tuple[ManifestEntry, ScenarioId]]:
    """Pair scenes with scenarios.

    Naive split: a seeded shuffle deals scenes round-robin into one group per
    scenario, so every scene is used once. Augmentation: every scene with
    every scenario.
    """
    entries = list(manifest.entries if isinstance(manifest, DatasetManifest) else manifest)
    if not entries:
        raise PriorError("manifest is empty")
    scen = regime.scenario_list
    if regime.mode is Regime.AUGMENTATION:
        return [(e, s) for e in entries for s in scen]
    order = np.random.default_rng(regime.seed).permutation(len(entries))
    group = np.empty(len(entries), dtype=int)
    group[order] = np.arange(len(entries)) % len(scen)
    return [(e, scen[g]) for e, g in zip(entries, group)]


def scenario_set_lines(pairs: Iterable[tuple[str, ScenarioId]]) -> str:
    return "".join(
        json.dumps({"scene_id": sid, "scenario": ScenarioId(s).value}, separators=(",", ":")) + "\n"
        for sid, s in pairs
    )


def parse_scenario_set(text: str) -> list[tuple[str, ScenarioId]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append((str(rec["scene_id"]), ScenarioId(rec["scenario"])))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise PriorError(f"malformed scenario record at line {lineno}: {exc}") from None
    return out


def pair_stem(scene_id: str, scenario: ScenarioId) -> str:
    return f"{scene_id}__{ScenarioId(scenario).value}"


def scenario_scenes(ps: PriorScenario, split) -> tuple[Scene, Scene]:
    """Prior and complement as stand-alone scenes, ready for ``save_scene``."""
    return Scene(ps.scene_id, ps.prior, split), Scene(ps.scene_id, ps.complement, split)

