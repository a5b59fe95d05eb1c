"""Query-to-ground-truth assignment with pre-attributed prior instances.

Prior queries already know which ground-truth element they came from; those
pairs are fixed before the Hungarian problem is solved on what is left.
For one-to-many query sets each repetition is matched against its own copy
of the ground truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import CLASS_ORDER, MapClass, MapElement, VectorMap, resample
from .queries import LearnedQuery, PriorQuery, Provenance


class AssignmentError(ValueError):
    pass


# -- linear assignment --------------------------------------------------------

def _solve_rows(cost: np.ndarray) -> np.ndarray:
    """Shortest augmenting path with potentials; requires rows <= cols.

    Returns the column assigned to every row.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j]: 1-based row owning column j, 0 = free
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = np.full(n, -1, dtype=int)
    for j in range(1, m + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols


def hungarian(cost) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost assignment of ``min(m, n)`` (row, col) pairs.

    Rectangular matrices are solved from the shorter side. Pairs come back
    sorted by row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise AssignmentError("cost must be a 2-d matrix")
    if np.isnan(cost).any():
        raise AssignmentError("cost matrix contains NaN")
    if not np.isfinite(cost).all():
        raise AssignmentError("cost matrix contains non-finite entries")
    m, n = cost.shape
    if m == 0 or n == 0:
        return [], 0.0
    if m <= n:
        cols = _solve_rows(cost)
        pairs = [(i, int(c)) for i, c in enumerate(cols)]
    else:
        rows = _solve_rows(cost.T)
        pairs = sorted((int(r), j) for j, r in enumerate(rows))
    total = math.fsum(cost[i, j] for i, j in pairs)
    return pairs, total


# -- matching cost ------------------------------------------------------------

@dataclass(frozen=True)
class CostConfig:
    w_cls: float = 2.0
    w_pts: float = 5.0
    w_dir: float = 0.005
    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        for name in ("w_cls", "w_pts", "w_dir"):
            w = getattr(self, name)
            if not np.isfinite(w) or w < 0:
                raise AssignmentError(f"{name} must be a non-negative finite number")


@dataclass(frozen=True, eq=False)
class Prediction:
    class_scores: np.ndarray
    points: np.ndarray
    provenance: Provenance = field(default_factory=LearnedQuery)
    block: str = "o2o"
    row: int = 0
    rep: Optional[int] = None

    def __post_init__(self):
        scores = np.asarray(self.class_scores, dtype=float)
        if scores.shape != (len(CLASS_ORDER),):
            raise AssignmentError("class_scores must hold one score per map class")
        if np.any(scores < 0) or np.any(scores > 1):
            raise AssignmentError("class scores must lie in [0, 1]")
        pts = np.asarray(self.points, dtype=float)[:, :2]
        if not np.all(np.isfinite(pts)):
            raise AssignmentError("prediction points must be finite")
        object.__setattr__(self, "class_scores", scores)
        object.__setattr__(self, "points", pts)

    @classmethod
    def of_class(cls, label: MapClass, confidence: float, points, **kw) -> "Prediction":
        scores = np.zeros(len(CLASS_ORDER))
        scores[CLASS_ORDER.index(MapClass(label))] = confidence
        return cls(scores, points, **kw)

    @property
    def label(self) -> MapClass:
        return CLASS_ORDER[int(np.argmax(self.class_scores))]

    @property
    def confidence(self) -> float:
        return float(np.max(self.class_scores))

    @property
    def is_prior(self) -> bool:
        return isinstance(self.provenance, PriorQuery)

    @property
    def ref(self) -> str:
        if self.block == "o2m":
            return f"o2m/{self.rep}/{self.row}"
        return f"{self.block}/{self.row}"


def focal_cost(score, alpha: float = 0.25, gamma: float = 2.0, eps: float = 1e-12):
    """Focal classification cost for the ground-truth class score."""
    score = np.asarray(score, dtype=float)
    neg = -(1 - alpha) * score ** gamma * np.log(1 - score + eps)
    pos = -alpha * (1 - score) ** gamma * np.log(score + eps)
    return pos - neg


def gt_permutations(points: np.ndarray, closed: bool) -> np.ndarray:
    """Equivalent point orderings of a ground truth, shape (n_perm, V, 2)."""
    pts = np.asarray(points, dtype=float)[:, :2]
    if not closed:
        return np.stack([pts, pts[::-1]])
    out = []
    for seq in (pts, pts[::-1]):
        for shift in range(len(pts)):
            out.append(np.roll(seq, -shift, axis=0))
    return np.stack(out)


def _cosine_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    denom = np.maximum(na * nb, 1e-12)
    return 1.0 - (a * b).sum(axis=-1) / denom


def _geometry_costs(pred_pts: np.ndarray, gt: MapElement):
    """Point and direction costs of stacked predictions (P, V, 2) against one gt."""
    perms = gt_permutations(gt.points, gt.closed)
    l1 = np.abs(pred_pts[:, None] - perms[None]).sum(axis=-1).mean(axis=-1)
    best = np.argmin(l1, axis=1)
    pts_cost = l1[np.arange(len(pred_pts)), best]
    pred_edges = np.diff(pred_pts, axis=1)
    gt_edges = np.diff(perms, axis=1)[best]
    dir_cost = _cosine_distance(pred_edges, gt_edges).mean(axis=-1)
    return pts_cost, dir_cost


def cost_matrix(preds: Sequence[Prediction], gts: Sequence[MapElement],
                config: CostConfig = CostConfig()) -> np.ndarray:
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    n_points = len(preds[0].points)
    if any(len(p.points) != n_points for p in preds) or any(len(g.points) != n_points for g in gts):
        raise AssignmentError("point count mismatch between predictions and ground truth")
    pts = np.stack([p.points for p in preds])
    scores = np.stack([p.class_scores for p in preds])
    out = np.empty((len(preds), len(gts)))
    for j, gt in enumerate(gts):
        cls_cost = focal_cost(scores[:, CLASS_ORDER.index(gt.cls)], config.alpha, config.gamma)
        pts_cost, dir_cost = _geometry_costs(pts, gt)
        out[:, j] = config.w_cls * cls_cost + config.w_pts * pts_cost + config.w_dir * dir_cost
    return out


def match_cost(pred: Prediction, gt: MapElement, config: CostConfig = CostConfig()) -> float:
    return float(cost_matrix([pred], [gt], config)[0, 0])


# -- pre-attribution ----------------------------------------------------------

@dataclass(frozen=True)
class Pair:
    pred_index: int
    gt_id: str
    group: tuple
    cost: float


@dataclass
class AssignmentResult:
    fixed_pairs: list[Pair]
    solved_pairs: list[Pair]
    unmatched_predictions: list[int]
    unmatched_gts: list[tuple[tuple, str]]
    total_cost: float

    @property
    def pairs(self) -> list[Pair]:
        return self.fixed_pairs + self.solved_pairs

    def to_json(self, preds: Sequence[Prediction]) -> str:
        return json.dumps({
            "fixed": [[preds[p.pred_index].ref, p.gt_id] for p in self.fixed_pairs],
            "solved": [[preds[p.pred_index].ref, p.gt_id] for p in self.solved_pairs],
            "total_cost": self.total_cost,
        })


def _groups(preds: Sequence[Prediction], tiling: Optional[int]) -> dict[tuple, list[int]]:
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(preds):
        if tiling is None:
            key = ("all", None)
        elif p.block == "o2o":
            key = ("o2o", None)
        elif p.block == "o2m":
            if p.rep is None or not 0 <= p.rep < tiling:
                raise AssignmentError(f"prediction {p.ref}: repetition outside tiling {tiling}")
            key = ("o2m", p.rep)
        else:
            raise AssignmentError(f"unknown block {p.block!r}")
        groups.setdefault(key, []).append(i)
    return dict(sorted(groups.items(), key=lambda kv: (kv[0][0] != "o2o", kv[0][1] or 0)))


def _prepare_gts(gts: VectorMap, n_points: int) -> list[MapElement]:
    return [g if len(g.points) == n_points else resample(g, n_points) for g in gts.elements]


def assign_with_preattribution(preds: Sequence[Prediction], gts: VectorMap,
                               prior: Optional[VectorMap] = None,
                               tiling: Optional[int] = None,
                               config: CostConfig = CostConfig(),
                               preattribute: bool = True) -> AssignmentResult:
    """Assign predictions to ground truth.

    With ``tiling=k`` predictions are grouped into the O2O block and ``k``
    O2M repetitions, each matched independently against all of ``gts``.
    ``preattribute=False`` gives the plain Hungarian baseline on the same
    groups.
    """
    gt_ids = gts.ids
    if prior is not None:
        missing = sorted(set(prior.ids) - set(gt_ids))
        if missing:
            raise AssignmentError(f"dangling prior reference: prior elements {missing} missing from ground truth")
    if not preds:
        return AssignmentResult([], [], [], [(("all", None), g) for g in gt_ids], 0.0)
    n_points = len(preds[0].points)
    gt_elems = _prepare_gts(gts, n_points)
    index_of = {g: j for j, g in enumerate(gt_ids)}

    fixed, solved, free_preds, free_gts = [], [], [], []
    for key, members in _groups(preds, tiling).items():
        taken: set[str] = set()
        rest = []
        for i in members:
            prov = preds[i].provenance
            if not (preattribute and isinstance(prov, PriorQuery)):
                rest.append(i)
                continue
            if prov.element_id not in index_of:
                raise AssignmentError(f"dangling prior reference {prov.element_id!r}")
            if prov.element_id in taken:
                raise AssignmentError(f"two prior queries claim {prov.element_id!r} in {key}")
            taken.add(prov.element_id)
            c = match_cost(preds[i], gt_elems[index_of[prov.element_id]], config)
            fixed.append(Pair(i, prov.element_id, key, c))
        open_gts = [j for j, g in enumerate(gt_ids) if g not in taken]
        cm = cost_matrix([preds[i] for i in rest], [gt_elems[j] for j in open_gts], config)
        pairs, _ = hungarian(cm)
        matched_p = set()
        matched_g = set()
        for r, c in pairs:
            pi, gj = rest[r], open_gts[c]
            solved.append(Pair(pi, gt_ids[gj], key, float(cm[r, c])))
            matched_p.add(pi)
            matched_g.add(gj)
        free_preds.extend(i for i in rest if i not in matched_p)
        free_gts.extend((key, gt_ids[j]) for j in open_gts if j not in matched_g)
    # exactly rounded, so the total does not depend on pair order
    total = math.fsum(p.cost for p in fixed + solved)
    return AssignmentResult(fixed, solved, sorted(free_preds), free_gts, total)
