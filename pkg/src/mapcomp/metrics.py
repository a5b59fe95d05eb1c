"""Chamfer-distance average precision and the completion metric.

The completion metric scores predictions only against ground-truth elements
that were withheld from the prior. Classes without any withheld element are
reported as absent and left out of every mean.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .assignment import Prediction
from .geometry import CLASS_ORDER, DEGENERATE_EPS, chamfer, chamfer_matrix, resample_points
from .priors import PriorScenario


class PriorHandling(str, enum.Enum):
    EXCLUDE_BY_PROVENANCE = "exclude"
    EVALUATE_ALL = "all"


@dataclass(frozen=True)
class MetricConfig:
    thresholds: tuple = (0.5, 1.0, 1.5)
    resample_n: int = 100
    prior_handling: PriorHandling = PriorHandling.EXCLUDE_BY_PROVENANCE

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th or any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be positive and strictly increasing")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "prior_handling", PriorHandling(self.prior_handling))
        if self.resample_n < 2:
            raise ValueError("resample_n must be at least 2")


# -- average precision --------------------------------------------------------

def greedy_match(confidences: Sequence[float], distances: np.ndarray, tau: float):
    """Confidence-ordered greedy matching.

    ``distances`` is (n_pred, n_gt). Returns the sorted confidences and a
    true-positive flag for each prediction in that order.
    """
    conf = np.asarray(confidences, dtype=float)
    order = np.argsort(-conf, kind="stable")
    n_gt = distances.shape[1] if distances.ndim == 2 else 0
    free = np.ones(n_gt, dtype=bool)
    tp = np.zeros(len(order), dtype=bool)
    for rank, i in enumerate(order):
        if not free.any():
            continue
        d = np.where(free, distances[i], np.inf)
        j = int(np.argmin(d))
        if d[j] < tau:
            free[j] = False
            tp[rank] = True
    return conf[order], tp


def ap_from_flags(confidences: np.ndarray, tp: np.ndarray, n_gt: int) -> Optional[float]:
    """All-points area under the interpolated precision-recall curve."""
    if n_gt == 0:
        return None
    if len(tp) == 0:
        return 0.0
    order = np.argsort(-np.asarray(confidences), kind="stable")
    tp = np.asarray(tp, dtype=float)[order]
    tps = np.cumsum(tp)
    recall = tps / n_gt
    precision = tps / np.arange(1, len(tp) + 1)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def average_precision(preds: Sequence[tuple], gts: Sequence, tau: float) -> Optional[float]:
    """AP of ``(points, confidence)`` predictions against ground-truth point lists.

    Returns ``None`` when there is no ground truth.
    """
    if len(gts) == 0:
        return None
    if len(preds) == 0:
        return 0.0
    dist = np.array([[chamfer(p, g) for g in gts] for p, _ in preds])
    conf, tp = greedy_match([c for _, c in preds], dist, tau)
    return ap_from_flags(conf, tp, len(gts))


# -- completion metric --------------------------------------------------------

@dataclass
class ClassMatches:
    n_gt: int
    confidences: list = field(default_factory=list)
    tp: dict = field(default_factory=dict)  # tau -> list of bool, aligned with confidences


@dataclass
class SceneMatches:
    scene_id: str
    scenario: str
    per_class: dict


def _eval_points(points, n: int, closed: bool) -> np.ndarray:
    pts = np.asarray(points, dtype=float)[:, :2]
    length = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    if len(pts) < 2 or length < DEGENERATE_EPS:
        return np.repeat(pts[:1], n, axis=0)
    return resample_points(pts, n, closed)


def candidate_predictions(preds: Iterable[Prediction], config: MetricConfig) -> list[Prediction]:
    if config.prior_handling is PriorHandling.EXCLUDE_BY_PROVENANCE:
        return [p for p in preds if not p.is_prior]
    return list(preds)


def scene_matches(preds: Sequence[Prediction], scenario: PriorScenario,
                  config: MetricConfig = MetricConfig()) -> SceneMatches:
    """Per-class greedy matches of one scene against the scenario complement."""
    candidates = candidate_predictions(preds, config)
    per_class = {}
    for cls in CLASS_ORDER:
        gts = [
            _eval_points(e.points, config.resample_n, e.closed)
            for e in scenario.complement.elements if e.cls is cls
        ]
        mine = [p for p in candidates if p.label is cls]
        cm = ClassMatches(n_gt=len(gts))
        if mine:
            pts = [_eval_points(p.points, config.resample_n, cls.is_polygon) for p in mine]
            dist = chamfer_matrix(pts, gts)
            for tau in config.thresholds:
                conf, tp = greedy_match([p.confidence for p in mine], dist, tau)
                cm.tp[tau] = tp.tolist()
            cm.confidences = conf.tolist()
        per_class[cls] = cm
    return SceneMatches(scenario.scene_id, scenario.scenario.value, per_class)


@dataclass
class CompletionRow:
    """Completion precision of one scenario; ``None`` marks an absent class."""

    scenario: str
    per_threshold: dict  # MapClass -> {tau: AP or None}
    per_class: dict  # MapClass -> AP or None
    mean: Optional[float]
    n_gt: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "mAP": self.mean,
            "AP": {c.short: self.per_class[c] for c in CLASS_ORDER},
            "AP_per_threshold": {
                c.short: {str(t): v for t, v in self.per_threshold[c].items()} for c in CLASS_ORDER
            },
            "n_gt": {c.short: self.n_gt.get(c, 0) for c in CLASS_ORDER},
        }


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return float(sum(vals) / len(vals))


def row_from_matches(scenario: str, matches: Sequence[SceneMatches],
                     config: MetricConfig = MetricConfig()) -> CompletionRow:
    """Pool scene-level matches into one scenario row (global confidence ranking)."""
    per_threshold, per_class, n_gt = {}, {}, {}
    for cls in CLASS_ORDER:
        total = sum(m.per_class[cls].n_gt for m in matches)
        n_gt[cls] = total
        conf = np.array([c for m in matches for c in m.per_class[cls].confidences], dtype=float)
        per_tau = {}
        for tau in config.thresholds:
            tp = np.array(
                [f for m in matches for f in m.per_class[cls].tp.get(tau, [])], dtype=bool
            )
            per_tau[tau] = ap_from_flags(conf, tp, total)
        per_threshold[cls] = per_tau
        per_class[cls] = None if total == 0 else _mean(per_tau.values())
    return CompletionRow(scenario, per_threshold, per_class, _mean(per_class.values()), n_gt)


def completion_ap(preds: Sequence[Prediction], scenario: PriorScenario,
                  config: MetricConfig = MetricConfig()) -> CompletionRow:
    return row_from_matches(scenario.scenario.value, [scene_matches(preds, scenario, config)], config)


def completion_ap_dataset(samples: Sequence[tuple[Sequence[Prediction], PriorScenario]],
                          config: MetricConfig = MetricConfig()) -> CompletionRow:
    """One scenario over many scenes."""
    if not samples:
        raise ValueError("no samples")
    names = {ps.scenario for _, ps in samples}
    if len(names) != 1:
        raise ValueError("samples mix several scenarios")
    matches = [scene_matches(p, ps, config) for p, ps in samples]
    return row_from_matches(samples[0][1].scenario.value, matches, config)


# -- aggregation & reports ----------------------------------------------------

@dataclass
class SummaryRow:
    """A report row in display units; ``None`` marks an absent cell."""

    name: str
    per_class: dict  # MapClass -> float or None
    mean: Optional[float]


def summarize(row: CompletionRow, scale: float = 100.0) -> SummaryRow:
    def s(v):
        return None if v is None else v * scale
    return SummaryRow(row.scenario, {c: s(row.per_class[c]) for c in CLASS_ORDER}, s(row.mean))


def aggregate(rows: Sequence, name: str = "Mean") -> SummaryRow:
    """Per-class mean over rows where the class is present; mean of row means."""
    if not rows:
        raise ValueError("aggregate needs at least one row")
    per_class = {c: _mean(r.per_class.get(c) for r in rows) for c in CLASS_ORDER}
    return SummaryRow(name, per_class, _mean(r.mean for r in rows))


CSV_HEADER = ["scenario"] + [f"AP_{c.short}" for c in CLASS_ORDER] + ["mAP"]


def _fmt(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.1f}"


def report_csv(rows: Sequence[SummaryRow], mean: Optional[SummaryRow] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in list(rows) + ([mean] if mean is not None else []):
        w.writerow([r.name] + [_fmt(r.per_class[c]) for c in CLASS_ORDER] + [_fmt(r.mean)])
    return buf.getvalue()


def report_markdown(rows: Sequence[SummaryRow], mean: Optional[SummaryRow] = None,
                    title: str = "AP^C = AP for masked elements only") -> str:
    head = ["Map Prior"] + [f"AP^C {c.short}" for c in CLASS_ORDER] + ["mAP^C"]
    lines = [f"<!-- {title} -->", "| " + " | ".join(head) + " |",
             "|" + "|".join([":---"] + ["---:"] * (len(head) - 1)) + "|"]
    for r in rows:
        cells = [r.name] + [_fmt(r.per_class[c]) for c in CLASS_ORDER] + [f"**{_fmt(r.mean)}**"]
        lines.append("| " + " | ".join(cells) + " |")
    if mean is not None:
        cells = [f"**{mean.name}**"] + [f"**{_fmt(mean.per_class[c])}**" for c in CLASS_ORDER]
        cells.append(f"**{_fmt(mean.mean)}**")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str, include_mean: bool = False) -> list[SummaryRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected report header {header}")
    out = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(CSV_HEADER):
            raise ValueError(f"report line {lineno}: expected {len(CSV_HEADER)} columns")
        if rec[0] == "Mean" and not include_mean:
            continue
        try:
            vals = [None if v == "-" else float(v) for v in rec[1:]]
        except ValueError:
            raise ValueError(f"report line {lineno}: non-numeric cell") from None
        out.append(SummaryRow(rec[0], dict(zip(CLASS_ORDER, vals[:-1])), vals[-1]))
    return out


def report_json(rows: Sequence[CompletionRow], config: MetricConfig) -> str:
    body = {
        "thresholds": list(config.thresholds),
        "resample_n": config.resample_n,
        "prior_handling": config.prior_handling.value,
        "rows": [r.to_json() for r in rows],
    }
    return json.dumps(body, indent=1, sort_keys=True) + "\n"
