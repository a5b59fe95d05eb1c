"""Reference predictors and the prediction file format.

None of these look at sensor data; they read the scenario directly and
exist to exercise the evaluation harness end to end.
"""
from __future__ import annotations

import enum
import json
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .assignment import Prediction
from .geometry import MapClass, resample_points
from .priors import PriorScenario, ScenarioId
from .queries import LearnedQuery, PriorQuery, QueryError, provenance_from_json


class Kind(str, enum.Enum):
    PASS_THROUGH = "passthrough"
    PERFECT_ORACLE = "perfect"
    NOISY_ORACLE = "noisy"
    EMPTY = "empty"


@dataclass(frozen=True)
class BaselineKind:
    kind: Kind
    sigma: float = 0.0
    drop_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ValueError("drop_rate must be in [0, 1]")


PASS_THROUGH = BaselineKind(Kind.PASS_THROUGH)
PERFECT_ORACLE = BaselineKind(Kind.PERFECT_ORACLE)
EMPTY = BaselineKind(Kind.EMPTY)


def noisy_oracle(sigma: float, drop_rate: float = 0.0) -> BaselineKind:
    return BaselineKind(Kind.NOISY_ORACLE, sigma, drop_rate)


def _element_rng(seed: int, scene_id: str, element_id: str) -> np.random.Generator:
    key = [seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(scene_id.encode()), zlib.crc32(element_id.encode())]
    return np.random.default_rng(key)


def predict(kind: BaselineKind, scenario: PriorScenario, seed: int = 0,
            n_points: int = 20) -> list[Prediction]:
    """Predictions for one scene; deterministic given ``seed``."""
    if kind.kind is Kind.EMPTY:
        return []
    out = []
    for e in scenario.prior.elements:
        pts = resample_points(e.points, n_points, e.closed)[:, :2]
        out.append(Prediction.of_class(e.cls, 1.0, pts, provenance=PriorQuery(e.id), row=len(out)))
    if kind.kind is Kind.PASS_THROUGH:
        return out
    for e in scenario.complement.elements:
        pts = resample_points(e.points, n_points, e.closed)[:, :2]
        if kind.kind is Kind.NOISY_ORACLE:
            rng = _element_rng(seed, scenario.scene_id, e.id)
            if rng.random() < kind.drop_rate:
                continue
            pts = pts + rng.normal(0.0, kind.sigma, size=pts.shape)
        row = len(out)
        out.append(Prediction.of_class(e.cls, 1.0, pts, provenance=LearnedQuery(row), row=row))
    return out


# -- prediction files ---------------------------------------------------------

class PredictionFormatError(ValueError):
    pass


def prediction_record(scene_id: str, scenario: ScenarioId, pred: Prediction) -> dict:
    return {
        "scene_id": scene_id,
        "scenario": ScenarioId(scenario).value,
        "provenance": pred.provenance.to_json(),
        "class": pred.label.value,
        "confidence": pred.confidence,
        "points": [[float(x), float(y)] for x, y in pred.points],
    }


def dump_predictions(items: Iterable[tuple[str, ScenarioId, Sequence[Prediction]]]) -> str:
    lines = []
    for scene_id, scenario, preds in items:
        for p in preds:
            lines.append(json.dumps(prediction_record(scene_id, scenario, p), separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def parse_predictions(text: str) -> dict[tuple[str, str], list[Prediction]]:
    """Group prediction records by ``(scene_id, scenario)``.

    Scenario names are kept as raw strings so unknown ones can be reported
    by the caller instead of failing the whole file.
    """
    out: dict[tuple[str, str], list[Prediction]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PredictionFormatError(f"malformed JSON at line {lineno}: {exc.msg}") from None
        for key in ("scene_id", "scenario", "provenance", "class", "confidence", "points"):
            if key not in rec:
                raise PredictionFormatError(f"missing field {key} at line {lineno}")
        try:
            cls = MapClass(rec["class"])
        except ValueError:
            raise PredictionFormatError(f"unknown class {rec['class']!r} at line {lineno}") from None
        try:
            prov = provenance_from_json(rec["provenance"])
            conf = float(rec["confidence"])
            pts = np.asarray(rec["points"], dtype=float)
            if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 2:
                raise ValueError("points must be a list of [x, y]")
            group = out.setdefault((str(rec["scene_id"]), str(rec["scenario"])), [])
            pred = Prediction.of_class(cls, conf, pts[:, :2], provenance=prov, row=len(group))
        except (QueryError, ValueError, TypeError) as exc:
            raise PredictionFormatError(f"invalid record at line {lineno}: {exc}") from None
        group.append(pred)
    return out
