"""Dataset-level pipeline: synthesize, derive scenario sets, evaluate.

Directory layout produced by the helpers here::

    <synth dir>/manifest.json
    <synth dir>/scenes/<scene_id>.jsonl
    <scenario dir>/scenarios.jsonl
    <scenario dir>/pairs/<scene_id>__<scenario>.prior
    <scenario dir>/pairs/<scene_id>__<scenario>.complement
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import baselines
from .assignment import Prediction
from .geometry import BevRange
from .metrics import (
    CompletionRow,
    MetricConfig,
    aggregate,
    report_csv,
    report_json,
    report_markdown,
    row_from_matches,
    scene_matches,
    summarize,
)
from .priors import (
    ALL_SCENARIOS,
    PriorParams,
    PriorScenario,
    RegimeConfig,
    ScenarioId,
    apply_prior,
    build_scenario_set,
    pair_stem,
    parse_scenario_set,
    scenario_scenes,
    scenario_set_lines,
)
from .scene_io import (
    DatasetManifest,
    ManifestEntry,
    Split,
    SynthConfig,
    generate_synthetic,
    load_manifest_scenes,
    load_scene,
    save_manifest,
    save_scene,
    write_text_atomic,
)


@dataclass(frozen=True)
class SynthRanges:
    lane_count: tuple = (1, 4)
    curvature_max: float = 0.02
    crossing_count: tuple = (0, 2)
    dash_probability: float = 0.5
    lane_width: float = 3.5
    bev_range: BevRange = field(default_factory=BevRange)


def sample_synth_config(ranges: SynthRanges, seed: int, index: int) -> SynthConfig:
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])
    return SynthConfig(
        lane_count=int(rng.integers(ranges.lane_count[0], ranges.lane_count[1] + 1)),
        lane_width=ranges.lane_width,
        curvature=float(rng.uniform(-ranges.curvature_max, ranges.curvature_max)),
        crossing_count=int(rng.integers(ranges.crossing_count[0], ranges.crossing_count[1] + 1)),
        dash_probability=ranges.dash_probability,
        seed=int(rng.integers(0, 2 ** 63)),
        bev_range=ranges.bev_range,
    )


def synth_dataset(count: int, out_dir, ranges: SynthRanges = SynthRanges(), seed: int = 0,
                  split: Split = Split.VAL) -> DatasetManifest:
    out_dir = Path(out_dir)
    entries = []
    for i in range(count):
        scene_id = f"synth_{i:05d}"
        scene = generate_synthetic(sample_synth_config(ranges, seed, i), scene_id, split)
        rel = f"scenes/{scene_id}.jsonl"
        save_scene(scene, out_dir / rel)
        entries.append(ManifestEntry(rel, split))
    manifest = DatasetManifest(entries, seed=seed, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def generate_scenarios(manifest: DatasetManifest, regime: RegimeConfig, out_dir,
                       params: PriorParams = PriorParams()) -> list[tuple[str, ScenarioId]]:
    out_dir = Path(out_dir)
    scenes = {e.path: s for e, s in zip(manifest.entries, load_manifest_scenes(manifest))}
    pairs = []
    for entry, scenario in build_scenario_set(manifest, regime):
        scene = scenes[entry.path]
        ps = apply_prior(scene, scenario, params)
        prior, comp = scenario_scenes(ps, scene.split)
        stem = pair_stem(scene.scene_id, scenario)
        save_scene(prior, out_dir / "pairs" / f"{stem}.prior")
        save_scene(comp, out_dir / "pairs" / f"{stem}.complement")
        pairs.append((scene.scene_id, scenario))
    write_text_atomic(out_dir / "scenarios.jsonl", scenario_set_lines(pairs))
    return pairs


def load_pair(scenario_dir, scene_id: str, scenario: ScenarioId) -> PriorScenario:
    base = Path(scenario_dir) / "pairs" / pair_stem(scene_id, scenario)
    prior = load_scene(base.with_name(base.name + ".prior"))
    comp = load_scene(base.with_name(base.name + ".complement"))
    return PriorScenario(ScenarioId(scenario), prior.map, comp.map, scene_id)


def load_scenario_index(scenario_dir) -> list[tuple[str, ScenarioId]]:
    path = Path(scenario_dir) / "scenarios.jsonl"
    return parse_scenario_set(path.read_text(encoding="utf-8"))


# -- evaluation ---------------------------------------------------------------

@dataclass
class EvalResult:
    rows: list[CompletionRow]
    errors: list[str]

    def summary(self):
        rows = [summarize(r) for r in self.rows]
        return rows, aggregate(rows)

    def csv(self) -> str:
        rows, mean = self.summary()
        return report_csv(rows, mean)

    def markdown(self) -> str:
        rows, mean = self.summary()
        return report_markdown(rows, mean)


def _eval_task(args):
    scenario_dir, scene_id, scenario, preds, baseline, seed, n_points, config = args
    ps = load_pair(scenario_dir, scene_id, scenario)
    if baseline is not None:
        preds = baselines.predict(baseline, ps, seed, n_points)
    return scene_matches(preds, ps, config)


def evaluate(scenario_dir, predictions: Optional[dict] = None,
             baseline: Optional[baselines.BaselineKind] = None, seed: int = 0,
             config: MetricConfig = MetricConfig(), workers: int = 1, n_points: int = 20,
             scenarios: Optional[Sequence[ScenarioId]] = None) -> EvalResult:
    """Score one prediction source over every pair of a scenario directory.

    ``predictions`` maps ``(scene_id, scenario)`` to prediction lists; pairs
    without an entry count as empty output. Keys that match no pair are
    reported in ``errors`` and ignored.
    """
    if (predictions is None) == (baseline is None):
        raise ValueError("give exactly one of predictions or baseline")
    index = load_scenario_index(scenario_dir)
    if scenarios is not None:
        keep = set(scenarios)
        index = [p for p in index if p[1] in keep]
    known = {(sid, s.value) for sid, s in index}
    errors = []
    if predictions is not None:
        for key in sorted(predictions):
            if key not in known:
                errors.append(f"unknown scene/scenario {key[0]}/{key[1]}")
    tasks = [
        (str(scenario_dir), sid, s,
         None if predictions is None else predictions.get((sid, s.value), []),
         baseline, seed, n_points, config)
        for sid, s in index
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            matches = list(pool.map(_eval_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        matches = [_eval_task(t) for t in tasks]

    by_scenario: dict[ScenarioId, list] = {}
    for (_, s), m in zip(index, matches):
        by_scenario.setdefault(s, []).append(m)
    rows = [row_from_matches(s.value, by_scenario[s], config) for s in ALL_SCENARIOS if s in by_scenario]
    return EvalResult(rows, errors)


def write_reports(result: EvalResult, out_dir, config: MetricConfig) -> None:
    out_dir = Path(out_dir)
    write_text_atomic(out_dir / "report.csv", result.csv())
    write_text_atomic(out_dir / "report.md", result.markdown())
    write_text_atomic(out_dir / "report.json", report_json(result.rows, config))


def baseline_predictions(scenario_dir, kind: baselines.BaselineKind, seed: int = 0,
                         n_points: int = 20) -> str:
    items = []
    for sid, s in load_scenario_index(scenario_dir):
        ps = load_pair(scenario_dir, sid, s)
        items.append((sid, s, baselines.predict(kind, ps, seed, n_points)))
    return baselines.dump_predictions(items)


# -- debug overlay ------------------------------------------------------------

def overlay_svg(ps: PriorScenario, preds: Sequence[Prediction], scale: float = 10.0) -> str:
    """Top-down SVG: prior grey, complement blue, predictions red (forward is up)."""
    r = ps.prior.bev_range
    w, h = (r.y_max - r.y_min) * scale, (r.x_max - r.x_min) * scale

    def xy(p):
        return f"{(r.y_max - p[1]) * scale:.2f},{(r.x_max - p[0]) * scale:.2f}"

    def path(points, closed, color, width):
        tag = "polygon" if closed else "polyline"
        pts = " ".join(xy(p) for p in points)
        return f'<{tag} points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'

    body = [path(e.points, e.closed, "#999999", 3) for e in ps.prior]
    body += [path(e.points, e.closed, "#1f5fbf", 3) for e in ps.complement]
    body += [path(p.points, p.label.is_polygon, "#d62728", 1.5) for p in preds]
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}">'
        + "".join(body) + "</svg>\n"
    )
