import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapcomp.assignment import Prediction
from mapcomp.geometry import CLASS_ORDER, MapClass, VectorMap, chamfer
from mapcomp.metrics import (
    CSV_HEADER,
    MetricConfig,
    SummaryRow,
    _eval_points,
    aggregate,
    ap_from_flags,
    average_precision,
    completion_ap,
    completion_ap_dataset,
    greedy_match,
    parse_report_csv,
    report_csv,
    report_markdown,
)
from mapcomp.priors import PriorScenario, ScenarioId, apply_prior
from mapcomp.queries import PriorQuery

from helpers import ap_oracle, line, random_ap_instance, small_map, synth

SEG = np.array([[0.0, 0], [1, 0]])
FAR = SEG + np.array([0, 5.0])


# -- average precision --------------------------------------------------------

def test_perfect_single():
    assert average_precision([(SEG, 0.9)], [SEG], 0.5) == 1.0


def test_false_positive_first_halves_ap():
    assert average_precision([(FAR, 0.95), (SEG, 0.9)], [SEG], 0.5) == 0.5


def test_no_predictions_and_absent():
    assert average_precision([], [SEG], 0.5) == 0.0
    assert average_precision([(SEG, 1.0)], [], 0.5) is None


def test_threshold_is_strict():
    shifted = SEG + np.array([0, 0.5])
    assert average_precision([(shifted, 1.0)], [SEG], 0.5) == 0.0
    assert average_precision([(shifted, 1.0)], [SEG], 0.5 + 1e-9) == 1.0


def test_greedy_match_ties_are_stable():
    dist = np.array([[0.1], [0.1]])
    conf, tp = greedy_match([0.5, 0.5], dist, 1.0)
    assert tp.tolist() == [True, False]


def test_ap_from_flags_envelope():
    # ranks: TP, FP, TP with two gts -> precision envelope 1.0 then 2/3
    assert ap_from_flags(np.array([0.9, 0.8, 0.7]), np.array([1, 0, 1], bool), 2) == \
        pytest.approx(0.5 * 1.0 + 0.5 * 2 / 3, abs=1e-15)


def test_against_oracle_random():
    rng = np.random.default_rng(42)
    for _ in range(100):
        preds, gts, tau = random_ap_instance(rng)
        got = average_precision(preds, gts, tau)
        assert abs(got - ap_oracle(preds, gts, tau)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ap_monotone_in_threshold(seed):
    preds, gts, _ = random_ap_instance(np.random.default_rng(seed))
    aps = [average_precision(preds, gts, t) for t in (0.25, 0.5, 1.0, 1.5, 3.0)]
    assert all(a <= b + 1e-12 for a, b in zip(aps, aps[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-100, 100), st.floats(-100, 100))
def test_ap_translation_invariant(seed, dx, dy):
    preds, gts, tau = random_ap_instance(np.random.default_rng(seed))
    s = np.array([dx, dy])
    moved = average_precision([(p + s, c) for p, c in preds], [g + s for g in gts], tau)
    assert abs(moved - average_precision(preds, gts, tau)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0))
def test_duplicate_true_positive(seed, low):
    preds, gts, tau = random_ap_instance(np.random.default_rng(seed))
    preds = preds + [(gts[0], 1.0)]
    _, tp = greedy_match([c for _, c in preds], _dist(preds, gts), tau)
    dup = preds + [(gts[0], min(low, 0.999))]
    _, tp_dup = greedy_match([c for _, c in dup], _dist(dup, gts), tau)
    after = average_precision(dup, gts, tau)
    assert 0.0 <= after <= 1.0
    # stable sort keeps the original ranking ahead of the lower-confidence copy
    order = np.argsort(-np.array([c for _, c in dup]), kind="stable")
    copy_rank = int(np.nonzero(order == len(dup) - 1)[0][0])
    assert np.delete(tp_dup, copy_rank).tolist() == tp.tolist()


def _dist(preds, gts):
    return np.array([[chamfer(p, g) for g in gts] for p, _ in preds])


# -- completion metric --------------------------------------------------------

def _pred(e, conf=1.0, prior=False):
    if prior:
        return Prediction.of_class(e.cls, conf, e.xy, provenance=PriorQuery(e.id))
    return Prediction.of_class(e.cls, conf, e.xy)


def test_completion_perfect_and_pass_through(three_lane):
    for s in ScenarioId:
        ps = apply_prior(three_lane, s)
        prior_preds = [_pred(e, prior=True) for e in ps.prior]
        perfect = prior_preds + [_pred(e) for e in ps.complement]
        if len(ps.complement):
            assert completion_ap(perfect, ps).mean == 1.0
            assert completion_ap(prior_preds, ps).mean == 0.0


def test_only_boundaries_marks_class_absent():
    ps = apply_prior(synth(lane_count=3, crossings=1), ScenarioId.ONLY_BOUNDARIES)
    row = completion_ap([_pred(e) for e in ps.complement], ps)
    assert row.per_class[MapClass.BOUNDARY] is None
    present = [c for c in CLASS_ORDER if row.per_class[c] is not None]
    assert MapClass.BOUNDARY not in present and len(present) >= 2
    assert row.mean == 1.0


def test_exclude_vs_evaluate_all():
    scene = synth(lane_count=2, crossings=0)
    ps = apply_prior(scene, ScenarioId.ONLY_CENTERLINES)
    # a prior-provenance copy of a masked element counts only under EvaluateAll
    masked = ps.complement.elements[0]
    preds = [_pred(masked, prior=True)]
    assert completion_ap(preds, ps).per_class[masked.cls] == 0.0
    assert completion_ap(preds, ps, MetricConfig(prior_handling="all")).per_class[masked.cls] > 0


def test_no_prior_evaluate_all_is_plain_map():
    scene = synth(lane_count=3, crossings=2, seed=4)
    ps = apply_prior(scene, ScenarioId.NO_PRIOR)
    rng = np.random.default_rng(0)
    preds = [Prediction.of_class(e.cls, float(rng.uniform()), e.xy + rng.normal(0, 0.3, e.xy.shape))
             for e in scene.map]
    row = completion_ap(preds, ps, MetricConfig(prior_handling="all"))
    cfg = MetricConfig()
    for cls in CLASS_ORDER:
        gts = [e for e in scene.map if e.cls is cls]
        if not gts:
            continue
        g = [_eval_points(e.points, 100, e.closed) for e in gts]
        p = [(_eval_points(x.points, 100, cls.is_polygon), x.confidence) for x in preds if x.label is cls]
        want = np.mean([average_precision(p, g, t) for t in cfg.thresholds])
        assert row.per_class[cls] == pytest.approx(want, abs=1e-12)


def test_dataset_pools_scenes():
    a = apply_prior(synth(lane_count=1, crossings=0, seed=1, scene_id="a"), ScenarioId.NO_PRIOR)
    b = apply_prior(synth(lane_count=1, crossings=0, seed=2, scene_id="b"), ScenarioId.NO_PRIOR)
    samples = [([_pred(e) for e in a.complement], a), ([], b)]
    row = completion_ap_dataset(samples)
    # half of the ground truth found, all at precision 1
    assert row.per_class[MapClass.CENTERLINE] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        completion_ap_dataset([])


def test_empty_complement_row_is_absent():
    m = small_map([line("b", MapClass.BOUNDARY, [[0, 0], [1, 0]])])
    ps = PriorScenario(ScenarioId.MASK_CENTERLINES, m, VectorMap((), m.bev_range), "x")
    row = completion_ap([], ps)
    assert row.mean is None


# -- aggregation and reports --------------------------------------------------

def _row(name, values, mean):
    return SummaryRow(name, dict(zip(CLASS_ORDER, values)), mean)


def test_aggregate_single_row_identity():
    r = _row("x", [1.0, None, 3.0, 4.0, 5.0], 3.25)
    agg = aggregate([r])
    assert agg.per_class == r.per_class and agg.mean == r.mean


def test_aggregate_skips_absent():
    rows = [_row("a", [1.0, 2, None, 4, 5], 3.0), _row("b", [3.0, 4, 6, None, 5], 4.5)]
    agg = aggregate(rows)
    assert agg.per_class[MapClass.BOUNDARY] == 6.0
    assert agg.per_class[MapClass.DASHED_DIVIDER] == 2.0
    assert agg.mean == 3.75


def test_csv_round_trip():
    rows = [_row("mask_ego_lane", [45.3, 64.5, 53.4, 52.8, 44.9], 52.2),
            _row("only_boundaries", [37.7, 56.0, None, 50.6, 44.5], 47.2)]
    text = report_csv(rows, aggregate(rows))
    lines = text.splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert lines[2] == "only_boundaries,37.7,56.0,-,50.6,44.5,47.2"
    back = parse_report_csv(text)
    assert [r.name for r in back] == ["mask_ego_lane", "only_boundaries"]
    assert back[1].per_class[MapClass.BOUNDARY] is None
    assert parse_report_csv(text, include_mean=True)[-1].name == "Mean"


def test_markdown_layout():
    rows = [_row("no_prior", [37.9, 55.0, 49.7, 48.2, 41.7], 46.5)]
    md = report_markdown(rows, aggregate(rows)).splitlines()
    assert md[1].startswith("| Map Prior | AP^C dsh")
    assert md[3] == "| no_prior | 37.9 | 55.0 | 49.7 | 48.2 | 41.7 | **46.5** |"


def test_metric_config_validation():
    with pytest.raises(ValueError):
        MetricConfig(thresholds=(1.0, 0.5))
    with pytest.raises(ValueError):
        MetricConfig(thresholds=(0.0, 1.0))
    with pytest.raises(ValueError):
        MetricConfig(resample_n=1)
