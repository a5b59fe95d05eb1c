import json

import numpy as np
import pytest

from mapcomp import baselines
from mapcomp.baselines import (
    EMPTY,
    PASS_THROUGH,
    PERFECT_ORACLE,
    BaselineKind,
    PredictionFormatError,
    dump_predictions,
    noisy_oracle,
    parse_predictions,
    predict,
)
from mapcomp.geometry import MapClass
from mapcomp.metrics import MetricConfig, completion_ap, completion_ap_dataset
from mapcomp.priors import ALL_SCENARIOS, PriorScenario, ScenarioId, apply_prior
from mapcomp.queries import LearnedQuery, PriorQuery

from helpers import line, scene_of, synth, synth_batch


@pytest.fixture(scope="module")
def pair():
    return apply_prior(synth(lane_count=3, crossings=2, seed=2), ScenarioId.MASK_EGO_LANE)


def test_pass_through(pair):
    out = predict(PASS_THROUGH, pair)
    assert [p.provenance.element_id for p in out] == pair.prior.ids
    assert all(isinstance(p.provenance, PriorQuery) and p.confidence == 1.0 for p in out)


def test_perfect_oracle(pair):
    out = predict(PERFECT_ORACLE, pair)
    learned = [p for p in out if isinstance(p.provenance, LearnedQuery)]
    assert len(learned) == len(pair.complement)
    assert completion_ap(out, pair).mean == 1.0


def test_empty(pair):
    assert predict(EMPTY, pair) == []
    assert completion_ap([], pair).mean == 0.0


def test_zero_noise_is_perfect(pair):
    a = predict(PERFECT_ORACLE, pair, seed=3)
    b = predict(noisy_oracle(0.0, 0.0), pair, seed=3)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.points, y.points)
        assert x.provenance == y.provenance


def test_noisy_deterministic(pair):
    k = noisy_oracle(0.3, 0.2)
    a, b = predict(k, pair, seed=5), predict(k, pair, seed=5)
    c = predict(k, pair, seed=6)
    assert [p.points.tobytes() for p in a] == [p.points.tobytes() for p in b]
    assert [p.points.tobytes() for p in a] != [p.points.tobytes() for p in c]


def test_kind_validation():
    with pytest.raises(ValueError):
        BaselineKind("noisy", sigma=-1.0)
    with pytest.raises(ValueError):
        BaselineKind("noisy", drop_rate=1.5)


def _ten_boundaries():
    elements = [line(f"b{i}", MapClass.BOUNDARY, [[-20, -13.5 + 3 * i], [20, -13.5 + 3 * i]])
                for i in range(10)]
    return apply_prior(scene_of(elements), ScenarioId.NO_PRIOR)


def test_drop_half_monte_carlo():
    ps = _ten_boundaries()
    aps = [completion_ap(predict(noisy_oracle(0.0, 0.5), ps, seed=s), ps).per_class[MapClass.BOUNDARY]
           for s in range(50)]
    # every kept element is found with precision 1, so AP is the kept fraction
    assert abs(np.mean(aps) - 0.5) <= 0.1


def test_pass_through_full_map_ap():
    for scene in synth_batch(5, 9):
        for s in ALL_SCENARIOS:
            ps = apply_prior(scene, s)
            if not len(ps.prior):
                continue
            full = PriorScenario(s, ps.complement.subset([]), ps.prior, ps.scene_id)
            row = completion_ap(predict(PASS_THROUGH, ps), full, MetricConfig(prior_handling="all"))
            for cls in MapClass:
                if row.per_class[cls] is not None:
                    assert abs(row.per_class[cls] - 1.0) <= 1e-9


def test_noise_mean_never_rises():
    scenes = synth_batch(3, 21)
    pairs = [apply_prior(s, sc) for s in scenes for sc in (ScenarioId.NO_PRIOR,
                                                           ScenarioId.MASK_EGO_LANE)]
    means = []
    for sigma in (0.0, 0.25, 0.5, 1.0):
        vals = []
        for seed in range(30):
            by_s = {}
            for ps in pairs:
                by_s.setdefault(ps.scenario, []).append((predict(noisy_oracle(sigma), ps, seed), ps))
            vals.append(np.mean([completion_ap_dataset(v).mean for v in by_s.values()]))
        means.append(np.mean(vals))
    assert all(a >= b for a, b in zip(means, means[1:]))
    assert means[0] == 1.0 and means[-1] < means[0]


# -- prediction files ---------------------------------------------------------

def test_prediction_file_round_trip(pair):
    preds = predict(noisy_oracle(0.2), pair, seed=1)
    text = dump_predictions([(pair.scene_id, pair.scenario, preds)])
    first = json.loads(text.splitlines()[0])
    assert list(first) == ["scene_id", "scenario", "provenance", "class", "confidence", "points"]
    back = parse_predictions(text)
    got = back[(pair.scene_id, pair.scenario.value)]
    assert len(got) == len(preds)
    for a, b in zip(got, preds):
        np.testing.assert_array_equal(a.points, b.points)
        assert a.provenance == b.provenance and a.label is b.label


def test_prediction_file_errors():
    with pytest.raises(PredictionFormatError, match="malformed JSON at line 1"):
        parse_predictions("{nope\n")
    rec = {"scene_id": "a", "scenario": "no_prior", "provenance": {"kind": "learned", "slot": 0},
           "class": "road_boundary", "confidence": 0.5, "points": [[0, 0], [1, 0]]}
    for key in rec:
        bad = dict(rec)
        del bad[key]
        with pytest.raises(PredictionFormatError, match=f"missing field {key} at line 2"):
            parse_predictions(json.dumps(rec) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(PredictionFormatError, match="unknown class"):
        parse_predictions(json.dumps(dict(rec, **{"class": "tree"})))
    with pytest.raises(PredictionFormatError, match="invalid record"):
        parse_predictions(json.dumps(dict(rec, confidence=3.0)))


def test_unknown_scenario_kept_as_string():
    rec = {"scene_id": "a", "scenario": "mask_trees", "provenance": {"kind": "learned", "slot": 0},
           "class": "road_boundary", "confidence": 0.5, "points": [[0, 0], [1, 0]]}
    assert list(parse_predictions(json.dumps(rec))) == [("a", "mask_trees")]


def test_element_rng_independent_of_order():
    a = baselines._element_rng(1, "s", "e").random()
    b = baselines._element_rng(1, "s", "e").random()
    assert a == b
