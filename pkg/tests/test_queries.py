import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapcomp.geometry import BevRange, MapClass, VectorMap, resample
from mapcomp.queries import (
    Design,
    EmbeddingTables,
    Encoder,
    LearnedQuery,
    PriorQuery,
    QueryConfig,
    QueryError,
    build_query_set,
    encode_point,
    provenance_from_json,
    zero_pad,
)

from helpers import line, small_map, synth

BEV = BevRange()


@pytest.fixture(scope="module")
def tables():
    return EmbeddingTables(d_model=32, seed=3)


def _prior(n):
    return small_map([
        line(f"e{i}", MapClass.BOUNDARY, [[-20, -14 + 2.5 * i], [20, -14 + 2.5 * i]]) for i in range(n)
    ])


def test_c_reference_at_center(tables):
    q = encode_point(Encoder.C, (0.0, 0.0, 0.0, MapClass.BOUNDARY, 0), 0, tables, BEV)
    assert q.ref_point.tolist() == [0.5, 0.5]


def test_a_is_zero_padded(tables):
    q = encode_point(Encoder.A, (12.0, -3.0, 1.0, MapClass.CENTERLINE, 4), 0, tables, BEV)
    assert np.all(q.content[2:] == 0) and np.all(q.positional[2:] == 0)
    assert q.content[:2].tolist() == [0.7, 0.4]


def test_b_and_c_share_content_only(tables):
    p = (3.0, 2.0, 0.0, MapClass.PED_CROSSING, 5)
    b = encode_point(Encoder.B, p, 0, tables, BEV)
    c = encode_point(Encoder.C, p, 0, tables, BEV)
    np.testing.assert_array_equal(b.content, c.content)
    assert not np.array_equal(b.positional, c.positional)
    assert not np.array_equal(b.ref_point, c.ref_point)


def test_encoder_algebra(tables):
    x, y, v = -7.5, 4.5, 3
    padded = zero_pad([(x + 30) / 60, (y + 15) / 30], 32)
    b = encode_point(Encoder.B, (x, y, 0.0, MapClass.SOLID_DIVIDER, v), 0, tables, BEV)
    want = padded + tables.class_embed(MapClass.SOLID_DIVIDER) + tables.prior_point_embed[v]
    np.testing.assert_array_equal(b.content, want)
    np.testing.assert_array_equal(b.positional, padded)
    logits = tables.ref_projection @ padded
    np.testing.assert_allclose(b.ref_point, 1 / (1 + np.exp(-logits)), rtol=1e-15)
    c = encode_point(Encoder.C, (x, y, 0.0, MapClass.SOLID_DIVIDER, v), 0, tables, BEV)
    np.testing.assert_array_equal(c.positional, tables.prior_pos_embed)


def test_learned_slot(tables):
    for enc in Encoder:
        q = encode_point(enc, None, 9, tables, BEV, point_index=2)
        np.testing.assert_array_equal(q.content, tables.learned_content[9, 2])
        np.testing.assert_array_equal(q.positional, tables.learned_pos[9, 2])
        assert q.provenance == LearnedQuery(9)


def test_prior_point_outside_range(tables):
    with pytest.raises(QueryError):
        encode_point(Encoder.C, (31.0, 0.0, 0.0, MapClass.BOUNDARY, 0), 0, tables, BEV)


def test_tables_deterministic_and_readonly():
    a, b = EmbeddingTables(d_model=16, seed=1), EmbeddingTables(d_model=16, seed=1)
    np.testing.assert_array_equal(a.learned_pos, b.learned_pos)
    assert a.learned_content.shape == (420, 20, 16)
    with pytest.raises(ValueError):
        a.prior_pos_embed[0] = 1.0


def test_default_budget(tables):
    for design in Design:
        qs = build_query_set(_prior(3), design, Encoder.C, tables)
        assert qs.n_o2o_rows == 70 and qs.n_o2m_rows == 350
        assert qs.content.shape[:2] == (420, 20)
        assert len(qs) == 420 * 20


def test_prior_row_counts(tables):
    prior = _prior(10)
    smp = build_query_set(prior, Design.SMP, Encoder.B, tables)
    mmp = build_query_set(prior, Design.MMP, Encoder.B, tables)
    assert len(smp.prior_rows()) == 10
    assert len(mmp.prior_rows()) == 60
    assert mmp.prior_rows() == [r + 70 * t for t in range(6) for r in range(10)]


def test_smp_mmp_share_o2o_block(tables):
    prior = _prior(4)
    smp = build_query_set(prior, Design.SMP, Encoder.A, tables)
    mmp = build_query_set(prior, Design.MMP, Encoder.A, tables)
    np.testing.assert_array_equal(smp.content[smp.o2o], mmp.content[mmp.o2o])
    np.testing.assert_array_equal(smp.ref[smp.o2o], mmp.ref[mmp.o2o])
    # non-prior O2M rows keep their repetition-specific learned slots
    np.testing.assert_array_equal(smp.content[74], mmp.content[74])
    np.testing.assert_array_equal(mmp.content[74], tables.learned_content[74])


def test_empty_prior_designs_identical(tables):
    empty = VectorMap((), BEV)
    a = build_query_set(empty, Design.SMP, Encoder.C, tables)
    b = build_query_set(empty, Design.MMP, Encoder.C, tables)
    np.testing.assert_array_equal(a.content, b.content)
    assert a.row_provenance == b.row_provenance
    assert a.prior_rows() == []


def test_budget_exceeded(tables):
    cfg = QueryConfig(n_o2o=3, k=2, n_points=20)
    with pytest.raises(QueryError, match="prior exceeds query budget"):
        build_query_set(_prior(4), Design.SMP, Encoder.C, tables, cfg)


def test_c_reference_exact_on_synthetic_prior(tables):
    prior = synth(lane_count=4, crossings=2).map
    qs = build_query_set(prior, Design.MMP, Encoder.C, tables)
    for row in qs.prior_rows():
        sp = prior.get(qs.row_provenance[row].element_id)
        pts = resample(sp, 20).points
        want = np.column_stack([(pts[:, 0] + 30) / 60, (pts[:, 1] + 15) / 30])
        assert np.array_equal(qs.ref[row], want)


def test_export_lines(tables):
    qs = build_query_set(_prior(2), Design.MMP, Encoder.C, tables)
    lines = qs.export_lines().splitlines()
    assert len(lines) == 420 * 20
    first, o2m_prior = json.loads(lines[0]), json.loads(lines[70 * 20])
    assert first == {"block": "o2o", "row": 0, "rep": None, "v": 0,
                     "provenance": {"kind": "prior", "element_id": "e0", "point_index": 0},
                     "ref": first["ref"]}
    assert (o2m_prior["block"], o2m_prior["rep"], o2m_prior["provenance"]["kind"]) == ("o2m", 0, "prior")


def test_export_embeddings(tmp_path, tables):
    qs = build_query_set(_prior(1), Design.SMP, Encoder.B, tables)
    path = tmp_path / "emb.f8"
    qs.export_embeddings(path)
    flat = np.fromfile(path, dtype="<f8").reshape(420, 20, 64)
    np.testing.assert_array_equal(flat[..., :32], qs.content)
    np.testing.assert_array_equal(flat[..., 32:], qs.positional)


def test_provenance_json_round_trip():
    for p in (PriorQuery("x", 3), PriorQuery("y"), LearnedQuery(4), LearnedQuery()):
        assert provenance_from_json(p.to_json()) == p
    with pytest.raises(QueryError):
        provenance_from_json({"kind": "other"})


@settings(max_examples=40, deadline=None)
@given(st.floats(-30, 30), st.floats(-15, 15), st.sampled_from(list(MapClass)),
       st.integers(0, 19), st.sampled_from([Encoder.A, Encoder.B]))
def test_projected_reference_strictly_inside(x, y, cls, v, enc):
    tables = EmbeddingTables(d_model=32, seed=3)
    q = encode_point(enc, (x, y, 0.0, cls, v), 0, tables, BEV)
    assert np.all((q.ref_point > 0) & (q.ref_point < 1))


def test_build_deterministic():
    prior = _prior(5)
    a = build_query_set(prior, Design.MMP, Encoder.B, EmbeddingTables(d_model=8, seed=9))
    b = build_query_set(prior, Design.MMP, Encoder.B, EmbeddingTables(d_model=8, seed=9))
    assert a.embedding_array().tobytes() == b.embedding_array().tobytes()
    assert a.export_lines() == b.export_lines()
