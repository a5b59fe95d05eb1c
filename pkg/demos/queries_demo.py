"""Query tables for a prior under the single- and multi-point-prior designs."""
from mapcomp.priors import ScenarioId, apply_prior
from mapcomp.queries import Design, EmbeddingTables, Encoder, build_query_set
from mapcomp.scene_io import SynthConfig, generate_synthetic

scene = generate_synthetic(SynthConfig(lane_count=2, crossing_count=1, seed=1), "demo")
prior = apply_prior(scene, ScenarioId.MASK_EGO_LANE).prior
tables = EmbeddingTables(d_model=64, seed=0)

for design in Design:
    for enc in Encoder:
        qs = build_query_set(prior, design, enc, tables)
        rows = qs.prior_rows()
        ref = qs.ref[rows]
        print(f"{design.value} / {enc.value}: {qs.n_o2o_rows}+{qs.n_o2m_rows} rows, "
              f"{len(rows)} from the prior, ref in [{ref.min():.3f}, {ref.max():.3f}]")
