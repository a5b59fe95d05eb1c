"""Pre-attributed matching against a plain Hungarian solve."""
import numpy as np

from mapcomp.assignment import Prediction, assign_with_preattribution
from mapcomp.geometry import resample
from mapcomp.priors import ScenarioId, apply_prior
from mapcomp.queries import LearnedQuery, PriorQuery
from mapcomp.scene_io import SynthConfig, generate_synthetic

rng = np.random.default_rng(0)
scene = generate_synthetic(SynthConfig(lane_count=3, crossing_count=1, seed=2), "demo")
ps = apply_prior(scene, ScenarioId.MASK_EGO_LANE)

preds = [Prediction.of_class(e.cls, 0.9, resample(e, 20).xy, provenance=PriorQuery(e.id), row=i)
         for i, e in enumerate(ps.prior)]
for i in range(8):
    row = len(preds)
    preds.append(Prediction(rng.uniform(0, 1, 5), rng.uniform([-30, -15], [30, 15], (20, 2)),
                            LearnedQuery(row), "o2o", row, None))

con = assign_with_preattribution(preds, scene.map, ps.prior)
free = assign_with_preattribution(preds, scene.map, ps.prior, preattribute=False)
print(f"fixed {len(con.fixed_pairs)}, solved {len(con.solved_pairs)}, "
      f"unmatched gts {len(con.unmatched_gts)}")
print(f"total cost constrained {con.total_cost:.3f} >= free {free.total_cost:.3f}")
