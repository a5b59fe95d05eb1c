"""Completion AP of the reference predictors on a few synthetic scenes."""
from mapcomp.baselines import EMPTY, PASS_THROUGH, PERFECT_ORACLE, noisy_oracle, predict
from mapcomp.metrics import completion_ap_dataset
from mapcomp.priors import ScenarioId, apply_prior
from mapcomp.scene_io import SynthConfig, generate_synthetic

scenes = [generate_synthetic(SynthConfig(lane_count=1 + i % 4, crossing_count=i % 3, seed=i), f"s{i}")
          for i in range(8)]
pairs = [apply_prior(s, ScenarioId.MASK_EGO_ROAD) for s in scenes]

for name, kind in [("perfect", PERFECT_ORACLE), ("pass-through", PASS_THROUGH), ("empty", EMPTY),
                   ("noisy 0.5 m", noisy_oracle(0.5)), ("noisy 1 m", noisy_oracle(1.0)),
                   ("drop 30%", noisy_oracle(0.0, 0.3))]:
    row = completion_ap_dataset([(predict(kind, ps, seed=1), ps) for ps in pairs])
    cells = " ".join("   -" if v is None else f"{v:.2f}" for v in row.per_class.values())
    print(f"{name:<13} mAP^C {row.mean:.3f}   per class {cells}")
