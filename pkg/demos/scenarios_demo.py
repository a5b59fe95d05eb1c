"""Split one synthetic scene into prior and complement for every scenario."""
from mapcomp.priors import ALL_SCENARIOS, apply_prior
from mapcomp.scene_io import SynthConfig, generate_synthetic

scene = generate_synthetic(SynthConfig(lane_count=3, crossing_count=2, seed=4), "demo")
print(f"scene {scene.scene_id}: {len(scene.map)} elements")
for s in ALL_SCENARIOS:
    ps = apply_prior(scene, s)
    print(f"  {s.value:<18} prior {len(ps.prior):>3}  complement {len(ps.complement):>3}")
