"""End-to-end run: synthetic data, scenario pairs, a noisy baseline, report."""
import sys
import tempfile
from pathlib import Path

from mapcomp.baselines import noisy_oracle
from mapcomp.bench import evaluate, generate_scenarios, synth_dataset, write_reports
from mapcomp.metrics import MetricConfig
from mapcomp.priors import BENCHMARK_SCENARIOS, RegimeConfig

count = int(sys.argv[1]) if len(sys.argv) > 1 else 20
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    manifest = synth_dataset(count, root / "syn", seed=3)
    generate_scenarios(manifest, RegimeConfig("augmentation", BENCHMARK_SCENARIOS), root / "sc")
    result = evaluate(root / "sc", baseline=noisy_oracle(0.6, 0.1), seed=3, workers=2)
    write_reports(result, root / "rep", MetricConfig())
    print(result.markdown())
