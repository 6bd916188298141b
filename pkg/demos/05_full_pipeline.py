"""
One-seed reproducible pipeline runs
===================================

Runs both pipelines end to end into a run directory with a manifest, then
replays the top-down run to show bit-identical outputs.
"""

import tempfile
from pathlib import Path

from vulnscape import io as vio
from vulnscape.embedding import EmbeddingConfig
from vulnscape.hopkins import HopkinsConfig
from vulnscape.pipeline import run_bottomup, run_topdown
from vulnscape.synthetic import synthetic_dataset, synthetic_registrations

dataset, _ = synthetic_dataset(seed=0, spread=3.0)
records = synthetic_registrations(seed=3)

with tempfile.TemporaryDirectory() as tmp:
    first = Path(tmp) / "run1"
    second = Path(tmp) / "run2"

    result = run_topdown(dataset, EmbeddingConfig(method="tsne"), seed=2024,
                         hopkins_config=HopkinsConfig(exponent="one"),
                         out_dir=first, workers=4)
    print("top-down artifacts:")
    for name in sorted(result.manifest.artifacts):
        print("  ", name)
    print("\nstability: most unstable neighborhoods")
    worst = sorted(result.stability.transitions.items(), key=lambda kv: -kv[1])[:5]
    for neighborhood, transitions in worst:
        print(f"  {neighborhood}: {transitions} cluster changes, "
              f"trajectory {result.stability.trajectories[neighborhood]}")

    replay = run_topdown(dataset, EmbeddingConfig(method="tsne"), seed=2024,
                         hopkins_config=HopkinsConfig(exponent="one"),
                         out_dir=second, workers=1)
    identical = all((first / n).read_bytes() == (second / n).read_bytes()
                    for n in result.manifest.artifacts)
    print(f"\nreplay with a different worker count is bit-identical: {identical}")

    bottom = run_bottomup(records, out_dir=Path(tmp) / "bottom",
                          populations=dataset.children_by_neighborhood())
    print(f"\nbottom-up wrote {len(bottom.manifest.artifacts)} artifacts, "
          f"{len(bottom.journeys)} journeys")
