"""Block-aware selection against the two baselines on the frozen benchmark.

Runs OCA, binary coordinate ascent and RFE (matched to OCA's feature count)
on each benchmark seed and prints the comparison table scored on the inner
validation part. Takes roughly half a minute per seed on one core.

    python demos/demo_selection.py [seed ...]
"""

import sys

from blockselect.backtest import compare_methods
from blockselect.benchmark import BENCHMARK_SEEDS, run_benchmark

seeds = [int(s) for s in sys.argv[1:]] or list(BENCHMARK_SEEDS)

for seed in seeds:
    run = run_benchmark(seed)
    print(f"seed {seed}: all features {100 * run.all_features:.2f}%, "
          f"k* = {run.oca.config['k_star']}, block counts {run.oca.config['block_counts']}")
    print(compare_methods([run.oca, run.bca, run.rfe], on="inner_score").to_text())

    # which columns survived
    kept = [name for name, bit in zip(run.column_names, run.oca.mask) if bit]
    print("OCA kept:", ", ".join(kept))
    print()
