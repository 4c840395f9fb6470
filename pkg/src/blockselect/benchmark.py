"""The frozen selection benchmark shared by the CLI, the demos and the tests.

``benchmark_spec(seed)`` (6 blocks of 6 lags plus 6 singles, four informative
columns) is scored by a deliberately overfit-prone booster so that noise
columns cost validation accuracy. The tolerances are one validation sample
wide or more: the inner-validation part holds 250 rows, so a 0.01 change is
2.5 samples and anything smaller is mostly split noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import RfeConfig, run_bca, run_rfe
from .data import SplitSpec
from .datagen import benchmark_spec, gen_block_dataset
from .gbt import GbtParams
from .oca import OcaConfig, run_oca
from .results import SelectionResult
from .scorer import GbtScorer
from .seeds import derive_seed

__all__ = ["BENCHMARK_SEEDS", "BENCHMARK_PARAMS", "BENCHMARK_OCA", "BenchmarkRun",
           "run_benchmark"]

BENCHMARK_SEEDS = (0, 1, 2, 3, 4)
BENCHMARK_PARAMS = GbtParams(max_depth=3, learning_rate=0.3, min_samples_leaf=2)
BENCHMARK_OCA = OcaConfig(eps1=0.01, eps2=0.01)


@dataclass
class BenchmarkRun:
    seed: int
    oca: SelectionResult
    bca: SelectionResult
    rfe: SelectionResult
    all_features: float
    column_names: tuple

    @property
    def evaluation_ratio(self) -> float:
        return self.bca.evaluations / self.oca.evaluations


def run_benchmark(seed: int, params: GbtParams = BENCHMARK_PARAMS,
                  cfg: OcaConfig = BENCHMARK_OCA, threads: int = 1) -> BenchmarkRun:
    """OCA, BCA from all ones, and RFE at OCA's feature count on one seed.

    Every method gets a fresh scorer with the same data, split and params, so
    each evaluation count starts from zero.
    """
    X, y, spec, _ = gen_block_dataset(benchmark_spec(derive_seed(seed, "datagen")))
    split = SplitSpec("randomized", 1.0 / 3.0, derive_seed(seed, "split"))
    params = GbtParams(**{**params.to_dict(), "seed": derive_seed(seed, "gbt")})

    def scorer():
        return GbtScorer(X, y, split, params, threads=threads)

    first = scorer()
    oca = run_oca(first, spec, cfg)
    all_features = first.score(np.ones(X.n_features, dtype=np.int8)).accuracy
    bca = run_bca(scorer(), cfg)
    rfe = run_rfe(scorer(), RfeConfig(oca.popcount))
    return BenchmarkRun(seed, oca, bca, rfe, all_features, X.column_names)
