"""Block-aware wrapper feature selection with a from-scratch boosted-tree scorer."""

__version__ = "0.1.0"

from .data import (BlockCountVector, BlockSpec, DataError, FeatureMatrix, SplitSpec,
                   counts_to_mask, infer_blocks, load_block_map, load_csv, split,
                   write_block_map, write_csv)
from .gbt import GbtModel, GbtParams
from .scorer import GbtScorer, ScoreValue, TableScorer, score_mask
from .oca import OcaConfig, run_oca
from .baselines import RfeConfig, run_bca, run_rfe
from .results import SelectionResult

__all__ = [
    "BlockCountVector", "BlockSpec", "DataError", "FeatureMatrix", "SplitSpec",
    "counts_to_mask", "infer_blocks", "load_block_map", "load_csv", "split",
    "write_block_map", "write_csv", "GbtModel", "GbtParams", "GbtScorer",
    "ScoreValue", "TableScorer", "score_mask", "OcaConfig", "run_oca",
    "RfeConfig", "run_bca", "run_rfe", "SelectionResult",
]
