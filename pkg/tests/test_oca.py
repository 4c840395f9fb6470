import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blockselect.baselines import run_bca
from blockselect.data import BlockCountVector, BlockSpec, counts_to_mask
from blockselect.oca import (OcaConfig, binary_sweep_phase, block_phase, j_best_search,
                             run_oca)
from blockselect.scorer import ScoreValue, Scorer, TableScorer

EXACT = OcaConfig(eps1=0.0, eps2=0.0)


class FnScorer(Scorer):
    """Scores masks with a plain Python function of the bit tuple."""

    def __init__(self, n_features, fn, importance=None):
        super().__init__(n_features)
        self.fn = fn
        self.seen = []
        self._imp = np.ones(n_features) if importance is None else np.asarray(importance, float)

    def _evaluate(self, mask):
        self.seen.append(tuple(int(b) for b in mask))
        return ScoreValue(int(self.fn(tuple(int(b) for b in mask))), 1000)

    def importance(self, mask=None):
        return self._imp / self._imp.sum()

    def test_score(self, mask):
        return self.score(mask)

    def fingerprint(self):
        return "fn"


def _all_masks(n):
    for bits in itertools.product((0, 1), repeat=n):
        if any(bits):
            yield np.array(bits, dtype=np.int8)


def _is_one_flip_optimal(scorer, mask):
    cur = scorer.score(mask).accuracy
    for i in range(len(mask)):
        cand = mask.copy()
        cand[i] ^= 1
        if cand.any() and scorer.score(cand).accuracy > cur:
            return False
    return True


# -- j-best ----------------------------------------------------------------

def test_jbest_lmin_one_scores_only_k1():
    spec = BlockSpec(blocks=(("a", (0,)), ("b", (1, 2))), singles=(3,))
    scorer = FnScorer(4, lambda m: sum(m))
    k, x0 = j_best_search(scorer, spec, np.ones(4), EXACT)
    assert k == 1 and x0 == BlockCountVector((1, 1), True)
    assert scorer.evaluations == 1


def test_jbest_smallest_argmax():
    spec = BlockSpec(blocks=(("a", (0, 1, 2)),), singles=(3,))
    by_count = {1: 600, 2: 650, 3: 650}
    scorer = FnScorer(4, lambda m: by_count[sum(m[:3])])
    k, x0 = j_best_search(scorer, spec, np.ones(4), EXACT)
    assert k == 2 and x0.counts == (2,) and x0.singles_included


def test_jbest_without_blocks():
    spec = BlockSpec.all_singles(3)
    scorer = FnScorer(3, lambda m: 1)
    k, x0 = j_best_search(scorer, spec, np.ones(3), EXACT)
    assert k == 0 and x0.counts == () and scorer.evaluations == 0


# -- block phase -----------------------------------------------------------

def test_block_phase_huge_eps_runs_one_sweep():
    spec = BlockSpec(blocks=(("a", (0, 1, 2)), ("b", (3, 4, 5))), singles=(6,))
    scorer = TableScorer.random(7, seed=1)
    imp = scorer.importance()
    _, _, sweeps = block_phase(scorer, spec, imp, BlockCountVector((1, 1), True),
                               OcaConfig(eps1=1.0))
    assert sweeps == 1


def test_block_phase_single_block_is_exhaustive():
    spec = BlockSpec(blocks=(("a", (0, 1, 2, 3)),), singles=(4,))
    for seed in range(10):
        scorer = TableScorer.random(5, seed=seed)
        imp = scorer.importance()
        counts, score, _ = block_phase(scorer, spec, imp, BlockCountVector((1,), True), EXACT)
        axis = [scorer.score(counts_to_mask(BlockCountVector((j,), True), imp, spec)).accuracy
                for j in range(5)]
        assert counts.counts[0] == int(np.argmax(axis))
        assert score.accuracy == max(axis)


def test_block_phase_coordinatewise_optimal_on_grid():
    spec = BlockSpec(blocks=(("a", (0, 1, 2)), ("b", (3, 4, 5))), singles=(6,))
    for seed in range(20):
        scorer = TableScorer.random(7, seed=seed)
        imp = scorer.importance()
        counts, score, _ = block_phase(scorer, spec, imp, BlockCountVector((1, 1), True), EXACT)
        grid = {(a, b): scorer.score(counts_to_mask(BlockCountVector((a, b), True), imp, spec))
                for a in range(4) for b in range(4)}
        k1, k2 = counts.counts
        assert grid[(k1, k2)] == score
        assert all(grid[(a, k2)].accuracy <= score.accuracy for a in range(4))
        assert all(grid[(k1, b)].accuracy <= score.accuracy for b in range(4))


# -- binary phase ----------------------------------------------------------

def test_binary_from_global_optimum_stops_after_one_pass():
    n = 6
    scorer = TableScorer.random(n, seed=3)
    best = max(_all_masks(n), key=lambda m: (scorer.table[TableScorer.index(m)], -m.sum()))
    before = scorer.evaluations
    mask, score, reason = binary_sweep_phase(scorer, best, EXACT)
    assert np.array_equal(mask, best) and reason == "fixed_point"
    assert scorer.evaluations - before == n + 1


def test_binary_acceptance_is_lexicographic():
    # flat landscape: removals are free, additions never accepted
    scorer = FnScorer(4, lambda m: 500)
    mask, _, _ = binary_sweep_phase(scorer, np.array([1, 1, 1, 1], dtype=np.int8), EXACT)
    assert mask.tolist() == [0, 0, 0, 1]
    mask, _, _ = binary_sweep_phase(scorer, np.array([1, 0, 0, 0], dtype=np.int8), EXACT)
    assert mask.tolist() == [1, 0, 0, 0]


def test_binary_never_scores_empty_mask():
    scorer = FnScorer(3, lambda m: 1000 - 10 * sum(m))
    mask, _, _ = binary_sweep_phase(scorer, np.ones(3, dtype=np.int8), EXACT)
    assert mask.sum() == 1
    assert (0, 0, 0) not in scorer.seen


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_binary_local_optimality_n10(seed):
    scorer = TableScorer.random(10, seed=seed)
    start = np.ones(10, dtype=np.int8)
    mask, score, reason = binary_sweep_phase(scorer, start, EXACT)
    assert reason == "fixed_point"
    assert score.accuracy >= scorer.score(start).accuracy
    assert _is_one_flip_optimal(scorer, mask)
    assert score.n_correct <= scorer.table[1:].max()


def test_binary_iter_cap():
    scorer = TableScorer.random(8, seed=0)
    _, _, reason = binary_sweep_phase(scorer, np.ones(8, dtype=np.int8),
                                      OcaConfig(eps2=0.0, iter_max2=1))
    assert reason in ("iter_max", "fixed_point")


# -- end to end ------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_no_blocks_reduces_to_bca(seed):
    n = 8
    cfg = OcaConfig()
    oca = run_oca(TableScorer.random(n, seed), BlockSpec.all_singles(n), cfg)
    bca = run_bca(TableScorer.random(n, seed), cfg)
    assert np.array_equal(oca.mask, bca.mask)
    assert oca.evaluations == bca.evaluations


@pytest.mark.parametrize("seed", range(10))
def test_run_oca_trace_and_budget(seed):
    spec = BlockSpec(blocks=(("a", (0, 1, 2)), ("b", (3, 4, 5)), ("c", (6, 7))), singles=(8, 9))
    scorer = TableScorer.random(10, seed)
    res = run_oca(scorer, spec, EXACT)
    assert res.trace_is_monotone()
    assert res.evaluations == len(scorer._cache)
    pb = res.phase_boundaries
    assert pb["jbest"] <= pb["block"] <= pb["binary"] == res.evaluations
    assert res.popcount >= 1
    assert res.inner_score == scorer.score(res.mask)
    assert _is_one_flip_optimal(scorer, res.mask)


def test_run_oca_parallel_matches_serial():
    spec = BlockSpec(blocks=(("a", (0, 1, 2)), ("b", (3, 4, 5))), singles=(6, 7))
    a = run_oca(TableScorer.random(8, 5, threads=1), spec)
    b = run_oca(TableScorer.random(8, 5, threads=4), spec)
    assert np.array_equal(a.mask, b.mask) and a.trace == b.trace


def test_spec_size_mismatch():
    with pytest.raises(ValueError):
        run_oca(TableScorer.random(4, 0), BlockSpec.all_singles(5))


def test_config_validation():
    with pytest.raises(ValueError):
        OcaConfig(eps1=-1)
    with pytest.raises(ValueError):
        OcaConfig(iter_max2=0)
