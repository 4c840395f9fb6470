"""Optimal coordinate ascent over block-structured feature sets.

Three phases share one scorer:

1. uniform block size: score ``(k, ..., k, all singles)`` for
   ``k = 1..min(L_i)`` and start from the best ``k``;
2. block coordinate ascent: for each block in turn, try every count
   ``0..L_i`` with the other counts fixed and keep the best;
3. bit-flip coordinate ascent over all N features.

Within a block the kept members are always the top-ranked ones by the
importance of a single full-feature fit made before phase 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import BlockCountVector, BlockSpec, counts_to_mask
from .results import SelectionResult, Tracker
from .scorer import Scorer, ScoreValue

__all__ = ["OcaConfig", "j_best_search", "block_phase", "binary_sweep_phase", "run_oca"]


@dataclass(frozen=True)
class OcaConfig:
    """Stopping rules. ``eps*`` are score-change tolerances, ``iter_max*`` sweep caps."""

    eps1: float = 1e-6
    eps2: float = 1e-6
    iter_max1: int = 20
    iter_max2: int = 50

    def __post_init__(self):
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.iter_max1 < 1 or self.iter_max2 < 1:
            raise ValueError("iteration caps must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _argmax_first(values):
    """Index of the first maximum, skipping None entries."""
    best = None
    for i, v in enumerate(values):
        if v is not None and (best is None or v.accuracy > values[best].accuracy):
            best = i
    return best


def j_best_search(scorer: Scorer, spec: BlockSpec, importance, cfg: OcaConfig = OcaConfig(),
                  tracker: Tracker | None = None):
    """Pick the uniform block size ``k*`` in ``1..L_min`` with the best score.

    Returns ``(k_star, x0)``. The smallest maximizing ``k`` wins. Without
    blocks the phase is skipped: ``k_star`` is 0 and ``x0`` keeps the singles
    only.
    """
    if spec.n_blocks == 0:
        return 0, BlockCountVector((), True)
    l_min = min(spec.block_lengths)
    candidates = [BlockCountVector((k,) * spec.n_blocks, True) for k in range(1, l_min + 1)]
    masks = [counts_to_mask(c, importance, spec) for c in candidates]
    scores = scorer.score_many(masks)
    best = 0
    if tracker is not None:
        tracker.accept(masks[0], scores[0], "jbest")
    for i in range(1, len(scores)):
        if scores[i].accuracy > scores[best].accuracy:
            best = i
            if tracker is not None:
                tracker.accept(masks[i], scores[i], "jbest")
    return best + 1, candidates[best]


def block_phase(scorer: Scorer, spec: BlockSpec, importance, x0: BlockCountVector,
                cfg: OcaConfig = OcaConfig(), tracker: Tracker | None = None):
    """Cyclic coordinate ascent on the per-block counts, singles kept on.

    A sweep visits blocks in order; block ``i`` takes the smallest count in
    ``0..L_i`` reaching the best score with the others held fixed. Sweeping
    stops once a sweep changes nothing, its score gain is below ``eps1``, or
    ``iter_max1`` sweeps have run. Returns ``(counts, score, n_sweeps)``.
    """
    x0.validate(spec)
    x = x0
    current = scorer.score(counts_to_mask(x, importance, spec))
    n_sweeps = 0
    for _ in range(cfg.iter_max1):
        n_sweeps += 1
        before = current
        changed = False
        for i, length in enumerate(spec.block_lengths):
            cands = [x.replace(i, j) for j in range(length + 1)]
            masks = [counts_to_mask(c, importance, spec) for c in cands]
            live = [j for j, m in enumerate(masks) if m.any()]
            got = scorer.score_many([masks[j] for j in live])
            scores = [None] * len(cands)
            for j, s in zip(live, got):
                scores[j] = s
            j_best = _argmax_first(scores)
            if j_best != x.counts[i]:
                x = cands[j_best]
                current = scores[j_best]
                changed = True
                if tracker is not None:
                    tracker.accept(masks[j_best], current, "block")
        if not changed or abs(current.accuracy - before.accuracy) < cfg.eps1:
            break
    return x, current, n_sweeps


def _accepts(new: ScoreValue, cur: ScoreValue, turning_off: bool) -> bool:
    # equal score only when the flip removes a feature: (score, -popcount) must rise
    return new.accuracy > cur.accuracy or (new.accuracy == cur.accuracy and turning_off)


def binary_sweep_phase(scorer: Scorer, start_mask, cfg: OcaConfig = OcaConfig(),
                       tracker: Tracker | None = None, phase: str = "binary"):
    """Bit-flip coordinate ascent in fixed index order.

    A flip is kept when the score rises, or stays equal while the flip turns
    a feature off; flips that would empty the mask are skipped. Passes repeat
    until one changes nothing, its score gain is below ``eps2``, or
    ``iter_max2`` passes have run.

    Returns ``(mask, score, stop_reason)``; ``stop_reason`` is ``"fixed_point"``,
    ``"tolerance"`` or ``"iter_max"``.
    """
    x = np.asarray(start_mask, dtype=np.int8).copy()
    current = scorer.score(x)
    if tracker is not None:
        tracker.accept(x, current, phase)
    reason = "iter_max"
    for _ in range(cfg.iter_max2):
        before = current
        changed = False
        for i in range(len(x)):
            cand = x.copy()
            cand[i] ^= 1
            if not cand.any():
                continue
            s = scorer.score(cand)
            if _accepts(s, current, turning_off=bool(x[i])):
                x, current, changed = cand, s, True
                if tracker is not None:
                    tracker.accept(x, current, phase)
        if not changed:
            reason = "fixed_point"
            break
        if current.accuracy - before.accuracy < cfg.eps2:
            reason = "tolerance"
            break
    return x, current, reason


def run_oca(scorer: Scorer, spec: BlockSpec, cfg: OcaConfig = OcaConfig()) -> SelectionResult:
    """Full selection run; the returned score is on the outer test set."""
    if spec.n_features != scorer.n_features:
        raise ValueError(
            f"block spec covers {spec.n_features} features, scorer has {scorer.n_features}")
    tracker = Tracker(scorer)
    importance = scorer.importance(np.ones(scorer.n_features, dtype=np.int8))

    k_star, x0 = j_best_search(scorer, spec, importance, cfg, tracker)
    tracker.end_phase("jbest")
    counts, _, n_sweeps = block_phase(scorer, spec, importance, x0, cfg, tracker)
    tracker.end_phase("block")
    start = counts_to_mask(counts, importance, spec)
    mask, inner, reason = binary_sweep_phase(scorer, start, cfg, tracker)
    tracker.end_phase("binary")

    return SelectionResult(
        method="oca",
        mask=mask,
        score=scorer.test_score(mask),
        inner_score=inner,
        trace=tracker.rows,
        evaluations=scorer.evaluations,
        phase_boundaries=tracker.boundaries,
        fingerprint=scorer.fingerprint(),
        stop_reason=reason,
        config={**cfg.to_dict(), "k_star": k_star, "block_counts": list(counts.counts),
                "block_sweeps": n_sweeps},
    )
