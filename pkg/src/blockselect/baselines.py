"""Baseline selectors: bit-flip coordinate ascent (BCA) and recursive elimination (RFE)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oca import OcaConfig, binary_sweep_phase
from .results import SelectionResult, Tracker
from .scorer import DegenerateModelError, Scorer

__all__ = ["RfeConfig", "run_bca", "run_rfe", "rfe_path"]


@dataclass(frozen=True)
class RfeConfig:
    target_count: int
    step: int = 1

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.step < 1:
            raise ValueError("step must be >= 1")


def run_bca(scorer: Scorer, cfg: OcaConfig = OcaConfig(), start=None) -> SelectionResult:
    """Bit-flip coordinate ascent from ``start`` (all features by default).

    Same acceptance rule, tolerances and budget accounting as the last phase
    of :func:`blockselect.oca.run_oca`, without any block structure.
    """
    if start is None:
        start = np.ones(scorer.n_features, dtype=np.int8)
    tracker = Tracker(scorer)
    mask, inner, reason = binary_sweep_phase(scorer, start, cfg, tracker)
    tracker.end_phase("binary")
    return SelectionResult(
        method="bca",
        mask=mask,
        score=scorer.test_score(mask),
        inner_score=inner,
        trace=tracker.rows,
        evaluations=scorer.evaluations,
        phase_boundaries=tracker.boundaries,
        fingerprint=scorer.fingerprint(),
        stop_reason=reason,
        config=cfg.to_dict(),
        assumptions=["start mask: all features (not stated by the method's description)"],
    )


def _drop_order(importance, current):
    """Selected indices ordered for removal: lowest importance first, higher index first on ties."""
    idx = np.flatnonzero(current)
    # lexsort: last key primary -> importance ascending, then index descending
    return idx[np.lexsort((-idx, importance[idx]))]


def rfe_path(scorer: Scorer, target_counts, step: int = 1):
    """Eliminate down to ``min(target_counts)`` once, snapshotting each target.

    Importance is refit on the surviving set every round. Returns a dict
    ``{count: mask}``; the masks are nested because elimination only removes.
    """
    targets = sorted({int(t) for t in target_counts}, reverse=True)
    n = scorer.n_features
    if not targets or targets[-1] < 1 or targets[0] > n:
        raise ValueError(f"target counts must lie in [1, {n}]")
    current = np.ones(n, dtype=np.int8)
    out = {}
    pending = list(targets)
    while pending:
        size = int(current.sum())
        while pending and pending[0] >= size:
            out[pending.pop(0)] = current.copy()
        if not pending:
            break
        try:
            imp = scorer.importance(current)
        except DegenerateModelError as exc:
            raise DegenerateModelError(
                f"RFE aborted with {size} features left: {exc}") from exc
        n_drop = min(step, size - pending[0])
        current = current.copy()
        current[_drop_order(imp, current)[:n_drop]] = 0
    return {t: out[t] for t in sorted(out)}


def run_rfe(scorer: Scorer, cfg: RfeConfig) -> SelectionResult:
    """Recursive feature elimination down to exactly ``cfg.target_count`` features."""
    if cfg.target_count > scorer.n_features:
        raise ValueError(
            f"target_count {cfg.target_count} exceeds {scorer.n_features} features")
    mask = rfe_path(scorer, [cfg.target_count], cfg.step)[cfg.target_count]
    tracker = Tracker(scorer)
    inner = scorer.score(mask)
    tracker.accept(mask, inner, "rfe")
    tracker.end_phase("rfe")
    return SelectionResult(
        method="rfe",
        mask=mask,
        score=scorer.test_score(mask),
        inner_score=inner,
        trace=tracker.rows,
        evaluations=scorer.evaluations,
        phase_boundaries=tracker.boundaries,
        fingerprint=scorer.fingerprint(),
        stop_reason="target_count",
        config={"target_count": cfg.target_count, "step": cfg.step},
        assumptions=["step size and per-round refit are defaults, not taken from a reference run"],
    )
