"""Subset scoring for wrapper feature selection.

Selectors talk to a :class:`Scorer`: ``score(mask)`` returns inner-validation
accuracy (memoized and counted), ``importance(mask)`` returns a
mask-respecting importance vector, and ``test_score(mask)`` evaluates on the
untouched outer test set. :class:`GbtScorer` backs this with the boosted trees
in :mod:`blockselect.gbt`; :class:`TableScorer` is a deterministic lookup used
for exhaustive checks.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, SplitSpec, split_indices
from .seeds import derive_seed
from .gbt import Binner, GbtModel, GbtParams, feature_importance, fit

__all__ = [
    "EmptyMaskError",
    "DegenerateModelError",
    "ScoreValue",
    "ScorerBudgetCounter",
    "Scorer",
    "GbtScorer",
    "TableScorer",
    "score_mask",
    "mask_key",
]


class EmptyMaskError(ValueError):
    """A feature mask with no bit set was offered for scoring."""


class DegenerateModelError(RuntimeError):
    """Training labels hold a single class where a real model is required."""


@dataclass(frozen=True, order=True)
class ScoreValue:
    """Accuracy as an exact ratio ``n_correct / n_eval_samples``."""

    n_correct: int
    n_eval_samples: int

    def __post_init__(self):
        if self.n_eval_samples < 1 or not 0 <= self.n_correct <= self.n_eval_samples:
            raise ValueError(f"invalid score {self.n_correct}/{self.n_eval_samples}")

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_eval_samples

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "n_correct": self.n_correct,
                "n_eval_samples": self.n_eval_samples}


class ScorerBudgetCounter:
    """Thread-safe count of distinct masks scored."""

    def __init__(self):
        self._lock = threading.Lock()
        self._n = 0

    def increment(self) -> int:
        with self._lock:
            self._n += 1
            return self._n

    @property
    def evaluations(self) -> int:
        return self._n


def mask_key(mask) -> bytes:
    return np.asarray(mask, dtype=np.int8).tobytes()


def _check_mask(mask, n_features):
    mask = np.asarray(mask, dtype=np.int8)
    if mask.shape != (n_features,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({n_features},)")
    if not mask.any():
        raise EmptyMaskError("feature mask selects no feature")
    return mask


class Scorer:
    """Memoizing, counting front end shared by every scorer.

    Subclasses implement ``_evaluate(mask) -> ScoreValue``, ``importance`` and
    ``test_score``. ``score`` calls ``_evaluate`` at most once per distinct
    mask and bumps the budget counter exactly then.
    """

    n_features: int

    def __init__(self, n_features: int, threads: int = 1):
        self.n_features = int(n_features)
        self.threads = max(1, int(threads))
        self.counter = ScorerBudgetCounter()
        self._cache: dict[bytes, ScoreValue] = {}
        self._pending: dict[bytes, threading.Event] = {}
        self._lock = threading.Lock()

    @property
    def evaluations(self) -> int:
        return self.counter.evaluations

    def cached(self, mask) -> ScoreValue | None:
        return self._cache.get(mask_key(mask))

    def score(self, mask) -> ScoreValue:
        mask = _check_mask(mask, self.n_features)
        key = mask.tobytes()
        while True:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
                event = self._pending.get(key)
                if event is None:
                    event = self._pending[key] = threading.Event()
                    break
            event.wait()
        try:
            value = self._evaluate(mask)
            with self._lock:
                self._cache[key] = value
            self.counter.increment()
            return value
        finally:
            with self._lock:
                del self._pending[key]
            event.set()

    def score_many(self, masks) -> list[ScoreValue]:
        """Score several candidates; parallel when ``threads > 1``.

        Results come back in input order, so callers stay deterministic.
        """
        masks = [_check_mask(m, self.n_features) for m in masks]
        if self.threads == 1 or len(masks) < 2:
            return [self.score(m) for m in masks]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(self.score, masks))

    def _evaluate(self, mask) -> ScoreValue:
        raise NotImplementedError

    def importance(self, mask=None) -> np.ndarray:
        raise NotImplementedError

    def test_score(self, mask) -> ScoreValue:
        raise NotImplementedError

    def fingerprint(self) -> str:
        """Identifies data, split and model settings; equal fingerprints make results comparable."""
        raise NotImplementedError


class GbtScorer(Scorer):
    """Score masks with gradient-boosted trees.

    The rows are split once into outer train/test by ``split``. The outer
    train part is split again, with the same mode, into inner-train and
    inner-validation (``inner_fraction`` of it). Selection scores fit on
    inner-train and evaluate on inner-validation; ``test_score`` fits on the
    whole outer train part and evaluates on the outer test part.
    """

    def __init__(self, X: FeatureMatrix, y, split: SplitSpec = SplitSpec(),
                 params: GbtParams = GbtParams(), inner_fraction: float = 0.25,
                 threads: int = 1):
        super().__init__(X.n_features, threads)
        y = np.asarray(y, dtype=np.int8)
        if len(y) != X.n_samples:
            raise ValueError(f"{len(y)} labels for {X.n_samples} samples")
        self.X = X
        self.y = y
        self.split = split
        self.params = params
        self.inner_fraction = inner_fraction
        self.train_idx, self.test_idx = split_indices(X.n_samples, split)
        inner = SplitSpec(split.mode, inner_fraction, derive_seed(split.seed, "inner"))
        a, b = split_indices(len(self.train_idx), inner)
        self.inner_train_idx = self.train_idx[a]
        self.inner_val_idx = self.train_idx[b]

        values = X.values
        self._Xi, self._yi = values[self.inner_train_idx], y[self.inner_train_idx]
        self._Xv, self._yv = values[self.inner_val_idx], y[self.inner_val_idx]
        self._binner_inner = Binner(self._Xi, params.max_bins)
        self._binner_outer = None
        self._importances: dict[bytes, np.ndarray | None] = {}

    def inner_model(self, mask) -> GbtModel:
        """Model fit on inner-train with ``mask``; its importance is cached as a side effect."""
        mask = _check_mask(mask, self.n_features)
        model = fit(self._Xi, self._yi, mask, self.params, binner=self._binner_inner)
        self._importances[mask.tobytes()] = (
            None if model.degenerate else feature_importance(model))
        return model

    def outer_model(self, mask) -> GbtModel:
        mask = _check_mask(mask, self.n_features)
        if self._binner_outer is None:
            self._binner_outer = Binner(self.X.values[self.train_idx], self.params.max_bins)
        return fit(self.X.values[self.train_idx], self.y[self.train_idx], mask,
                   self.params, binner=self._binner_outer)

    def _evaluate(self, mask) -> ScoreValue:
        model = self.inner_model(mask)
        pred = model.predict(self._Xv)
        return ScoreValue(int((pred == self._yv).sum()), len(self._yv))

    def importance(self, mask=None) -> np.ndarray:
        if mask is None:
            mask = np.ones(self.n_features, dtype=np.int8)
        mask = _check_mask(mask, self.n_features)
        key = mask.tobytes()
        if key not in self._importances:
            self.inner_model(mask)
        imp = self._importances[key]
        if imp is None:
            raise DegenerateModelError(
                "inner-train labels hold a single class; no importance available")
        return imp.copy()

    def test_score(self, mask) -> ScoreValue:
        model = self.outer_model(mask)
        yt = self.y[self.test_idx]
        pred = model.predict(self.X.values[self.test_idx])
        return ScoreValue(int((pred == yt).sum()), len(yt))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X.values).tobytes())
        h.update(self.y.tobytes())
        h.update(json.dumps({
            "columns": list(self.X.column_names),
            "split": [self.split.mode, self.split.test_fraction, self.split.seed],
            "params": self.params.to_dict(),
            "inner_fraction": self.inner_fraction,
        }, sort_keys=True).encode())
        return h.hexdigest()[:16]


class TableScorer(Scorer):
    """Deterministic lookup scorer over all ``2**N`` masks.

    ``table[i]`` is the number of correct predictions (out of ``n_eval``) for
    the mask whose bits, read with column 0 as the least significant bit,
    spell ``i``. Importance is a fixed vector zeroed outside the mask.
    """

    def __init__(self, table, n_eval: int, importance=None, test_table=None,
                 threads: int = 1):
        table = np.asarray(table, dtype=np.int64)
        n_features = int(round(np.log2(len(table))))
        if 2 ** n_features != len(table):
            raise ValueError("table length must be a power of two")
        super().__init__(n_features, threads)
        self.table = table
        self.test_table = table if test_table is None else np.asarray(test_table, dtype=np.int64)
        self.n_eval = int(n_eval)
        if importance is None:
            importance = np.arange(n_features, 0, -1, dtype=float)
        self._importance = np.asarray(importance, dtype=float)

    @classmethod
    def random(cls, n_features: int, seed: int, n_eval: int = 1000, **kw) -> "TableScorer":
        rng = np.random.default_rng(seed)
        table = rng.integers(0, n_eval + 1, size=2 ** n_features)
        importance = rng.random(n_features)
        return cls(table, n_eval, importance=importance, **kw)

    @staticmethod
    def index(mask) -> int:
        bits = np.asarray(mask, dtype=np.int64)
        return int((bits << np.arange(len(bits))).sum())

    def _evaluate(self, mask) -> ScoreValue:
        return ScoreValue(int(self.table[self.index(mask)]), self.n_eval)

    def importance(self, mask=None) -> np.ndarray:
        imp = self._importance.copy()
        if mask is not None:
            imp[np.asarray(mask) == 0] = 0.0
        total = imp.sum()
        return imp / total if total > 0 else imp

    def test_score(self, mask) -> ScoreValue:
        mask = _check_mask(mask, self.n_features)
        return ScoreValue(int(self.test_table[self.index(mask)]), self.n_eval)

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.table.tobytes())
        h.update(self._importance.tobytes())
        return h.hexdigest()[:16]


def score_mask(X: FeatureMatrix, y, split: SplitSpec, mask, params: GbtParams = GbtParams(),
               counter: ScorerBudgetCounter | None = None, scorer: GbtScorer | None = None):
    """One-shot scoring of ``mask`` on inner-validation.

    Pass a ``scorer`` to reuse its memo cache across calls; otherwise a fresh
    one is built (and ``counter``, if given, is shared with it).
    """
    if scorer is None:
        scorer = GbtScorer(X, y, split, params)
    if counter is not None:
        scorer.counter = counter
    return scorer.score(mask)
