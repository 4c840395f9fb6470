"""Trade filtering, equity curves, PnL histograms and method comparison tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import BlockSpec, SplitSpec
from .datagen import TradeList, trades_dataset
from .gbt import GbtParams
from .oca import OcaConfig, run_oca
from .results import SelectionResult
from .scorer import GbtScorer

__all__ = [
    "EquityCurve",
    "Histogram",
    "ComparisonRow",
    "ComparisonTable",
    "filter_trades",
    "equity_curve",
    "pnl_histogram",
    "compare_methods",
    "BacktestReport",
    "run_backtest",
]


class CurrencyMismatchError(ValueError):
    pass


@dataclass
class EquityCurve:
    index: np.ndarray
    cum_pnl: np.ndarray
    currency: str

    @property
    def terminal(self) -> float:
        return float(self.cum_pnl[-1]) if len(self.cum_pnl) else 0.0

    def to_csv(self, variant: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "cum_pnl", "variant", "currency"])
        for i, v in zip(self.index, self.cum_pnl):
            w.writerow([int(i), repr(float(v)), variant, self.currency])
        return buf.getvalue()


def filter_trades(model, trades, mask=None, threshold: float = 0.5) -> set[int]:
    """Row indices of the trades the model predicts as winners.

    ``model`` needs ``predict_proba(X)`` over all N feature columns. A model
    carrying a ``mask`` attribute must have been fit with ``mask``.
    """
    if mask is not None and getattr(model, "mask", None) is not None:
        if not np.array_equal(np.asarray(model.mask), np.asarray(mask)):
            raise ValueError("model was fit on a different feature mask")
    if len(trades) == 0:
        return set()
    X = np.vstack([t.features for t in trades])
    keep = np.asarray(model.predict_proba(X)) >= threshold
    return {t.row_index for t, k in zip(trades, keep) if k}


def _currency(trades) -> str:
    currencies = {t.currency for t in trades}
    if len(currencies) > 1:
        raise CurrencyMismatchError(
            f"trades mix currencies {sorted(currencies)}; aggregate per native currency")
    return currencies.pop() if currencies else ""


def equity_curve(trades, included=None) -> EquityCurve:
    """Cumulative PnL in row order; trades outside ``included`` add zero.

    ``included=None`` keeps every trade.
    """
    ordered = sorted(trades, key=lambda t: t.row_index)
    currency = _currency(ordered)
    pnl = np.array([t.pnl if included is None or t.row_index in included else 0.0
                    for t in ordered], dtype=float)
    return EquityCurve(np.array([t.row_index for t in ordered], dtype=np.int64),
                       np.cumsum(pnl), currency)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    degenerate: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return buf.getvalue()

    def peaks(self, k: int = 2) -> np.ndarray:
        """Bin indices of the ``k`` largest counts, lowest bin first on ties."""
        order = np.lexsort((np.arange(len(self.counts)), -self.counts))
        return np.sort(order[:k])


def pnl_histogram(trades, n_bins: int = 50) -> Histogram:
    """Equal-width bins over ``[min pnl, max pnl]``.

    Identical PnLs give one degenerate bin ``[v, v]`` holding every trade.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    pnl = np.array([t.pnl if hasattr(t, "pnl") else t for t in trades], dtype=float)
    if pnl.size == 0:
        raise ValueError("no trades to histogram")
    lo, hi = pnl.min(), pnl.max()
    if lo == hi:
        return Histogram(np.array([lo, hi]), np.array([pnl.size]), degenerate=True)
    counts, edges = np.histogram(pnl, bins=n_bins, range=(lo, hi))
    return Histogram(edges, counts)


# -- comparison ------------------------------------------------------------

@dataclass
class ComparisonRow:
    method: str
    feature_fraction: float
    score: float
    inner_score: float
    evaluations: int
    n_selected: int
    pareto: bool = False


def _dominates(a, b, key) -> bool:
    fa, sa = a.feature_fraction, getattr(a, key)
    fb, sb = b.feature_fraction, getattr(b, key)
    return fa <= fb and sa >= sb and (fa < fb or sa > sb)


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    score_key: str = "score"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "pct_features", "score_pct", "inner_score_pct",
                    "evaluations", "pareto"])
        for r in self.rows:
            w.writerow([r.method, f"{r.feature_fraction:.2f}", f"{r.score:.2f}",
                        f"{r.inner_score:.2f}", r.evaluations, int(r.pareto)])
        return buf.getvalue()

    def to_text(self) -> str:
        """Methods as columns, one line per quantity."""
        head = ["Method"] + [r.method for r in self.rows]
        lines = [
            head,
            ["% of features"] + [f"{r.feature_fraction:.2f}" for r in self.rows],
            ["Score (in %)"] + [f"{r.score:.2f}" for r in self.rows],
            ["Inner score (in %)"] + [f"{r.inner_score:.2f}" for r in self.rows],
            ["Evaluations"] + [str(r.evaluations) for r in self.rows],
            ["Pareto"] + ["yes" if r.pareto else "no" for r in self.rows],
        ]
        widths = [max(len(line[j]) for line in lines) for j in range(len(head))]
        sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        out = [sep]
        for line in lines:
            out.append("| " + " | ".join(c.ljust(w) for c, w in zip(line, widths)) + " |")
            out.append(sep)
        return "\n".join(out) + "\n"


def _label(result: SelectionResult) -> str:
    if result.method == "rfe":
        return f"RFE {result.popcount} features"
    return result.method.upper()


def compare_methods(results, on: str = "score", labels=None) -> ComparisonTable:
    """Tabulate results and flag the Pareto-nondominated ones.

    A row is dominated when another row has no larger feature fraction and
    no lower score, and is strictly better in one of the two. Identical rows
    therefore never knock each other out. ``on`` picks ``"score"`` (outer
    test) or ``"inner_score"``. Results must share one scorer fingerprint.
    """
    if on not in ("score", "inner_score"):
        raise ValueError("on must be 'score' or 'inner_score'")
    results = list(results)
    if not results:
        raise ValueError("nothing to compare")
    prints = {r.fingerprint for r in results}
    if len(prints) > 1:
        raise ValueError(
            f"results come from different data/split/scorer settings: {sorted(prints)}")
    labels = labels or [_label(r) for r in results]
    rows = [ComparisonRow(label, r.feature_fraction, 100.0 * r.score.accuracy,
                          100.0 * r.inner_score.accuracy, r.evaluations, r.popcount)
            for label, r in zip(labels, results)]
    for row in rows:
        row.pareto = not any(_dominates(other, row, on) for other in rows if other is not row)
    rows.sort(key=lambda r: r.feature_fraction)
    return ComparisonTable(rows, on)


# -- end to end ------------------------------------------------------------

@dataclass
class BacktestReport:
    selection: SelectionResult
    test_rows: np.ndarray
    included: set[int]
    filtered: EquityCurve
    unfiltered: EquityCurve
    histogram: Histogram
    model: object = field(repr=False, default=None)


def run_backtest(trades: TradeList, split: SplitSpec = SplitSpec(),
                 cfg: OcaConfig = OcaConfig(), params: GbtParams = GbtParams(),
                 spec: BlockSpec | None = None, threshold: float = 0.5,
                 n_bins: int = 50, threads: int = 1) -> BacktestReport:
    """Select features with OCA on the training trades, then filter the test trades.

    The model used for filtering is fit on the whole training part with the
    selected mask; test trades never influence selection or fitting.
    """
    X, y, _, inferred = trades_dataset(trades)
    spec = spec or inferred
    scorer = GbtScorer(X, y, split, params, threads=threads)
    selection = run_oca(scorer, spec, cfg)
    model = scorer.outer_model(selection.mask)
    test = [trades[i] for i in scorer.test_idx]
    included = filter_trades(model, test, selection.mask, threshold)
    return BacktestReport(
        selection=selection,
        test_rows=scorer.test_idx.copy(),
        included=included,
        filtered=equity_curve(test, included),
        unfiltered=equity_curve(test),
        histogram=pnl_histogram(trades, n_bins),
        model=model,
    )
