import itertools

import numpy as np
import pytest

from blockselect.backtest import (ComparisonRow, CurrencyMismatchError, _dominates,
                                  compare_methods, equity_curve, filter_trades,
                                  pnl_histogram, run_backtest)
from blockselect.data import SplitSpec
from blockselect.datagen import TradeList, TradeRecord, gen_trades
from blockselect.gbt import GbtParams
from blockselect.results import SelectionResult
from blockselect.scorer import ScoreValue


class ConstModel:
    def __init__(self, p):
        self.p = p

    def predict_proba(self, X):
        return np.full(len(X), self.p)


class OracleModel:
    def __init__(self, trades):
        self.by_row = {tuple(t.features): t.label for t in trades}

    def predict_proba(self, X):
        return np.array([self.by_row[tuple(x)] for x in X], dtype=float)


def _trades(pnls, currency="USD"):
    return TradeList([TradeRecord(i, float(p), np.array([float(i)]), int(p > 0), currency)
                      for i, p in enumerate(pnls)], ["f"])


def test_constant_one_model_keeps_everything():
    trades = gen_trades(200, seed=1)
    included = filter_trades(ConstModel(1.0), trades)
    assert len(included) == 200
    assert np.array_equal(equity_curve(trades, included).cum_pnl,
                          equity_curve(trades).cum_pnl)


def test_oracle_model_drops_every_loser():
    trades = gen_trades(300, seed=2)
    included = filter_trades(OracleModel(trades), trades)
    assert all(trades[i].pnl > 0 for i in included)
    curve = equity_curve(trades, included)
    assert np.all(np.diff(curve.cum_pnl) >= 0)


def test_threshold_is_configurable():
    trades = _trades([1, -1, 1])
    assert filter_trades(ConstModel(0.4), trades) == set()
    assert filter_trades(ConstModel(0.4), trades, threshold=0.4) == {0, 1, 2}


def test_mask_mismatch_rejected():
    class Masked(ConstModel):
        mask = np.array([1, 0])

    with pytest.raises(ValueError):
        filter_trades(Masked(1.0), _trades([1]), mask=np.array([0, 1]))


def test_equity_curve_examples():
    trades = _trades([1, -1, 1])
    assert equity_curve(trades, set()).cum_pnl.tolist() == [0, 0, 0]
    assert equity_curve(trades).cum_pnl.tolist() == [1, 0, 1]
    assert equity_curve(trades, {1}).cum_pnl.tolist() == [0, -1, -1]


def test_equity_terminal_equals_sum_of_included():
    trades = gen_trades(500, seed=3)
    rng = np.random.default_rng(0)
    included = {i for i in range(500) if rng.random() < 0.4}
    curve = equity_curve(trades, included)
    assert curve.terminal == pytest.approx(sum(trades[i].pnl for i in sorted(included)),
                                           abs=1e-9)


def test_equity_curve_refuses_mixed_currencies():
    trades = TradeList(list(_trades([1, 2])) + list(_trades([3], currency="EUR")), ["f"])
    with pytest.raises(CurrencyMismatchError):
        equity_curve(trades)


def test_equity_csv():
    text = equity_curve(_trades([1, -1])).to_csv("unfiltered")
    assert text.splitlines() == ["index,cum_pnl,variant,currency",
                                 "0,1.0,unfiltered,USD", "1,0.0,unfiltered,USD"]


def test_histogram_two_spikes_and_conservation():
    trades = gen_trades(1500, timeout_fraction=0.0, seed=4)
    h = pnl_histogram(trades, 50)
    assert h.counts.sum() == 1500
    assert np.count_nonzero(h.counts) == 2
    assert h.edges[0] == -1.0 and h.edges[-1] == 1.0


def test_histogram_small_interior_bars():
    trades = gen_trades(1500, timeout_fraction=0.05, seed=5)
    h = pnl_histogram(trades, 50)
    assert h.counts.sum() == 1500
    top = h.peaks(2)
    assert top.tolist() == [0, 49]
    interior = np.delete(h.counts, top)
    assert interior.max() < 0.1 * h.counts[top].min()


def test_histogram_degenerate_and_errors():
    h = pnl_histogram(_trades([2, 2, 2]), 10)
    assert h.degenerate and h.counts.tolist() == [3]
    with pytest.raises(ValueError):
        pnl_histogram(_trades([1, 2]), 1)


def _result(pop, n, score, fp="x", method="oca"):
    mask = np.zeros(n, dtype=np.int8)
    mask[:pop] = 1
    s = ScoreValue(score, 10_000)
    return SelectionResult(method, mask, s, s, [], 1, {}, fingerprint=fp)


def test_pareto_table1_rows():
    rows = [ComparisonRow("a", 16.6, 62.8, 0, 0, 0), ComparisonRow("b", 16.6, 62.39, 0, 0, 0),
            ComparisonRow("c", 27.08, 62.19, 0, 0, 0), ComparisonRow("d", 19.4, 62.8, 0, 0, 0)]
    flags = [not any(_dominates(o, r, "score") for o in rows if o is not r) for r in rows]
    assert flags == [True, False, False, False]


def test_compare_single_and_identical_rows():
    table = compare_methods([_result(3, 10, 6000)])
    assert table.rows[0].pareto
    table = compare_methods([_result(3, 10, 6000), _result(3, 10, 6000, method="bca")])
    assert all(r.pareto for r in table.rows)


def test_compare_flags_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(30):
        res = [_result(int(rng.integers(1, 6)), 10, int(rng.integers(5000, 5004)))
               for _ in range(5)]
        table = compare_methods(res)
        pts = [(r.feature_fraction, r.score) for r in table.rows]
        for r, (f, s) in zip(table.rows, pts):
            dominated = any(f2 <= f and s2 >= s and (f2, s2) != (f, s) for f2, s2 in pts)
            assert r.pareto == (not dominated)
        assert [r.feature_fraction for r in table.rows] == sorted(p[0] for p in pts)


def test_compare_refuses_mixed_configs():
    with pytest.raises(ValueError, match="different"):
        compare_methods([_result(3, 10, 6000, fp="a"), _result(3, 10, 6000, fp="b")])


def test_compare_outputs():
    table = compare_methods([_result(2, 12, 6280), _result(4, 12, 6219, method="rfe")])
    csv_lines = table.to_csv().splitlines()
    assert csv_lines[0] == "method,pct_features,score_pct,inner_score_pct,evaluations,pareto"
    assert csv_lines[1].startswith("OCA,16.67,62.80")
    text = table.to_text()
    assert "% of features" in text and "RFE 4 features" in text
    assert table.rows[0].feature_fraction == 100 * 2 / 12


@pytest.mark.parametrize("mode", ["temporal", "randomized"])
def test_run_backtest_contract(mode):
    trades = gen_trades(600, seed=6, signal=1.5)
    report = run_backtest(trades, SplitSpec(mode, 1 / 3, 1), params=GbtParams(n_trees=30))
    test_rows = report.test_rows
    assert report.included <= set(test_rows.tolist())
    assert report.filtered.terminal == pytest.approx(
        sum(trades[i].pnl for i in sorted(report.included)), abs=1e-9)
    assert report.unfiltered.terminal == pytest.approx(
        sum(trades[i].pnl for i in test_rows), abs=1e-9)
    if mode == "temporal":
        train = set(range(600)) - set(test_rows.tolist())
        assert min(test_rows) > max(train)
    assert report.histogram.counts.sum() == 600


def test_pairwise_dominance_is_antisymmetric():
    rows = [ComparisonRow(str(i), f, s, 0, 0, 0)
            for i, (f, s) in enumerate(itertools.product([10.0, 20.0], [60.0, 61.0]))]
    for a, b in itertools.permutations(rows, 2):
        assert not (_dominates(a, b, "score") and _dominates(b, a, "score"))
