"""Filter a synthetic trade stream with a selected model.

Trains on the first two thirds of the trades, keeps the held-out trades the
model scores at >= 0.5 and compares the two cumulative P&L curves.

    python demos/demo_backtest.py [seed]
"""

import sys

import numpy as np

from blockselect.backtest import run_backtest
from blockselect.data import SplitSpec
from blockselect.datagen import gen_trades
from blockselect.seeds import derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
trades = gen_trades(1500, seed=derive_seed(seed, "datagen"))

report = run_backtest(trades, SplitSpec("temporal", 1 / 3, derive_seed(seed, "split")))
print(f"{len(report.test_rows)} test trades, {len(report.included)} kept "
      f"({report.selection.popcount} of {len(report.selection.mask)} features)")
print(f"terminal P&L  unfiltered {report.unfiltered.terminal:8.2f}")
print(f"terminal P&L  filtered   {report.filtered.terminal:8.2f}")

# a coarse look at both curves, every 50th trade
idx = np.arange(0, len(report.test_rows), 50)
print("\n trade  unfiltered  filtered")
for i in idx:
    print(f"{i:6d}  {report.unfiltered.cum_pnl[i]:10.2f}  {report.filtered.cum_pnl[i]:8.2f}")

# P&L distribution: exits sit at the two barriers, timeouts fall in between
h = report.histogram
top = h.peaks(2)
print(f"\nhistogram: {int(h.counts[top].sum())} trades in the two barrier bins, "
      f"{int(h.counts.sum() - h.counts[top].sum())} elsewhere")
