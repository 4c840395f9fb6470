"""Synthetic datasets with known structure.

``gen_block_dataset`` builds a classification table whose columns come in
lagged blocks: lag ``l`` of a block is the block's latent value plus Gaussian
noise scaled by ``l``, so low lags carry more signal. Labels are a logistic
draw on the sum of the informative columns only.

``gen_trades`` builds fixed profit-target / stop-loss trades whose PnL sits
on the two exit levels except for a small share of timeouts, with features
that partially predict the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BlockSpec, FeatureMatrix, infer_blocks

__all__ = [
    "SynthSpec",
    "gen_block_dataset",
    "benchmark_spec",
    "TradeRecord",
    "TradeList",
    "gen_trades",
    "trades_dataset",
]


@dataclass(frozen=True)
class SynthSpec:
    n_blocks: int = 2
    block_len: int | tuple[int, ...] = 5
    p_singles: int = 2
    n_samples: int = 2000
    informative_blocks: tuple[tuple[int, int], ...] = ((0, 0),)
    informative_singles: tuple[int, ...] = (0,)
    noise_std: float = 0.5
    seed: int = 0
    signal: float = 1.0
    lag_noise: float = 0.5

    def __post_init__(self):
        lens = self.block_lengths
        if len(lens) != self.n_blocks or any(L < 1 for L in lens):
            raise ValueError("every block needs length >= 1")
        if self.p_singles < 0 or self.n_samples < 2:
            raise ValueError("need p_singles >= 0 and n_samples >= 2")
        for b, r in self.informative_blocks:
            if not (0 <= b < self.n_blocks and 0 <= r < lens[b]):
                raise ValueError(f"informative entry ({b}, {r}) outside the blocks")
        for s in self.informative_singles:
            if not 0 <= s < self.p_singles:
                raise ValueError(f"informative single {s} outside [0, {self.p_singles})")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.noise_std == 0 and not (self.informative_blocks or self.informative_singles):
            raise ValueError("no informative feature and zero noise: labels would be constant")

    @property
    def block_lengths(self) -> tuple[int, ...]:
        if isinstance(self.block_len, int):
            return (self.block_len,) * self.n_blocks
        return tuple(self.block_len)

    def column_names(self) -> list[str]:
        names = [f"b{b}__{lag}" for b, L in enumerate(self.block_lengths) for lag in range(L)]
        return names + [f"s{j}" for j in range(self.p_singles)]

    def informative_columns(self) -> list[int]:
        starts = np.concatenate([[0], np.cumsum(self.block_lengths)]).astype(int)
        cols = [int(starts[b] + r) for b, r in self.informative_blocks]
        n_block = int(starts[-1])
        return sorted(cols + [n_block + s for s in self.informative_singles])


def _lagged_block(rng, latent, length, lag_noise):
    noise = rng.standard_normal((len(latent), length))
    return latent[:, None] + lag_noise * np.arange(length)[None, :] * noise


def _labels(informative_values, uniforms, signal, noise_std):
    """Logistic link on the summed informative columns; threshold when noise_std is 0."""
    score = signal * informative_values.sum(axis=1)
    if noise_std == 0:
        return (score > 0).astype(np.int8)
    p = 1.0 / (1.0 + np.exp(-score / noise_std))
    return (uniforms < p).astype(np.int8)


def gen_block_dataset(spec: SynthSpec):
    """Returns ``(FeatureMatrix, labels, BlockSpec, ground_truth_mask)``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    parts = []
    for L in spec.block_lengths:
        parts.append(_lagged_block(rng, rng.standard_normal(n), L, spec.lag_noise))
    parts.append(rng.standard_normal((n, spec.p_singles)))
    values = np.hstack(parts)
    uniforms = rng.random(n)

    cols = spec.informative_columns()
    labels = _labels(values[:, cols], uniforms, spec.signal, spec.noise_std)
    names = spec.column_names()
    truth = np.zeros(len(names), dtype=np.int8)
    truth[cols] = 1
    return FeatureMatrix(values, tuple(names)), labels, infer_blocks(names), truth


def benchmark_spec(seed: int) -> SynthSpec:
    """The frozen selection benchmark: 6 blocks of 6 lags plus 6 singles (N = 42)."""
    return SynthSpec(
        n_blocks=6, block_len=6, p_singles=6, n_samples=1500,
        informative_blocks=((0, 0), (1, 0), (2, 0)),
        informative_singles=(0,),
        noise_std=0.35, seed=seed, signal=1.0, lag_noise=0.5,
    )


# -- trades ----------------------------------------------------------------

@dataclass(frozen=True)
class TradeRecord:
    row_index: int
    pnl: float
    features: np.ndarray
    label: int
    currency: str = "USD"


class TradeList(list):
    """A list of :class:`TradeRecord` that also carries the feature column names."""

    def __init__(self, trades=(), column_names=()):
        super().__init__(trades)
        self.column_names = tuple(column_names)


def gen_trades(n_trades: int, profit_target: float = 1.0, stop_loss: float = -1.0,
               hit_probability: float = 0.5, timeout_fraction: float = 0.05,
               seed: int = 0, *, n_blocks: int = 3, block_len: int = 4,
               p_singles: int = 3, informative_blocks: int = 1,
               informative_singles: int = 1, signal: float = 1.0,
               lag_noise: float = 0.5, threshold: float = 0.0,
               currency: str = "USD") -> TradeList:
    """Simulate trades of a fixed profit-target / stop-loss strategy.

    Each trade times out with probability ``timeout_fraction`` (PnL uniform
    strictly between the two levels); otherwise it hits the target with
    probability ``hit_probability`` and the stop otherwise. Label is
    ``pnl > threshold``. The first ``informative_blocks`` blocks and first
    ``informative_singles`` singles are shifted by ``signal * (label - 1/2)``;
    everything else is noise.
    """
    if not stop_loss < 0 < profit_target:
        raise ValueError("need stop_loss < 0 < profit_target")
    for name, v in (("hit_probability", hit_probability),
                    ("timeout_fraction", timeout_fraction)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    if informative_blocks > n_blocks or informative_singles > p_singles:
        raise ValueError("more informative features than features")
    rng = np.random.default_rng(seed)

    timeout = rng.random(n_trades) < timeout_fraction
    hit = rng.random(n_trades) < hit_probability
    interior = rng.uniform(stop_loss, profit_target, n_trades)
    # uniform() may return the lower end point; nudge it inside
    interior = np.where(interior <= stop_loss, np.nextafter(stop_loss, profit_target), interior)
    pnl = np.where(timeout, interior, np.where(hit, profit_target, stop_loss))
    labels = (pnl > threshold).astype(np.int8)
    shift = signal * (labels - 0.5)

    parts = []
    for b in range(n_blocks):
        latent = rng.standard_normal(n_trades) + (shift if b < informative_blocks else 0.0)
        parts.append(_lagged_block(rng, latent, block_len, lag_noise))
    singles = rng.standard_normal((n_trades, p_singles))
    singles[:, :informative_singles] += shift[:, None]
    parts.append(singles)
    values = np.hstack(parts)

    names = [f"m{b}__{lag}" for b in range(n_blocks) for lag in range(block_len)]
    names += [f"x{j}" for j in range(p_singles)]
    return TradeList(
        (TradeRecord(i, float(pnl[i]), values[i], int(labels[i]), currency)
         for i in range(n_trades)),
        names,
    )


def trades_dataset(trades: TradeList, column_names=None):
    """Returns ``(FeatureMatrix, labels, pnl, BlockSpec)`` in trade order."""
    names = tuple(column_names or trades.column_names)
    values = np.vstack([t.features for t in trades])
    labels = np.array([t.label for t in trades], dtype=np.int8)
    pnl = np.array([t.pnl for t in trades], dtype=float)
    return FeatureMatrix(values, names), labels, pnl, infer_blocks(names)
