import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blockselect.data import (BlockCountVector, BlockSpec, DataError, FeatureMatrix,
                              SplitSpec, counts_to_mask, infer_blocks, load_block_map,
                              load_csv, mask_from_json, mask_to_json, split,
                              split_indices, write_block_map, write_csv)


def _write(path, text):
    path.write_text(text)
    return path


def test_load_minimal_file(tmp_path):
    p = _write(tmp_path / "d.csv", "f1,f2,label\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n")
    X, y, pnl = load_csv(p)
    assert X.values.shape == (4, 2)
    assert X.column_names == ("f1", "f2")
    assert y.tolist() == [0, 1, 1, 0]
    assert pnl is None


def test_non_numeric_cell_names_row_and_column(tmp_path):
    rows = ["1,2,0"] * 6 + ["1,abc,1"]
    p = _write(tmp_path / "d.csv", "f1,f2,label\n" + "\n".join(rows) + "\n")
    with pytest.raises(DataError, match=r"row 7.*'f2'"):
        load_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_duplicate_and_missing_columns(tmp_path):
    with pytest.raises(DataError, match="duplicate"):
        load_csv(_write(tmp_path / "a.csv", "f,f,label\n1,2,0\n"))
    with pytest.raises(DataError, match="label"):
        load_csv(_write(tmp_path / "b.csv", "f,g\n1,2\n"))


def test_nonfinite_and_bad_labels_rejected(tmp_path):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path / "a.csv", "f,label\nnan,0\n"))
    with pytest.raises(DataError, match="0/1"):
        load_csv(_write(tmp_path / "b.csv", "f,label\n1,2\n"))


def test_labels_from_pnl(tmp_path):
    p = _write(tmp_path / "t.csv", "f,pnl\n1,0.5\n2,-1\n3,0\n")
    X, y, pnl = load_csv(p, pnl_column="pnl")
    assert X.column_names == ("f",)
    assert y.tolist() == [1, 0, 0]
    assert pnl.tolist() == [0.5, -1.0, 0.0]


def test_quoted_header_cells(tmp_path):
    p = _write(tmp_path / "q.csv", '"a,b",label\n"1.5",1\n')
    X, _, _ = load_csv(p)
    assert X.column_names == ("a,b",)
    assert X.values[0, 0] == 1.5


def test_large_file_shape(tmp_path):
    rng = np.random.default_rng(0)
    X = FeatureMatrix(rng.standard_normal((1500, 135)), tuple(f"c{i}" for i in range(135)))
    write_csv(tmp_path / "big.csv", X, rng.integers(0, 2, 1500))
    X2, y2, _ = load_csv(tmp_path / "big.csv")
    assert (X2.n_samples, X2.n_features) == (1500, 135)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 20), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_csv_round_trip_is_bit_identical(tmp_path_factory, n, d, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, d)) * 10.0 ** rng.integers(-30, 30, (n, d))
    X = FeatureMatrix(values, tuple(f"x{i}" for i in range(d)))
    y = rng.integers(0, 2, n)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(path, X, y)
    X2, y2, _ = load_csv(path)
    assert X2.values.tobytes() == X.values.tobytes()
    assert y2.tolist() == y.tolist()


def test_infer_blocks_examples():
    spec = infer_blocks(["a__0", "a__1", "b"])
    assert spec.blocks == (("a", (0, 1)),)
    assert spec.singles == (2,)

    spec = infer_blocks(["x"])
    assert spec.blocks == () and spec.singles == (0,)

    names = [f"s__{i}" for i in range(5)] + [f"t__{i}" for i in range(3)] + ["u", "v"]
    spec = infer_blocks(names)
    assert (spec.n_blocks, spec.block_lengths, spec.n_singles, spec.n_features) == \
        (2, (5, 3), 2, 10)
    assert spec.n_block_features == 8


def test_infer_blocks_orders_by_lag_and_rejects_duplicates():
    spec = infer_blocks(["a__2", "a__0", "a__1"])
    assert spec.blocks == (("a", (1, 2, 0)),)
    with pytest.raises(DataError, match="duplicate"):
        infer_blocks(["a__0", "a__00"])


def test_block_spec_must_partition():
    with pytest.raises(DataError):
        BlockSpec(blocks=(("a", (0, 1)),), singles=(1,))
    with pytest.raises(DataError):
        BlockSpec(blocks=(("a", (0, 2)),), singles=())
    with pytest.raises(DataError):
        BlockSpec(blocks=(("a", ()),), singles=(0,))


def test_block_map_round_trip(tmp_path):
    names = ["a__0", "a__1", "z", "b__0"]
    spec = BlockSpec(blocks=(("a", (0, 1)), ("b", (3,))), singles=(2,))
    write_block_map(tmp_path / "m.json", spec, names)
    assert load_block_map(tmp_path / "m.json", names) == spec
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc == {"blocks": {"a": ["a__0", "a__1"], "b": ["b__0"]}, "singles": ["z"]}


def test_block_map_unknown_column(tmp_path):
    p = _write(tmp_path / "m.json", '{"blocks": {"a": ["q"]}, "singles": []}')
    with pytest.raises(DataError, match="'q'"):
        load_block_map(p, ["a"])


def test_temporal_split_example():
    train, test = split_indices(9, SplitSpec("temporal", 1 / 3))
    assert train.tolist() == list(range(6))
    assert test.tolist() == [6, 7, 8]
    train, test = split_indices(1500, SplitSpec("temporal", 1 / 3))
    assert (len(train), len(test)) == (1000, 500)


def test_randomized_split_deterministic():
    a = split_indices(100, SplitSpec("randomized", 0.3, seed=5))
    b = split_indices(100, SplitSpec("randomized", 0.3, seed=5))
    c = split_indices(100, SplitSpec("randomized", 0.3, seed=6))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert not np.array_equal(a[1], c[1])


def test_split_errors():
    with pytest.raises(DataError):
        split_indices(1, SplitSpec("temporal", 0.5))
    with pytest.raises(ValueError):
        SplitSpec("sideways", 0.5)
    with pytest.raises(ValueError):
        SplitSpec("temporal", 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 300), st.floats(0.01, 0.99), st.sampled_from(["temporal", "randomized"]),
       st.integers(0, 1000))
def test_split_is_partition(n, frac, mode, seed):
    spec = SplitSpec(mode, frac, seed)
    try:
        train, test = split_indices(n, spec)
    except DataError:
        return
    assert len(test) == int(np.ceil(frac * n))
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(n))
    if mode == "temporal":
        assert train.max() < test.min()


def test_split_returns_pairs():
    X = FeatureMatrix(np.arange(18.0).reshape(9, 2), ("a", "b"))
    (Xtr, ytr), (Xte, yte) = split(X, np.arange(9) % 2, SplitSpec("temporal", 1 / 3))
    assert Xtr.n_samples == 6 and Xte.values[0, 0] == 12.0
    assert yte.tolist() == [0, 1, 0]


def test_counts_to_mask_examples():
    spec = BlockSpec(blocks=(("c", (0, 1, 2)),), singles=(3,))
    imp = np.array([0.1, 0.5, 0.5, 0.0])
    mask = counts_to_mask(BlockCountVector((2,), True), imp, spec)
    assert mask.tolist() == [0, 1, 1, 1]
    mask = counts_to_mask(BlockCountVector((1,), True), imp, spec)
    assert mask.tolist() == [0, 1, 0, 1]
    assert counts_to_mask(BlockCountVector((3,), True), imp, spec).tolist() == [1, 1, 1, 1]
    assert counts_to_mask(BlockCountVector((0,), False), imp, spec).tolist() == [0, 0, 0, 0]


def test_counts_validation():
    spec = BlockSpec(blocks=(("c", (0, 1)),), singles=())
    with pytest.raises(DataError):
        counts_to_mask(BlockCountVector((3,), True), np.ones(2), spec)
    with pytest.raises(DataError):
        counts_to_mask(BlockCountVector((1,), True), np.ones(3), spec)


@st.composite
def _spec_counts_importance(draw):
    lengths = draw(st.lists(st.integers(1, 5), min_size=0, max_size=4))
    p = draw(st.integers(0, 3))
    n = sum(lengths) + p
    if n == 0:
        p, n = 1, sum(lengths) + 1
    perm = draw(st.permutations(range(n)))
    blocks, pos = [], 0
    for b, L in enumerate(lengths):
        blocks.append((f"b{b}", tuple(perm[pos:pos + L])))
        pos += L
    spec = BlockSpec(tuple(blocks), tuple(perm[pos:]))
    counts = tuple(draw(st.integers(0, L)) for L in lengths)
    imp = np.array(draw(st.lists(st.sampled_from([0.0, 0.1, 0.2, 0.5]),
                                 min_size=n, max_size=n)))
    return spec, counts, draw(st.booleans()), imp


@settings(max_examples=100, deadline=None)
@given(_spec_counts_importance())
def test_counts_to_mask_popcount_and_monotone(args):
    spec, counts, singles, imp = args
    mask = counts_to_mask(BlockCountVector(counts, singles), imp, spec)
    assert int(mask.sum()) == sum(counts) + (spec.n_singles if singles else 0)
    for i, L in enumerate(spec.block_lengths):
        if counts[i] < L:
            bigger = list(counts)
            bigger[i] += 1
            grown = counts_to_mask(BlockCountVector(tuple(bigger), singles), imp, spec)
            assert np.all(grown >= mask)


def test_mask_json_round_trip():
    names = ["a", "b", "c"]
    doc = mask_to_json(np.array([1, 0, 1]), names)
    assert doc["selected"] == ["a", "c"]
    assert mask_from_json(json.loads(json.dumps(doc)), names).tolist() == [1, 0, 1]
    with pytest.raises(DataError):
        mask_from_json(doc, ["a", "b", "d"])


def test_feature_matrix_is_read_only():
    X = FeatureMatrix(np.zeros((2, 2)), ("a", "b"))
    with pytest.raises(ValueError):
        X.values[0, 0] = 1.0
    with pytest.raises(DataError):
        FeatureMatrix(np.zeros((2, 2)), ("a", "a"))
