import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelsvm.dataset import (
    Dataset,
    Scaling,
    apply_scale,
    binary_view,
    dump_libsvm,
    fit_scale,
    load_libsvm,
    parse_libsvm,
    subsample,
)
from kernelsvm.exceptions import ParseError


def test_parse_single_line():
    ds = parse_libsvm("+1 1:0.5 3:1.0\n")
    assert ds.d == 3
    s = ds.samples[0]
    assert list(s.features) == [0.5, 0.0, 1.0]
    assert s.label == 1


def test_parse_row_without_features():
    ds = parse_libsvm("+1 1:0.5 3:1.0\n-1\n")
    assert list(ds.samples[1].features) == [0.0, 0.0, 0.0]
    assert ds.samples[1].label == -1


def test_parse_two_lines():
    ds = parse_libsvm("1 2:2\n0 1:1")
    assert (ds.n, ds.d) == (2, 2)
    assert ds.class_ids == (0, 1)
    assert ds.labels.tolist() == [1, 0]


def test_parse_skips_comments_and_blank_lines():
    ds = parse_libsvm("# header\n\n1 1:2\n# 3 9:9\n-1 2:1\n")
    assert ds.n == 2 and ds.d == 2


def test_parse_accepts_stream_and_override():
    ds = parse_libsvm(io.StringIO("1 2:1\n"), n_features=5)
    assert ds.d == 5
    with pytest.raises(ParseError):
        parse_libsvm("1 7:1\n", n_features=5)


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 1:2\n1 2:x\n", 2),
        ("1 1:2 1:3\n", 1),
        ("1 3:2 2:3\n", 1),
        ("1 0:1\n", 1),
        ("1 1:1\nfoo 1:1\n", 2),
        ("1 1:1\n1 12\n", 2),
    ],
)
def test_parse_errors_name_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_libsvm(text)
    assert info.value.lineno == line
    assert f"line {line}" in str(info.value)


def test_parse_empty_file():
    with pytest.raises(ParseError):
        parse_libsvm("")
    with pytest.raises(ParseError):
        parse_libsvm("# only a comment\n\n")


def test_load_libsvm(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("1 1:1\n-1 2:3\n", encoding="utf-8")
    ds = load_libsvm(p)
    assert ds.name == "x.txt" and ds.n == 2


def test_scale_examples():
    train = Dataset(np.array([[2.0, 3.0], [4.0, 3.0], [6.0, 3.0]]), np.array([0, 1, 0]))
    scaled = fit_scale(train)
    assert scaled.X[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert scaled.X[:, 1].tolist() == [0.0, 0.0, 0.0]
    test = Dataset(np.array([[8.0, 5.0]]), np.array([1]))
    out = apply_scale(test, scaled.scaling)
    assert out.X[0, 0] == 1.5
    assert out.X[0, 1] == 0.0


def test_apply_scale_requires_scaling():
    ds = Dataset(np.ones((2, 2)), np.array([0, 1]))
    with pytest.raises(ValueError):
        apply_scale(ds, None)
    with pytest.raises(ValueError):
        apply_scale(ds, Scaling(np.zeros(3), np.ones(3)))


def test_fit_scale_empty():
    with pytest.raises(ValueError):
        fit_scale(Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int)))


def test_subsample_identity_and_determinism():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.normal(size=(30, 3)), rng.integers(0, 3, 30))
    assert subsample(ds, 30, seed=1) == ds
    a = subsample(ds, 1, seed=7)
    b = subsample(ds, 1, seed=7)
    assert a == b
    with pytest.raises(ValueError):
        subsample(ds, 31, seed=0)
    with pytest.raises(ValueError):
        subsample(ds, 0, seed=0)


def test_subsample_preserves_order():
    ds = Dataset(np.arange(20.0)[:, None], np.zeros(20, dtype=int))
    sub = subsample(ds, 8, seed=3)
    assert np.all(np.diff(sub.X[:, 0]) > 0)


def test_subsample_class_ratio_monte_carlo():
    # labeled halves; compare against direct multinomial simulation
    n = 10_000
    labels = np.where(np.arange(n) < 3000, 1, 0)
    ds = Dataset(np.zeros((n, 1)), labels)
    orig = labels.mean()
    ratios = np.array([subsample(ds, n // 2, seed=s).labels.mean() for s in range(100)])
    rng = np.random.default_rng(12345)
    sim = np.array([rng.permutation(labels)[: n // 2].mean() for _ in range(100)])
    assert np.all(np.abs(ratios - orig) < 0.05)
    assert abs(ratios.mean() - sim.mean()) < 0.005
    assert abs(ratios.std() - sim.std()) < 0.003


def test_binary_view_examples():
    ds = Dataset(np.arange(6.0)[:, None], np.array([1, -1, 1, -1, 1, -1]))
    v = binary_view(ds, 1, -1)
    assert v.n == 6 and v.y.tolist() == [1, -1, 1, -1, 1, -1]
    ds3 = Dataset(np.arange(6.0)[:, None], np.array([0, 1, 2, 0, 1, 2]))
    v = binary_view(ds3, 1, 2)
    assert v.rows.tolist() == [1, 2, 4, 5]
    assert v.y.tolist() == [1, -1, 1, -1]
    with pytest.raises(ValueError):
        binary_view(ds3, 1, 7)


def test_binary_views_for_ten_classes():
    ds = Dataset(np.arange(20.0)[:, None], np.arange(20) % 10)
    views = {(p, q): binary_view(ds, p, q)
             for p in ds.class_ids for q in ds.class_ids if p < q}
    assert len(views) == 45
    assert all(v.n == 4 for v in views.values())


def test_dataset_immutable():
    X = np.ones((2, 2))
    ds = Dataset(X, np.array([0, 1]))
    X[0, 0] = 5.0
    assert ds.X[0, 0] == 1.0
    with pytest.raises(ValueError):
        ds.X[0, 0] = 2.0


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 8))
    d = draw(st.integers(1, 5))
    X = draw(st.lists(st.lists(st.one_of(st.just(0.0), finite), min_size=d, max_size=d),
                      min_size=n, max_size=n))
    y = draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    X = np.array(X)
    X[:, -1] = np.where(X[:, -1] == 0, 1.0, X[:, -1])  # keep d recoverable
    return Dataset(X, np.array(y))


@given(datasets())
def test_round_trip(ds):
    again = parse_libsvm(dump_libsvm(ds))
    assert again == ds


@given(datasets())
def test_scaled_training_values_in_unit_interval(ds):
    scaled = fit_scale(ds)
    assert np.all(scaled.X >= 0.0) and np.all(scaled.X <= 1.0)


@given(datasets(), st.integers(0, 2**32 - 1))
def test_subsample_reproducible(ds, seed):
    m = max(1, ds.n // 2)
    assert subsample(ds, m, seed) == subsample(ds, m, seed)
