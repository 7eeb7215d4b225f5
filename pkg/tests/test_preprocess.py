import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deeprep.dataio import FeatureSchema, TabularDataset, from_arrays
from deeprep.numkit import ParameterError
from deeprep.preprocess import (FoldPlan, Preprocessor, UnusableColumnError, apply_standardize, clip_outliers,
                                fit_clip, fit_standardize, impute, inverse_standardize, make_folds)


def numeric_ds(cols):
    X = np.column_stack([np.asarray(c, dtype=np.float64) for c in cols])
    return from_arrays(X, np.zeros(len(X)))


def mixed_ds():
    schema = FeatureSchema.from_kinds({"a": "numeric", "c": "categorical", "y": "target"})
    num = np.array([[1.0], [0.0], [3.0], [5.0]])
    cat = np.array([[1], [1], [-1], [0]])
    return TabularDataset(schema, num, cat, [["lo", "hi"]], np.array([[False], [True], [False], [False]]),
                          np.array([[False], [False], [True], [False]]), np.arange(4.0))


def test_impute_numeric_median():
    ds = numeric_ds([[1.0, np.nan, 3.0]])
    out = impute(ds)
    np.testing.assert_array_equal(out.numeric[:, 0], [1.0, 2.0, 3.0])
    assert not out.numeric_mask.any()


def test_impute_categorical_mode_and_mask():
    out = impute(mixed_ds())
    assert out.numeric[1, 0] == 3.0          # median of {1, 3, 5}
    assert out.categorical[2, 0] == 1        # "hi" seen twice
    assert not out.categorical_mask.any()


def test_impute_mode_tie_takes_lowest_code():
    ds = mixed_ds()
    ds = ds.replace(categorical=np.array([[1], [0], [-1], [0]]), categorical_mask=np.array([[0], [0], [1], [1]], bool))
    assert impute(ds).categorical[2, 0] == 0


def test_impute_uses_only_given_rows():
    ds = numeric_ds([[1.0, np.nan, 3.0, 100.0]])
    assert impute(ds, rows=[0, 1, 2]).numeric[1, 0] == 2.0


def test_impute_without_missing_is_identity():
    ds = numeric_ds([[1.0, 2.0], [3.0, 4.0]])
    assert impute(ds).equals(ds)


def test_impute_all_missing_column_names_it():
    ds = numeric_ds([[1.0, 2.0], [np.nan, np.nan]])
    with pytest.raises(UnusableColumnError, match="x1"):
        impute(ds)


def test_clip_degenerate_example_hits_boundary():
    col = np.array([0.0, 0, 0, 0, 100])
    out = clip_outliers(numeric_ds([col]), zmax=2.0)
    # population mean 20, sd 40: the spike sits exactly at mean + 2 sd
    assert out.numeric[4, 0] == pytest.approx(col.mean() + 2 * col.std(), abs=1e-12)
    assert out.numeric[4, 0] == pytest.approx(100.0)


def test_clip_winsorizes_beyond_zmax():
    col = np.array([0.0] * 9 + [100.0])
    out = clip_outliers(numeric_ds([col]), zmax=2.0)
    assert out.numeric[9, 0] == pytest.approx(10.0 + 2 * 30.0)
    np.testing.assert_array_equal(out.numeric[:9, 0], 0.0)


def test_clip_leaves_inliers():
    ds = numeric_ds([[1.0, 2.0, 3.0, 4.0]])
    assert clip_outliers(ds, zmax=4.0).equals(ds)


@pytest.mark.parametrize("zmax", [0.0, -1.0])
def test_clip_rejects_nonpositive_zmax(zmax):
    with pytest.raises(ParameterError):
        fit_clip(numeric_ds([[1.0, 2.0]]), zmax)


def test_standardize_two_values():
    ds = numeric_ds([[2.0, 4.0]])
    stats = fit_standardize(ds)
    assert stats.mean[0] == 3.0 and stats.sd[0] == 1.0
    np.testing.assert_array_equal(apply_standardize(ds, stats).numeric[:, 0], [-1.0, 1.0])


def test_standardize_constant_column_maps_to_zero():
    ds = numeric_ds([[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]])
    stats = fit_standardize(ds)
    assert stats.constant.tolist() == [True, False]
    np.testing.assert_array_equal(apply_standardize(ds, stats).numeric[:, 0], 0.0)


def test_standardize_not_idempotent():
    X = np.array([[2.0], [4.0]])
    stats = fit_standardize(X)
    once = apply_standardize(X, stats)
    twice = apply_standardize(once, stats)
    np.testing.assert_array_equal(twice[:, 0], [-4.0, -2.0])


def test_standardize_empty_rows():
    with pytest.raises(ParameterError):
        fit_standardize(np.ones((3, 2)), rows=[])


@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_standardize_train_moments_and_inverse(n, p, seed):
    X = np.random.default_rng(seed).normal(3.0, 2.0, size=(n, p))
    stats = fit_standardize(X)
    Z = apply_standardize(X, stats)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(Z.std(axis=0) - 1.0) < 1e-9)
    np.testing.assert_allclose(inverse_standardize(Z, stats), X, atol=1e-9)


def test_folds_seventy_ten_twenty():
    plan = make_folds(100, 5, seed=3)
    for f in plan.folds:
        assert (len(f.train), len(f.val), len(f.test)) == (70, 10, 20)
    assert np.array_equal(np.sort(np.concatenate([f.test for f in plan.folds])), np.arange(100))


def check_partition(plan: FoldPlan, n: int, k: int):
    tests = [f.test for f in plan.folds]
    assert len(tests) == k
    allt = np.concatenate(tests)
    assert np.array_equal(np.sort(allt), np.arange(n))
    assert {len(t) for t in tests} <= {n // k, -(-n // k)}
    for f in plan.folds:
        parts = [set(f.train.tolist()), set(f.val.tolist()), set(f.test.tolist())]
        assert not (parts[0] & parts[1]) and not (parts[0] & parts[2]) and not (parts[1] & parts[2])
        assert set().union(*parts) == set(range(n))
        assert len(f.train) >= 1


@given(st.integers(2, 300).flatmap(lambda n: st.tuples(st.just(n), st.integers(2, min(n, 10)))),
       st.integers(0, 2 ** 64 - 1))
def test_fold_partition_property(nk, seed):
    n, k = nk
    check_partition(make_folds(n, k, seed), n, k)


def test_folds_deterministic_and_seed_sensitive():
    a, b, c = make_folds(50, 5, 1), make_folds(50, 5, 1), make_folds(50, 5, 2)
    assert a.to_manifest() == b.to_manifest()
    assert a.to_manifest() != c.to_manifest()


def test_fold_manifest_round_trip():
    plan = make_folds(23, 4, seed=9)
    back = FoldPlan.from_manifest(plan.to_manifest())
    assert back.to_manifest() == plan.to_manifest()
    assert (back.n, back.k, back.seed) == (23, 4, 9)


@pytest.mark.parametrize("n,k", [(3, 5), (10, 1)])
def test_folds_bad_arguments(n, k):
    with pytest.raises(ParameterError):
        make_folds(n, k)


def test_preprocessor_ignores_held_out_rows():
    col = np.array([1.0, 2.0, 3.0, np.nan, 1000.0, -1000.0])
    ds = numeric_ds([col])
    train = [0, 1, 2, 3]
    prep = Preprocessor.fit(ds, train)
    assert prep.impute.medians[0] == 2.0
    assert prep.standardize.mean[0] == pytest.approx(2.0)
    # changing held-out rows leaves the fitted statistics alone
    other = ds.replace(numeric=np.where(np.arange(6)[:, None] >= 4, 7.0, ds.numeric))
    prep2 = Preprocessor.fit(other, train)
    assert prep2.standardize.mean[0] == prep.standardize.mean[0]
    assert prep2.standardize.sd[0] == prep.standardize.sd[0]
