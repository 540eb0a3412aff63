import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisyrisk.datagen import (
    DERMA_LIKE,
    BinarizationMap,
    DataError,
    LabeledDataset,
    NoiseSpec,
    SyntheticSpec,
    generate_synthetic,
    ingest_csv,
    inject_symmetric_noise,
    write_csv,
)


def _train(n=50, seed=0):
    r = np.random.default_rng(seed)
    y = (r.random(n) < 0.3).astype(int)
    return LabeledDataset(r.standard_normal((n, 3)), y, true_labels=y)


# -- LabeledDataset -------------------------------------------------------


def test_flip_mask_computed_from_labels():
    ds = LabeledDataset(np.zeros((3, 2)), [1, 0, 1], true_labels=[1, 1, 1])
    assert ds.flip_mask.tolist() == [False, True, False]


def test_inconsistent_flip_mask_rejected():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 1)), [0, 1], true_labels=[0, 1], flip_mask=[True, False])


def test_row_count_mismatch_rejected():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((3, 2)), [0, 1])


def test_noisy_test_split_rejected():
    with pytest.raises(DataError, match="clean"):
        LabeledDataset(np.zeros((2, 1)), [0, 1], true_labels=[1, 1], split_tag="test")


def test_arrays_are_read_only():
    ds = _train()
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


# -- synthetic generation -------------------------------------------------


def test_synthetic_prevalence_and_clean_labels():
    train, val, test = generate_synthetic(SyntheticSpec(n_train=5000, positive_fraction=0.195, seed=7))
    assert abs(int(train.observed_labels.sum()) - 975) <= 100
    for ds in (train, val, test):
        assert not ds.flip_mask.any()
        assert np.array_equal(ds.true_labels, ds.observed_labels)
        assert abs(ds.prevalence - 0.195) <= 0.02
    assert [d.split_tag for d in (train, val, test)] == ["train", "val", "test"]


def test_synthetic_is_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=3))
    b = generate_synthetic(SyntheticSpec(seed=3))
    assert all(x.equals(y) for x, y in zip(a, b))
    c = generate_synthetic(SyntheticSpec(seed=4))
    assert not a[0].equals(c[0])


@pytest.mark.parametrize(
    "field,value",
    [("class_separation", 0.0), ("positive_fraction", 1.0), ("positive_fraction", 0.0), ("n_train", 0), ("within_class_spread", -1.0)],
)
def test_synthetic_rejects_bad_spec(field, value):
    import dataclasses

    with pytest.raises(DataError):
        generate_synthetic(dataclasses.replace(DERMA_LIKE, **{field: value}))


def test_annular_mode_has_requested_shape():
    train, _, _ = generate_synthetic(SyntheticSpec(n_train=300, overlap_mode="annular", feature_dim=5))
    assert train.features.shape == (300, 5)


# -- CSV ingestion --------------------------------------------------------


def test_ingest_with_binarization(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,dx\n1,2,mel\n3,4,nv\n5,6,bcc\n7,8,nv\n")
    ds = ingest_csv(p, "dx", BinarizationMap({"mel": 1, "bcc": 1, "nv": 0}))
    assert ds.observed_labels.tolist() == [1, 0, 1, 0]
    assert ds.true_labels is None and ds.flip_mask is None
    assert ds.feature_names == ("a", "b")
    assert ds.features[2].tolist() == [5.0, 6.0]


def test_unmapped_class_names_value_and_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,dx\n1,mel\n2,akiec\n")
    with pytest.raises(DataError, match="akiec") as exc:
        ingest_csv(p, "dx", BinarizationMap({"mel": 1, "nv": 0}))
    assert "row 3" in str(exc.value)


def test_non_numeric_cell_reported(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,label\n1,0\nxyz,1\n")
    with pytest.raises(DataError, match="xyz"):
        ingest_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_csv(tmp_path / "nope.csv")


def test_true_label_column_populates_flip_mask(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,label,true_label\n1,0,0\n2,1,0\n")
    ds = ingest_csv(p)
    assert ds.true_labels.tolist() == [0, 0]
    assert ds.flip_mask.tolist() == [False, True]


def test_csv_round_trip_is_exact(tmp_path):
    ds = inject_symmetric_noise(_train(), NoiseSpec(0.3, 1))
    write_csv(ds, tmp_path / "x.csv")
    back = ingest_csv(tmp_path / "x.csv")
    assert back.equals(ds)
    again = ingest_csv(tmp_path / "x.csv")
    assert again.equals(back)


def test_binarization_map_needs_both_classes():
    with pytest.raises(DataError):
        BinarizationMap({"a": 1, "b": 1})


# -- noise injection ------------------------------------------------------


def test_zero_rate_is_identity():
    ds = _train()
    out = inject_symmetric_noise(ds, NoiseSpec(0.0, 5))
    assert np.array_equal(out.observed_labels, ds.observed_labels)
    assert not out.flip_mask.any()


def test_full_rate_flips_everything():
    ds = _train()
    out = inject_symmetric_noise(ds, NoiseSpec(1.0, 5))
    assert np.array_equal(out.observed_labels, 1 - ds.observed_labels)
    assert out.flip_mask.all()


def test_injector_refuses_eval_splits():
    _, val, test = generate_synthetic(SyntheticSpec(n_train=20, n_val=20, n_test=20))
    for ds in (val, test):
        with pytest.raises(DataError):
            inject_symmetric_noise(ds, NoiseSpec(0.2, 0))


@pytest.mark.parametrize("rate", [-0.1, 1.5])
def test_rate_out_of_range(rate):
    with pytest.raises(DataError):
        NoiseSpec(rate, 0)


def test_injection_is_seeded():
    ds = _train(200)
    a = inject_symmetric_noise(ds, NoiseSpec(0.4, 9))
    b = inject_symmetric_noise(ds, NoiseSpec(0.4, 9))
    c = inject_symmetric_noise(ds, NoiseSpec(0.4, 10))
    assert a.equals(b) and not a.equals(c)


@given(rate=st.floats(0.0, 1.0), seed=st.integers(0, 2**64 - 1), n=st.integers(1, 80))
def test_flip_back_recovers_truth(rate, seed, n):
    ds = _train(n, seed % 1000)
    out = inject_symmetric_noise(ds, NoiseSpec(rate, seed))
    restored = np.where(out.flip_mask, 1 - out.observed_labels, out.observed_labels)
    assert np.array_equal(restored, out.true_labels)
    assert np.array_equal(out.true_labels, ds.observed_labels)
    assert np.array_equal(out.features, ds.features)
