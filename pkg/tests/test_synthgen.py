import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitarget.errors import GenerationError, ValidationError
from mitarget.synthgen import (
    SIMPLEX_2D,
    SyntheticConfig,
    generate,
    generate_test_set,
    make_endmembers,
)

E64 = make_endmembers("smooth-spectra", d=64, count=4, seed=0)


def test_noiseless_proportions_recoverable():
    ds = generate(SyntheticConfig(E64, n_pos_bags=5, n_neg_bags=5, snr_db=math.inf, seed=1))
    X = ds.bags.instances("all")
    P = np.vstack(ds.proportions)
    recovered, *_ = np.linalg.lstsq(E64.T, X.T, rcond=None)
    np.testing.assert_allclose(recovered.T, P, atol=1e-9)


def test_same_seed_identical_different_seed_differs():
    cfg = SyntheticConfig(E64, n_pos_bags=3, n_neg_bags=3, seed=42)
    a, b = generate(cfg), generate(cfg)
    for x, y in zip(a.bags, b.bags):
        assert np.array_equal(x.instances, y.instances)
    c = generate(SyntheticConfig(E64, n_pos_bags=3, n_neg_bags=3, seed=43))
    assert not np.array_equal(a.bags.instances("all"), c.bags.instances("all"))


def test_snr_measured_over_10000_instances():
    cfg = SyntheticConfig(E64, n_pos_bags=500, n_neg_bags=500, snr_db=20.0, seed=2)
    ds = generate(cfg)
    X = ds.bags.instances("all")
    clean = np.vstack(ds.proportions) @ E64
    assert X.shape[0] == 10_000
    noise = X - clean
    measured = 10 * np.log10(np.mean(clean**2) / np.var(noise))
    assert abs(measured - 20.0) <= 0.5


def test_alpha_mean_over_many_draws():
    ds = generate(SyntheticConfig(E64, n_pos_bags=600, n_neg_bags=1, mean_target_proportion=0.15, seed=3))
    alphas = np.concatenate(ds.alphas)[np.concatenate(ds.instance_labels)]
    assert alphas.size >= 1000
    assert abs(alphas.mean() - 0.15) <= 0.02


def test_bag_composition_and_proportions():
    cfg = SyntheticConfig(E64, n_pos_bags=7, n_neg_bags=4, instances_per_bag=6, targets_per_positive_bag=3, seed=4)
    ds = generate(cfg)
    assert ds.bags.n_positive == 7 and ds.bags.n_negative == 4
    assert [b.bag_id for b in ds.bags][:2] == ["pos000", "pos001"]
    assert ds.bags.bags[7].bag_id == "neg000"
    for bag, alpha, lab, props in zip(ds.bags, ds.alphas, ds.instance_labels, ds.proportions):
        assert len(bag) == 6
        expected = 3 if bag.label else 0
        assert int(lab.sum()) == expected and int((alpha > 0).sum()) == expected
        np.testing.assert_allclose(props.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(props >= 0)
    np.testing.assert_array_equal(ds.target, E64[0])


def test_background_mask_restricts_target_mixing():
    cfg = SyntheticConfig(SIMPLEX_2D, n_pos_bags=40, n_neg_bags=5, targets_per_positive_bag=3,
                          background_mask=(True, False), snr_db=math.inf, seed=5)
    ds = generate(cfg)
    for props, lab in zip(ds.proportions, ds.instance_labels):
        assert np.all(props[lab, 2] == 0.0)
    # background-only instances may still use both materials
    bg = np.vstack([p[~lab] for p, lab in zip(ds.proportions, ds.instance_labels)])
    assert np.any(bg[:, 2] > 0)


def test_endmember_angles_and_nonnegativity():
    for seed in range(5):
        E = make_endmembers("smooth-spectra", d=32, count=5, seed=seed)
        assert E.shape == (5, 32) and E.min() >= 0
        for a, b in itertools.combinations(E, 2):
            cos = np.clip(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)), -1, 1)
            assert np.degrees(np.arccos(cos)) >= 15.0


def test_simplex_2d():
    E = make_endmembers("simplex-2d", d=2, count=3)
    assert E.shape == (3, 2)
    np.testing.assert_array_equal(E, SIMPLEX_2D)
    with pytest.raises(ValidationError):
        make_endmembers("simplex-2d", d=2, count=4)


def test_impossible_angle_separation_errors():
    # two bands cannot host many curves 15 degrees apart
    with pytest.raises(GenerationError):
        make_endmembers("smooth-spectra", d=2, count=12, seed=0)


def test_validation_names_fields():
    with pytest.raises(ValidationError) as info:
        SyntheticConfig(E64, instances_per_bag=2, targets_per_positive_bag=3, mean_target_proportion=1.5)
    text = str(info.value)
    assert "targets_per_positive_bag" in text and "mean_target_proportion" in text
    assert len(info.value.problems) == 2
    with pytest.raises(ValidationError, match="background_mask"):
        SyntheticConfig(E64, background_mask=(True,))
    with pytest.raises(ValidationError, match="n_pos_bags"):
        SyntheticConfig(E64, n_pos_bags=0)


def test_test_set_layout():
    cfg = SyntheticConfig(E64, seed=6)
    ts = generate_test_set(cfg, n_target=300, n_background=200, mean_target_proportion=0.15, seed=9)
    assert ts.X.shape == (500, 64)
    assert ts.labels[:300].all() and not ts.labels[300:].any()
    assert np.all(ts.alphas[300:] == 0) and np.all(ts.alphas[:300] > 0)
    again = generate_test_set(cfg, n_target=300, n_background=200, mean_target_proportion=0.15, seed=9)
    assert np.array_equal(ts.X, again.X)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.floats(min_value=0.02, max_value=0.9))
def test_proportion_invariants(seed, mean_alpha):
    cfg = SyntheticConfig(E64, n_pos_bags=3, n_neg_bags=2, instances_per_bag=4,
                          mean_target_proportion=mean_alpha, seed=seed)
    ds = generate(cfg)
    P = np.vstack(ds.proportions)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
