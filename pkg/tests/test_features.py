"""Feature extraction counts, normalization algebra, entropy weights."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from clicksift.dataflow import build_icfg, compute_chains
from clicksift.features import (
    apply_normalization,
    entropy_weights,
    extract_features,
    fit_normalization,
    to_csv_rows,
)
from clicksift.gate import apply_gate
from clicksift.ir import default_catalog, parse_package
from clicksift.slicer import locate_click_sites, site_ddgs
from oracles import entropy_weights_oracle

CAT = default_catalog()


def _site_features(text):
    pkg = parse_package(text)
    icfg = build_icfg(pkg)
    chains = compute_chains(icfg)
    decision = apply_gate(pkg)
    sites = locate_click_sites(pkg, icfg, chains, CAT, decision.ad_views)
    out = []
    for site in sites:
        axis_ddg, cond_ddg = site_ddgs(icfg, chains, site, CAT)
        out.append((site, axis_ddg, cond_ddg,
                    extract_features(site, axis_ddg, cond_ddg, CAT)))
    return out


def test_benign_forwarding_counts():
    text = (
        "package p\npermission INTERNET\nlibrary com.ads.mobnet\n"
        "view adBanner class=com.ads.Banner w=320 h=50\n"
        "class C\nmethod onClick(adBanner,ev)\n"
        "  x = call ev MotionEvent.getX()\n"
        "  y = call ev MotionEvent.getY()\n"
        "  e = call MotionEvent.obtain(0, 0, 0, x, y, 0)\n"
        "  ok = call adBanner View.dispatchTouchEvent(e)\n"
        "  return\nendmethod\nendclass\nendpackage\n"
    )
    (_, axis_ddg, _, fv), = _site_features(text)
    assert fv.axis_api == 2 and fv.rand_axis == 0
    assert fv.ddg_size == len(axis_ddg.nodes) == 2
    assert not fv.oversized


def test_motivating_example_counts(motivating_text):
    (_, axis_ddg, cond_ddg, fv), = _site_features(motivating_text)
    # hand-derived via the closure oracle over the shipped file
    assert fv.axis_api == 0
    assert fv.view_size_api == 2
    assert fv.rand_axis == 2
    assert fv.rand_condition == 1
    assert fv.const_count == 0
    assert fv.ddg_size == 6
    assert fv.sys_api == 0


def test_added_rng_node_changes_only_rand_axis(motivating_text):
    # splice one extra rng read into the slice of x
    patched = motivating_text.replace(
        "  x = mul rx w\n",
        "  rz = call Random.nextInt(9)\n  xr = mul rx w\n  x = add xr rz\n",
    )
    (_, _, _, base), = _site_features(motivating_text)
    (_, _, _, more), = _site_features(patched)
    assert more.rand_axis == base.rand_axis + 1
    assert more.view_size_api == base.view_size_api
    assert more.sys_api == base.sys_api


def test_extraction_pure_under_unrelated_permutation(motivating_text):
    # moving an unrelated statement around does not change the vector
    with_dead = motivating_text.replace(
        "method onClick(adBanner,ev)\n",
        "method onClick(adBanner,ev)\n  junk = call System.currentTimeMillis()\n",
    )
    (_, _, _, a), = _site_features(motivating_text)
    (_, _, _, b), = _site_features(with_dead)
    assert a.to_array().tolist() == b.to_array().tolist()


# ---------------------------------------------------------------------------
# Normalization and entropy weights


def test_constant_column_gets_zero_weight():
    m = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    params = fit_normalization(m)
    assert params.weights[0] == 0.0
    assert params.weights[1] == 1.0


def test_two_sample_binary_column():
    # scaled column (0, 1): share vector (0, 1), entropy 0, dissimilarity 1
    scaled = np.array([[0.0], [1.0]])
    w = entropy_weights(scaled)
    assert w.tolist() == [1.0]


def test_all_constant_fallback_uniform():
    m = np.full((5, 7), 3.0)
    params = fit_normalization(m)
    assert np.allclose(params.weights, 1.0 / 7)
    assert math.isclose(params.weights.sum(), 1.0, abs_tol=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_weights_match_oracle_random_matrices(seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 30, size=(rng.integers(2, 120), 7)).astype(float)
    params = fit_normalization(m)
    expected = entropy_weights_oracle(params.scale(m))
    assert np.all(np.abs(params.weights - expected) < 1e-9)
    assert abs(params.weights.sum() - 1.0) < 1e-9
    assert np.all(params.weights >= 0)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_positive_scaling_leaves_weights_unchanged(seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 20, size=(30, 7)).astype(float)
    scale = rng.uniform(0.1, 50.0, size=7)
    w1 = fit_normalization(m).weights
    w2 = fit_normalization(m * scale).weights
    assert np.all(np.abs(w1 - w2) < 1e-9)


def test_fit_requires_two_rows():
    with pytest.raises(ValueError):
        fit_normalization(np.zeros((1, 7)))


def test_apply_normalization_extremes():
    m = np.array([[0.0, 2.0, 5.0], [10.0, 4.0, 5.0], [5.0, 3.0, 5.0]])
    params = fit_normalization(m)
    at_min = apply_normalization(params, np.array([0.0, 2.0, 5.0]))
    assert np.allclose(at_min, 0.0)
    at_max = apply_normalization(params, np.array([10.0, 4.0, 5.0]))
    assert np.allclose(at_max, params.weights * np.array([1.0, 1.0, 0.0]))
    above = apply_normalization(params, np.array([99.0, 99.0, 99.0]))
    assert np.allclose(above, params.weights * np.array([1.0, 1.0, 0.0]))
    below = apply_normalization(params, np.array([-99.0, -99.0, -99.0]))
    assert np.allclose(below, 0.0)


@given(arrays(np.float64, (6, 7), elements=st.floats(0, 100, allow_nan=False)))
@settings(max_examples=50, deadline=None)
def test_weight_axioms(m):
    params = fit_normalization(m)
    assert np.all(params.weights >= 0)
    assert abs(params.weights.sum() - 1.0) < 1e-9
    assert np.all(params.mins <= params.maxs)


def test_csv_rows_shape(seed_corpus, trained_model):
    train_dir, _ = seed_corpus
    from clicksift.pipeline import collect_vectors
    rows, _ = collect_vectors(train_dir)
    vectors = [fv for _, fvs in rows for fv in fvs][:5]
    csv_rows = to_csv_rows(vectors, trained_model.norm)
    assert all(len(r) == 1 + 7 + 7 + 1 for r in csv_rows)
    assert all(r[0].count("::") == 1 for r in csv_rows)
