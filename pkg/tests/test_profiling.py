"""Profiling-response and regression-tree checks.

The tree fitter is compared against a brute-force search over every
admissible root split; renders are checked for determinism and shape.
"""

import math

import numpy as np
import pytest

from causalsupport import (
    ConfigError,
    PosteriorSurface,
    TooFewRowsError,
    counterfactual_sds,
    fit_cart,
    one_sd_margin,
    profile_discards,
    propensity_margin,
    ratio_stat,
    render_tree,
)

from conftest import make_dataset


def cu_with_sds(s_f0, s_f1, z):
    s_f0 = np.asarray(s_f0, dtype=float) / math.sqrt(2.0)
    s_f1 = np.asarray(s_f1, dtype=float) / math.sqrt(2.0)
    f0 = np.vstack([-s_f0, s_f0])
    f1 = np.vstack([-s_f1, s_f1])
    ps = PosteriorSurface(f0_draws=f0, f1_draws=f1, sigma_draws=np.ones(2),
                          sigma_trace=np.ones(2), z=np.asarray(z))
    return counterfactual_sds(ps)


class TestResponses:
    def test_one_sd_margin_hand_value(self):
        # focal obs sds (1.0, 1.2): threshold 1.3414214; a
        # counterfactual sd of 3.0 leaves margin 1.6585786.
        cu = cu_with_sds([3.0, 1.0, 0.4, 0.5], [1.0, 1.2, 0.3, 0.3],
                         [1, 1, 0, 0])
        resp = one_sd_margin(cu, 1)
        assert resp.values[0] == pytest.approx(3.0 - 1.2 - 0.2 / math.sqrt(2),
                                               rel=1e-9)
        assert resp.values[1] == pytest.approx(1.0 - 1.2 - 0.2 / math.sqrt(2),
                                               rel=1e-9)
        np.testing.assert_array_equal(resp.focal_rows, [0, 1])
        # positive margin exactly when the rule discards
        assert resp.values[0] > 0 > resp.values[1]

    def test_ratio_stat_values(self):
        cu = cu_with_sds([2.0, 0.6, 0.4], [1.0, 1.2, 0.3], [1, 1, 0])
        resp = ratio_stat(cu, 1, alpha=0.10)
        assert resp.values[0] == pytest.approx(4.0, rel=1e-9)
        assert resp.values[1] == pytest.approx(0.25, rel=1e-9)
        with pytest.raises(ConfigError):
            ratio_stat(cu, 1, alpha=0.3)

    def test_propensity_margin(self):
        ps = np.array([0.9, 0.2, 0.3, 0.6])
        z = np.array([1, 1, 0, 0])
        resp = propensity_margin(ps, z, 1)
        np.testing.assert_allclose(resp.values, [0.3, -0.4])
        np.testing.assert_array_equal(resp.focal_rows, [0, 1])


def brute_force_root_gain(x, r, min_leaf):
    """Best achievable split gain at the root, by exhaustive search."""
    n = r.size
    base = r.sum() ** 2 / n
    best = -np.inf
    for j in range(x.shape[1]):
        xs = np.unique(x[:, j])
        for lo, hi in zip(xs[:-1], xs[1:]):
            cut = 0.5 * (lo + hi)
            left = x[:, j] <= cut
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            gain = (r[left].sum() ** 2 / nl
                    + r[~left].sum() ** 2 / (n - nl) - base)
            best = max(best, gain)
    return best


class TestCart:
    def test_root_split_matches_brute_force(self, rng):
        for trial in range(25):
            n = int(rng.integers(20, 70))
            p = int(rng.integers(1, 4))
            x = rng.normal(size=(n, p))
            r = rng.normal(size=n) + 2.0 * (x[:, 0] > 0.3)
            tree = fit_cart(x, r, max_depth=1, min_leaf=5)
            want = brute_force_root_gain(x, r, 5)
            root = tree.root
            if root.is_leaf:
                assert want <= 1e-10 * float(r @ r) + 1e-9
                continue
            left = x[:, root.var] <= root.cut
            nl = int(left.sum())
            got = (r[left].sum() ** 2 / nl
                   + r[~left].sum() ** 2 / (n - nl) - r.sum() ** 2 / n)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_constant_response_single_leaf(self, rng):
        x = rng.normal(size=(50, 3))
        tree = fit_cart(x, np.full(50, 1.25), max_depth=3, min_leaf=5)
        assert tree.root.is_leaf
        assert render_tree(tree) == "n=50 mean=1.25"

    def test_min_leaf_and_depth_respected(self, rng):
        x = rng.normal(size=(120, 4))
        r = x[:, 1] + 0.2 * rng.normal(size=120)
        tree = fit_cart(x, r, max_depth=3, min_leaf=10)

        def visit(node, depth):
            if node.is_leaf:
                assert node.n >= 10
                assert depth <= 3
                return
            visit(node.left, depth + 1)
            visit(node.right, depth + 1)

        visit(tree.root, 0)

    def test_predict_matches_training_partition(self, rng):
        x = rng.normal(size=(80, 3))
        r = np.sin(x[:, 0]) + rng.normal(size=80) * 0.1
        tree = fit_cart(x, r, max_depth=2, min_leaf=8)
        pred = tree.predict(x)

        def leaf_mean(row):
            node = tree.root
            while not node.is_leaf:
                node = node.left if row[node.var] <= node.cut else node.right
            return node.mean

        for i in range(0, 80, 7):
            assert pred[i] == leaf_mean(x[i])

    def test_split_reduces_sse(self, rng):
        x = rng.normal(size=(100, 2))
        r = 3.0 * (x[:, 0] > 0) + 0.1 * rng.normal(size=100)
        tree = fit_cart(x, r, max_depth=1, min_leaf=5)
        assert not tree.root.is_leaf
        pred = tree.predict(x)
        sse_split = float(np.sum((r - pred) ** 2))
        sse_flat = float(np.sum((r - r.mean()) ** 2))
        assert sse_split < sse_flat

    def test_too_few_rows(self, rng):
        with pytest.raises(TooFewRowsError):
            fit_cart(rng.normal(size=(4, 2)), np.arange(4.0), min_leaf=10)

    def test_infinite_responses_dropped(self, rng):
        x = rng.normal(size=(40, 2))
        r = rng.normal(size=40)
        r[:3] = np.inf
        tree = fit_cart(x, r, max_depth=1, min_leaf=5)
        # fitted on the 37 finite rows
        assert tree.root.n == 37

    def test_variable_names_used(self, rng):
        x = rng.normal(size=(60, 2))
        r = 2.0 * (x[:, 1] > 0)
        tree = fit_cart(x, r, names=("age", "score"), max_depth=1, min_leaf=5)
        assert tree.root_variable == "score"
        assert tree.split_variables() == ["score"]
        assert "score <= " in render_tree(tree)


class TestRender:
    def test_depth_one_has_three_lines(self, rng):
        x = rng.normal(size=(40, 1))
        r = 5.0 * (x[:, 0] > 0)
        tree = fit_cart(x, r, max_depth=1, min_leaf=5)
        lines = render_tree(tree).splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("n=40 mean=")
        assert lines[1].startswith("  x1 <= ")
        assert lines[2].startswith("  x1 > ")

    def test_counts_partition_in_render(self, rng):
        x = rng.normal(size=(60, 2))
        r = x[:, 0] + 0.1 * rng.normal(size=60)
        tree = fit_cart(x, r, max_depth=2, min_leaf=6)
        text = render_tree(tree)
        assert f"n={tree.root.n} " in text.splitlines()[0]
        if not tree.root.is_leaf:
            assert tree.root.left.n + tree.root.right.n == tree.root.n

    def test_distinct_trees_render_distinctly(self, rng):
        seen = set()
        for _ in range(60):
            x = rng.normal(size=(50, 2))
            r = rng.normal(size=50) + 2.0 * (x[:, 0] > rng.normal())
            tree = fit_cart(x, r, max_depth=2, min_leaf=5)
            seen.add(render_tree(tree))
        assert len(seen) == 60

    def test_deterministic_render(self, rng):
        x = rng.normal(size=(50, 2))
        r = x[:, 0] ** 2
        a = render_tree(fit_cart(x, r, max_depth=3, min_leaf=5))
        b = render_tree(fit_cart(x, r, max_depth=3, min_leaf=5))
        assert a == b


class TestProfileDiscards:
    def test_tree_on_focal_covariates(self, small_study, small_surface):
        cu = counterfactual_sds(small_surface)
        resp = one_sd_margin(cu, 1)
        tree = profile_discards(small_study.dataset, resp, max_depth=2,
                                min_leaf=8)
        assert tree.names == small_study.dataset.names
        assert tree.root.n == int(np.sum(small_study.dataset.z == 1))
