"""Characterize discarded units with shallow regression trees.

Each discard rule reduces to a per-unit statistic compared against a
threshold.  Regressing the signed margin (statistic minus threshold) on the
focal units' covariates with a depth-limited tree gives an interpretable
picture of *which* regions of covariate space a rule flags, and lets rules
be compared by the covariates their trees choose to split on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, EmptyGroupError, TooFewRowsError
from .support import (
    RATIO_CUTOFFS,
    ONE_SD,
    PROPENSITY_RANGE,
    RATIO_05,
    RATIO_10,
    CounterfactualUncertainty,
)


@dataclass(frozen=True)
class ProfileResponse:
    """Per-focal-unit response for profiling one discard rule."""

    rule: str
    focal_group: int
    values: np.ndarray
    focal_rows: np.ndarray


def one_sd_margin(cu: CounterfactualUncertainty, a: int) -> ProfileResponse:
    """Counterfactual sd minus the rule threshold; positive means discard."""
    focal = np.flatnonzero(cu.z == a)
    if focal.size == 0:
        raise EmptyGroupError(a, "profiling response")
    s_cf = cu.counterfactual_sd(a)[focal]
    margin = s_cf - cu.max_obs_sd[a] - cu.obs_sd_spread[a]
    return ProfileResponse(ONE_SD, a, margin, focal)


def ratio_stat(cu: CounterfactualUncertainty, a: int,
               alpha: float = 0.10) -> ProfileResponse:
    """Squared counterfactual-to-observed sd ratio per focal unit."""
    if alpha not in RATIO_CUTOFFS:
        raise ConfigError(f"alpha must be one of {sorted(RATIO_CUTOFFS)}")
    focal = np.flatnonzero(cu.z == a)
    if focal.size == 0:
        raise EmptyGroupError(a, "profiling response")
    s_cf = cu.counterfactual_sd(a)[focal]
    s_obs = cu.observed_sd(a)[focal]
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = (s_cf / s_obs) ** 2
    stat[(s_obs == 0.0) & (s_cf == 0.0)] = 0.0
    stat[(s_obs == 0.0) & (s_cf > 0.0)] = np.inf
    rule = RATIO_10 if alpha == 0.10 else RATIO_05
    return ProfileResponse(rule, a, stat, focal)


def propensity_margin(pscores: np.ndarray, z: np.ndarray,
                      a: int) -> ProfileResponse:
    """Focal score minus the comparison-group maximum score.

    Positive values sit above every comparison score; strongly negative
    values are deep inside (or below) the comparison range, so this margin
    profiles only the high side of the range rule.
    """
    pscores = np.asarray(pscores, dtype=float)
    z = np.asarray(z)
    focal = np.flatnonzero(z == a)
    comparison = np.flatnonzero(z == 1 - a)
    if focal.size == 0:
        raise EmptyGroupError(a, "profiling response")
    if comparison.size == 0:
        raise EmptyGroupError(1 - a, "profiling response")
    margin = pscores[focal] - pscores[comparison].max()
    return ProfileResponse(PROPENSITY_RANGE, a, margin, focal)


# ---------------------------------------------------------------------------
# Greedy least-squares tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CartNode:
    """Node of a fitted least-squares tree; ``var < 0`` marks a leaf."""

    n: int
    mean: float
    var: int
    cut: float
    left: "CartNode | None"
    right: "CartNode | None"

    @property
    def is_leaf(self) -> bool:
        return self.var < 0


def _best_split(x: np.ndarray, r: np.ndarray, min_leaf: int):
    """Best (var, cut, gain) under squared error, or None.

    For each variable the rows are sorted once; prefix sums then score every
    admissible boundary between distinct consecutive values in one pass.
    The gain is the increase in ``sum^2/count`` summed over the two sides
    relative to the unsplit node.
    """
    n = r.size
    if n < 2 * min_leaf:
        return None
    total = r.sum()
    base = total * total / n
    best = None
    best_gain = 1e-12 * float(r @ r) + 1e-300
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        cum = np.cumsum(r[order])
        # candidate boundary after position i (1-based count i+1 on the left)
        counts = np.arange(1, n)
        valid = ((counts >= min_leaf) & (counts <= n - min_leaf)
                 & (xs[1:] > xs[:-1]))
        if not np.any(valid):
            continue
        left_sum = cum[:-1]
        with np.errstate(invalid="ignore"):
            score = (left_sum * left_sum / counts
                     + (total - left_sum) ** 2 / (n - counts))
        score[~valid] = -np.inf
        i = int(np.argmax(score))
        gain = float(score[i]) - base
        if gain > best_gain:
            best_gain = gain
            cut = 0.5 * (xs[i] + xs[i + 1])
            # guard against midpoints rounding onto the right value
            if not xs[i] <= cut < xs[i + 1]:
                cut = xs[i]
            best = (j, float(cut), gain)
    return best


def _grow_cart(x: np.ndarray, r: np.ndarray, depth: int, max_depth: int,
               min_leaf: int) -> CartNode:
    n = r.size
    mean = float(r.mean())
    if depth < max_depth:
        found = _best_split(x, r, min_leaf)
        if found is not None:
            j, cut, _ = found
            go_left = x[:, j] <= cut
            left = _grow_cart(x[go_left], r[go_left], depth + 1,
                              max_depth, min_leaf)
            right = _grow_cart(x[~go_left], r[~go_left], depth + 1,
                               max_depth, min_leaf)
            return CartNode(n=n, mean=mean, var=j, cut=cut,
                            left=left, right=right)
    return CartNode(n=n, mean=mean, var=-1, cut=0.0, left=None, right=None)


@dataclass(frozen=True, eq=False)
class CartTree:
    root: CartNode
    names: tuple

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            node = self.root
            while not node.is_leaf:
                node = node.left if x[i, node.var] <= node.cut else node.right
            out[i] = node.mean
        return out

    def split_variables(self) -> list:
        """Names of split variables in preorder (root first)."""
        out = []

        def visit(node):
            if not node.is_leaf:
                out.append(self.names[node.var])
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return out

    @property
    def root_variable(self) -> str | None:
        return None if self.root.is_leaf else self.names[self.root.var]


def fit_cart(x: np.ndarray, response: np.ndarray, names=None,
             max_depth: int = 3, min_leaf: int = 10) -> CartTree:
    """Greedy least-squares tree on the given rows.

    Splits are only kept when they strictly reduce squared error (beyond a
    tiny relative tolerance), so a constant response yields a single leaf.
    """
    x = np.asarray(x, dtype=float)
    response = np.asarray(response, dtype=float)
    if x.ndim != 2:
        raise ConfigError(f"x must be 2-D, got shape {x.shape}")
    if response.shape != (x.shape[0],):
        raise ConfigError("response length must match rows of x")
    if max_depth < 0:
        raise ConfigError(f"max_depth must be >= 0, got {max_depth}")
    if min_leaf < 1:
        raise ConfigError(f"min_leaf must be >= 1, got {min_leaf}")
    if x.shape[0] < min_leaf:
        raise TooFewRowsError(f"need at least min_leaf={min_leaf} rows, "
                              f"got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ConfigError("covariates must be finite")
    finite = np.isfinite(response)
    if not np.all(finite):
        # infinite ratio statistics carry no usable ordering information
        # beyond "discard", so profile on the finite rows only
        x, response = x[finite], response[finite]
        if x.shape[0] < min_leaf:
            raise TooFewRowsError("too few finite response rows")
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
    names = tuple(names)
    if len(names) != x.shape[1]:
        raise ConfigError("names length must match columns of x")
    root = _grow_cart(x, response, 0, max_depth, min_leaf)
    return CartTree(root=root, names=names)


def render_tree(tree: CartTree) -> str:
    """Deterministic indented text rendering of a fitted tree."""
    lines = [f"n={tree.root.n} mean={tree.root.mean:.4g}"]

    def visit(node, depth):
        if node.is_leaf:
            return
        pad = "  " * depth
        name = tree.names[node.var]
        lines.append(f"{pad}{name} <= {node.cut:.6g}: "
                     f"n={node.left.n} mean={node.left.mean:.4g}")
        visit(node.left, depth + 1)
        lines.append(f"{pad}{name} > {node.cut:.6g}: "
                     f"n={node.right.n} mean={node.right.mean:.4g}")
        visit(node.right, depth + 1)

    visit(tree.root, 1)
    return "\n".join(lines)


def profile_discards(d: Dataset, response: ProfileResponse,
                     max_depth: int = 3, min_leaf: int = 10) -> CartTree:
    """Fit a profiling tree for one rule on the focal units' covariates."""
    rows = response.focal_rows
    return fit_cart(d.x[rows], response.values, names=d.names,
                    max_depth=max_depth, min_leaf=min_leaf)
