"""Bayesian sum-of-trees regression with treatment-arm counterfactual draws.

The model is ``y = sum_j g(x, z; T_j, M_j) + eps`` with ``eps ~ N(0, sigma^2)``
and a regularization prior that keeps each of the ``m`` trees shallow.  The
sampler is Metropolis-within-Gibbs backfitting: each sweep proposes one
structural move per tree (grow, prune, or change), redraws every leaf value
from its conjugate normal full conditional, then redraws ``sigma`` from its
inverse-chi-squared full conditional.

The treatment indicator enters the design as an ordinary column.  At every
kept iteration the ensemble is also evaluated on the same units with that
column flipped, which yields per-unit posterior draws of both potential
outcome surfaces; everything downstream (effect estimates, overlap
diagnostics) is computed from those draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .data import Dataset, rng_for, standardize_outcome
from .errors import ConfigError, TooFewDrawsError

_EMPTY_IDX = np.empty(0, dtype=np.intp)

# Structural proposal mix: when a tree has at least one interior node the
# change move is tried with this probability and the rest is split evenly
# between grow and prune; a single-leaf tree can only grow.
_P_CHANGE = 0.2


@dataclass(frozen=True)
class BartConfig:
    """Sampler settings.  Defaults follow the reference analysis protocol."""

    num_trees: int = 100
    iterations: int = 3500
    burn_in: int = 500
    tree_alpha: float = 0.95
    tree_beta: float = 2.0
    leaf_k: float = 2.0
    sigma_nu: float = 3.0
    sigma_q: float = 0.90
    min_leaf: int = 5

    def validate(self) -> None:
        if self.num_trees < 1:
            raise ConfigError(f"num_trees must be >= 1, got {self.num_trees}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in must lie in [0, iterations), got {self.burn_in}"
            )
        if not 0.0 < self.tree_alpha < 1.0:
            raise ConfigError(f"tree_alpha must be in (0, 1), got {self.tree_alpha}")
        if self.tree_beta < 0.0:
            raise ConfigError(f"tree_beta must be >= 0, got {self.tree_beta}")
        if self.leaf_k <= 0.0:
            raise ConfigError(f"leaf_k must be positive, got {self.leaf_k}")
        if self.sigma_nu <= 0.0:
            raise ConfigError(f"sigma_nu must be positive, got {self.sigma_nu}")
        if not 0.0 < self.sigma_q < 1.0:
            raise ConfigError(f"sigma_q must be in (0, 1), got {self.sigma_q}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")


@dataclass(frozen=True, eq=False, repr=False)
class PosteriorSurface:
    """Per-unit posterior draws of both arm means, on the outcome scale.

    ``f0_draws[r, i]`` and ``f1_draws[r, i]`` are draw ``r`` of the mean
    response for unit ``i`` under control and under treatment; the column
    for the arm the unit was actually observed in is its fitted value.
    ``sigma_draws`` holds the kept residual-sd draws and ``sigma_trace`` the
    full trace including burn-in, for convergence checks.
    """

    f0_draws: np.ndarray
    f1_draws: np.ndarray
    sigma_draws: np.ndarray
    sigma_trace: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        r, n = self.f0_draws.shape
        if self.f1_draws.shape != (r, n) or self.sigma_draws.shape != (r,):
            raise ConfigError("draw array shapes disagree")
        if self.z.shape != (n,):
            raise ConfigError("treatment vector length disagrees with draws")

    def __repr__(self) -> str:
        r, n = self.f0_draws.shape
        return f"PosteriorSurface(draws={r}, units={n})"

    @property
    def num_draws(self) -> int:
        return self.f0_draws.shape[0]

    @property
    def num_units(self) -> int:
        return self.f0_draws.shape[1]


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def posterior_summary(draws: np.ndarray, level: float = 0.95) -> PosteriorSummary:
    """Mean, sample sd, and equal-tailed interval along the draw axis."""
    draws = np.asarray(draws, dtype=float)
    if not 0.0 < level < 1.0:
        raise ConfigError(f"interval level must be in (0, 1), got {level}")
    if draws.shape[0] < 2:
        raise TooFewDrawsError("need at least 2 draws to summarize")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return PosteriorSummary(
        mean=draws.mean(axis=0),
        sd=draws.std(axis=0, ddof=1),
        lower=lo,
        upper=hi,
        level=level,
    )


def individual_effect_draws(ps: PosteriorSurface) -> np.ndarray:
    """Draw-by-draw treatment-versus-control mean difference per unit."""
    return ps.f1_draws - ps.f0_draws


def _leaf_posterior(n_leaf: int, resid_sum: float, sigma2: float,
                    sigma_mu2: float) -> tuple[float, float]:
    """Normal full-conditional (mean, sd) of one leaf value.

    Prior N(0, sigma_mu2) combined with ``n_leaf`` residual observations at
    noise variance ``sigma2``; the posterior mean is
    ``resid_sum / (n_leaf + sigma2 / sigma_mu2)``.
    """
    v = 1.0 / (n_leaf / sigma2 + 1.0 / sigma_mu2)
    return v * resid_sum / sigma2, math.sqrt(v)


def _draw_sigma2(rng: np.random.Generator, nu: float, lam: float, n: int,
                 sse: float) -> float:
    """One inverse-chi-squared full-conditional draw of the noise variance."""
    return (nu * lam + sse) / rng.chisquare(nu + n)


class _Node:
    """One tree node; a leaf when ``var < 0``.

    ``rows`` / ``rows_flip`` index the training rows reaching the node under
    the observed and the treatment-flipped design.  ``avail`` caches the
    covariates that admit at least one split leaving ``min_leaf`` rows on
    each side; it is refreshed whenever ``rows`` changes.
    """

    __slots__ = ("var", "cut", "left", "right", "mu", "depth",
                 "rows", "rows_flip", "avail", "growable")

    def __init__(self):
        self.var = -1
        self.cut = 0.0
        self.left = None
        self.right = None
        self.mu = 0.0
        self.depth = 0
        self.rows = _EMPTY_IDX
        self.rows_flip = _EMPTY_IDX
        self.avail = _EMPTY_IDX
        self.growable = False


def _refresh_split_cache(node: _Node, x: np.ndarray, min_leaf: int) -> None:
    nn = node.rows.size
    if nn >= 2 * min_leaf:
        sub = x[node.rows]
        part = np.partition(sub, (min_leaf - 1, nn - min_leaf), axis=0)
        node.avail = np.flatnonzero(part[min_leaf - 1] < part[nn - min_leaf])
    else:
        node.avail = _EMPTY_IDX
    node.growable = node.avail.size > 0


def _make_leaf(x: np.ndarray, rows: np.ndarray, rows_flip: np.ndarray,
               depth: int, min_leaf: int) -> _Node:
    nd = _Node()
    nd.depth = depth
    nd.rows = rows
    nd.rows_flip = rows_flip
    _refresh_split_cache(nd, x, min_leaf)
    return nd


def _valid_cuts(x: np.ndarray, rows: np.ndarray, var: int, min_leaf: int) -> np.ndarray:
    """Distinct observed values of ``var`` in the node usable as cutpoints.

    The split rule is ``x <= cut`` goes left, so a cut is usable when at
    least ``min_leaf`` values sit at or below it and ``min_leaf`` strictly
    above it.
    """
    w = np.sort(x[rows, var])
    lo = w[min_leaf - 1]
    hi = w[w.size - min_leaf]
    keep = np.empty(w.size, dtype=bool)
    keep[0] = True
    np.greater(w[1:], w[:-1], out=keep[1:])
    u = w[keep]
    return u[(u >= lo) & (u < hi)]


def _collect_leaves(root: _Node) -> list:
    leaves = []
    stack = [root]
    while stack:
        nd = stack.pop()
        if nd.var < 0:
            leaves.append(nd)
        else:
            stack.append(nd.right)
            stack.append(nd.left)
    return leaves


def _walk(root: _Node):
    """Gather leaves, growable leaves, prunable interiors, interiors, parents."""
    leaves, grow_leaves, prunables, internals = [], [], [], []
    parent = {}
    stack = [root]
    while stack:
        nd = stack.pop()
        if nd.var < 0:
            leaves.append(nd)
            if nd.growable:
                grow_leaves.append(nd)
        else:
            internals.append(nd)
            l, r = nd.left, nd.right
            parent[id(l)] = nd
            parent[id(r)] = nd
            if l.var < 0 and r.var < 0:
                prunables.append(nd)
            stack.append(r)
            stack.append(l)
    return leaves, grow_leaves, prunables, internals, parent


class TreeEnsembleSampler:
    """Backfitting MCMC state over ``m`` trees.

    ``x`` is the training design (covariates plus the treatment column) and
    ``x_alt`` the same matrix with the treatment column flipped; fitted
    values are maintained for both so counterfactual predictions need no
    extra tree traversals.  ``y`` must already be on the standardized scale.
    """

    def __init__(self, x: np.ndarray, x_alt: np.ndarray, y: np.ndarray,
                 config: BartConfig, rng: np.random.Generator):
        config.validate()
        n, q = x.shape
        self.x = np.ascontiguousarray(x, dtype=float)
        self.x_alt = np.ascontiguousarray(x_alt, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.rng = rng
        self.config = config
        self.n = n
        self.m = config.num_trees
        self.min_leaf = config.min_leaf
        if self.m > n:
            warnings.warn(
                f"num_trees={self.m} exceeds n={n}; the ensemble is overparameterized",
                stacklevel=2,
            )

        self.sigma_mu = 0.5 / (config.leaf_k * math.sqrt(self.m))
        self.sigma_mu2 = self.sigma_mu ** 2
        self.nu = config.sigma_nu
        self.lam = self._calibrate_lambda()
        self.sigma2 = self._sigma2_hat

        idx = np.arange(n, dtype=np.intp)
        self.trees = [_make_leaf(self.x, idx, idx, 0, self.min_leaf)
                      for _ in range(self.m)]
        self.fits = np.zeros((self.m, n))
        self.alt_fits = np.zeros((self.m, n))
        self.resid = self.y.copy()
        self.n_sweeps = 0
        self.last_resid_drift = 0.0
        self.max_resid_drift = 0.0

    def _calibrate_lambda(self) -> float:
        """Set the noise-variance prior scale from a linear-fit estimate.

        ``lam`` solves P(sigma < sigma_hat) = q under the
        nu * lam / sigma^2 ~ chi^2_nu prior, with sigma_hat from ordinary
        least squares of y on the full design.
        """
        n = self.n
        a = np.column_stack([np.ones(n), self.x])
        beta, _, rank, _ = np.linalg.lstsq(a, self.y, rcond=None)
        dof = n - rank
        if dof > 0:
            e = self.y - a @ beta
            s2 = float(e @ e) / dof
        else:
            s2 = float(np.var(self.y))
        s2 = max(s2, 1e-12)
        self._sigma2_hat = s2
        cfg = self.config
        return s2 * float(chi2.ppf(1.0 - cfg.sigma_q, cfg.sigma_nu)) / cfg.sigma_nu

    # -- structural proposal pieces -------------------------------------

    def _log_marg(self, n_leaf: int, s: float, sigma2: float) -> float:
        # Marginal likelihood of a leaf's residuals with the value
        # integrated out; terms constant across competing partitions of the
        # same rows are dropped.
        t = sigma2 + n_leaf * self.sigma_mu2
        return 0.5 * math.log(sigma2 / t) + self.sigma_mu2 * s * s / (2.0 * sigma2 * t)

    def _psplit(self, depth: int) -> float:
        return self.config.tree_alpha / (1.0 + depth) ** self.config.tree_beta

    def _grow(self, tree: _Node, grow_leaves: list, prunables: list,
              parent: dict, r: np.ndarray) -> bool:
        rng = self.rng
        leaf = grow_leaves[int(rng.integers(len(grow_leaves)))]
        var = int(leaf.avail[int(rng.integers(leaf.avail.size))])
        cuts = _valid_cuts(self.x, leaf.rows, var, self.min_leaf)
        cut = float(cuts[int(rng.integers(cuts.size))])

        vals = self.x[leaf.rows, var]
        go_left = vals <= cut
        rows_l = leaf.rows[go_left]
        rows_r = leaf.rows[~go_left]
        s_l = float(r[rows_l].sum())
        s_r = float(r[rows_r].sum())

        sigma2 = self.sigma2
        loglik = (self._log_marg(rows_l.size, s_l, sigma2)
                  + self._log_marg(rows_r.size, s_r, sigma2)
                  - self._log_marg(leaf.rows.size, s_l + s_r, sigma2))

        d = leaf.depth
        ps_d = self._psplit(d)
        ps_c = self._psplit(d + 1)
        log_prior = math.log(ps_d) + 2.0 * math.log1p(-ps_c) - math.log1p(-ps_d)

        pr = parent.get(id(leaf))
        sibling_is_leaf = False
        if pr is not None:
            sib = pr.right if pr.left is leaf else pr.left
            sibling_is_leaf = sib.var < 0
        w2_after = len(prunables) + 1 - (1 if sibling_is_leaf else 0)
        kind_grow = 1.0 if tree.var < 0 else (0.5 * (1.0 - _P_CHANGE))
        kind_prune_after = 0.5 * (1.0 - _P_CHANGE)
        log_acc = (log_prior + loglik
                   + math.log(kind_prune_after) - math.log(kind_grow)
                   + math.log(len(grow_leaves)) - math.log(w2_after))

        u = rng.random()
        if math.log(u if u > 0.0 else 1e-300) >= log_acc:
            return False

        flip_left = self.x_alt[leaf.rows_flip, var] <= cut
        leaf.var = var
        leaf.cut = cut
        leaf.left = _make_leaf(self.x, rows_l, leaf.rows_flip[flip_left],
                               d + 1, self.min_leaf)
        leaf.right = _make_leaf(self.x, rows_r, leaf.rows_flip[~flip_left],
                                d + 1, self.min_leaf)
        return True

    def _prune(self, tree: _Node, grow_leaves: list, prunables: list,
               r: np.ndarray) -> bool:
        rng = self.rng
        node = prunables[int(rng.integers(len(prunables)))]
        left, right = node.left, node.right
        s_l = float(r[left.rows].sum())
        s_r = float(r[right.rows].sum())

        sigma2 = self.sigma2
        loglik = (self._log_marg(node.rows.size, s_l + s_r, sigma2)
                  - self._log_marg(left.rows.size, s_l, sigma2)
                  - self._log_marg(right.rows.size, s_r, sigma2))

        d = node.depth
        ps_d = self._psplit(d)
        ps_c = self._psplit(d + 1)
        log_prior = math.log1p(-ps_d) - math.log(ps_d) - 2.0 * math.log1p(-ps_c)

        n_grow_after = len(grow_leaves) - int(left.growable) - int(right.growable) + 1
        kind_prune = 0.5 * (1.0 - _P_CHANGE)
        kind_grow_after = 1.0 if node is tree else (0.5 * (1.0 - _P_CHANGE))
        log_acc = (log_prior + loglik
                   + math.log(kind_grow_after) - math.log(kind_prune)
                   + math.log(len(prunables)) - math.log(n_grow_after))

        u = rng.random()
        if math.log(u if u > 0.0 else 1e-300) >= log_acc:
            return False

        node.var = -1
        node.left = None
        node.right = None
        return True

    def _change(self, tree: _Node, internals: list, r: np.ndarray) -> bool:
        rng = self.rng
        node = internals[int(rng.integers(len(internals)))]
        var = int(node.avail[int(rng.integers(node.avail.size))])
        cuts = _valid_cuts(self.x, node.rows, var, self.min_leaf)
        cut = float(cuts[int(rng.integers(cuts.size))])

        new_parts = self._repartition(node, var, cut)
        if new_parts is None:
            return False

        sigma2 = self.sigma2
        loglik = 0.0
        for nd, rows, _ in new_parts:
            if nd.var < 0:
                loglik += self._log_marg(rows.size, float(r[rows].sum()), sigma2)
        for nd in _collect_leaves(node):
            loglik -= self._log_marg(nd.rows.size, float(r[nd.rows].sum()), sigma2)

        # Proposal and rule-prior factors cancel: the candidate (var, cut)
        # set at the node depends only on rows arriving from above, which
        # the move does not alter.
        u = rng.random()
        if math.log(u if u > 0.0 else 1e-300) >= loglik:
            return False

        node.var = var
        node.cut = cut
        for nd, rows, rows_flip in new_parts:
            nd.rows = rows
            nd.rows_flip = rows_flip
            _refresh_split_cache(nd, self.x, self.min_leaf)
        return True

    def _repartition(self, node: _Node, var: int, cut: float):
        """Rows reaching each descendant if ``node`` switched to (var, cut).

        Returns None when some leaf would fall below the minimum size; the
        subtree's own rule structure is kept as is.
        """
        out = []
        stack = [(node, node.rows, node.rows_flip, var, cut)]
        while stack:
            nd, rows, rows_flip, v, c = stack.pop()
            go = self.x[rows, v] <= c
            go_f = self.x_alt[rows_flip, v] <= c
            for child, rws, rwf in ((nd.left, rows[go], rows_flip[go_f]),
                                    (nd.right, rows[~go], rows_flip[~go_f])):
                if child.var < 0:
                    if rws.size < self.min_leaf:
                        return None
                    out.append((child, rws, rwf))
                else:
                    out.append((child, rws, rwf))
                    stack.append((child, rws, rwf, child.var, child.cut))
        return out

    # -- Gibbs pieces ----------------------------------------------------

    def _update_tree(self, j: int) -> None:
        rng = self.rng
        tree = self.trees[j]
        fit_j = self.fits[j]
        r = self.resid + fit_j

        leaves, grow_leaves, prunables, internals, parent = _walk(tree)
        if not internals:
            kind = 0
        else:
            u = rng.random()
            kind = 2 if u < _P_CHANGE else (0 if u < _P_CHANGE + 0.4 else 1)
        changed = False
        if kind == 0:
            if grow_leaves:
                changed = self._grow(tree, grow_leaves, prunables, parent, r)
        elif kind == 1:
            changed = self._prune(tree, grow_leaves, prunables, r)
        else:
            changed = self._change(tree, internals, r)
        if changed:
            leaves = _collect_leaves(tree)

        sigma2 = self.sigma2
        sigma_mu2 = self.sigma_mu2
        alt_j = self.alt_fits[j]
        eps = rng.standard_normal(len(leaves))
        for i, leaf in enumerate(leaves):
            n_leaf = leaf.rows.size
            s = float(r[leaf.rows].sum())
            v = 1.0 / (n_leaf / sigma2 + 1.0 / sigma_mu2)
            mu = v * s / sigma2 + math.sqrt(v) * eps[i]
            leaf.mu = mu
            fit_j[leaf.rows] = mu
            alt_j[leaf.rows_flip] = mu
        np.subtract(r, fit_j, out=self.resid)

    def sweep(self) -> None:
        """One full MCMC sweep: every tree, then the noise variance."""
        for j in range(self.m):
            self._update_tree(j)
        exact = self.y - self.fits.sum(axis=0)
        self.last_resid_drift = float(np.abs(self.resid - exact).max())
        if self.last_resid_drift > self.max_resid_drift:
            self.max_resid_drift = self.last_resid_drift
        self.resid = exact
        sse = float(exact @ exact)
        self.sigma2 = _draw_sigma2(self.rng, self.nu, self.lam, self.n, sse)
        self.n_sweeps += 1

    def fitted(self) -> np.ndarray:
        """Current ensemble fit on the observed design (standardized scale)."""
        return self.y - self.resid

    def fitted_alt(self) -> np.ndarray:
        """Current ensemble fit with the treatment column flipped."""
        return self.alt_fits.sum(axis=0)


def fit_bart(d: Dataset, config: BartConfig = BartConfig(), seed: int = 0) -> PosteriorSurface:
    """Fit the ensemble to a study and return counterfactual posterior draws.

    The outcome is rescaled to [-0.5, +0.5] internally; all returned draws
    are mapped back to the original outcome scale.
    """
    config.validate()
    d.require_both_groups()
    d_std, transform = standardize_outcome(d)
    x = np.column_stack([d_std.x, d_std.z.astype(float)])
    x_alt = np.column_stack([d_std.x, 1.0 - d_std.z.astype(float)])

    rng = rng_for(seed, "bart-chain")
    sampler = TreeEnsembleSampler(x, x_alt, d_std.y, config, rng)

    kept = config.iterations - config.burn_in
    n = d.n
    f0 = np.empty((kept, n))
    f1 = np.empty((kept, n))
    sig = np.empty(kept)
    trace = np.empty(config.iterations)
    treated = d.z == 1
    scale, shift = transform.scale, transform.shift

    k = 0
    for it in range(config.iterations):
        sampler.sweep()
        sigma = math.sqrt(sampler.sigma2) * scale
        trace[it] = sigma
        if it >= config.burn_in:
            f_obs = sampler.fitted() * scale + shift
            f_alt = sampler.fitted_alt() * scale + shift
            np.copyto(f1[k], np.where(treated, f_obs, f_alt))
            np.copyto(f0[k], np.where(treated, f_alt, f_obs))
            sig[k] = sigma
            k += 1

    return PosteriorSurface(
        f0_draws=f0, f1_draws=f1, sigma_draws=sig, sigma_trace=trace,
        z=d.z.copy(),
    )
