"""Treatment-effect estimators over the (optionally trimmed) sample.

All estimators target the mean effect of treatment within one focal group
(``a = 1``: effect on the treated; ``a = 0``: effect on the controls) and
accept a :class:`~causalsupport.support.DiscardReport` restricting the focal
units used.  The ensemble-based estimator averages existing posterior draws
over retained units; it never refits after discarding.  The regression-based
estimators report HC0 sandwich standard errors, treating any weights as
survey weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .bart import PosteriorSurface, individual_effect_draws, posterior_summary
from .data import Dataset, rng_for
from .errors import (
    AllFocalDiscardedError,
    ConfigError,
    EmptyComparisonGroupError,
    EmptyFocalGroupError,
    EmptyGroupError,
    ExtremeWeightError,
    NotConvergedWarning,
    SeparationError,
    SingularError,
)
from .support import DiscardReport

_Z975 = 1.959963984540054
_GRADIENT_TOL = 1e-8
_MAX_IRLS_ITER = 100
_SEPARATION_SCORE = 30.0
_WEIGHT_BOUND = 1e6


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Logistic treatment model: coefficients and per-unit scores."""

    coef: np.ndarray
    linear_scores: np.ndarray
    pscores: np.ndarray
    converged: bool


@dataclass(frozen=True)
class EffectEstimate:
    method: str
    estimand: str
    point: float
    uncertainty: float
    interval: tuple
    n_focal_retained: int
    n_discarded: int
    note: str = ""


def _estimand_tag(a: int) -> str:
    return "att" if a == 1 else "atc"


def fit_logistic(x: np.ndarray, z: np.ndarray) -> PropensityModel:
    """Maximum-likelihood logistic regression of ``z`` on an intercept and ``x``.

    Newton/IRLS iterations stop when the score vector's max component falls
    below 1e-8; hitting the iteration cap raises a warning and flags the
    model, while diverging scores that perfectly separate the groups raise
    :class:`SeparationError`.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    design = np.column_stack([np.ones(n), x])
    coef = np.zeros(design.shape[1])
    sign = 2.0 * z - 1.0

    converged = False
    for _ in range(_MAX_IRLS_ITER):
        eta = design @ coef
        p = expit(eta)
        grad = design.T @ (z - p)
        if np.max(np.abs(grad)) < _GRADIENT_TOL:
            converged = True
            break
        w = p * (1.0 - p)
        hess = design.T @ (design * w[:, None])
        try:
            step, _, _, _ = np.linalg.lstsq(hess, grad, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise SingularError("logistic information matrix is unusable") from exc
        coef = coef + step
        eta = design @ coef
        if np.max(np.abs(eta)) > _SEPARATION_SCORE and np.min(sign * eta) >= 0.0:
            raise SeparationError(
                "treatment groups are perfectly separated; scores diverge"
            )
    if not converged:
        warnings.warn(
            f"logistic fit stopped after {_MAX_IRLS_ITER} iterations",
            NotConvergedWarning,
            stacklevel=2,
        )

    eta = design @ coef
    return PropensityModel(
        coef=coef, linear_scores=eta, pscores=expit(eta), converged=converged
    )


def score_with(pm: PropensityModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear and probability scores for rows of ``x`` under ``pm``'s coefficients."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eta = pm.coef[0] + x @ pm.coef[1:]
    return eta, expit(eta)


def _wls_hc0(design: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted least squares with an HC0 sandwich under survey weights.

    Returns (coefficients, standard errors); raises :class:`SingularError`
    when the weighted cross-product matrix is rank deficient.
    """
    xw = design * w[:, None]
    xtwx = design.T @ xw
    xtwy = xw.T @ y
    k = design.shape[1]
    beta, _, rank, _ = np.linalg.lstsq(xtwx, xtwy, rcond=None)
    if rank < k:
        raise SingularError(f"design has rank {rank} < {k}")
    e = y - design @ beta
    u = design * (w * e)[:, None]
    bread = np.linalg.inv(xtwx)
    cov = bread @ (u.T @ u) @ bread
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return beta, se


def _retained_mask(n: int, report: DiscardReport | None) -> np.ndarray:
    if report is None:
        return np.ones(n, dtype=bool)
    if report.discard.shape != (n,):
        raise ConfigError("discard report length disagrees with the sample")
    return report.retained()


def _focal_rows(z: np.ndarray, retained: np.ndarray, a: int):
    focal_all = z == a
    if not np.any(focal_all):
        raise EmptyFocalGroupError(f"no units in focal group z={a}")
    focal = focal_all & retained
    if not np.any(focal):
        raise AllFocalDiscardedError("every focal unit was discarded")
    return focal


def bart_effect(ps: PosteriorSurface, report: DiscardReport | None, a: int) -> EffectEstimate:
    """Posterior mean effect on retained focal units, from existing draws.

    Each kept draw is averaged over the retained focal units, giving one
    draw of the group effect; the point estimate, sd, and equal-tailed 95%
    interval summarize those draws.
    """
    z = ps.z
    retained = _retained_mask(ps.num_units, report)
    focal = _focal_rows(z, retained, a)
    eff = individual_effect_draws(ps)[:, focal].mean(axis=1)
    summ = posterior_summary(eff, level=0.95)
    return EffectEstimate(
        method="bart",
        estimand=_estimand_tag(a),
        point=float(summ.mean),
        uncertainty=float(summ.sd),
        interval=(float(summ.lower), float(summ.upper)),
        n_focal_retained=int(focal.sum()),
        n_discarded=report.n_discarded if report is not None else 0,
    )


def match_effect(d: Dataset, pm: PropensityModel, report: DiscardReport | None,
                 a: int, seed: int = 0) -> EffectEstimate:
    """Pair matching on the linear propensity score, then adjusted comparison.

    Each retained focal unit takes its nearest comparison unit (with
    replacement; ties go to the earliest unit in a seeded shuffle).  The
    effect is the treatment coefficient of a weighted regression of the
    outcome on treatment and all covariates over the matched sample, with
    match-frequency weights on comparison units.  A rank-deficient matched
    design falls back to the unadjusted weighted mean difference and says so
    in ``note``.
    """
    z = d.z
    retained = _retained_mask(d.n, report)
    focal = _focal_rows(z, retained, a)
    comparison = z == 1 - a
    if not np.any(comparison):
        raise EmptyComparisonGroupError(f"no units in comparison group z={1 - a}")

    fi = np.flatnonzero(focal)
    ci = np.flatnonzero(comparison)
    order = rng_for(seed, "matching").permutation(ci.size)
    cp = ci[order]
    dist = np.abs(pm.linear_scores[fi][:, None] - pm.linear_scores[cp][None, :])
    picked = np.argmin(dist, axis=1)
    counts = np.bincount(picked, minlength=cp.size)
    used = counts > 0

    rows = np.concatenate([fi, cp[used]])
    w = np.concatenate([np.ones(fi.size), counts[used].astype(float)])
    yr = d.y[rows]
    note = ""
    design = np.column_stack([np.ones(rows.size), z[rows].astype(float), d.x[rows]])
    try:
        beta, se = _wls_hc0(design, yr, w)
    except SingularError:
        design = np.column_stack([np.ones(rows.size), z[rows].astype(float)])
        beta, se = _wls_hc0(design, yr, w)
        note = "unadjusted mean difference (matched design rank deficient)"

    point = float(beta[1])
    u = float(se[1])
    return EffectEstimate(
        method="match",
        estimand=_estimand_tag(a),
        point=point,
        uncertainty=u,
        interval=(point - _Z975 * u, point + _Z975 * u),
        n_focal_retained=int(fi.size),
        n_discarded=report.n_discarded if report is not None else 0,
        note=note,
    )


def iptw_effect(d: Dataset, pm: PropensityModel, report: DiscardReport | None,
                a: int) -> EffectEstimate:
    """Weighting estimator: focal units weight 1, comparisons by the odds
    of membership in the focal group, then the same weighted regression as
    matching."""
    z = d.z
    retained = _retained_mask(d.n, report)
    focal = _focal_rows(z, retained, a)
    comparison = z == 1 - a
    if not np.any(comparison):
        raise EmptyComparisonGroupError(f"no units in comparison group z={1 - a}")

    p = pm.pscores
    w = np.zeros(d.n)
    w[focal] = 1.0
    with np.errstate(divide="ignore"):
        if a == 1:
            w[comparison] = p[comparison] / (1.0 - p[comparison])
        else:
            w[comparison] = (1.0 - p[comparison]) / p[comparison]
    wmax = float(w.max())
    if not np.isfinite(wmax) or wmax > _WEIGHT_BOUND:
        raise ExtremeWeightError(wmax, _WEIGHT_BOUND)

    rows = np.flatnonzero(w > 0.0)
    design = np.column_stack([np.ones(rows.size), z[rows].astype(float), d.x[rows]])
    beta, se = _wls_hc0(design, d.y[rows], w[rows])
    point = float(beta[1])
    u = float(se[1])
    return EffectEstimate(
        method="iptw",
        estimand=_estimand_tag(a),
        point=point,
        uncertainty=u,
        interval=(point - _Z975 * u, point + _Z975 * u),
        n_focal_retained=int(focal.sum()),
        n_discarded=report.n_discarded if report is not None else 0,
    )


def ols_effect(d: Dataset, report: DiscardReport | None = None) -> EffectEstimate:
    """Plain regression of outcome on treatment and covariates (HC0 errors)."""
    retained = _retained_mask(d.n, report)
    rows = np.flatnonzero(retained)
    z = d.z[rows].astype(float)
    if z.min() == z.max():
        raise EmptyGroupError(int(1 - z.min()), "regression sample")
    design = np.column_stack([np.ones(rows.size), z, d.x[rows]])
    beta, se = _wls_hc0(design, d.y[rows], np.ones(rows.size))
    point = float(beta[1])
    u = float(se[1])
    return EffectEstimate(
        method="ols",
        estimand="all",
        point=point,
        uncertainty=u,
        interval=(point - _Z975 * u, point + _Z975 * u),
        n_focal_retained=int(rows.size),
        n_discarded=report.n_discarded if report is not None else 0,
    )


def reestimate_propensity_after_discard(d: Dataset, report: DiscardReport) -> PropensityModel:
    """Refit the treatment model on retained units only.

    Coefficients come from the trimmed sample; the returned scores cover
    every original unit so downstream estimators can keep full-length
    masks.  With an empty discard set this reproduces
    :func:`fit_logistic` on the full data.
    """
    keep = report.retained()
    for g in (0, 1):
        if not np.any(keep & (d.z == g)):
            raise EmptyGroupError(g, "after discarding")
    sub = fit_logistic(d.x[keep], d.z[keep])
    eta, p = score_with(sub, d.x)
    return PropensityModel(coef=sub.coef, linear_scores=eta, pscores=p,
                           converged=sub.converged)
