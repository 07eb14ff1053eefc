"""Overlap diagnostics: who lacks empirical counterfactual support.

The idea: a unit whose *counterfactual* prediction is far more uncertain
than the uncertainty typical for *observed* predictions in its own group
has no empirical basis for inference, and should be set aside rather than
extrapolated over.  Uncertainty here is the posterior sd, across kept MCMC
draws, of each unit's arm-specific mean response.

Three ensemble-based rules are provided plus the conventional
propensity-score range rule as a baseline.  Discarding never triggers a
refit: estimates after discarding simply restrict the existing draws to the
retained units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bart import PosteriorSurface
from .errors import (
    ConfigError,
    EmptyComparisonGroupError,
    EmptyFocalGroupError,
    EmptyGroupError,
    TooFewDrawsError,
    ZeroObservedSdWarning,
)

#: Squared-ratio cutoffs: chi-squared(1) critical values at the two
#: supported test levels.
RATIO_CUTOFFS = {0.10: 2.706, 0.05: 3.841}

ONE_SD = "one-sd"
RATIO_10 = "ratio-0.10"
RATIO_05 = "ratio-0.05"
PROPENSITY_RANGE = "propensity-range"


@dataclass(frozen=True, eq=False)
class CounterfactualUncertainty:
    """Per-unit posterior sds of both arm means, plus group anchors.

    For group ``a``, ``max_obs_sd`` and ``obs_sd_spread`` are the maximum
    and the sample sd of the observed-arm sds within that group; they anchor
    the one-sd rule.  The group mean observed-arm sds are carried along as a
    calibration readout (they gate nothing).
    """

    s_f0: np.ndarray
    s_f1: np.ndarray
    z: np.ndarray
    max_obs_sd: tuple
    obs_sd_spread: tuple
    mean_obs_sd: tuple

    def observed_sd(self, a: int) -> np.ndarray:
        """Posterior sd of the arm actually observed for group ``a`` units."""
        return self.s_f1 if a == 1 else self.s_f0

    def counterfactual_sd(self, a: int) -> np.ndarray:
        """Posterior sd of the unobserved arm for group ``a`` units."""
        return self.s_f0 if a == 1 else self.s_f1


def counterfactual_sds(ps: PosteriorSurface, z: np.ndarray | None = None) -> CounterfactualUncertainty:
    """Summarize draw-level uncertainty into the per-unit sds used by the rules."""
    if ps.num_draws < 2:
        raise TooFewDrawsError("need at least 2 kept draws to measure spread")
    z = ps.z if z is None else np.asarray(z)
    if z.shape != (ps.num_units,):
        raise ConfigError("treatment vector length disagrees with draws")
    s_f0 = ps.f0_draws.std(axis=0, ddof=1)
    s_f1 = ps.f1_draws.std(axis=0, ddof=1)

    max_obs, spread, mean_obs = [], [], []
    for a in (0, 1):
        in_a = z == a
        if not np.any(in_a):
            raise EmptyGroupError(a, "counterfactual uncertainty summary")
        obs = (s_f1 if a == 1 else s_f0)[in_a]
        max_obs.append(float(obs.max()))
        spread.append(float(obs.std(ddof=1)) if obs.size > 1 else 0.0)
        mean_obs.append(float(obs.mean()))
    return CounterfactualUncertainty(
        s_f0=s_f0, s_f1=s_f1, z=z.copy(),
        max_obs_sd=tuple(max_obs),
        obs_sd_spread=tuple(spread),
        mean_obs_sd=tuple(mean_obs),
    )


@dataclass(frozen=True, eq=False)
class DiscardReport:
    """Outcome of one discard rule applied to one focal group.

    ``statistic`` is defined (non-NaN) exactly on focal units.  For the
    ensemble rules ``threshold`` is a scalar and ``discard_i`` holds iff
    ``statistic_i > threshold`` (strict; ties are retained).  For the
    propensity range rule ``threshold`` is the comparison-group
    ``(min, max)`` pair and units strictly outside it are discarded.
    """

    rule: str
    focal_group: int
    statistic: np.ndarray
    threshold: object
    discard: np.ndarray

    @property
    def n_focal(self) -> int:
        return int(np.sum(~np.isnan(self.statistic)))

    @property
    def n_discarded(self) -> int:
        return int(self.discard.sum())

    def retained(self) -> np.ndarray:
        """Mask of units kept for estimation (discards only hit focal units)."""
        return ~self.discard


def _focal_mask(z: np.ndarray, a: int) -> np.ndarray:
    if a not in (0, 1):
        raise ConfigError(f"focal group must be 0 or 1, got {a!r}")
    focal = z == a
    if not np.any(focal):
        raise EmptyFocalGroupError(f"no units in focal group z={a}")
    return focal


def discard_one_sd(cu: CounterfactualUncertainty, a: int) -> DiscardReport:
    """Discard focal units whose counterfactual sd clears the group anchor.

    The anchor is the largest observed-arm sd in the focal group plus one
    sample sd of those observed-arm sds.
    """
    focal = _focal_mask(cu.z, a)
    threshold = cu.max_obs_sd[a] + cu.obs_sd_spread[a]
    stat = np.full(cu.z.shape, np.nan)
    s_cf = cu.counterfactual_sd(a)
    stat[focal] = s_cf[focal]
    discard = np.zeros(cu.z.shape, dtype=bool)
    discard[focal] = s_cf[focal] > threshold
    return DiscardReport(ONE_SD, a, stat, float(threshold), discard)


def discard_ratio(cu: CounterfactualUncertainty, a: int, alpha: float = 0.10) -> DiscardReport:
    """Discard focal units with an extreme squared counterfactual/observed sd ratio.

    The statistic is compared against the chi-squared(1) critical value for
    ``alpha`` in :data:`RATIO_CUTOFFS`.  A zero observed-arm sd yields an
    infinite statistic when the counterfactual sd is positive and zero (kept)
    when both vanish; either case is surfaced as a warning.
    """
    if alpha not in RATIO_CUTOFFS:
        raise ConfigError(
            f"alpha must be one of {sorted(RATIO_CUTOFFS)}, got {alpha!r}"
        )
    cutoff = RATIO_CUTOFFS[alpha]
    focal = _focal_mask(cu.z, a)
    s_obs = cu.observed_sd(a)[focal]
    s_cf = cu.counterfactual_sd(a)[focal]

    ratio_sq = np.empty(s_obs.shape)
    zero_obs = s_obs == 0.0
    if np.any(zero_obs):
        warnings.warn(
            f"{int(zero_obs.sum())} focal unit(s) have zero observed-arm sd",
            ZeroObservedSdWarning,
            stacklevel=2,
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(s_cf, s_obs, out=ratio_sq, where=~zero_obs)
    ratio_sq[zero_obs] = np.where(s_cf[zero_obs] > 0.0, np.inf, 0.0)
    ratio_sq[~zero_obs] **= 2

    stat = np.full(cu.z.shape, np.nan)
    stat[focal] = ratio_sq
    discard = np.zeros(cu.z.shape, dtype=bool)
    discard[focal] = ratio_sq > cutoff
    rule = RATIO_10 if alpha == 0.10 else RATIO_05
    return DiscardReport(rule, a, stat, float(cutoff), discard)


def discard_propensity_range(pscores: np.ndarray, z: np.ndarray, a: int) -> DiscardReport:
    """Discard focal units outside the comparison group's score range."""
    pscores = np.asarray(pscores, dtype=float)
    z = np.asarray(z)
    if pscores.shape != z.shape:
        raise ConfigError("pscores and z lengths disagree")
    if not np.all(np.isfinite(pscores)):
        raise ConfigError("pscores must be finite")
    focal = _focal_mask(z, a)
    comparison = z == 1 - a
    if not np.any(comparison):
        raise EmptyComparisonGroupError(f"no units in comparison group z={1 - a}")
    lo = float(pscores[comparison].min())
    hi = float(pscores[comparison].max())

    stat = np.full(z.shape, np.nan)
    stat[focal] = pscores[focal]
    discard = np.zeros(z.shape, dtype=bool)
    discard[focal] = (pscores[focal] < lo) | (pscores[focal] > hi)
    return DiscardReport(PROPENSITY_RANGE, a, stat, (lo, hi), discard)
