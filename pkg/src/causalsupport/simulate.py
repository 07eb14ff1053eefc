"""Synthetic studies with known truths, and a replication driver.

Four stand-alone generators reproduce the worked examples used throughout
the package (a one-predictor study with a strong nonoverlap region, two
two-predictor studies whose control group has holes carved out, and a
40-predictor study for profiling).  A factorial family of 32 scenarios
varies assignment nonlinearity, assignment/response alignment, group ratio,
covariate count, and response-surface parallelism; :func:`run_study` runs
estimation strategies over replications and aggregates standardized bias,
RMSE, discard rates, and interval coverage against the per-replication
truth on each strategy's own retained units.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .bart import BartConfig, fit_bart
from .data import Dataset, child_seed, rng_for
from .errors import (
    CausalSupportError,
    ConfigError,
    DegenerateSampleError,
    NoBracketError,
)
from .estimators import (
    bart_effect,
    fit_logistic,
    iptw_effect,
    match_effect,
    ols_effect,
    reestimate_propensity_after_discard,
)
from .support import (
    counterfactual_sds,
    discard_one_sd,
    discard_propensity_range,
    discard_ratio,
)


@dataclass(frozen=True, eq=False)
class GeneratedStudy:
    """A synthetic dataset plus everything needed to score an estimate."""

    dataset: Dataset
    mu0: np.ndarray
    mu1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    tag: str
    seed: int

    @property
    def true_unit_effects(self) -> np.ndarray:
        """Noiseless unit-level effect of treatment."""
        return self.mu1 - self.mu0

    def conditional_effect(self, mask: np.ndarray) -> float:
        """Mean noiseless effect over the units in ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        if not np.any(mask):
            raise DegenerateSampleError("conditional effect over an empty set")
        return float(self.true_unit_effects[mask].mean())

    @property
    def catt(self) -> float:
        return self.conditional_effect(self.dataset.z == 1)

    @property
    def satt(self) -> float:
        z1 = self.dataset.z == 1
        return float((self.y1 - self.y0)[z1].mean())

    @property
    def catc(self) -> float:
        return self.conditional_effect(self.dataset.z == 0)

    @property
    def satc(self) -> float:
        z0 = self.dataset.z == 0
        return float((self.y1 - self.y0)[z0].mean())


def _finish_study(x, z, y0, y1, mu0, mu1, names, tag, seed) -> GeneratedStudy:
    y = np.where(z, y1, y0)
    d = Dataset(x, z.astype(int), y, names)
    d.require_both_groups()
    return GeneratedStudy(dataset=d, mu0=mu0, mu1=mu1, y0=y0, y1=y1,
                          tag=tag, seed=seed)


def gen_example_1d(n: int, seed: int, noise_sd: float = 1.0) -> GeneratedStudy:
    """One predictor, strong nonoverlap, response ceilings.

    Treated units center at x = 40, controls at x = 20 (both sd 10, capped
    at 60); the control-arm mean is ``72 + 3 sqrt(x)`` and the treated-arm
    mean ``90 + exp(0.06 x)``, each capped at 120.  Stored truths are the
    capped noiseless means, so ``noise_sd = 0`` reproduces them exactly.
    """
    if n < 20:
        raise DegenerateSampleError(f"need n >= 20, got {n}")
    rng = rng_for(seed, "dgp")
    z = rng.random(n) < 0.5
    x = np.where(z, 40.0, 20.0) + 10.0 * rng.standard_normal(n)
    x = np.minimum(x, 60.0)
    base0 = 72.0 + 3.0 * np.sqrt(np.maximum(x, 0.0))
    base1 = 90.0 + np.exp(0.06 * x)
    mu0 = np.minimum(base0, 120.0)
    mu1 = np.minimum(base1, 120.0)
    y0 = np.minimum(base0 + noise_sd * rng.standard_normal(n), 120.0)
    y1 = np.minimum(base1 + noise_sd * rng.standard_normal(n), 120.0)
    return _finish_study(x[:, None], z, y0, y1, mu0, mu1, ("x1",),
                         "example-1d", seed)


def gen_example_2a(n: int, seed: int, noise_sd: float = 1.0) -> GeneratedStudy:
    """Two standard-normal predictors; controls with x1 > 0 deleted.

    Randomized assignment, so the propensity range rule has nothing real to
    find; the response ``z + x2 + x2^2`` depends only on x2, so the deleted
    region is irrelevant to inference.  Unit effects are identically 1.
    """
    if n < 20:
        raise DegenerateSampleError(f"need n >= 20, got {n}")
    rng = rng_for(seed, "dgp")
    x = rng.standard_normal((n, 2))
    z = rng.random(n) < 0.5
    keep = z | (x[:, 0] <= 0.0)
    x, z = x[keep], z[keep]
    m = x.shape[0]
    mu0 = x[:, 1] + x[:, 1] ** 2
    mu1 = 1.0 + mu0
    y0 = mu0 + noise_sd * rng.standard_normal(m)
    y1 = mu1 + noise_sd * rng.standard_normal(m)
    return _finish_study(x, z, y0, y1, mu0, mu1, ("x1", "x2"),
                         "example-2a", seed)


def gen_example_2b(n: int, phi: float, seed: int, noise_sd: float = 1.0) -> GeneratedStudy:
    """Confounded assignment; controls with x1 > 0 and x2 > 0 deleted.

    Assignment probability is ``invlogit(x1 + x2 - 0.5 x1 x2)`` and the
    response ``z + 0.5 x1 + 2 x2 + phi x1 x2``; raising ``phi`` makes the
    response surface harder to extrapolate into the deleted corner.
    """
    if n < 20:
        raise DegenerateSampleError(f"need n >= 20, got {n}")
    rng = rng_for(seed, "dgp")
    x = rng.standard_normal((n, 2))
    p = expit(x[:, 0] + x[:, 1] - 0.5 * x[:, 0] * x[:, 1])
    z = rng.random(n) < p
    keep = z | ~((x[:, 0] > 0.0) & (x[:, 1] > 0.0))
    x, z = x[keep], z[keep]
    m = x.shape[0]
    mu0 = 0.5 * x[:, 0] + 2.0 * x[:, 1] + phi * x[:, 0] * x[:, 1]
    mu1 = 1.0 + mu0
    y0 = mu0 + noise_sd * rng.standard_normal(m)
    y1 = mu1 + noise_sd * rng.standard_normal(m)
    return _finish_study(x, z, y0, y1, mu0, mu1, ("x1", "x2"),
                         "example-2b", seed)


def gen_profiling_example(seed: int, n: int = 600, num_covariates: int = 40,
                          noise_sd: float = 1.0) -> GeneratedStudy:
    """Forty N(1,1) predictors; two control neighborhoods deleted.

    Controls are removed where (x3 > 1 and x4 > 1) or (x5 > 1 and x6 > 1);
    only the second region matters for the control-arm response, which is
    ``0.5 x1 + 2 x2 + 0.5 x5 + 2 x6 + x5 x6 + 0.5 x5^2 + 1.5 x6^2``.
    """
    if num_covariates < 6:
        raise ConfigError("profiling example needs at least 6 covariates")
    rng = rng_for(seed, "dgp")
    x = 1.0 + rng.standard_normal((n, num_covariates))
    z = rng.random(n) < 0.5
    in_deleted = (((x[:, 2] > 1.0) & (x[:, 3] > 1.0))
                  | ((x[:, 4] > 1.0) & (x[:, 5] > 1.0)))
    keep = z | ~in_deleted
    x, z = x[keep], z[keep]
    m = x.shape[0]
    x5, x6 = x[:, 4], x[:, 5]
    common = 0.5 * x[:, 0] + 2.0 * x[:, 1] + 0.5 * x5 + 2.0 * x6
    mu0 = common + x5 * x6 + 0.5 * x5 ** 2 + 1.5 * x6 ** 2
    mu1 = common + 0.2 * x5 * x6
    y0 = mu0 + noise_sd * rng.standard_normal(m)
    y1 = mu1 + noise_sd * rng.standard_normal(m)
    names = tuple(f"x{j + 1}" for j in range(num_covariates))
    return _finish_study(x, z, y0, y1, mu0, mu1, names,
                         "example-profiling", seed)


# ---------------------------------------------------------------------------
# Factorial scenario family
# ---------------------------------------------------------------------------

#: Evaluators for every nonlinear term appearing in the scenario family.
TERMS = {
    "x1": lambda x: x[:, 0],
    "x2": lambda x: x[:, 1],
    "x1^2": lambda x: x[:, 0] ** 2,
    "x2^2": lambda x: x[:, 1] ** 2,
    "x2*x6": lambda x: x[:, 1] * x[:, 5],
    "x5": lambda x: x[:, 4],
    "x6": lambda x: x[:, 5],
    "x7": lambda x: x[:, 6],
    "x8": lambda x: x[:, 7],
    "x9": lambda x: x[:, 8],
    "x10": lambda x: x[:, 9],
    "x5^2": lambda x: x[:, 4] ** 2,
    "x6^2": lambda x: x[:, 5] ** 2,
    "x5*x6": lambda x: x[:, 4] * x[:, 5],
    "x5*x6*x7": lambda x: x[:, 4] * x[:, 5] * x[:, 6],
    "x7^2": lambda x: x[:, 6] ** 2,
    "x7^3": lambda x: x[:, 6] ** 3,
    "x8^2": lambda x: x[:, 7] ** 2,
    "x7*x8": lambda x: x[:, 6] * x[:, 7],
    "x9^2": lambda x: x[:, 8] ** 2,
    "x9*x10": lambda x: x[:, 8] * x[:, 9],
}

ASSIGN_LINEAR = {"x5": 0.4, "x6": 0.2, "x7": 0.4, "x8": 0.2, "x9": 0.4,
                 "x10": 0.4}
ASSIGN_NONLINEAR_EXTRA = {"x5^2": 0.8, "x6^2": 0.8, "x5*x6": 0.5,
                          "x5*x6*x7": 0.3, "x7^2": 0.8, "x7^3": 0.2,
                          "x8^2": 0.4, "x7*x8": 0.3, "x9^2": 0.8,
                          "x9*x10": 0.5}

RESPONSE_ALIGNED_Y0 = {"x5": 0.5, "x7": 2.0, "x9": 0.5, "x10": 2.0,
                       "x5^2": 0.4, "x6^2": 0.8, "x7^2": 0.5, "x8^2": 0.5,
                       "x9^2": 0.5, "x9*x10": 0.7}
RESPONSE_ALIGNED_Y1 = {"x5": 0.5, "x7": 1.0, "x8": 0.5, "x10": 0.8,
                       "x5*x6": 0.3}
RESPONSE_MISALIGNED_Y0 = {"x1": 0.5, "x2": 2.0, "x1^2": 0.4, "x2^2": 0.5,
                          "x2*x6": 1.0, "x5": 0.5, "x6": 2.0, "x5^2": 0.5,
                          "x6^2": 1.5, "x5*x6": 0.7}
RESPONSE_MISALIGNED_Y1 = {"x1": 0.5, "x2": 0.5, "x5": 0.5, "x6": 2.0,
                          "x5*x6": 0.3}

#: Additive shift of the treated surface in the parallel variants.
PARALLEL_SHIFT = 4.0

_ASSIGNMENTS = ("linear", "nonlinear")
_ALIGNMENTS = ("aligned", "misaligned")
_RATIOS = ("4to1", "1to4")
_COVARIATE_COUNTS = (10, 50)
_RESPONSES = ("parallel", "nonparallel")


def evaluate_terms(x: np.ndarray, coefs: dict) -> np.ndarray:
    """Linear combination of the tabulated terms over rows of ``x``."""
    out = np.zeros(x.shape[0])
    for name, c in coefs.items():
        out += c * TERMS[name](x)
    return out


def assignment_coefficients(assignment: str) -> dict:
    if assignment == "linear":
        return dict(ASSIGN_LINEAR)
    if assignment == "nonlinear":
        return {**ASSIGN_LINEAR, **ASSIGN_NONLINEAR_EXTRA}
    raise ConfigError(f"unknown assignment kind {assignment!r}")


def response_coefficients(alignment: str) -> tuple[dict, dict]:
    if alignment == "aligned":
        return dict(RESPONSE_ALIGNED_Y0), dict(RESPONSE_ALIGNED_Y1)
    if alignment == "misaligned":
        return dict(RESPONSE_MISALIGNED_Y0), dict(RESPONSE_MISALIGNED_Y1)
    raise ConfigError(f"unknown alignment kind {alignment!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the factorial design."""

    assignment: str
    alignment: str
    ratio: str
    num_covariates: int
    response: str
    n: int = 500

    def __post_init__(self):
        if self.assignment not in _ASSIGNMENTS:
            raise ConfigError(f"assignment must be one of {_ASSIGNMENTS}")
        if self.alignment not in _ALIGNMENTS:
            raise ConfigError(f"alignment must be one of {_ALIGNMENTS}")
        if self.ratio not in _RATIOS:
            raise ConfigError(f"ratio must be one of {_RATIOS}")
        if self.num_covariates < 10:
            raise ConfigError("scenarios use at least 10 covariates")
        if self.response not in _RESPONSES:
            raise ConfigError(f"response must be one of {_RESPONSES}")
        if self.n < 20:
            raise ConfigError(f"need n >= 20, got {self.n}")

    @property
    def treated_share(self) -> float:
        return 0.8 if self.ratio == "4to1" else 0.2

    @property
    def cell_id(self) -> str:
        return (f"{self.assignment}-{self.alignment}-{self.ratio}"
                f"-p{self.num_covariates}-{self.response}")


def all_scenarios(n: int = 500) -> list:
    """The 32 cells, in a fixed enumeration order."""
    return [
        ScenarioConfig(assignment=a, alignment=al, ratio=r,
                       num_covariates=p, response=resp, n=n)
        for a, al, r, p, resp in itertools.product(
            _ASSIGNMENTS, _ALIGNMENTS, _RATIOS, _COVARIATE_COUNTS, _RESPONSES)
    ]


def calibrate_offset(linear_predictor: np.ndarray, target_share: float,
                     tol: float = 1e-6) -> float:
    """Intercept making the mean assignment probability hit ``target_share``.

    Bisection on ``mean(invlogit(offset + linear_predictor))``, which is
    monotone in the offset.
    """
    if not 0.0 < target_share < 1.0:
        raise ConfigError(f"target share must be in (0, 1), got {target_share}")
    lp = np.asarray(linear_predictor, dtype=float)

    def gap(w: float) -> float:
        return float(expit(w + lp).mean()) - target_share

    lo, hi = -50.0, 50.0
    while gap(lo) > 0.0:
        lo *= 2.0
        if lo < -1e6:
            raise NoBracketError("no lower bracket for offset calibration")
    while gap(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise NoBracketError("no upper bracket for offset calibration")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_CALIBRATION_DRAWS = 100_000
_offset_cache: dict = {}


def scenario_offset(assignment: str, ratio: str) -> float:
    """Cell intercept, calibrated once per (assignment, ratio) pair.

    Uses a fixed-seed calibration sample so the offset is a constant of the
    design rather than a per-replication random quantity.
    """
    key = (assignment, ratio)
    if key not in _offset_cache:
        rng = rng_for(0, "calibration", _ASSIGNMENTS.index(assignment),
                      _RATIOS.index(ratio))
        x = rng.standard_normal((_CALIBRATION_DRAWS, 10))
        eta = evaluate_terms(x, assignment_coefficients(assignment))
        share = 0.8 if ratio == "4to1" else 0.2
        _offset_cache[key] = calibrate_offset(eta, share)
    return _offset_cache[key]


def gen_scenario(cfg: ScenarioConfig, seed: int, noise_sd: float = 1.0) -> GeneratedStudy:
    """Draw one replication of a factorial cell."""
    rng = rng_for(seed, "dgp")
    x = rng.standard_normal((cfg.n, cfg.num_covariates))
    eta = evaluate_terms(x, assignment_coefficients(cfg.assignment))
    p = expit(scenario_offset(cfg.assignment, cfg.ratio) + eta)
    z = rng.random(cfg.n) < p

    y0_coefs, y1_coefs = response_coefficients(cfg.alignment)
    mu0 = evaluate_terms(x, y0_coefs)
    if cfg.response == "parallel":
        mu1 = mu0 + PARALLEL_SHIFT
    else:
        mu1 = evaluate_terms(x, y1_coefs)
    y0 = mu0 + noise_sd * rng.standard_normal(cfg.n)
    y1 = mu1 + noise_sd * rng.standard_normal(cfg.n)
    names = tuple(f"x{j + 1}" for j in range(cfg.num_covariates))
    return _finish_study(x, z, y0, y1, mu0, mu1, names, cfg.cell_id, seed)


# ---------------------------------------------------------------------------
# Replication driver
# ---------------------------------------------------------------------------


class SharedFits:
    """Lazily computed model fits shared across estimation strategies.

    Strategies differ mostly in which discard rule they apply, so the
    underlying ensemble fit, treatment model fit, and discard reports are
    computed at most once each per dataset.
    """

    def __init__(self, dataset: Dataset, bart_config: BartConfig,
                 seed: int, a: int):
        self.dataset = dataset
        self.bart_config = bart_config
        self.seed = seed
        self.a = a
        self._surface = None
        self._cu = None
        self._pm = None
        self._range_report = None
        self._pm_re = None

    @property
    def surface(self):
        if self._surface is None:
            self._surface = fit_bart(self.dataset, self.bart_config,
                                     seed=self.seed)
        return self._surface

    @property
    def cu(self):
        if self._cu is None:
            self._cu = counterfactual_sds(self.surface)
        return self._cu

    @property
    def pm(self):
        if self._pm is None:
            self._pm = fit_logistic(self.dataset.x, self.dataset.z)
        return self._pm

    @property
    def range_report(self):
        if self._range_report is None:
            self._range_report = discard_propensity_range(
                self.pm.pscores, self.dataset.z, self.a)
        return self._range_report

    @property
    def pm_re(self):
        if self._pm_re is None:
            self._pm_re = reestimate_propensity_after_discard(
                self.dataset, self.range_report)
        return self._pm_re


def _focal_mask_for(fits: SharedFits, report) -> np.ndarray:
    focal = fits.dataset.z == fits.a
    if report is None:
        return focal
    return focal & report.retained()


def _m_bart(f: SharedFits):
    return bart_effect(f.surface, None, f.a), _focal_mask_for(f, None)


def _m_bart_discard(f: SharedFits, rule: str):
    if rule == "one-sd":
        rep = discard_one_sd(f.cu, f.a)
    elif rule == "ratio-0.10":
        rep = discard_ratio(f.cu, f.a, alpha=0.10)
    else:
        rep = discard_ratio(f.cu, f.a, alpha=0.05)
    return bart_effect(f.surface, rep, f.a), _focal_mask_for(f, rep)


def _m_match(f: SharedFits):
    est = match_effect(f.dataset, f.pm, None, f.a, seed=f.seed)
    return est, _focal_mask_for(f, None)


def _m_match_d(f: SharedFits, reestimate: bool):
    rep = f.range_report
    pm = f.pm_re if reestimate else f.pm
    est = match_effect(f.dataset, pm, rep, f.a, seed=f.seed)
    return est, _focal_mask_for(f, rep)


def _m_iptw(f: SharedFits):
    return iptw_effect(f.dataset, f.pm, None, f.a), _focal_mask_for(f, None)


def _m_iptw_d(f: SharedFits, reestimate: bool):
    rep = f.range_report
    pm = f.pm_re if reestimate else f.pm
    return iptw_effect(f.dataset, pm, rep, f.a), _focal_mask_for(f, rep)


def _m_ols(f: SharedFits):
    return ols_effect(f.dataset, None), _focal_mask_for(f, None)


STUDY_METHODS = {
    "bart": _m_bart,
    "bart-d1": lambda f: _m_bart_discard(f, "one-sd"),
    "bart-d2": lambda f: _m_bart_discard(f, "ratio-0.10"),
    "bart-d3": lambda f: _m_bart_discard(f, "ratio-0.05"),
    "match": _m_match,
    "match-d": lambda f: _m_match_d(f, reestimate=False),
    "match-d-re": lambda f: _m_match_d(f, reestimate=True),
    "iptw": _m_iptw,
    "iptw-d": lambda f: _m_iptw_d(f, reestimate=False),
    "iptw-d-re": lambda f: _m_iptw_d(f, reestimate=True),
    "ols": _m_ols,
}

#: The strategy set run by default: the ensemble with and without each
#: discard rule, and the propensity strategies with range-rule discarding
#: plus re-estimation.
DEFAULT_STUDY_METHODS = ("bart", "bart-d1", "bart-d2", "bart-d3",
                         "match", "iptw", "match-d-re", "iptw-d-re")


@dataclass(frozen=True)
class MetricRow:
    cell: str
    method: str
    bias: float
    rmse: float
    drop_rate: float
    coverage: float
    n_reps: int
    n_failed: int


@dataclass(frozen=True)
class StudyMetrics:
    rows: tuple

    def by_cell_method(self) -> dict:
        return {(r.cell, r.method): r for r in self.rows}


def run_study(cells, methods, reps: int, seed: int,
              bart_config: BartConfig | None = None, a: int = 1,
              noise_sd: float = 1.0, progress=None) -> StudyMetrics:
    """Run estimation strategies over replications of factorial cells.

    Per replication and method, the error is the estimate minus the
    noiseless mean effect over that method's retained focal units, divided
    by the replication's outcome sd.  Replications where a method raises a
    library error count toward ``n_failed`` for that method only.
    """
    cells = list(cells)
    methods = list(methods)
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    if not cells:
        raise ConfigError("no cells requested")
    if not methods:
        raise ConfigError("no methods requested")
    unknown = [m for m in methods if m != "oracle" and m not in STUDY_METHODS]
    if unknown:
        raise ConfigError(
            f"unknown methods {unknown}; known: oracle, {sorted(STUDY_METHODS)}"
        )
    if bart_config is None:
        bart_config = BartConfig()

    rows = []
    for ci, cfg in enumerate(cells):
        errors = {m: [] for m in methods}
        covered = {m: 0 for m in methods}
        dropped = {m: [] for m in methods}
        failed = {m: 0 for m in methods}
        for rep in range(reps):
            rep_seed = child_seed(seed, "study", ci, rep)
            study = gen_scenario(cfg, rep_seed, noise_sd)
            fits = SharedFits(study.dataset, bart_config, rep_seed, a)
            sd_y = float(study.dataset.y.std(ddof=1))
            n_focal = int(np.sum(study.dataset.z == a))
            for m in methods:
                try:
                    if m == "oracle":
                        mask = study.dataset.z == a
                        t = study.conditional_effect(mask)
                        point, lo, hi, n_disc = t, t, t, 0
                    else:
                        est, mask = STUDY_METHODS[m](fits)
                        point, (lo, hi) = est.point, est.interval
                        n_disc = est.n_discarded
                    truth = study.conditional_effect(mask)
                except CausalSupportError:
                    failed[m] += 1
                    continue
                errors[m].append((point - truth) / sd_y)
                covered[m] += int(lo <= truth <= hi)
                dropped[m].append(n_disc / n_focal)
            if progress is not None:
                progress(cfg.cell_id, rep)
        for m in methods:
            errs = np.asarray(errors[m])
            n_ok = errs.size
            rows.append(MetricRow(
                cell=cfg.cell_id,
                method=m,
                bias=float(abs(errs.mean())) if n_ok else math.nan,
                rmse=float(np.sqrt(np.mean(errs ** 2))) if n_ok else math.nan,
                drop_rate=float(np.mean(dropped[m])) if n_ok else math.nan,
                coverage=covered[m] / n_ok if n_ok else math.nan,
                n_reps=n_ok,
                n_failed=failed[m],
            ))
    return StudyMetrics(rows=tuple(rows))
