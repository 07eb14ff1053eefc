"""Checks of the synthetic-study generators and the replication driver.

Coefficient tables are re-keyed here in a second notation (tuples of factor
names with multiplicity) and compared term by term, so a transcription slip
in either copy fails loudly.
"""

import numpy as np
import pytest
from scipy.special import expit

from causalsupport import (
    BartConfig,
    ConfigError,
    calibrate_offset,
    all_scenarios,
    gen_example_1d,
    gen_example_2a,
    gen_example_2b,
    gen_profiling_example,
    gen_scenario,
    run_study,
    scenario_offset,
    ScenarioConfig,
)
from causalsupport.simulate import (
    ASSIGN_LINEAR,
    ASSIGN_NONLINEAR_EXTRA,
    PARALLEL_SHIFT,
    RESPONSE_ALIGNED_Y0,
    RESPONSE_ALIGNED_Y1,
    RESPONSE_MISALIGNED_Y0,
    RESPONSE_MISALIGNED_Y1,
    TERMS,
    assignment_coefficients,
    evaluate_terms,
    response_coefficients,
)


class TestOnePredictor:
    def test_truths_and_ceilings(self):
        s = gen_example_1d(400, seed=5)
        x = s.dataset.x[:, 0]
        assert x.max() <= 60.0
        np.testing.assert_allclose(
            s.mu0, np.minimum(72.0 + 3.0 * np.sqrt(np.maximum(x, 0.0)), 120.0))
        np.testing.assert_allclose(
            s.mu1, np.minimum(90.0 + np.exp(0.06 * x), 120.0))
        assert s.y0.max() <= 120.0
        assert s.y1.max() <= 120.0
        # the treated arm has mass above the ceiling crossing near x = 56.7
        assert np.any(s.mu1 == 120.0)

    def test_zero_noise_recovers_truths(self):
        s = gen_example_1d(100, seed=3, noise_sd=0.0)
        np.testing.assert_allclose(s.y0, s.mu0)
        np.testing.assert_allclose(s.y1, s.mu1)
        np.testing.assert_allclose(
            s.dataset.y, np.where(s.dataset.z == 1, s.mu1, s.mu0))

    def test_group_centers_differ(self):
        s = gen_example_1d(800, seed=1)
        x, z = s.dataset.x[:, 0], s.dataset.z
        assert x[z == 1].mean() > x[z == 0].mean() + 10

    def test_too_small_rejected(self):
        from causalsupport import DegenerateSampleError
        with pytest.raises(DegenerateSampleError):
            gen_example_1d(10, seed=0)

    def test_deterministic(self):
        a = gen_example_1d(50, seed=9)
        b = gen_example_1d(50, seed=9)
        np.testing.assert_array_equal(a.dataset.y, b.dataset.y)
        c = gen_example_1d(50, seed=10)
        assert not np.array_equal(a.dataset.y, c.dataset.y)


class TestTwoPredictor:
    def test_2a_deletion_and_truth(self):
        s = gen_example_2a(600, seed=4)
        x, z = s.dataset.x, s.dataset.z
        assert not np.any((z == 0) & (x[:, 0] > 0))
        assert np.any((z == 1) & (x[:, 0] > 0))
        np.testing.assert_allclose(s.mu0, x[:, 1] + x[:, 1] ** 2)
        np.testing.assert_allclose(s.true_unit_effects, 1.0)

    def test_2b_deletion_and_truth(self):
        for phi in (1.0, 3.0):
            s = gen_example_2b(600, phi, seed=4)
            x, z = s.dataset.x, s.dataset.z
            assert not np.any((z == 0) & (x[:, 0] > 0) & (x[:, 1] > 0))
            assert np.any((z == 1) & (x[:, 0] > 0) & (x[:, 1] > 0))
            np.testing.assert_allclose(
                s.mu0,
                0.5 * x[:, 0] + 2.0 * x[:, 1] + phi * x[:, 0] * x[:, 1])
            np.testing.assert_allclose(s.true_unit_effects, 1.0)

    def test_2b_assignment_is_confounded(self):
        s = gen_example_2b(2000, 1.0, seed=8)
        x, z = s.dataset.x, s.dataset.z
        # higher x1 + x2 means higher treatment probability
        score = x[:, 0] + x[:, 1] - 0.5 * x[:, 0] * x[:, 1]
        assert score[z == 1].mean() > score[z == 0].mean()


class TestProfilingExample:
    def test_deletions_and_truth(self):
        s = gen_profiling_example(seed=2)
        x, z = s.dataset.x, s.dataset.z
        assert x.shape[1] == 40
        assert s.dataset.names[:6] == ("x1", "x2", "x3", "x4", "x5", "x6")
        deleted = (((x[:, 2] > 1) & (x[:, 3] > 1))
                   | ((x[:, 4] > 1) & (x[:, 5] > 1)))
        assert not np.any((z == 0) & deleted)
        assert np.any((z == 1) & deleted)
        x5, x6 = x[:, 4], x[:, 5]
        base = 0.5 * x[:, 0] + 2.0 * x[:, 1] + 0.5 * x5 + 2.0 * x6
        np.testing.assert_allclose(
            s.mu0, base + x5 * x6 + 0.5 * x5 ** 2 + 1.5 * x6 ** 2)
        np.testing.assert_allclose(s.mu1, base + 0.2 * x5 * x6)

    def test_covariates_center_near_one(self):
        s = gen_profiling_example(seed=3)
        assert s.dataset.x.mean() == pytest.approx(1.0, abs=0.1)


# -- factorial family --------------------------------------------------------

# Second, independent keying of the coefficient tables: tuples of factors
# with multiplicity.  Any mismatch against the string-keyed tables in the
# package marks a transcription error in one of the two.
GAMMA_L2 = {("x5",): 0.4, ("x6",): 0.2, ("x7",): 0.4, ("x8",): 0.2,
            ("x9",): 0.4, ("x10",): 0.4}
GAMMA_NL2 = {("x5", "x5"): 0.8, ("x6", "x6"): 0.8, ("x5", "x6"): 0.5,
             ("x5", "x6", "x7"): 0.3, ("x7", "x7"): 0.8,
             ("x7", "x7", "x7"): 0.2, ("x8", "x8"): 0.4, ("x7", "x8"): 0.3,
             ("x9", "x9"): 0.8, ("x9", "x10"): 0.5}
BETA_A_Y0 = {("x5",): 0.5, ("x7",): 2.0, ("x9",): 0.5, ("x10",): 2.0,
             ("x5", "x5"): 0.4, ("x6", "x6"): 0.8, ("x7", "x7"): 0.5,
             ("x8", "x8"): 0.5, ("x9", "x9"): 0.5, ("x9", "x10"): 0.7}
BETA_A_Y1 = {("x5",): 0.5, ("x7",): 1.0, ("x8",): 0.5, ("x10",): 0.8,
             ("x5", "x6"): 0.3}
BETA_M_Y0 = {("x1",): 0.5, ("x2",): 2.0, ("x1", "x1"): 0.4,
             ("x2", "x2"): 0.5, ("x2", "x6"): 1.0, ("x5",): 0.5,
             ("x6",): 2.0, ("x5", "x5"): 0.5, ("x6", "x6"): 1.5,
             ("x5", "x6"): 0.7}
BETA_M_Y1 = {("x1",): 0.5, ("x2",): 0.5, ("x5",): 0.5, ("x6",): 2.0,
             ("x5", "x6"): 0.3}


def eval_tuple_keyed(x, table):
    out = np.zeros(x.shape[0])
    for factors, c in table.items():
        term = np.ones(x.shape[0])
        for name in factors:
            term = term * x[:, int(name[1:]) - 1]
        out += c * term
    return out


class TestCoefficientTables:
    @pytest.mark.parametrize("string_keyed,tuple_keyed", [
        (ASSIGN_LINEAR, GAMMA_L2),
        (ASSIGN_NONLINEAR_EXTRA, GAMMA_NL2),
        (RESPONSE_ALIGNED_Y0, BETA_A_Y0),
        (RESPONSE_ALIGNED_Y1, BETA_A_Y1),
        (RESPONSE_MISALIGNED_Y0, BETA_M_Y0),
        (RESPONSE_MISALIGNED_Y1, BETA_M_Y1),
    ])
    def test_both_keyings_agree(self, string_keyed, tuple_keyed, rng):
        assert len(string_keyed) == len(tuple_keyed)
        x = rng.normal(size=(64, 10))
        np.testing.assert_allclose(evaluate_terms(x, string_keyed),
                                   eval_tuple_keyed(x, tuple_keyed),
                                   rtol=1e-12)

    def test_nonlinear_assignment_extends_linear(self, rng):
        x = rng.normal(size=(32, 10))
        full = assignment_coefficients("nonlinear")
        np.testing.assert_allclose(
            evaluate_terms(x, full),
            evaluate_terms(x, ASSIGN_LINEAR)
            + evaluate_terms(x, ASSIGN_NONLINEAR_EXTRA), rtol=1e-12)

    def test_every_term_key_evaluates(self, rng):
        x = rng.normal(size=(8, 10))
        for name, fn in TERMS.items():
            assert fn(x).shape == (8,)


class TestScenarioGrid:
    def test_thirty_two_unique_cells(self):
        cells = all_scenarios()
        assert len(cells) == 32
        ids = [c.cell_id for c in cells]
        assert len(set(ids)) == 32
        assert ids[0] == "linear-aligned-4to1-p10-parallel"
        assert all(c.n == 500 for c in cells)

    def test_cell_id_round_trips_factors(self):
        c = ScenarioConfig(assignment="nonlinear", alignment="misaligned",
                           ratio="1to4", num_covariates=50,
                           response="nonparallel")
        assert c.cell_id == "nonlinear-misaligned-1to4-p50-nonparallel"
        assert c.treated_share == 0.2

    def test_invalid_factor_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(assignment="cubic", alignment="aligned",
                           ratio="4to1", num_covariates=10,
                           response="parallel")


class TestOffsetCalibration:
    def test_closed_form_at_zero_predictor(self):
        lp = np.zeros(1000)
        assert calibrate_offset(lp, 0.5) == pytest.approx(0.0, abs=1e-6)
        assert calibrate_offset(lp, 0.8) == pytest.approx(
            np.log(0.8 / 0.2), abs=1e-5)

    def test_monotone_in_target(self):
        rng = np.random.default_rng(2)
        lp = rng.normal(size=500)
        assert calibrate_offset(lp, 0.2) < calibrate_offset(lp, 0.8)

    def test_bad_target(self):
        with pytest.raises(ConfigError):
            calibrate_offset(np.zeros(10), 1.0)

    def test_scenario_offset_hits_target(self):
        from causalsupport.data import rng_for
        for assignment in ("linear", "nonlinear"):
            for ratio, target in (("4to1", 0.8), ("1to4", 0.2)):
                w = scenario_offset(assignment, ratio)
                idx_a = ("linear", "nonlinear").index(assignment)
                idx_r = ("4to1", "1to4").index(ratio)
                rng = rng_for(0, "calibration", idx_a, idx_r)
                x = rng.standard_normal((100_000, 10))
                eta = evaluate_terms(x, assignment_coefficients(assignment))
                assert float(expit(w + eta).mean()) == pytest.approx(
                    target, abs=2e-6)

    def test_realized_share_close(self):
        cfg = ScenarioConfig(assignment="linear", alignment="aligned",
                             ratio="1to4", num_covariates=10,
                             response="parallel", n=4000)
        s = gen_scenario(cfg, seed=0)
        assert s.dataset.z.mean() == pytest.approx(0.2, abs=0.05)


class TestGenScenario:
    def test_parallel_effect_is_constant_shift(self):
        cfg = ScenarioConfig(assignment="linear", alignment="aligned",
                             ratio="4to1", num_covariates=10,
                             response="parallel", n=200)
        s = gen_scenario(cfg, seed=6)
        np.testing.assert_allclose(s.true_unit_effects, PARALLEL_SHIFT)
        np.testing.assert_allclose(
            s.mu0, eval_tuple_keyed(s.dataset.x, BETA_A_Y0), rtol=1e-12)

    def test_nonparallel_surfaces(self):
        cfg = ScenarioConfig(assignment="nonlinear", alignment="misaligned",
                             ratio="1to4", num_covariates=50,
                             response="nonparallel", n=200)
        s = gen_scenario(cfg, seed=6)
        np.testing.assert_allclose(
            s.mu0, eval_tuple_keyed(s.dataset.x, BETA_M_Y0), rtol=1e-12)
        np.testing.assert_allclose(
            s.mu1, eval_tuple_keyed(s.dataset.x, BETA_M_Y1), rtol=1e-12)
        assert np.std(s.true_unit_effects) > 0.1
        assert s.dataset.p == 50

    def test_deterministic_per_seed(self):
        cfg = all_scenarios(n=100)[3]
        a = gen_scenario(cfg, seed=5)
        b = gen_scenario(cfg, seed=5)
        np.testing.assert_array_equal(a.dataset.y, b.dataset.y)
        c = gen_scenario(cfg, seed=6)
        assert not np.array_equal(a.dataset.y, c.dataset.y)


class TestRunStudy:
    def test_oracle_has_zero_error(self):
        cells = [ScenarioConfig(assignment="linear", alignment="aligned",
                                ratio="4to1", num_covariates=10,
                                response="parallel", n=80)]
        m = run_study(cells, ["oracle", "ols"], reps=3, seed=1)
        rows = m.by_cell_method()
        oracle = rows[(cells[0].cell_id, "oracle")]
        assert oracle.bias == pytest.approx(0.0, abs=1e-12)
        assert oracle.rmse == pytest.approx(0.0, abs=1e-12)
        assert oracle.coverage == 1.0
        assert oracle.drop_rate == 0.0
        assert oracle.n_reps == 3
        ols = rows[(cells[0].cell_id, "ols")]
        # linear parallel surface: regression adjustment is nearly right
        assert ols.bias < 0.2

    def test_all_strategies_smoke(self, tiny_bart_config):
        cells = [ScenarioConfig(assignment="linear", alignment="aligned",
                                ratio="4to1", num_covariates=10,
                                response="parallel", n=80)]
        methods = ["bart", "bart-d1", "bart-d2", "bart-d3", "match",
                   "match-d", "match-d-re", "iptw", "iptw-d", "iptw-d-re",
                   "ols", "oracle"]
        m = run_study(cells, methods, reps=1, seed=3,
                      bart_config=tiny_bart_config)
        assert len(m.rows) == len(methods)
        for row in m.rows:
            assert row.n_reps + row.n_failed == 1

    def test_config_validation(self):
        cells = all_scenarios(n=50)[:1]
        with pytest.raises(ConfigError):
            run_study(cells, [], reps=0, seed=0)
        with pytest.raises(ConfigError):
            run_study(cells, ["bart"], reps=0, seed=0)
        with pytest.raises(ConfigError):
            run_study([], ["bart"], reps=1, seed=0)
        with pytest.raises(ConfigError):
            run_study(cells, ["no-such-method"], reps=1, seed=0)

    def test_deterministic(self, tiny_bart_config):
        cells = [ScenarioConfig(assignment="linear", alignment="aligned",
                                ratio="4to1", num_covariates=10,
                                response="parallel", n=60)]
        a = run_study(cells, ["bart-d1"], reps=2, seed=7,
                      bart_config=tiny_bart_config)
        b = run_study(cells, ["bart-d1"], reps=2, seed=7,
                      bart_config=tiny_bart_config)
        assert a.rows[0].bias == b.rows[0].bias
        assert a.rows[0].rmse == b.rows[0].rmse
