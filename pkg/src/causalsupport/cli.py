"""Command line driver.

Three subcommands cover the package's workflows:

``analyze``
    Fit the ensemble and the treatment model to one dataset (a CSV file or
    a built-in synthetic preset), apply every discard rule, and write the
    effect table, per-unit discard table, and residual-sd trace.

``simulate``
    Run estimation strategies over replications of the factorial scenario
    family and write the aggregated metrics table.

``profile``
    Fit regression trees to the discard-rule margins on one dataset and
    write their text renderings.

All artifacts start with ``#`` comment lines recording the resolved
configuration, so a result file is self-describing.  Artifacts are written
through a temporary file and renamed into place; a failing run leaves no
partial outputs.  Library failures print a one-line JSON object to stderr
and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from .bart import BartConfig
from .data import Dataset, format_value, load_csv
from .errors import CausalSupportError, ConfigError
from .profiling import (
    fit_cart,
    one_sd_margin,
    propensity_margin,
    ratio_stat,
    render_tree,
)
from .simulate import (
    DEFAULT_STUDY_METHODS,
    STUDY_METHODS,
    SharedFits,
    all_scenarios,
    gen_example_1d,
    gen_example_2a,
    gen_example_2b,
    gen_profiling_example,
    run_study,
)
from .support import discard_one_sd, discard_propensity_range, discard_ratio

_RULE_ORDER = ("d1", "d2", "d3", "ps")
_RULE_CANONICAL = {
    "d1": "one-sd",
    "d2": "ratio-0.10",
    "d3": "ratio-0.05",
    "ps": "propensity-range",
}
_PRESETS = ("example1d", "example2a", "example2b", "profiling")
_PRESET_DEFAULT_N = {"example1d": 120, "example2a": 250, "example2b": 250,
                     "profiling": 600}

_ANALYZE_ROW_ORDER = tuple(STUDY_METHODS)

_DEFAULTS = {
    "treatment_col": "z",
    "outcome_col": "y",
    "focal": "treated",
    "rules": "d1,d2,d3,ps",
    "trees": 100,
    "iters": 3500,
    "burnin": 500,
    "seed": 0,
    "out": ".",
    "input": None,
    "preset": None,
    "preset_n": None,
    "preset_phi": 3.0,
    "cells": "all",
    "reps": 50,
    "methods": "default",
    "n": 500,
    "depth": 3,
    "cart_min_leaf": 10,
    "unit_summaries": False,
}


def _add_bart_flags(p):
    p.add_argument("--trees", type=int, help="number of trees in the ensemble")
    p.add_argument("--iters", type=int, help="total sampler iterations")
    p.add_argument("--burnin", type=int, help="iterations discarded as burn-in")


def _add_common_flags(p):
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--seed", type=int, help="root seed for all randomness")
    p.add_argument("--out", help="output directory (created if absent)")


def _add_data_flags(p):
    p.add_argument("--input", help="CSV file with treatment, outcome, covariates")
    p.add_argument("--preset", choices=_PRESETS,
                   help="generate a synthetic dataset instead of reading one")
    p.add_argument("--preset-n", type=int, dest="preset_n",
                   help="sample size for the preset generator")
    p.add_argument("--preset-phi", type=float, dest="preset_phi",
                   help="interaction strength for the example2b preset")
    p.add_argument("--treatment-col", dest="treatment_col",
                   help="treatment column name (default z)")
    p.add_argument("--outcome-col", dest="outcome_col",
                   help="outcome column name (default y)")
    p.add_argument("--focal", choices=("treated", "control"),
                   help="group whose estimand is targeted (default treated)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-support",
        description="Identify observations lacking common causal support.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="fit one dataset and write results")
    _add_data_flags(pa)
    pa.add_argument("--rules", help="comma list from d1,d2,d3,ps (default all)")
    _add_bart_flags(pa)
    _add_common_flags(pa)

    ps = sub.add_parser("simulate", help="run the factorial scenario study")
    ps.add_argument("--cells", help="comma list of cell ids, or 'all'")
    ps.add_argument("--reps", type=int, help="replications per cell")
    ps.add_argument("--methods",
                    help="comma list of strategies, or 'default'")
    ps.add_argument("--n", type=int, help="observations per replication")
    ps.add_argument("--focal", choices=("treated", "control"))
    _add_bart_flags(ps)
    _add_common_flags(ps)

    pp = sub.add_parser("profile", help="explain discards with shallow trees")
    _add_data_flags(pp)
    pp.add_argument("--rules", help="comma list from d1,d2,d3,ps (default all)")
    pp.add_argument("--depth", type=int, help="maximum tree depth")
    pp.add_argument("--cart-min-leaf", type=int, dest="cart_min_leaf",
                    help="minimum rows per profiling-tree leaf")
    pp.add_argument("--unit-summaries", action="store_true", default=None,
                    dest="unit_summaries",
                    help="also write per-unit rule margins")
    _add_bart_flags(pp)
    _add_common_flags(pp)
    return parser


def _resolve_settings(args) -> dict:
    """Merge defaults, the optional JSON config file, and CLI flags."""
    given = {k: v for k, v in vars(args).items()
             if k not in ("command", "config") and v is not None}
    from_file = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(from_file) - set(_DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")

    allowed = {k for k in vars(args) if k not in ("command", "config")}
    settings = {k: v for k, v in _DEFAULTS.items() if k in allowed}
    settings.update({k: v for k, v in from_file.items() if k in allowed})
    settings.update(given)
    settings["command"] = args.command
    return settings


def _bart_config(s: dict) -> BartConfig:
    cfg = BartConfig(num_trees=int(s["trees"]), iterations=int(s["iters"]),
                     burn_in=int(s["burnin"]))
    cfg.validate()
    return cfg


def _parse_rules(raw: str) -> tuple:
    rules = tuple(r.strip() for r in raw.split(",") if r.strip())
    if not rules:
        raise ConfigError("no rules requested")
    bad = [r for r in rules if r not in _RULE_ORDER]
    if bad:
        raise ConfigError(f"unknown rules {bad}; choose from {list(_RULE_ORDER)}")
    return tuple(r for r in _RULE_ORDER if r in rules)


def _load_dataset(s: dict) -> Dataset:
    if s.get("input") and s.get("preset"):
        raise ConfigError("give either --input or --preset, not both")
    if s.get("input"):
        return load_csv(s["input"], s["treatment_col"], s["outcome_col"])
    preset = s.get("preset")
    if not preset:
        raise ConfigError("either --input or --preset is required")
    n = s.get("preset_n") or _PRESET_DEFAULT_N[preset]
    seed = int(s["seed"])
    if preset == "example1d":
        return gen_example_1d(n, seed).dataset
    if preset == "example2a":
        return gen_example_2a(n, seed).dataset
    if preset == "example2b":
        return gen_example_2b(n, float(s["preset_phi"]), seed).dataset
    return gen_profiling_example(seed, n=n).dataset


def _header_lines(s: dict) -> list:
    lines = [f"causal-support {s['command']}"]
    for key in sorted(k for k in s if k != "command"):
        lines.append(f"{key}={json.dumps(s[key], sort_keys=True)}")
    return lines


def _write_artifact(path: str, header_lines, write_body):
    """Write through a temp file and rename into place."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(path: str, header_lines, columns, rows):
    def body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)

    _write_artifact(path, header_lines, body)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format_value(v)
    return str(v)


def _discard_report(fits: SharedFits, rule: str):
    if rule == "d1":
        return discard_one_sd(fits.cu, fits.a)
    if rule == "d2":
        return discard_ratio(fits.cu, fits.a, alpha=0.10)
    if rule == "d3":
        return discard_ratio(fits.cu, fits.a, alpha=0.05)
    return discard_propensity_range(fits.pm.pscores, fits.dataset.z, fits.a)


def _cmd_analyze(s: dict) -> None:
    d = _load_dataset(s)
    a = 1 if s["focal"] == "treated" else 0
    rules = _parse_rules(s["rules"])
    cfg = _bart_config(s)
    seed = int(s["seed"])
    fits = SharedFits(d, cfg, seed, a)
    notes = []

    effect_rows = []
    for name in _ANALYZE_ROW_ORDER:
        try:
            est, _ = STUDY_METHODS[name](fits)
            effect_rows.append([
                name, est.estimand, _fmt(float(est.point)),
                _fmt(float(est.uncertainty)),
                _fmt(float(est.interval[0])), _fmt(float(est.interval[1])),
                est.n_focal_retained, est.n_discarded, est.note,
            ])
        except CausalSupportError as e:
            effect_rows.append([name, "", "nan", "nan", "nan", "nan", "", "",
                                f"failed: {type(e).__name__}: {e}"])

    discard_rows = []
    for rule in rules:
        try:
            rep = _discard_report(fits, rule)
        except CausalSupportError as e:
            notes.append(f"rule {_RULE_CANONICAL[rule]} failed: "
                         f"{type(e).__name__}: {e}")
            continue
        if isinstance(rep.threshold, tuple):
            lo, hi = (_fmt(float(t)) for t in rep.threshold)
        else:
            lo, hi = "", _fmt(float(rep.threshold))
        for i in range(d.n):
            stat = rep.statistic[i]
            if math.isnan(stat):
                continue
            discard_rows.append([i + 1, rep.rule, _fmt(float(stat)), lo, hi,
                                 int(rep.discard[i])])

    surface = fits.surface
    trace_rows = [[it + 1, _fmt(float(sig))]
                  for it, sig in enumerate(surface.sigma_trace)]

    out = s["out"]
    os.makedirs(out, exist_ok=True)
    header = _header_lines(s)
    _write_table(os.path.join(out, "effects.csv"), header,
                 ["method", "estimand", "point", "se", "ci_low", "ci_high",
                  "n_focal_retained", "n_discarded", "note"],
                 effect_rows)
    _write_table(os.path.join(out, "discards.csv"), header + notes,
                 ["unit", "rule", "statistic", "threshold_low",
                  "threshold_high", "discard"],
                 discard_rows)
    _write_table(os.path.join(out, "sigma_trace.csv"), header,
                 ["iteration", "sigma"], trace_rows)


def _cmd_simulate(s: dict) -> None:
    cfg = _bart_config(s)
    a = 1 if s.get("focal", "treated") == "treated" else 0
    n = int(s["n"])
    catalog = {c.cell_id: c for c in all_scenarios(n)}
    if s["cells"] == "all":
        cells = list(catalog.values())
    else:
        ids = [c.strip() for c in s["cells"].split(",") if c.strip()]
        missing = [c for c in ids if c not in catalog]
        if missing:
            raise ConfigError(f"unknown cells {missing}")
        cells = [catalog[c] for c in ids]
    if s["methods"] == "default":
        methods = list(DEFAULT_STUDY_METHODS)
    else:
        methods = [m.strip() for m in s["methods"].split(",") if m.strip()]
    metrics = run_study(cells, methods, int(s["reps"]), int(s["seed"]),
                        bart_config=cfg, a=a)

    rows = [[r.cell, r.method, _fmt(r.bias), _fmt(r.rmse), _fmt(r.drop_rate),
             _fmt(r.coverage), r.n_reps, r.n_failed]
            for r in metrics.rows]
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    _write_table(os.path.join(out, "metrics.csv"), _header_lines(s),
                 ["cell", "method", "bias", "rmse", "drop_rate", "coverage",
                  "n_reps", "n_failed"],
                 rows)


def _profile_response(fits: SharedFits, rule: str):
    if rule == "d1":
        return one_sd_margin(fits.cu, fits.a)
    if rule == "d2":
        return ratio_stat(fits.cu, fits.a, alpha=0.10)
    if rule == "d3":
        return ratio_stat(fits.cu, fits.a, alpha=0.05)
    return propensity_margin(fits.pm.pscores, fits.dataset.z, fits.a)


def _cmd_profile(s: dict) -> None:
    d = _load_dataset(s)
    a = 1 if s["focal"] == "treated" else 0
    rules = _parse_rules(s["rules"])
    cfg = _bart_config(s)
    fits = SharedFits(d, cfg, int(s["seed"]), a)

    blocks = []
    margin_rows = []
    for rule in rules:
        title = _RULE_CANONICAL[rule]
        try:
            resp = _profile_response(fits, rule)
            rep = _discard_report(fits, rule)
            tree = fit_cart(d.x[resp.focal_rows], resp.values, names=d.names,
                            max_depth=int(s["depth"]),
                            min_leaf=int(s["cart_min_leaf"]))
        except CausalSupportError as e:
            blocks.append(f"== rule {title} ==\n"
                          f"failed: {type(e).__name__}: {e}")
            continue
        blocks.append(
            f"== rule {title} (focal={s['focal']}, n={resp.focal_rows.size}, "
            f"discarded={rep.n_discarded}) ==\n" + render_tree(tree)
        )
        for i, row in enumerate(resp.focal_rows):
            margin_rows.append([int(row) + 1, title,
                                _fmt(float(resp.values[i]))])

    out = s["out"]
    os.makedirs(out, exist_ok=True)
    header = _header_lines(s)

    def body(fh):
        fh.write("\n\n".join(blocks))
        fh.write("\n")

    _write_artifact(os.path.join(out, "profiles.txt"), header, body)
    if s.get("unit_summaries"):
        _write_table(os.path.join(out, "unit_summaries.csv"), header,
                     ["unit", "rule", "value"], margin_rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        s = _resolve_settings(args)
        if args.command == "analyze":
            _cmd_analyze(s)
        elif args.command == "simulate":
            _cmd_simulate(s)
        else:
            _cmd_profile(s)
    except CausalSupportError as e:
        payload = {"error": type(e).__name__, "message": str(e),
                   "details": e.details()}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
