"""Experiment harness: k rules, spec validation, analytic tail bounds,
fits, CSV reproducibility, and plot emission."""

import math
import random

import pytest

from gossipnet.experiments import (
    ExperimentSpec,
    FitReport,
    bound_ratio,
    default_trials,
    emit_plots,
    fit_csv,
    fit_rows,
    load_csv,
    resolve_k,
    run_experiment,
    tail_bounds,
)
from gossipnet.protocols import CSV_HEADER


def small_spec(tmp_path, **kw):
    args = dict(protocol="uniform_ag", family="line",
                n_list=(8, 12, 16, 24), k_rule="equal_n",
                time_model="sync", trials=5, seed=1,
                out_csv=str(tmp_path / "results.csv"))
    args.update(kw)
    return ExperimentSpec(**args)


# ------------------------------------------------------------- k rules

def test_resolve_k_rules():
    assert resolve_k("fixed:8", 32) == 8
    assert resolve_k("equal_n", 32) == 32
    assert resolve_k("sqrt_n", 30) == 5
    assert resolve_k("log_n", 32) == 5
    assert resolve_k("log_n", 33) == 6  # ceil of log2
    assert resolve_k("polylog:2", 32) == 25
    assert resolve_k("polylog:1", 64) == 6


def test_resolve_k_errors():
    with pytest.raises(ValueError):
        resolve_k("fixed:0", 32)
    with pytest.raises(ValueError):
        resolve_k("fixed:64", 32)
    with pytest.raises(ValueError):
        resolve_k("cube_n", 32)


def test_default_trials_thresholds():
    assert default_trials(128) == 200
    assert default_trials(129) == 50


# ---------------------------------------------------------------- spec

def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="flood", family="line", n_list=(8,))
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="hypercube",
                       n_list=(8,))
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="line", n_list=())
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="line", n_list=(8,),
                       k_rule="fixed:16")
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="line", n_list=(8,),
                       q=3)
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="line", n_list=(8,),
                       trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="uniform_ag", family="line", n_list=(8,),
                       percentile=0)


def test_spec_from_config_and_overrides():
    config = {"protocol": "tag", "family": "grid", "n": [16, 36],
              "k": "sqrt_n", "trials": 7, "out": "x.csv"}
    spec = ExperimentSpec.from_config(config)
    assert spec.n_list == (16, 36)
    assert spec.k_rule == "sqrt_n"
    assert spec.out_csv == "x.csv"
    spec = ExperimentSpec.from_config(config, trials=9, k="log_n")
    assert spec.trials == 9 and spec.k_rule == "log_n"
    assert spec.to_config()["k"] == "log_n"
    with pytest.raises(ValueError):
        ExperimentSpec.from_config({"protocol": "tag", "family": "grid",
                                    "n": [16], "fanout": 3})
    with pytest.raises(ValueError):
        ExperimentSpec.from_config({"family": "grid", "n": [16]})
    with pytest.raises(ValueError):
        ExperimentSpec.from_config({"protocol": "tag", "family": "grid"})


# ------------------------------------------------------- analytic bounds

def test_tail_bounds_geometric_closed_form():
    m = 6
    assert tail_bounds("geometric", m, 0.5, 2.0) == pytest.approx(
        (2 / math.e) ** m)


def test_tail_bounds_exponential_beats_one_over_n_squared():
    for n, k in [(16, 4), (64, 8), (256, 16)]:
        alpha = 2 + 4 * math.log(n) / k
        assert tail_bounds("exponential", k, 1.0, alpha) <= 1 / n ** 2


def test_tail_bounds_monotone_in_alpha():
    vals = [tail_bounds("geometric", 4, 0.5, a)
            for a in (1.5, 2.0, 3.0, 5.0, 10.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-10  # success probability tends to 1


def test_tail_bounds_errors():
    with pytest.raises(ValueError):
        tail_bounds("geometric", 4, 0.5, 1.0)
    with pytest.raises(ValueError):
        tail_bounds("geometric", 0, 0.5, 2.0)
    with pytest.raises(ValueError):
        tail_bounds("geometric", 4, 1.5, 2.0)
    with pytest.raises(ValueError):
        tail_bounds("weibull", 4, 0.5, 2.0)


def test_bound_ratio():
    assert bound_ratio(100.0, 16, 4, 3, 2) == pytest.approx(
        100.0 / ((4 + math.log(16) + 3) * 2))
    with pytest.raises(ValueError):
        bound_ratio(1.0, 16, 0, 3, 2)


# ------------------------------------------------------------- fitting

def synthetic_rows(ns, exponent, coeff=3.0, per_n=3):
    rows = []
    for n in ns:
        for i in range(per_n):
            rows.append({
                "family": "line", "n": str(n), "k": str(n), "q": "2",
                "protocol": "uniform_ag", "time_model": "sync",
                "action": "EXCHANGE", "seed": str(i),
                "rounds": repr(coeff * n ** exponent),
                "timeslots": "0", "tree_time": "", "tree_diameter": "",
                "capped": "0"})
    return rows


def test_fit_recovers_synthetic_slope():
    rows = synthetic_rows([16, 32, 64, 128, 256], exponent=1.7)
    rep, = fit_rows(rows)
    assert abs(rep.slope - 1.7) < 0.05
    assert rep.slope_ci[0] <= rep.slope <= rep.slope_ci[1]
    assert all(math.isfinite(r) for r in rep.ratios)


def test_fit_order_independent():
    rows = synthetic_rows([16, 32, 64, 128], exponent=1.0, per_n=6)
    shuffled = rows[:]
    random.Random(3).shuffle(shuffled)
    assert fit_rows(rows) == fit_rows(shuffled)


def test_fit_refuses_too_few_sizes():
    rows = synthetic_rows([16, 32, 64], exponent=1.0)
    rep, = fit_rows(rows)
    assert rep.slope is None and rep.slope_ci is None


# ------------------------------------------------- end-to-end sweeps

def test_run_experiment_end_to_end(tmp_path):
    spec = small_spec(tmp_path)
    rep = run_experiment(spec)
    assert rep.ns == (8, 12, 16, 24)
    assert rep.ks == (8, 12, 16, 24)
    assert rep.trials == (5, 5, 5, 5)
    assert rep.slope is not None
    assert rep.capped == 0
    text = (tmp_path / "results.csv").read_text()
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 4 * 5


def test_rerun_is_byte_identical_and_appends(tmp_path):
    spec = small_spec(tmp_path)
    run_experiment(spec)
    first = (tmp_path / "results.csv").read_text()
    run_experiment(spec)
    second = (tmp_path / "results.csv").read_text()
    # append-only: same header, data rows doubled and repeated verbatim
    body = first.split("\n", 1)[1]
    assert second == first + body


def test_worker_count_does_not_change_csv(tmp_path):
    spec1 = small_spec(tmp_path, out_csv=str(tmp_path / "w1.csv"))
    spec3 = small_spec(tmp_path, out_csv=str(tmp_path / "w3.csv"),
                       workers=3)
    run_experiment(spec1)
    run_experiment(spec3)
    assert (tmp_path / "w1.csv").read_text() == \
        (tmp_path / "w3.csv").read_text()


def test_run_experiment_brr(tmp_path):
    spec = small_spec(tmp_path, protocol="brr",
                      out_csv=str(tmp_path / "brr.csv"))
    rep = run_experiment(spec)
    assert rep.protocol == "brr"
    assert rep.ks == (1, 1, 1, 1)
    assert rep.action == "PUSH"


def test_fit_csv_roundtrip(tmp_path):
    spec = small_spec(tmp_path)
    run_experiment(spec)
    out = tmp_path / "report.csv"
    reports = fit_csv(str(tmp_path / "results.csv"), str(out))
    assert len(reports) == 1
    lines = out.read_text().strip().split("\n")
    assert lines[0] == FitReport.CSV_HEADER
    assert len(lines) == 1 + 4


def test_load_csv_rejects_missing_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("family,n,rounds\nline,8,10\n")
    with pytest.raises(ValueError):
        load_csv(str(bad))


# ---------------------------------------------------------------- plots

def test_emit_plots(tmp_path):
    spec = small_spec(tmp_path)
    run_experiment(spec)
    out_dir = tmp_path / "figs"
    written = emit_plots(str(tmp_path / "results.csv"), str(out_dir))
    assert len(written) == 2  # stopping figure + ratio figure
    for path in written:
        assert (tmp_path / "figs").exists()
        with open(path, "rb") as fh:
            assert fh.read(8).startswith(b"\x89PNG")


def test_emit_plots_empty_csv_warns(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text(CSV_HEADER + "\n")
    with pytest.warns(UserWarning):
        written = emit_plots(str(empty), str(tmp_path / "figs"))
    assert written == []


def test_emit_plots_missing_columns(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("family,n\nline,8\n")
    with pytest.raises(ValueError):
        emit_plots(str(bad), str(tmp_path / "figs"))
