"""Config validation, deterministic reports, driver smoke runs, CLI exit codes."""
import json
import math

import pytest

from blab.cli import main
from blab.errors import SchemaError
from blab.harness import ExperimentConfig, Report, run_experiment


NWO_SMALL = {
    "experiment": "nwo_decay",
    "space": {"n": 0, "lam": 1.0},
    "order": 4,
    "depth": 2,
    "modes": ["kernel"],
    "scales": [0, 1],
    "nodes": 3,
}

MO_SMALL = {
    "experiment": "mo_power",
    "space": {"n": 0, "lam": 1.0},
    "symbols": [{"kind": "bump", "center": [0.5], "radius": 0.3}],
    "window": {"lo": [0.0], "hi": [1.0]},
    "k_range": [-1, 3],
    "p": 3,
    "q": 3,
}


# -- schema validation ------------------------------------------------------

def _bad(d, needle: str):
    with pytest.raises(SchemaError) as exc:
        ExperimentConfig.from_dict(d)
    assert needle in str(exc.value)


def test_config_rejects_unknown_keys():
    _bad(dict(NWO_SMALL, junk=1), "unknown keys")
    _bad(dict(NWO_SMALL, tolerances={"junk": 1.0}), "unknown keys")


def test_config_rejects_bad_experiment():
    _bad({"experiment": "nope", "space": {"n": 0, "lam": 1.0}}, "'experiment'")
    _bad({"space": {"n": 0, "lam": 1.0}}, "'experiment'")


def test_config_rejects_bad_symbol():
    d = dict(MO_SMALL, symbols=[{"kind": "wiggle"}])
    _bad(d, "unknown symbol kind")
    d = dict(MO_SMALL, symbols=[{"kind": "bump", "center": [0.5]}])
    _bad(d, "invalid symbol parameters")


def test_config_rejects_bad_resolutions():
    base = {
        "experiment": "cutoff",
        "space": {"n": 0, "lam": 1.0},
        "symbol": {"kind": "bump", "center": [0.5], "radius": 0.3},
        "window": {"lo": [0.0], "hi": [1.0]},
        "ps": [2.0],
    }
    _bad(dict(base, resolutions=[4, 8]), "at least 3")
    _bad(dict(base, resolutions=[4, 8, 8]), "strictly increasing")
    _bad(dict(base, resolutions=[8, 4, 2]), "strictly increasing")


def test_config_rejects_ell_out_of_range():
    _bad(dict(NWO_SMALL, ell=2), "derivative direction")


def test_config_rejects_bump_exponent_at_or_below_critical_index():
    base = {"experiment": "bump_membership", "space": {"n": 0, "lam": 1.0}}
    for p in (0.5, 1.0):
        with pytest.raises(SchemaError) as exc:
            ExperimentConfig.from_dict(dict(base, p=p))
        assert "critical index" in str(exc.value)
    # just above the index is accepted
    ExperimentConfig.from_dict(dict(base, p=1.01))


def test_config_rejects_bad_lorentz_q_string():
    _bad(dict(MO_SMALL, q="infinity"), "only the string 'inf'")
    cfg = ExperimentConfig.from_dict(dict(MO_SMALL, q="inf"))
    assert math.isinf(cfg.data["lp"].q)


def test_config_rejects_negative_seed():
    _bad(dict(NWO_SMALL, seed=-1), "seed")


def test_config_from_file_rejects_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SchemaError) as exc:
        ExperimentConfig.from_file(path)
    assert "invalid JSON" in str(exc.value)


def test_tolerance_defaults_and_overrides():
    cfg = ExperimentConfig.from_dict(dict(NWO_SMALL))
    assert cfg.tolerances["slope_max"] == -2.0
    cfg = ExperimentConfig.from_dict(dict(NWO_SMALL, tolerances={"slope_max": -1.0}))
    assert cfg.tolerances["slope_max"] == -1.0


# -- report rendering -------------------------------------------------------

def test_report_renders_nan_as_undefined_and_inf_verbatim():
    rep = Report("cutoff")
    rep.add({"p": 2.0}, "ratio", math.nan)
    rep.add({"p": 2.0}, "bound", math.inf)
    csv = rep.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "experiment,params,resolution,metric,value"
    assert lines[1].endswith(",ratio,undefined")
    assert lines[2].endswith(",bound,inf")
    # runtimes stay out of the CSV entirely
    assert "runtime" not in csv


def test_report_write_outputs_are_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict(MO_SMALL)
    outs = []
    for tag in ("a", "b"):
        rep = run_experiment(cfg)
        dest = tmp_path / tag
        rep.write(dest, threads=1)
        outs.append(dest)
    for name in ("report.csv", "summary.json"):
        b0 = (outs[0] / name).read_bytes()
        b1 = (outs[1] / name).read_bytes()
        assert b0 == b1, f"{name} differs between identical runs"
    meta = json.loads((outs[0] / "run_meta.json").read_text())
    assert "runtime_s" in meta and meta["threads"] == 1


# -- driver smoke runs ------------------------------------------------------

def test_nwo_driver_passes_checks():
    rep = run_experiment(ExperimentConfig.from_dict(NWO_SMALL))
    assert rep.passed()
    names = [n for n, _, _ in rep.checks]
    assert "decay_slope_kernel" in names
    assert "scale_uniformity_kernel" in names
    slopes = [r.value for r in rep.rows if r.metric == "slope"]
    assert slopes and all(v <= -2.0 for v in slopes)


def test_cutoff_driver_flags_constant_symbol_as_zero():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "cutoff",
            "space": {"n": 0, "lam": 1.0},
            "symbol": {"kind": "constant", "value": 2.0},
            "window": {"lo": [0.0], "hi": [1.0]},
            "resolutions": [2, 4, 8],
            "ps": [2.0],
        }
    )
    rep = run_experiment(cfg)
    verdicts = [r.value for r in rep.rows if r.metric == "verdict"]
    assert verdicts == ["zero"]
    # nan step ratios render as undefined but do not fail the run
    assert rep.passed()
    assert "undefined" in rep.to_csv()


def test_mo_power_driver_reports_ratio_in_band():
    rep = run_experiment(ExperimentConfig.from_dict(MO_SMALL))
    assert rep.passed()
    ratios = [r.value for r in rep.rows if r.metric == "ratio"]
    assert len(ratios) == 1
    assert 1.0 <= ratios[0] <= 10.0


def test_equivalence_driver_small_run():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "equivalence",
            "space": {"n": 0, "lam": 1.0},
            "symbols": [{"kind": "bump", "center": [0.5], "radius": 0.3}],
            "window": {"lo": [0.0], "hi": [1.0]},
            "resolutions": [6, 12],
            "schedule": [[2.5, 2.5]],
            "k_range": [-1, 3],
        }
    )
    rep = run_experiment(cfg)
    assert rep.passed()
    metrics = {r.metric for r in rep.rows}
    assert {"osc", "besov", "schatten", "ratio_schatten_besov", "homogeneity_dev"} <= metrics


def test_bump_driver_small_run():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "bump_membership",
            "space": {"n": 0, "lam": 1.0},
            "p": 3.0,
            "height": 8.0,
            "radius": 1.0,
            "outer_mult": 12.0,
            "widen": 1.3,
            "cells": 2,
            "nodes": 3,
        }
    )
    rep = run_experiment(cfg)
    assert rep.passed()
    terms = {r.metric: r.value for r in rep.rows if r.metric.startswith("term_")}
    assert all(v >= 0.0 for v in terms.values())
    assert {"term_I", "term_II", "term_III"} <= set(terms)


# -- command line -----------------------------------------------------------

def _write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_cli_kernel_heat(tmp_path, capsys):
    cfg = _write_cfg(
        tmp_path,
        "heat.json",
        {"kind": "heat", "space": {"n": 0, "lam": 1.0}, "t": 0.5, "points": [[1.0], [2.5]]},
    )
    rc = main(["kernel", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["passed"] is True


def test_cli_norm_mean_oscillation(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        "norm.json",
        {
            "space": {"n": 0, "lam": 1.0},
            "norm": "mo",
            "symbol": {"kind": "bump", "center": [0.5], "radius": 0.3},
            "cube": {"lo": [0.0], "hi": [1.0]},
        },
    )
    rc = main(["norm", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["value"] > 0.0


def test_cli_wavelet(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        "wav.json",
        {"space": {"n": 0, "lam": 1.0}, "cube": {"lo": [0.5], "hi": [1.0]}, "order": 2},
    )
    rc = main(["wavelet", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["n_elements"] == 2


def test_cli_operator_hs_consistency(tmp_path):
    cfg = _write_cfg(
        tmp_path,
        "op.json",
        {
            "space": {"n": 0, "lam": 1.0},
            "symbol": {"kind": "bump", "center": [0.5], "radius": 0.3},
            "window": {"lo": [0.0], "hi": [1.0]},
            "resolution": 12,
            "p": 2.0,
            "q": 2.0,
        },
    )
    rc = main(["operator", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    sv_csv = (tmp_path / "out" / "singular_values.csv").read_text()
    assert sv_csv.startswith("sigma\n")
    assert len(sv_csv.strip().splitlines()) == 13


def test_cli_experiment_reports_are_byte_identical(tmp_path):
    cfg = _write_cfg(tmp_path, "mo.json", MO_SMALL)
    rc1 = main(["experiment", "--config", cfg, "--out", str(tmp_path / "r1")])
    rc2 = main(["experiment", "--config", cfg, "--out", str(tmp_path / "r2")])
    assert rc1 == 0 and rc2 == 0
    assert (tmp_path / "r1" / "report.csv").read_bytes() == (tmp_path / "r2" / "report.csv").read_bytes()


def test_cli_rejects_bad_config_with_exit_2(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "bad.json", {"experiment": "nope"})
    rc = main(["experiment", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err
    missing = str(tmp_path / "absent.json")
    rc = main(["kernel", "--config", missing, "--out", str(tmp_path / "out")])
    assert rc == 2
