import json
import math

import numpy as np
import pytest

from clt_lab.experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    load_config,
    run_experiment,
    write_report,
)
from clt_lab.experiments.cli import main
from clt_lab.experiments.report import report_dir
from clt_lab.experiments.runners import df_bound, separation
from clt_lab.logconcave1d import GateError

SMALL = {
    "thin_shell": {"n": 16, "n_sweep": [4, 16], "m": 20_000, "epsilon_grid": [0.0, 0.3]},
    "clt_marginal": {"n": 16, "n_sweep": [4, 16], "m": 5_000, "direction_count": 20},
    "unconditional_diag": {"n": 16, "m": 20_000, "options": {"kolmogorov_threshold": 0.05}},
    "multidim_marginal": {"n": 10, "k": 2, "m": 5_000, "subspace_count": 5, "direction_count": 20,
                          "options": {"t_threshold": 0.1}},
    "diaconis_freedman": {"n": 20, "k": 1, "m": 10_000},
    "jl_check": {"n": 20, "k_sweep": [2, 8], "m": 1_000, "epsilon_grid": [0.0, 0.3],
                 "options": {"subspaces": 5_000}},
    "mf_concentration": {"n": 20, "n_sweep": [10, 20], "k": 2, "m": 5_000, "subspace_count": 10,
                         "options": {"within_directions": 10, "global_directions": 100}},
}


def small(name, **extra):
    raw = {"experiment": name, **SMALL[name], **extra}
    return ExperimentConfig.from_dict(raw)


def write_config(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


# ---------------------------------------------------------------------------
# config


@pytest.mark.parametrize("raw,msg", [
    ({"experiment": "nope", "n": 4, "m": 1000}, "unknown experiment"),
    ({"experiment": "thin_shell", "n": 4, "m": 999}, "at least 1000"),
    ({"experiment": "thin_shell", "n": 4, "k": 5, "m": 1000}, "k=5"),
    ({"experiment": "thin_shell", "n": 4, "m": 1000, "colour": 1}, "unknown config keys"),
    ({"experiment": "thin_shell", "m": 1000}, "missing config keys"),
    ({"experiment": "thin_shell", "n": 4, "m": 1000, "epsilon_grid": [1.5]}, "epsilon"),
    ({"experiment": "thin_shell", "n": 4, "m": 1000, "density": {"type": "torus"}}, "invalid density"),
    ({"experiment": "thin_shell", "n": 4, "m": 1000, "workers": 0}, "positive"),
    ({"experiment": "thin_shell", "n": 4, "m": 1000,
      "density": {"type": "product_1d", "labels": ["exp", "exp"]}}, "2 labels but dimension 4"),
])
def test_config_validation(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(raw)


def test_config_hash():
    a = small("thin_shell")
    assert len(a.hash()) == 32
    assert a.hash() == small("thin_shell").hash()
    assert a.hash() == small("thin_shell", workers=3, out_dir="elsewhere").hash()
    assert a.hash() != small("thin_shell", seed=1).hash()
    assert a.hash() != small("thin_shell", m=20_001).hash()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(bad)


def test_shipped_configs_validate():
    from pathlib import Path

    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.json"))
    assert len(paths) == 7
    assert {load_config(p).experiment for p in paths} == set(SMALL)


# ---------------------------------------------------------------------------
# reports


def test_write_report_layout(tmp_path):
    cfg = small("thin_shell")
    rep = run_experiment(cfg)
    out = tmp_path / "does" / "not" / "exist"
    root = write_report(rep, out)
    assert root == out / f"thin_shell-{cfg.hash()}" == report_dir(rep, out)
    data = json.loads((root / "report.json").read_text())
    assert data["config_hash"] == cfg.hash()
    assert data["config"]["m"] == cfg.m
    assert "library_version" in data and "wall_clock" not in json.dumps(data)
    assert json.loads((root / "timing.json").read_text())["wall_clock_seconds"] > 0
    csv = (root / "tables" / "thin_shell.csv").read_text().splitlines()
    assert csv[0] == "n,epsilon,probability,std_error,m"
    assert len(csv) == 1 + 2 * 2
    assert (root / "plotdata" / "thin_shell_eps_0.3.csv").exists()


def test_write_report_surfaces_path(tmp_path):
    rep = run_experiment(small("jl_check"))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_report(rep, blocker)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_every_experiment_is_deterministic(name):
    a = run_experiment(small(name)).to_json()
    b = run_experiment(small(name)).to_json()
    assert a == b


@pytest.mark.parametrize("name", ["thin_shell", "clt_marginal", "mf_concentration"])
def test_reports_do_not_depend_on_workers(name):
    one = run_experiment(small(name, workers=1)).to_dict()
    three = run_experiment(small(name, workers=3)).to_dict()
    one["config"].pop("workers")
    three["config"].pop("workers")
    assert one == three


# ---------------------------------------------------------------------------
# behaviour


def test_certain_event_at_eps_zero():
    rep = run_experiment(small("thin_shell"))
    assert rep.assertion("certain_event_eps_0").passed
    rep = run_experiment(small("jl_check"))
    assert rep.assertion("certain_event_eps_0").passed


def test_ball_shell_is_tighter_than_cube():
    def prob(density):
        cfg = small("thin_shell", density=density, n_sweep=None, n=64, m=100_000, epsilon_grid=[0.05])
        row = run_experiment(cfg).tables["thin_shell"].rows[0]
        return row[2], row[3]

    pb, sb = prob({"type": "ball"})
    pc, sc = prob({"type": "cube"})
    assert separation(pc, sc, pb, sb)["passed"]


def test_gaussian_inputs_sit_at_noise_floor():
    rep = run_experiment(small("clt_marginal", density={"type": "gaussian"}, m=100_000, n_sweep=[8]))
    assert rep.summary["per_n"]["8"]["kolmogorov"]["median"] <= 0.005
    assert rep.assertion("gaussian_control_noise_floor_n_8").passed
    rep = run_experiment(small("multidim_marginal", density={"type": "gaussian"}, m=100_000,
                               options={"t_threshold": 0.01}))
    assert rep.passed


def test_gaussian_control_oscillation_at_noise_level():
    rep = run_experiment(small("mf_concentration", m=20_000))
    for name in ("gaussian_control_noise_level_n_10_t_0", "gaussian_control_noise_level_n_20_t_0"):
        assert rep.assertion(name).passed


def test_cube_e1_is_the_bad_direction():
    rep = run_experiment(small("clt_marginal", m=200_000, n_sweep=[16], direction_count=10))
    entry = rep.summary["per_n"]["16"]
    assert entry["e1_kolmogorov"] == pytest.approx(0.0572067211769905, abs=0.005)
    assert entry["kolmogorov"]["max"] < entry["e1_kolmogorov"]


def test_multidim_k1_matches_clt_marginal():
    common = {"n": 12, "m": 5_000, "seed": 5}
    clt = run_experiment(ExperimentConfig.from_dict(
        {"experiment": "clt_marginal", **common, "direction_count": 30, "options": {"gaussian_control": False}}))
    md = run_experiment(ExperimentConfig.from_dict(
        {"experiment": "multidim_marginal", **common, "k": 1, "subspace_count": 30}))
    a = np.array([r[2] for r in clt.tables["per_direction"].rows])
    b = np.array([r[1] for r in md.tables["subspaces_n12_k1"].rows])
    assert np.max(np.abs(a - b)) <= 1e-12


def test_multidim_warns_above_k3():
    rep = run_experiment(small("multidim_marginal", k=4, subspace_count=2, options={"t_threshold": 1.0}))
    assert any("k=4" in w for w in rep.warnings)


def test_unconditional_requires_unconditional_density():
    with pytest.raises(ExperimentError, match="not unconditional"):
        run_experiment(small("unconditional_diag", density={"type": "simplex", "standardize": True}))


def test_unconditional_product_of_laplace():
    cfg = small("unconditional_diag", density={"type": "product_1d", "labels": ["two_sided_exp"]},
                n=64, n_sweep=[4, 64], m=200_000)
    rep = run_experiment(cfg)
    assert rep.summary["decreasing_in_n"]


def test_diaconis_freedman_examples():
    assert df_bound(50, 1) == pytest.approx(8 / 46)
    assert df_bound(500, 1) == pytest.approx(0.016129032258064516)
    rep = run_experiment(small("diaconis_freedman", options={"pairs": [[20, 16]]}))
    row = rep.summary["pairs"][0]
    assert row["vacuous"] and row["bound"] >= 2
    with pytest.raises(ExperimentError, match="n >= k"):
        run_experiment(small("diaconis_freedman", options={"pairs": [[20, 17]]}))


def test_jl_mean_ratio():
    rep = run_experiment(small("jl_check"))
    for k in (2, 8):
        assert rep.assertion(f"mean_ratio_k_{k}").passed
    with pytest.raises(ExperimentError):
        run_experiment(small("jl_check", options={"x": [1.0, 2.0]}))


def test_gate_failure_is_an_error():
    cfg = small("thin_shell", density={"type": "simplex"}, options={"whiten": "never"})
    with pytest.raises(GateError):
        run_experiment(cfg)


# ---------------------------------------------------------------------------
# CLI


def test_cli_pass_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": "jl_check", **SMALL["jl_check"]})
    assert main(["jl_check", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "PASS  mean_ratio_k_2" in out
    assert list((tmp_path / "out").glob("jl_check-*/report.json"))


def test_cli_assertion_failure_still_writes(tmp_path, capsys):
    raw = {"experiment": "unconditional_diag", **SMALL["unconditional_diag"], "options": {"kolmogorov_threshold": 0.0}}
    cfg = write_config(tmp_path, raw)
    assert main(["unconditional_diag", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "FAIL  kolmogorov_below_threshold_n_16" in capsys.readouterr().out
    assert list(tmp_path.glob("unconditional_diag-*/report.json"))


def test_cli_errors(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": "jl_check", **SMALL["jl_check"]})
    assert main(["thin_shell", "--config", str(cfg)]) == 2
    assert main(["jl_check", "--config", str(tmp_path / "nope.json")]) == 2
    bad = write_config(tmp_path, {"experiment": "thin_shell", "n": 4, "m": 10}, "bad.json")
    assert main(["thin_shell", "--config", str(bad)]) == 2
    gate = write_config(tmp_path, {"experiment": "thin_shell", "n": 4, "m": 5000, "density": {"type": "simplex"},
                                   "options": {"whiten": "never"}}, "gate.json")
    assert main(["thin_shell", "--config", str(gate), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["jl_check", "--config", str(cfg), "--seed", "-1"])
    assert exc.value.code == 2


def test_cli_seed_override_changes_hash(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": "jl_check", **SMALL["jl_check"]})
    main(["jl_check", "--config", str(cfg), "--out", str(tmp_path), "--seed", "7"])
    main(["jl_check", "--config", str(cfg), "--out", str(tmp_path), "--seed", "0x10"])
    assert len(list(tmp_path.glob("jl_check-*"))) == 2


def test_cli_list_bodies_and_validate(tmp_path, capsys):
    assert main(["list-bodies"]) == 0
    out = capsys.readouterr().out
    for word in ("cube", "ball", "simplex", "two_sided_exp"):
        assert word in out
    cfg = write_config(tmp_path, {"experiment": "jl_check", **SMALL["jl_check"]})
    assert main(["validate-config", str(cfg)]) == 0
    assert "ok: jl_check" in capsys.readouterr().out
    assert main(["validate-config", str(tmp_path / "nope.json")]) == 2


def test_cli_workers_env_fallback(tmp_path, monkeypatch):
    from clt_lab.experiments import cli

    monkeypatch.setenv("CLT_LAB_WORKERS", "3")
    assert cli._resolve_workers(None) == 3
    assert cli._resolve_workers(2) == 2
    monkeypatch.setenv("CLT_LAB_WORKERS", "zero")
    cfg = write_config(tmp_path, {"experiment": "jl_check", **SMALL["jl_check"]})
    assert main(["jl_check", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    monkeypatch.delenv("CLT_LAB_WORKERS")
    assert cli._resolve_workers(None) == 1


def test_cli_report_identical_across_worker_counts(tmp_path):
    raw = {"experiment": "thin_shell", **SMALL["thin_shell"]}
    cfg = write_config(tmp_path, raw)
    main(["thin_shell", "--config", str(cfg), "--out", str(tmp_path / "a"), "--workers", "1"])
    main(["thin_shell", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "4"])
    a = json.loads(next((tmp_path / "a").glob("*/report.json")).read_text())
    b = json.loads(next((tmp_path / "b").glob("*/report.json")).read_text())
    assert a["config"].pop("workers") == 1 and b["config"].pop("workers") == 4
    a["config"].pop("out_dir"), b["config"].pop("out_dir")
    assert a == b


def test_noise_scale_sanity():
    assert 3 / math.sqrt(1e5) == pytest.approx(0.009486832980505138)
