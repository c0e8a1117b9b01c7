import hashlib
import json
import os
from pathlib import Path

import pytest

from teugels_control import cli, report
from teugels_control.runners import RunResult
from teugels_control.scenario import (ScenarioError, load_scenario,
                                      parse_scenario)

REPO = Path(__file__).resolve().parents[1]

LIGHT_SCENARIO = """\
[model]
b = -0.1
sigma2 = 0.25
jump.kind = point_masses
jump.locations = 1.0
jump.intensities = 0.3

[basis]
K = 2

[paths]
M = 10
N = 2000
seed = 5

[bsde]
driver = linear_y
driver.b = -0.5
terminal = constant
terminal.value = 2.0

[problem]
forward = linear
forward.c1 = 1.0
driver = zero
terminal = identity
controls = 0.0
horizon = 1.0

[lattice]
x_min = 0.0
x_max = 3.0
n_x = 7
n_t = 3
n_paths = 500
substeps = 4
seed = 2

[grid]
x_min = -1.0
x_max = 3.5
n_nodes = 19

[hjb]
quad_order = 16

[outputs]
directory = out
"""


@pytest.fixture(scope="module")
def light_scn(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "light.scn"
    path.write_text(LIGHT_SCENARIO)
    return str(path)


def test_shipped_default_scenario_loads():
    scn = load_scenario(str(REPO / "scenarios" / "default.scn"))
    assert scn.basis_K == 2
    assert (scn.paths.M, scn.paths.N, scn.paths.seed) == (50, 100000, 11)
    assert scn.model.b == -0.1
    assert scn.out_dir == "out"
    assert scn.filenames["basis_csv"] == "basis.csv"
    assert len(scn.digest) == 64


def test_shipped_two_control_scenario_loads():
    scn = load_scenario(str(REPO / "scenarios" / "two_control.scn"))
    assert scn.problem.controls == (-1.0, 1.0)
    assert scn.lattice.x_nodes[0] == -3.0


def test_parse_collects_every_error():
    text = LIGHT_SCENARIO.replace("b = -0.1", "b = nope\nzzz = 1")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    messages = "\n".join(err.value.errors)
    assert "[model] b: expected a real number" in messages
    assert "[model] zzz: unknown key" in messages


def test_missing_section_reported():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("[model]\nb = 0.0\n")
    assert any("[basis]: missing required section" in e for e in err.value.errors)


def test_rank_overflow_rejected():
    text = LIGHT_SCENARIO.replace("K = 2", "K = 3")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert any("exceeds basis rank 2" in e for e in err.value.errors)


def test_gamma_wider_than_basis_rejected():
    text = LIGHT_SCENARIO.replace("driver = linear_y\ndriver.b = -0.5",
                                  "driver = linear_z\ndriver.gamma = 0.1, 0.2, 0.3")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert any("components exceed K = 2" in e for e in err.value.errors)


def test_output_filename_override():
    text = LIGHT_SCENARIO + "basis_csv = custom.csv\n"
    scn = parse_scenario(text)
    assert scn.filenames["basis_csv"] == "custom.csv"
    assert scn.filenames["bsde_csv"] == "bsde.csv"


def test_digest_is_file_hash(light_scn):
    scn = load_scenario(light_scn)
    raw = Path(light_scn).read_bytes()
    assert scn.digest == hashlib.sha256(raw).hexdigest()


def test_basis_subcommand_writes_outputs(light_scn, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["basis", "--scenario", light_scn, "--out", str(out)]) == 0
    assert (out / "basis.csv").exists()
    assert (out / "basis.png").exists()
    assert (out / "manifest.json").exists()
    captured = capsys.readouterr().out
    assert "orthonormality defect" in captured
    assert f"wrote {out / 'basis.csv'}" in captured


def test_no_plots_skips_figures(light_scn, tmp_path):
    out = tmp_path / "run"
    code = cli.main(["simulate", "--scenario", light_scn, "--out", str(out),
                     "--no-plots"])
    assert code == 0
    assert (out / "brackets.csv").exists()
    assert not (out / "brackets.png").exists()


def test_out_dir_priority(light_scn, tmp_path, monkeypatch):
    env_dir = tmp_path / "from_env"
    arg_dir = tmp_path / "from_arg"
    monkeypatch.setenv(cli.OUT_ENV_VAR, str(env_dir))
    assert cli.main(["basis", "--scenario", light_scn]) == 0
    assert (env_dir / "basis.csv").exists()
    assert cli.main(["basis", "--scenario", light_scn, "--out",
                     str(arg_dir)]) == 0
    assert (arg_dir / "basis.csv").exists()


def test_unreadable_scenario_is_usage_error(tmp_path, capsys):
    assert cli.main(["basis", "--scenario", str(tmp_path / "none.scn")]) == 1
    assert "cannot read scenario" in capsys.readouterr().err


def test_invalid_scenario_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("[model]\nb = oops\n")
    assert cli.main(["basis", "--scenario", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "invalid scenario" in err
    assert "[model] b" in err


def test_argument_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "--scenario", "x"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_workers_must_be_positive(light_scn, capsys):
    assert cli.main(["basis", "--scenario", light_scn, "--workers", "0"]) == 1
    assert "--workers" in capsys.readouterr().err


def test_workers_accepted_as_no_op(light_scn, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["basis", "--scenario", light_scn, "--out", str(out),
                     "--workers", "4"]) == 0


def test_runner_failure_maps_to_numerical_exit(light_scn, tmp_path,
                                               monkeypatch, capsys):
    def boom(scenario, out_dir, plots=True):
        raise FloatingPointError("overflow in step")

    monkeypatch.setitem(cli.RUNNERS, "basis", boom)
    code = cli.main(["basis", "--scenario", light_scn, "--out",
                     str(tmp_path / "x")])
    assert code == 2
    assert "basis failed" in capsys.readouterr().err


def test_compare_failure_exits_three(light_scn, tmp_path, monkeypatch, capsys):
    def disagree(scenario, out_dir, plots=True):
        return RunResult(lines=["worst discrepancy above tolerance"], ok=False)

    monkeypatch.setitem(cli.RUNNERS, "compare", disagree)
    code = cli.main(["compare", "--scenario", light_scn, "--out",
                     str(tmp_path / "x")])
    assert code == 3
    capsys.readouterr()


def test_manifest_records_digests(light_scn, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["simulate", "--scenario", light_scn, "--out", str(out),
                     "--no-plots"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["scenario_digest"] == load_scenario(light_scn).digest
    assert manifest["version"]
    for name, digest in manifest["outputs"].items():
        assert digest == report.sha256_file(str(out / name))


def test_repeated_runs_are_identical(light_scn, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli.main(["bsde", "--scenario", light_scn, "--out", str(out),
                         "--no-plots"]) == 0
        outs.append((out / "bsde.csv").read_bytes())
    assert outs[0] == outs[1]


def test_csv_format_is_crlf_with_header(light_scn, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["value-mc", "--scenario", light_scn, "--out", str(out),
                     "--no-plots"]) == 0
    raw = (out / "value_mc.csv").read_bytes()
    assert raw.splitlines()[0] == b"t,x,W,stderr,policy"
    assert b"\r\n" in raw


def test_full_pipeline_on_light_scenario(light_scn, tmp_path):
    out = tmp_path / "run"
    for sub in ("basis", "simulate", "bsde", "value-mc", "hjb", "compare"):
        code = cli.main([sub, "--scenario", light_scn, "--out", str(out),
                         "--no-plots"])
        assert code == 0, sub
