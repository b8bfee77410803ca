"""Integration tests of the command-line harness."""

import json
import os

import pytest

from hitchin_glue.cli import build_parser, emit_report, main, module_rng


def run_cli(args):
    return main(args)


def test_help_documents_every_flag(capsys):
    parser = build_parser()
    for name, sub in parser._subparsers._group_actions[0].choices.items():
        text = sub.format_help()
        for action in sub._actions:
            for opt in action.option_strings:
                if opt.startswith("--"):
                    assert opt in text, (name, opt)


def test_model_check_runs(capsys):
    assert run_cli(["model-check"]) == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert row["pass"] == "PASS"
    assert row["boundary"] == "dirichlet_cap"


def test_wolf_validate_passes(capsys):
    assert run_cli(["wolf-validate", "--ell", "0.5", "--n-grid", "256"]) == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert row["pass"] == "PASS"
    assert float(row["higgs_slope"]) == pytest.approx(0.5, rel=0.15)


def test_poisson_solve_report(tmp_path):
    out = tmp_path / "r.csv"
    code = run_cli(["poisson-solve", "--modes", "0", "2", "--n-grid", "2049",
                    "--out-report", str(out), "--format", "csv", "--strict"])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",")[0] == "mode"


def test_spectrum_empty_sweep_is_config_error():
    with pytest.raises(SystemExit) as exc:
        run_cli(["spectrum", "--sweep", ""])
    assert exc.value.code == 2


def test_strict_exit_on_fail(capsys):
    # An unreachable residual tolerance forces FAIL rows.
    code = run_cli(["poisson-solve", "--modes", "1", "--n-grid", "1025",
                    "--residual-tol", "1e-30", "--strict"])
    assert code == 1
    code = run_cli(["poisson-solve", "--modes", "1", "--n-grid", "1025",
                    "--residual-tol", "1e-30"])
    assert code == 0
    capsys.readouterr()


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ell": 0.3, "n-grid": 256}))
    assert run_cli(["wolf-validate", "--config", str(cfg)]) == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert float(row["ell"]) == pytest.approx(0.3)
    assert run_cli(["wolf-validate", "--config", str(cfg),
                    "--ell", "0.7"]) == 0
    row = json.loads(capsys.readouterr().out.strip())
    assert float(row["ell"]) == pytest.approx(0.7)


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run_cli(["wolf-validate", "--config", str(cfg)]) == 2


def test_reports_are_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    args = ["poisson-solve", "--modes", "1", "3", "--n-grid", "2049",
            "--seed", "11", "--format", "json"]
    assert run_cli(args + ["--out-report", str(a)]) == 0
    assert run_cli(args + ["--out-report", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_emit_report_mixed_rows_and_round_trip(tmp_path):
    rows = [{"x": 1.0 / 3.0, "name": "first"},
            {"x": 2.0, "extra": 7}]
    csv_path = tmp_path / "r.csv"
    emit_report(rows, "csv", str(csv_path))
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "x,name,extra"
    assert lines[1].endswith(",first,")
    json_path = tmp_path / "r.json"
    emit_report(rows, "json", str(json_path))
    parsed = json.loads(json_path.read_text())
    assert parsed[0]["x"] == pytest.approx(1.0 / 3.0)
    assert parsed[1]["extra"] == 7
    # Idempotent re-emission.
    first = json_path.read_bytes()
    emit_report(rows, "json", str(json_path))
    assert json_path.read_bytes() == first


def test_glue_subcommand_outputs(tmp_path, capsys):
    out_dir = tmp_path / "glue"
    code = run_cli(["glue", "--R", "0.1", "--n-tau", "128",
                    "--out", str(out_dir)])
    assert code == 0
    capsys.readouterr()
    summary = json.loads((out_dir / "glue_summary.json").read_text())
    assert summary["residual_after"] < summary["residual_before"] * 1e-3
    assert summary["sigma_R"] > 0
    fields = json.loads((out_dir / "glue_fields.json").read_text())
    assert fields["grid"]["boundary"] == "dirichlet_cap"


def test_module_rng_streams_are_distinct():
    a = module_rng(0, "poisson").standard_normal(4)
    b = module_rng(0, "operators").standard_normal(4)
    c = module_rng(0, "poisson").standard_normal(4)
    assert (a != b).any()
    assert (a == c).all()


def test_spectrum_flatness_flag(tmp_path):
    out = tmp_path / "s.csv"
    code = run_cli(["spectrum", "--sweep", "0.01,0.003,0.001,0.0003,0.0001",
                    "--n-tau", "160", "--out-report", str(out),
                    "--format", "csv", "--strict"])
    assert code == 0
    header = out.read_text().splitlines()[0].split(",")
    assert "flat_pass" in header and "lambda1_T2" in header
