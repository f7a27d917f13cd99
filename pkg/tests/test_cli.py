import json
import math

import pytest

from mesoscatter import cli
from mesoscatter.montecarlo import ConfigError
from mesoscatter.tables import read_csv
from pathlib import Path

GOLDEN = Path(__file__).parent / "golden"


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_series_matches_golden(capsys):
    code, out, _ = run_cli(["series"], capsys)
    assert code == 0
    _, rows = read_csv(out)
    _, golden = read_csv((GOLDEN / "series_expk0_order4.csv").read_text())
    got = {(r["N"], r["m"]): r["expK0"] for r in rows}
    for g in golden:
        assert got[(g["N"], g["m"])] == g["expK0"]


def test_metadata_header(capsys):
    code, out, _ = run_cli(["series", "--set", "order=2", "--seed", "9"], capsys)
    meta, _ = read_csv(out)
    assert meta["command"] == "series"
    assert meta["seed"] == "9"
    assert len(meta["config_hash"]) == 16
    assert json.loads(meta["config"])["order"] == 2


def test_precedence_file_then_flags(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"order": 3, "N_values": [5]}))
    file_values = cli._load_config_file(cfg_file)
    cfg = cli.resolve_config("series", file_values, {"order": 2})
    assert cfg["order"] == 2 and cfg["N_values"] == [5]


def test_config_round_trip_is_lossless():
    cfg = cli.resolve_config("hom-profile", {"dwell_ratios": [0.1, 2.5]})
    again = cli.resolve_config("hom-profile", json.loads(json.dumps(cfg)))
    assert again == cfg


@pytest.mark.parametrize("args", [
    ["series", "--set", "bogus=1"],
    ["series", "--set", "order=\"four\""],
    ["hom-profile", "--set", "N=-3"],
    ["mc", "--set", "b=[9,10]"],
    ["bbp", "--set", "epsilon=2"],
])
def test_config_errors_exit_2(args, capsys):
    code, _, err = run_cli(args, capsys)
    assert code == 2
    assert "configuration error" in err


def test_bad_config_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("[1, 2]")
    code, _, err = run_cli(["series", "--config", str(p)], capsys)
    assert code == 2


def test_error_names_the_field():
    with pytest.raises(ConfigError, match="'z_points'"):
        cli.resolve_config("hom-profile", {"z_points": 2.5})


def test_resource_limit_exit_4(capsys):
    code, _, err = run_cli(["variance", "--set", "n_values=[4]", "--set", "N_values=[12]"], capsys)
    assert code == 4


def test_tolerance_failure_exit_3(capsys):
    code, out, _ = run_cli(["rmt-verify", "--set", "samples=200", "--set", "z_tol=1e-9",
                            "--set", "n_values=[1]", "--set", "N_values=[6]", "--set", "extra_cases=false"], capsys)
    assert code == 3
    assert "false" in out


def test_env_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path))
    code, out, _ = run_cli(["series", "--format", "json"], capsys)
    assert code == 0 and out == ""
    body = json.loads((tmp_path / "series.json").read_text())
    assert body["columns"][:2] == ["N", "m"]


def test_hom_profile_columns_and_limits(capsys):
    code, out, _ = run_cli(["hom-profile", "--set", "dwell_ratios=[0.1, 5.0]", "--set", "z_points=61"], capsys)
    assert code == 0
    _, rows = read_csv(out)
    N = 10
    small = [r for r in rows if r["dwell_ratio"] == 0.1]
    for r in small:
        f2_curve = 1 - math.exp(-r["z"] ** 2 / 4) / N
        assert abs(r["ratio_pairwise"] / f2_curve - 1) < 0.02
    z0 = small[0]
    assert z0["ratio_pairwise"] == pytest.approx(1 - z0["q2"] / N)
    tail = [r for r in rows if r["dwell_ratio"] == 5.0 and r["z"] > 20.0]
    assert tail
    for r in tail:
        assert r["log_slope"] == pytest.approx(-1 / 5.0, rel=0.02)


def test_bbp_tables(capsys):
    _, out, _ = run_cli(["bbp"], capsys)
    meta, rows = read_csv(out)
    assert meta["regime"] == "critical"
    assert rows[-1]["n"] == 200
    assert rows[-1]["abs_deviation"] / rows[-1]["limit"] < 0.02
    _, out, _ = run_cli(["bbp", "--set", "eta=3.0", "--set", "n_values=[2,4,8,16]"], capsys)
    vals = [r["exact_coeff"] for r in read_csv(out)[1]]
    assert all(a < b < 1 for a, b in zip(vals, vals[1:]))
    _, out, _ = run_cli(["bbp", "--set", "eta=1.5", "--set", "n_values=[4,8,16,32]"], capsys)
    vals = [r["exact_coeff"] for r in read_csv(out)[1]]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))
    _, out, _ = run_cli(["bbp", "--set", "eta=0.5"], capsys)
    assert read_csv(out)[0]["trusted"] == "false"


def test_variance_ratio_at_large_N(capsys):
    _, out, _ = run_cli(["variance", "--set", "n_values=[1,2]", "--set", "N_values=[100]"], capsys)
    for r in read_csv(out)[1]:
        assert 0.95 <= r["ratio_L"] <= 1.05


def test_three_body_grid_symmetry(capsys):
    _, out, _ = run_cli(["three-body", "--set", "points=9"], capsys)
    rows = read_csv(out)[1]
    q = {(r["dwell_ratio"], r["tau12"], r["tau32"]): r["q3"] for r in rows}
    for (d, a, b), v in q.items():
        assert v == pytest.approx(q[(d, b, a)], rel=1e-9)


def test_rmt_verify_special_rows(capsys):
    code, out, _ = run_cli(["rmt-verify", "--set", "samples=20000", "--set", "n_values=[2]",
                            "--set", "N_values=[6]", "--set", "betas=[2]"], capsys)
    rows = {r["case"]: r for r in read_csv(out)[1]}
    assert rows["pauli"]["mc_mean"] == 0 and rows["pauli"]["mc_se"] == 0
    assert rows["bunched"]["formula"] == pytest.approx(2 * rows["b2e+1n2N6"]["formula"])
    assert code == 0


def test_mc_command(capsys):
    code, out, _ = run_cli(["mc", "--set", "samples=20000", "--set", "moment=2", "--set", "ensemble=\"COE\""],
                           capsys)
    row = read_csv(out)[1][0]
    assert code == 0
    assert abs(row["z_score"]) < 3
