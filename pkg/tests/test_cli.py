"""Config parsing, serialization round-trip, subcommands, and exit codes."""

import json

import pytest

from invpress.cli import main, parse_config, run_verify_example, serialize_config
from invpress.errors import ConfigError
from invpress.model import LinearSystem

MINIMAL = """
[system]
kind = "linear"
A = [[1.0]]
B = [[1.0]]

[control]
range.lo = [-1.0]
range.hi = [1.0]
"""

PLANAR = """
[system]
kind = "linear"
A = [[1.0, -1.0], [1.0, 1.0]]
B = [[0.0], [1.0]]

[control]
range.lo = [-1.0]
range.hi = [1.0]
u0 = [0.0]

[potential]
kind = "norm-dist"
u_ref = [0.0]
p = 1
"""

TINY_ESTIMATE = """
[system]
kind = "linear"
A = [[1.0]]
B = [[1.0]]

[control]
range.lo = [-1.0]
range.hi = [1.0]

[sets]
K = { kind = "box", lo = [-0.5], hi = [0.5] }
Q = { kind = "box", lo = [-1.0], hi = [1.0] }

[discretization]
dt = 0.025
delta = 0.25
tau0 = 0.25
u_levels = 3
n_max = 3
stride = 2
cap = 64
seed = 4
pitch = 0.1
"""


class TestParseConfig:
    def test_minimal_fills_defaults(self):
        cfg = parse_config(MINIMAL)
        assert isinstance(cfg.system, LinearSystem)
        assert cfg.disc["dt"] == 0.01
        assert cfg.disc["tau0"] == cfg.disc["delta"]
        assert cfg.potential.kind == "constant"

    def test_delta_dt_cross_check(self):
        bad = MINIMAL + "\n[discretization]\ndt = 0.3\ndelta = 0.25\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "delta" in str(err.value) and "dt" in str(err.value)

    def test_tau0_delta_cross_check(self):
        bad = MINIMAL + "\n[discretization]\ntau0 = 0.3\ndelta = 0.25\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "tau0" in str(err.value)

    def test_unknown_section_suggests_fix(self):
        bad = MINIMAL + "\n[potental]\nkind = \"constant\"\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "potental" in str(err.value)
        assert "potential" in str(err.value)

    def test_unknown_key_in_section(self):
        bad = MINIMAL.replace("range.lo", "range.low")
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "low" in str(err.value)

    def test_missing_key_reports_path(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[system]\nkind = \"linear\"\nA = [[1.0]]\n"
                         "[control]\nrange.lo = [-1.0]\nrange.hi = [1.0]\n")
        assert "system.B" in str(err.value)

    def test_not_toml(self):
        with pytest.raises(ConfigError):
            parse_config("this is not { toml")

    def test_sets_kind_validated(self):
        bad = MINIMAL + "\n[sets]\nK = { kind = \"ball\" }\n"
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_builtin_general_system(self):
        text = """
[system]
kind = "general"
ode = "builtin:vanderpol"

[control]
range.lo = [-1.0]
range.hi = [1.0]
"""
        cfg = parse_config(text)
        assert cfg.system.name == "vanderpol"

    def test_unknown_builtin(self):
        text = MINIMAL.replace('kind = "linear"\nA = [[1.0]]\nB = [[1.0]]',
                               'kind = "general"\node = "builtin:nosuch"')
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_round_trip(self):
        for text in (MINIMAL, PLANAR, TINY_ESTIMATE):
            cfg = parse_config(text)
            again = parse_config(serialize_config(cfg))
            assert again.raw == cfg.raw


class TestMainExitCodes:
    def test_formula_success(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(PLANAR)
        out = tmp_path / "report.json"
        assert main(["formula", str(path), "--out", str(out), "--quiet"]) == 0
        report = json.loads(out.read_text())
        assert report["result"]["formula"] == 2.0
        assert report["schema_version"] == 1

    def test_config_error_is_exit_2(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(MINIMAL + "\n[nonsense]\nx = 1\n")
        assert main(["formula", str(path), "--quiet"]) == 2

    def test_missing_file_is_exit_2(self, capsys):
        assert main(["formula", "/no/such/file.toml", "--quiet"]) == 2

    def test_precondition_failure_is_exit_4(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(PLANAR.replace("[[1.0, -1.0], [1.0, 1.0]]",
                                       "[[0.0, 1.0], [-1.0, 0.0]]"))
        assert main(["formula", str(path), "--quiet"]) == 4

    def test_not_admissible_is_exit_3(self, tmp_path, capsys):
        bad = TINY_ESTIMATE.replace('Q = { kind = "box", lo = [-1.0], hi = [1.0] }',
                                    'Q = { kind = "box", lo = [-0.1], hi = [0.1] }')
        path = tmp_path / "cfg.toml"
        path.write_text(bad)
        assert main(["estimate", str(path), "--quiet"]) == 3

    def test_verify_quick(self, capsys):
        assert main(["verify", "--quick", "--quiet"]) == 0


class TestEstimateCommand:
    def test_writes_report_and_csv(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(TINY_ESTIMATE)
        out = tmp_path / "report.json"
        series = tmp_path / "series.csv"
        code = main(["estimate", str(path), "--out", str(out),
                     "--csv", str(series), "--quiet"])
        assert code == 0
        report = json.loads(out.read_text())
        assert len(report["result"]["series"]) == 3
        assert report["result"]["formula"] == 1.0
        lines = series.read_text().strip().splitlines()
        assert lines[0] == "n,tau,cover_size,a_tau,log_a_over_tau,slope_so_far"
        assert len(lines) == 4

    def test_reports_are_deterministic(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(TINY_ESTIMATE)
        texts = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["estimate", str(path), "--out", str(out), "--quiet"]) == 0
            body = json.loads(out.read_text())
            del body["timestamp"]
            texts.append(json.dumps(body, sort_keys=True))
        assert texts[0] == texts[1]

    def test_seed_flag_overrides_config(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(TINY_ESTIMATE)
        out = tmp_path / "r.json"
        assert main(["estimate", str(path), "--out", str(out), "--quiet",
                     "--seed", "99"]) == 0
        report = json.loads(out.read_text())
        assert report["seed"] == 99
        assert report["config"]["discretization"]["seed"] == 99

    def test_eps_ladder_adds_outer_reports(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(TINY_ESTIMATE + "\neps_ladder = [0.3, 0.1]\n")
        out = tmp_path / "r.json"
        assert main(["estimate", str(path), "--out", str(out), "--quiet"]) == 0
        result = json.loads(out.read_text())["result"]
        assert [o["eps"] for o in result["outer"]] == [0.3, 0.1]
        # coverage grows with the inflation, so totals shrink with eps
        a_big = result["outer"][0]["series"][-1]["a_value"]
        a_small = result["outer"][1]["series"][-1]["a_value"]
        assert a_big <= a_small <= result["series"][-1]["a_value"]


class TestBoundsCommand:
    def test_emits_all_three_bounds(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(TINY_ESTIMATE)
        out = tmp_path / "bounds.json"
        assert main(["bounds", str(path), "--out", str(out), "--quiet"]) == 0
        result = json.loads(out.read_text())["result"]
        assert result["formula"] == 1.0
        assert result["lower_bound"]["value"] == pytest.approx(1.0, abs=1e-9)
        assert result["equilibrium_upper"] == pytest.approx(1.0, abs=1e-9)
        # sandwich: lower <= formula <= equilibrium upper at the minimizing u*
        assert result["lower_bound"]["value"] <= result["formula"] + 1e-9
        assert result["formula"] <= result["equilibrium_upper"] + 1e-9


class TestFromControlsetSets:
    def test_estimate_with_estimated_sets(self, tmp_path, capsys):
        text = TINY_ESTIMATE.replace(
            'K = { kind = "box", lo = [-0.5], hi = [0.5] }',
            'K = { kind = "from-controlset", shrink = 0.5 }').replace(
            'Q = { kind = "box", lo = [-1.0], hi = [1.0] }',
            'Q = { kind = "from-controlset", shrink = 1.0 }')
        text += "\nsamples = 300\nhorizon = 6.0\n"
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        out = tmp_path / "r.json"
        assert main(["estimate", str(path), "--out", str(out), "--quiet"]) == 0
        result = json.loads(out.read_text())["result"]
        assert "controlset" in result
        assert result["controlset"]["origin_margin"] > 0
        assert len(result["series"]) == 3


class TestControlsetCommand:
    def test_writes_hull_csv(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(MINIMAL)
        out = tmp_path / "hull.csv"
        code = main(["controlset", str(path), "--samples", "300",
                     "--horizon", "6.0", "--seed", "2", "--out", str(out),
                     "--quiet"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x1"
        vals = [float(x) for x in lines[1:]]
        assert len(vals) == 2
        assert min(vals) < 0 < max(vals)


class TestLyapunovCommand:
    def test_prints_csv_spectrum(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(PLANAR)
        code = main(["lyapunov", str(path), "--T", "1.0"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "rho,multiplicity"
        rho, mult = out[1].split(",")
        assert float(rho) == pytest.approx(1.0, abs=1e-6)
        assert mult == "2"

    def test_control_file(self, tmp_path, capsys):
        path = tmp_path / "cfg.toml"
        path.write_text(PLANAR)
        ctrl = tmp_path / "control.csv"
        ctrl.write_text("0.0\n0.0\n")
        code = main(["lyapunov", str(path), "--T", "2.0",
                     "--control", str(ctrl), "--x0", "0,0"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[1].endswith(",2")


class TestVerifyScenario:
    @pytest.mark.parametrize("u0", [0.0, 0.5, -0.9])
    def test_quick_formula_rows(self, u0):
        report = run_verify_example(u0=u0, full=False)
        assert report["passed"]
        formula_row = report["criteria"][0]
        assert formula_row["criterion"] == "formula_pressure"
        assert abs(formula_row["value"] - 2.0) <= 1e-12
