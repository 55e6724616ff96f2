import json

import pandas as pd
import pytest

from ipop_dispatch.cli import main


@pytest.fixture
def fitted(tmp_path, capsys):
    """Synthetic samples fitted into <tmp>/profiles, returns the profile paths"""
    samples = tmp_path / "samples.csv"
    assert main(["synth", "--out", str(samples)]) == 0
    assert main(["fit", str(samples), "--out", str(tmp_path / "profiles")]) == 0
    capsys.readouterr()
    return [str(tmp_path / "profiles" / "dab-100uH.json"), str(tmp_path / "profiles" / "dab-150uH.json")]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "annealer.json"
    path.write_text(json.dumps({"cooling": 0.5, "iters_per_temp": 5}), encoding="utf-8")
    return str(path)


def write_csv(tmp_path, text):
    path = tmp_path / "input.csv"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestFit:
    def test_reports_one_entry_per_module(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        main(["synth", "--points", "12", "--out", str(samples)])
        assert main(["fit", str(samples), "--out", str(tmp_path / "out")]) == 0
        reports = json.loads(capsys.readouterr().out)
        assert [r["module_id"] for r in reports] == ["dab-100uH", "dab-150uH"]
        assert all(r["sample_count"] == 12 and r["pin_r_squared"] > 0.999999 for r in reports)
        assert (tmp_path / "out" / "dab-150uH.json").exists()

    def test_header_only_input(self, tmp_path, capsys):
        path = write_csv(tmp_path, "module_id,current_a,p_in_w,p_out_w\n")
        assert main(["fit", path, "--out", str(tmp_path)]) == 2
        assert "no data rows" in capsys.readouterr().err

    def test_bad_row_reports_line(self, tmp_path, capsys):
        path = write_csv(tmp_path, "module_id,current_a,p_in_w,p_out_w\nm,1,10,8\nm,x,10,8\n")
        assert main(["fit", path, "--out", str(tmp_path)]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_bad_row_after_blank_line_reports_file_line(self, tmp_path, capsys):
        path = write_csv(tmp_path, "module_id,current_a,p_in_w,p_out_w\nm,1,10,8\n\nm,x,10,8\n")
        assert main(["fit", path, "--out", str(tmp_path)]) == 2
        assert "line 4" in capsys.readouterr().err

    def test_wrong_header(self, tmp_path, capsys):
        path = write_csv(tmp_path, "id,i,pin,pout\nm,1,10,8\n")
        assert main(["fit", path, "--out", str(tmp_path)]) == 2
        assert "header" in capsys.readouterr().err

    def test_degree_two_rejected(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        main(["synth", "--out", str(samples)])
        assert main(["fit", str(samples), "--degree", "2", "--out", str(tmp_path)]) == 2
        assert "at least 3" in capsys.readouterr().err

    def test_needs_output_directory(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        main(["synth", "--out", str(samples)])
        assert main(["fit", str(samples)]) == 2


class TestDispatch:
    def test_mid_load_runs_the_100uh_module(self, fitted, capsys):
        assert main(["dispatch", *fitted, "--demand", "400"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["active_modules"] == ["dab-100uH"]
        assert document["total_p_out_w"] == pytest.approx(400.0)

    def test_fixed_modules(self, fitted, capsys):
        assert main(["dispatch", *fitted, "--demand", "400", "--modules", "dab-100uH,dab-150uH"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert len(document["modules"]) == 2

    def test_unservable_demand(self, fitted, capsys):
        assert main(["dispatch", *fitted, "--demand", "1e9"]) == 3
        assert "1600" in capsys.readouterr().err

    def test_unknown_module(self, fitted):
        assert main(["dispatch", *fitted, "--demand", "400", "--modules", "nope"]) == 2

    def test_missing_profile(self, tmp_path):
        assert main(["dispatch", str(tmp_path / "absent.json"), "--demand", "10"]) == 2

    def test_duplicate_module_ids(self, fitted, capsys):
        assert main(["dispatch", fitted[0], fitted[0], "--demand", "400"]) == 2
        assert "Duplicate module id" in capsys.readouterr().err

    def test_schedule_csv(self, fitted, tmp_path, capsys):
        out = tmp_path / "schedule.csv"
        assert main(["schedule", *fitted, "--p-min", "50", "--p-max", "1200", "--step", "9", "--out", str(out)]) == 0
        assert capsys.readouterr().err.count("switching point") == 2
        frame = pd.read_csv(out, keep_default_na=False)
        assert list(frame["active_modules"]) == ["dab-150uH", "dab-100uH", "dab-150uH;dab-100uH"]
        assert frame["p_lo_w"].iloc[0] == 50
        assert frame["p_hi_w"].iloc[-1] == 1200

    def test_schedule_quiet(self, fitted, capsys):
        assert main(["--quiet", "schedule", *fitted, "--p-min", "50", "--p-max", "400", "--step", "10"]) == 0
        captured = capsys.readouterr()
        assert captured.err == ""
        assert captured.out.startswith("p_lo_w,p_hi_w,active_modules,example_demand_w,eta\n")


class TestAnneal:
    def test_same_seed_same_bytes(self, fitted, small_config, tmp_path):
        outputs = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            argv = ["anneal", *fitted, "--demand", "800", "--config", small_config, "--seed", "11", "--out", str(path)]
            assert main(argv) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_report_and_schedule(self, fitted, small_config, tmp_path):
        schedule = tmp_path / "schedule.csv"
        main(["schedule", *fitted, "--p-min", "50", "--p-max", "1200", "--step", "25", "--out", str(schedule)])
        report = tmp_path / "report.json"
        argv = ["anneal", *fitted, "--demand", "900", "--schedule", str(schedule), "--config", small_config,
                "--report", str(report), "--out", str(tmp_path / "best.json")]
        assert main(argv) == 0
        document = json.loads(report.read_text(encoding="utf-8"))
        assert document["outputs"]["active_modules"] == ["dab-150uH", "dab-100uH"]
        assert document["outputs"]["levels"] == 14
        assert document["seed"] == 0
        assert any("schedule" in note for note in document["notes"])

    def test_missing_config_noted(self, fitted, tmp_path):
        report = tmp_path / "report.json"
        argv = ["anneal", *fitted, "--demand", "200", "--modules", "dab-150uH",
                "--config", str(tmp_path / "absent.json"), "--report", str(report), "--out", str(tmp_path / "a.json")]
        assert main(argv) == 0
        notes = json.loads(report.read_text(encoding="utf-8"))["notes"]
        assert any("not found" in note for note in notes)

    def test_warm_start(self, fitted, small_config, tmp_path, capsys):
        start = tmp_path / "start.json"
        main(["dispatch", *fitted, "--demand", "900", "--out", str(start)])
        argv = ["anneal", *fitted, "--demand", "900", "--warm-start", str(start), "--config", small_config]
        assert main(argv) == 0
        best = json.loads(capsys.readouterr().out)
        optimum = json.loads(start.read_text(encoding="utf-8"))
        assert best["eta"] >= optimum["eta"] - 1e-8


class TestCompareAndCurves:
    def test_compare_closed_form(self, ab_fleet, profile_files, capsys):
        assert main(["compare", *profile_files(ab_fleet), "--demand", "300"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["improvement_points"] == pytest.approx(1.6195, abs=1e-3)
        assert sorted(document["optimized_modules"]) == ["A", "B"]

    def test_compare_sweep_csv(self, fitted, capsys):
        assert main(["compare", *fitted, "--sweep", "100", "1000", "100"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "demand_w,eta_equal_split,eta_optimized,improvement_points"
        assert len(lines) == 11

    def test_compare_needs_a_demand(self, fitted):
        assert main(["compare", *fitted]) == 2

    def test_curves(self, fitted, capsys):
        assert main(["curves", *fitted, "--points", "11"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "module_id,p_out_w,current_a,eta"
        assert len(lines) == 23


class TestTps:
    def test_boundary_record(self, capsys):
        assert main(["tps", "--k", "2", "--p", "0.5"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert (record["d1"], record["d2"], record["d3"]) == pytest.approx((0.5, 0.5, 0.0))
        assert record["mode"] == 1
        assert record["i_m_pu"] == pytest.approx(1.0)

    def test_gain_from_voltages(self, capsys):
        assert main(["tps", "--n", "1", "--u-in", "100", "--u-out", "80", "--p", "0.5"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["k"] == pytest.approx(1.25)
        assert record["regime"] == "boost"

    def test_watts_need_the_power_base(self, capsys):
        argv = ["tps", "--n", "1", "--u-in", "100", "--u-out", "80", "--p-watts", "500",
                "--fs", "10000", "--lr", "0.0001"]
        assert main(argv) == 0
        assert json.loads(capsys.readouterr().out)["p"] == pytest.approx(0.5)
        assert main(["tps", "--k", "1.25", "--p-watts", "500"]) == 2

    def test_sweep(self, capsys):
        assert main(["tps", "--k", "1.25", "--sweep", "11"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "p,mode,d1,d2,d3,i_m_pu"
        assert len(lines) == 12
        assert lines[1] == "0.0,,,,,"

    def test_domain_error(self, capsys):
        assert main(["tps", "--k", "1.25", "--p", "0.01"]) == 2
        assert "radicand" in capsys.readouterr().err

    def test_power_out_of_range(self):
        assert main(["tps", "--k", "1.25", "--p", "1.5"]) == 2


class TestParser:
    def test_help_hides_oracle(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        assert "schedule" in out
        assert "oracle" not in out

    def test_oracle_still_runs(self, ab_fleet, profile_files, capsys):
        assert main(["oracle", *profile_files(ab_fleet), "--demand", "300", "--step", "1"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["eta"] == pytest.approx(300 / 369, abs=1e-5)

    def test_unknown_command(self):
        assert main(["launch"]) == 2

    def test_seed_out_of_range(self):
        assert main(["synth", "--seed", "-1"]) == 2
        assert main(["synth", "--seed", str(2 ** 64)]) == 2


def test_logging_levels():
    import logging

    from ipop_dispatch.utils.logging_setup import setup_logging

    assert setup_logging("debug").level == logging.DEBUG
    assert setup_logging("debug", quiet=True).level == logging.ERROR
    setup_logging()
