import json
import math

import pytest

from fransonsim.cli import ConfigError, main, parse_time_ps
from fransonsim.tagio import read_tags


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTimeParsing:
    def test_units(self):
        assert parse_time_ps("100ps") == 100
        assert parse_time_ps("10ns") == 10_000
        assert parse_time_ps("1.07us") == 1_070_000
        assert parse_time_ps("1ms") == 10 ** 9
        assert parse_time_ps("267") == 267

    def test_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_time_ps("ten ns")
        with pytest.raises(ConfigError):
            parse_time_ps("0.0001ps")


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys)
        assert code == 1

    def test_unknown_config_key(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "sweep", "-o", str(tmp_path),
                               "--set", "colour=7")
        assert code == 1
        assert "unknown" in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "tags", "--config",
                               str(tmp_path / "nope.json"),
                               "-o", str(tmp_path))
        assert code == 1
        assert "not found" in err

    def test_bad_override_syntax(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "map", "-o", str(tmp_path),
                               "--set", "novalue")
        assert code == 1


class TestCalibrate:
    def test_stated_operating_point(self, capsys):
        code, out, _ = run_cli(capsys, "calibrate", "--nbar", "0.01")
        assert code == 0
        watts = float(out.split()[0])
        assert watts * 1e12 == pytest.approx(32.46, abs=0.01)

    def test_rejects_zero(self, capsys):
        code, _, err = run_cli(capsys, "calibrate", "--nbar", "0")
        assert code == 1


class TestExperiments:
    def test_map(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "map", "-o", str(tmp_path),
                               "--set", "q=0.1", "--set", "n_phi=5",
                               "--set", "lags=[0,1]")
        assert code == 0
        assert (tmp_path / "map.csv").exists()
        assert json.loads(out)["kind"] == "g2_map"

    def test_chsh_summary_has_s(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "chsh", "-o", str(tmp_path),
                               "--set", "q=0.05")
        assert code == 0
        summary = json.loads(out)
        assert summary["S_analytic"] == pytest.approx(2 * math.sqrt(2),
                                                      abs=1e-6)

    def test_multiport(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "multiport", "-o", str(tmp_path),
                               "--set", "n_grid=[3,4]")
        assert code == 0
        assert (tmp_path / "multiport.csv").exists()

    def test_config_file_with_override(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"q": 0.05, "beta_grid": [0.0, 0.3]}))
        code, _, _ = run_cli(capsys, "sweep", "--config", str(cfg),
                             "-o", str(tmp_path),
                             "--set", "beta_grid=[0.0,0.2,0.4]")
        assert code == 0
        results = json.loads((tmp_path / "results.json").read_text())
        assert [r["beta"] for r in results["rows"]] == [0.0, 0.2, 0.4]


class TestTagWorkflow:
    def test_generation_deterministic(self, capsys, tmp_path):
        args = ("tags", "--set", "duration_s=2e-5", "--set", "seed=7",
                "--set", "source.q=0.1")
        d1, d2 = tmp_path / "one", tmp_path / "two"
        assert run_cli(capsys, *args, "-o", str(d1))[0] == 0
        assert run_cli(capsys, *args, "-o", str(d2))[0] == 0
        assert (d1 / "tags.qtt").read_bytes() == (d2 / "tags.qtt").read_bytes()

    def test_tags_then_correlate(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "tags", "-o", str(tmp_path),
                               "--set", "duration_s=2e-5",
                               "--set", "seed=1", "--set", "source.q=0.1")
        assert code == 0
        counts = json.loads(out)["counts"]
        assert sum(counts.values()) > 0
        hist_csv = tmp_path / "hist.csv"
        code, out, _ = run_cli(capsys, "correlate",
                               "--a", str(tmp_path / "tags_A1.qtt"),
                               "--b", str(tmp_path / "tags_B1.qtt"),
                               "--bin", "1.07ns", "--max-lag", "10.7ns",
                               "-o", str(hist_csv))
        assert code == 0
        lines = hist_csv.read_text().strip().splitlines()
        assert lines[0] == "lag_ps,count"
        by_lag = {int(l.split(",")[0]): int(l.split(",")[1])
                  for l in lines[1:]}
        # central Franson peak at zero lag for aligned phases
        assert by_lag[0] > 0

    def test_correlate_needs_channel_choice(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "tags", "-o", str(tmp_path),
                             "--set", "duration_s=2e-5", "--set", "seed=2",
                             "--set", "source.q=0.1")
        assert code == 0
        code, _, err = run_cli(capsys, "correlate",
                               "--a", str(tmp_path / "tags.qtt"),
                               "--b", str(tmp_path / "tags.qtt"))
        assert code == 1
        assert "channel" in err

    def test_chsh_tags_round_trip(self, capsys, tmp_path):
        settings = [(0.0, math.pi / 4), (0.0, 3 * math.pi / 4),
                    (math.pi / 2, math.pi / 4),
                    (math.pi / 2, 3 * math.pi / 4)]
        runs = []
        for i, (pa, pb) in enumerate(settings):
            d = tmp_path / f"s{i}"
            code, _, _ = run_cli(capsys, "tags", "-o", str(d),
                                 "--set", "duration_s=2e-4",
                                 "--set", f"seed={100 + i}",
                                 "--set", "source.q=0.1",
                                 "--set", f"network.phi_a={pa}",
                                 "--set", f"network.phi_b={pb}")
            assert code == 0
            runs += ["--run", f"{pa}:{pb}:{d / 'tags.qtt'}"]
        out_json = tmp_path / "chsh.json"
        code, out, _ = run_cli(capsys, "chsh-tags", *runs,
                               "-o", str(out_json))
        assert code == 0
        res = json.loads(out)
        assert abs(res["S"] - 2 * math.sqrt(2)) < 4 * res["sigma_S"]
        assert out_json.exists()

    def test_chsh_tags_bad_run_spec(self, capsys):
        code, _, err = run_cli(capsys, "chsh-tags", "--run", "nonsense")
        assert code == 1
