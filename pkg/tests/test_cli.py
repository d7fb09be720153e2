import csv
import json
import math
import os
import textwrap
from pathlib import Path

import pytest

from mimoauth.cli import (
    CSV_HEADER,
    EXIT_OK,
    EXIT_USAGE,
    ConfigFileError,
    SCHEMA,
    main,
    manifest_path,
    parse_config,
)
from mimoauth.detector import degrees_of_freedom
from mimoauth.numerics import chi2_inv_cdf

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = textwrap.dedent("""\
    [building]
    length_m = 30
    width_m = 14
    height_m = 4
    excess_loss_db = 26

    [grid]
    ap_position = 15.6, 6.2, 3.0
    region_origin = 9.0, 1.0, 0.0
    region_extent_m = 3, 3
    spacing_m = 1.5
    tx_height_m = 2.0

    [radio]
    n_tx = 1
    n_rx = 1
    num_tones = 1
    bandwidth_hz = 20 MHz
    subband_hz = 0.25 MHz
    center_freq_hz = 5 GHz
    tx_power_mw = 0.1 mW
    noise_figure = 10
    alpha = 0.01

    [sweep]
    parameter = M
    values = 1, 2, 3
    configurations = 1x1, 2x1, 1x2, 2x2
""")


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParseConfig:
    def test_reference_defaults(self, small_config):
        s = parse_config(small_config)
        r = s.radio
        assert (r.false_alarm_target, r.center_freq_hz, r.noise_figure_linear, r.subband_bandwidth_hz) == (0.01, 5e9, 10.0, 250e3)
        assert r.tx_power_per_tone_mw == 0.1
        assert s.sweep.values == (1, 2, 3)
        assert s.configurations == ((1, 1), (2, 1), (1, 2), (2, 2))

    def test_subband_too_wide(self, tmp_path):
        text = SMALL.replace("num_tones = 1", "num_tones = 4").replace("subband_hz = 0.25 MHz", "subband_hz = 10 MHz")
        text = text.replace("values = 1, 2, 3", "values = 4")
        with pytest.raises(ConfigFileError) as err:
            parse_config(write(tmp_path, text))
        (msg,) = err.value.problems
        assert "subband_hz" in msg and "line 19" in msg

    def test_empty_file_lists_every_required_key(self, tmp_path):
        with pytest.raises(ConfigFileError) as err:
            parse_config(write(tmp_path, ""))
        required = [key for _, key, _, default in SCHEMA if default is ...]
        assert len(err.value.problems) == len(required)
        for key in required:
            assert any(key in p for p in err.value.problems)

    def test_type_mismatch_names_key_and_line(self, tmp_path):
        text = SMALL.replace("n_rx = 1", "n_rx = two")
        with pytest.raises(ConfigFileError) as err:
            parse_config(write(tmp_path, text))
        assert err.value.problems == ["[radio] n_rx (line 16): not a number: 'two'"]

    def test_units(self, tmp_path):
        text = SMALL.replace("tx_power_mw = 0.1 mW", "tx_power_mw = 1 W").replace("spacing_m = 1.5", "spacing_m = 150 cm")
        s = parse_config(write(tmp_path, text))
        assert s.radio.tx_power_per_tone_mw == 1000.0
        assert s.scenario.grid_spacing_m == 1.5

    def test_unknown_unit(self, tmp_path):
        with pytest.raises(ConfigFileError, match="unknown unit"):
            parse_config(write(tmp_path, SMALL.replace("5 GHz", "5 THz")))

    def test_sweep_is_optional(self, tmp_path):
        s = parse_config(write(tmp_path, SMALL.split("[sweep]")[0]))
        assert s.sweep is None

    def test_bad_sweep_value_is_named(self, tmp_path):
        with pytest.raises(ConfigFileError, match="M=100"):
            parse_config(write(tmp_path, SMALL.replace("values = 1, 2, 3", "values = 1, 100")))

    def test_grid_outside_building(self, tmp_path):
        with pytest.raises(ConfigFileError, match="outside"):
            parse_config(write(tmp_path, SMALL.replace("region_extent_m = 3, 3", "region_extent_m = 40, 3")))

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.ini")))
    def test_shipped_configs_parse(self, name):
        parse_config(CONFIGS / name)


class TestSweepCommand:
    def test_csv_and_manifest(self, small_config, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["sweep", "--config", str(small_config), "--output", str(out), "--workers", "1"]) == EXIT_OK
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 1 + 3 * 4
        assert [r[2] for r in rows[1:5]] == ["1x1", "2x1", "1x2", "2x2"]
        manifest = json.loads(Path(manifest_path(str(out))).read_text())
        assert manifest["seed"] == 0 and manifest["grid_points"] == 9 and manifest["pairs"] == 36
        assert manifest["config"]["radio"]["alpha"] == "0.01"

    def test_byte_identical(self, small_config, tmp_path):
        outs = []
        for i, workers in enumerate((1, 1, 3)):
            out = tmp_path / f"run{i}.csv"
            assert main(["sweep", "--config", str(small_config), "--output", str(out), "--workers", str(workers)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_gain_round_trip(self, small_config, tmp_path):
        out = tmp_path / "curve.csv"
        main(["sweep", "--config", str(small_config), "--output", str(out), "--workers", "1"])
        rows = list(csv.DictReader(out.open()))
        siso = {r["value"]: float(r["avg_miss_rate"]) for r in rows if r["config_label"] == "1x1"}
        for r in rows:
            beta, gain = float(r["avg_miss_rate"]), float(r["security_gain"])
            if beta == 0:
                assert math.isinf(gain) or math.isnan(gain)
                continue
            assert abs((siso[r["value"]] - beta) / beta - gain) <= 1e-9 * max(1.0, abs(gain))

    def test_unwritable_path(self, small_config, tmp_path, capsys):
        out = tmp_path / "missing" / "curve.csv"
        assert main(["sweep", "--config", str(small_config), "--output", str(out)]) != 0
        assert not out.exists() and not out.parent.exists()
        assert "cannot write" in capsys.readouterr().err

    def test_output_is_a_directory(self, small_config, tmp_path):
        target = tmp_path / "adir"
        target.mkdir()
        assert main(["sweep", "--config", str(small_config), "--output", str(target), "--workers", "1"]) != 0
        assert os.listdir(target) == []
        assert not [p for p in os.listdir(tmp_path) if p.startswith(".mimoauth-")]

    def test_missing_sweep_section(self, tmp_path):
        cfg = write(tmp_path, SMALL.split("[sweep]")[0])
        assert main(["sweep", "--config", str(cfg), "--output", str(tmp_path / "o.csv")]) == EXIT_USAGE

    def test_bad_config(self, tmp_path, capsys):
        cfg = write(tmp_path, "")
        assert main(["sweep", "--config", str(cfg), "--output", str(tmp_path / "o.csv")]) == EXIT_USAGE
        assert "missing required key" in capsys.readouterr().err


class TestValidateCommand:
    def test_zero_trials(self, small_config):
        assert main(["validate", "--config", str(small_config), "--trials", "0"]) == EXIT_USAGE

    def test_missing_trials(self, small_config):
        assert main(["validate", "--config", str(small_config)]) == EXIT_USAGE

    def test_same_location_reports_one_minus_alpha(self, small_config, capsys):
        code = main(["validate", "--config", str(small_config), "--trials", "20000",
                     "--point-a", "9,1,2", "--point-b", "9,1,2"])
        out = capsys.readouterr().out
        beta_line = next(line for line in out.splitlines() if line.startswith("beta:"))
        assert "analytic=0.99 " in beta_line
        assert code in (0, 1)

    def test_high_snr_agreement(self):
        # desk_validate.ini: 10 mW, distant pair, 1e5 trials
        assert main(["validate", "--config", str(CONFIGS / "desk_validate.ini"), "--trials", "100000"]) == EXIT_OK


class TestPairCommand:
    def test_same_point(self, small_config, capsys):
        assert main(["pair", "--config", str(small_config), "--point-a", "9,1,2", "--point-b", "9,1,2"]) == 0
        lines = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
        assert float(lines["mu"]) == 0.0
        assert float(lines["beta"]) == pytest.approx(0.99, abs=1e-10)

    def test_echo(self, small_config, capsys):
        assert main(["pair", "--config", str(small_config), "--point-a", "9,1,2", "--point-b", "12,4,2"]) == 0
        lines = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
        radio = parse_config(small_config).radio
        assert int(lines["dof"]) == degrees_of_freedom(radio) == 2
        assert float(lines["threshold"]) == chi2_inv_cdf(0.99, 2)

    def test_point_outside(self, small_config, capsys):
        assert main(["pair", "--config", str(small_config), "--point-a", "40,1,2", "--point-b", "9,1,2"]) == EXIT_USAGE
        assert "outside" in capsys.readouterr().err

    def test_bad_point_syntax(self, small_config):
        assert main(["pair", "--config", str(small_config), "--point-a", "1,2", "--point-b", "9,1,2"]) == EXIT_USAGE
