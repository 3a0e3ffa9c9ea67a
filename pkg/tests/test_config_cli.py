import csv
import dataclasses

import numpy as np
import pytest

import ehfusion.presets as presets
from ehfusion import ExperimentConfig
from ehfusion.cli import main
from ehfusion.config import ConfigError, emit_config, parse_config, parse_config_text
from ehfusion.presets import PRESETS, SUMMARY_COLUMNS, get_preset, run_preset


def test_empty_file_gives_defaults():
    cfg = parse_config_text("# nothing here\n\n")
    assert cfg == ExperimentConfig()
    assert (cfg.n, cfg.subspace_dim, cfg.algorithm) == (50, 6, "alg1")


def test_round_trip():
    cfg = ExperimentConfig(n=7, subspace_dim=2, v=0.1 + 0.2, algorithm="alg3", fading=False,
                           gamma_db=-13.7, seed=99)
    assert parse_config_text(emit_config(cfg)) == cfg


def test_keys_before_sections_and_comments():
    cfg = parse_config_text("n = 8  # nodes\nsubspace_dim = 2\n[control]\nv = 1e3\n"
                            "descent_multistart = off\n")
    assert (cfg.n, cfg.v, cfg.descent_multistart) == (8, 1000.0, False)


@pytest.mark.parametrize("text, key, line, fragment", [
    ("[network]\nbogus = 1\n", "bogus", 2, "unknown key"),
    ("[network]\nv = 1\n", "v", 2, "[control]"),
    ("n = 4\nn = 5\n", "n", 2, "duplicate"),
    ("[sim]\nhorizon = 2.5\n", "horizon", 2, "expected int"),
    ("[radio]\nfading = maybe\n", "fading", 2, "boolean"),
    ("[sim]\nhorizon =\n", "horizon", 2, "missing value"),
    ("\n[sim]\nhorizon = -1\n", "horizon", 3, "horizon"),
])
def test_errors_name_key_and_line(text, key, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert (info.value.key, info.value.line) == (key, line)
    assert fragment in str(info.value) and f"line {line}" in str(info.value)


def test_unknown_section():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("[weird]\n")


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        parse_config(tmp_path / "absent.cfg")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[sim]\nhorizon = -1\n")
    assert main([]) == 1
    assert main(["preset", "nope"]) == 1
    assert "fig1_bmse_vs_v" in capsys.readouterr().err
    assert main(["run", str(bad)]) == 1
    assert main(["run", str(tmp_path / "absent.cfg")]) == 3
    assert main(["validate", str(bad)]) == 1


def test_cli_run_and_validate(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("[network]\nn = 5\nsubspace_dim = 2\n[sim]\nhorizon = 50\nburn_in = 10\n"
                   "trials = 2\n")
    assert main(["validate", str(cfg)]) == 0
    assert parse_config_text(capsys.readouterr().out).horizon == 50
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    with open(tmp_path / "o" / "tiny.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100 and rows[50]["slot"] == "0"
    with open(tmp_path / "o" / "tiny_summary.csv") as fh:
        summary = list(csv.reader(fh))
    assert tuple(summary[0]) == SUMMARY_COLUMNS and len(summary) == 2


def test_aliases_and_presets_build():
    assert get_preset("fig7").name == "fig7_battery_vs_t"
    assert len(PRESETS) == 10
    for preset in PRESETS.values():
        for scale in ("desk", "full"):
            assert list(preset.points(scale))


@pytest.fixture
def tiny_preset(monkeypatch):
    monkeypatch.setitem(presets._DESK, "horizon", 120)
    monkeypatch.setitem(presets._DESK, "burn_in", 20)
    monkeypatch.setitem(presets._DESK, "trials", 2)


def test_preset_outputs_recompute_summary(tmp_path, tiny_preset):
    preset = dataclasses.replace(get_preset("fig1"), sweep_values=(1.0, 100.0))
    run_preset(preset, tmp_path, echo=None)
    for label, _ in preset.series:
        with open(tmp_path / f"fig1_bmse_vs_v_{label}_summary.csv") as fh:
            summary = list(csv.DictReader(fh))
        assert [float(r["sweep_value"]) for r in summary] == [1.0, 100.0]
        for row in summary:
            point = tmp_path / f"fig1_bmse_vs_v_{label}_v={float(row['sweep_value']):g}"
            with open(f"{point}.csv") as fh:
                data = list(csv.DictReader(fh))
            bmse = np.array([float(r["bmse_model"]) for r in data]).reshape(2, 120)
            per_trial = bmse[:, 20:].mean(axis=1)
            assert float(row["bmse_mean"]) == pytest.approx(per_trial.mean(), rel=1e-12)
            assert float(row["bmse_std"]) == pytest.approx(per_trial.std(), rel=1e-9, abs=1e-15)
            assert parse_config(f"{point}.cfg").v == float(row["sweep_value"])


def test_fig4_on_off_alternates(tmp_path, monkeypatch):
    # 1 ms slots and a 0.1 s window: 50 slots ON, then 50 slots OFF
    fig4 = get_preset("fig4")
    monkeypatch.setitem(presets.PRESETS, fig4.name, dataclasses.replace(
        fig4, overrides={**fig4.overrides, "window_s": 0.1}))
    monkeypatch.setitem(presets._DESK, "horizon", 400)
    monkeypatch.setitem(presets._DESK, "trials", 1)
    assert main(["preset", "fig4", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "fig4_onoff_v=0.0001.csv") as fh:
        battery = np.array([float(r["battery_mean_j"]) for r in csv.DictReader(fh)])
    rises = np.diff(battery) > 0  # rises[t] is the effect of slot t
    on = np.arange(rises.size) % 100 < 50
    assert not rises[~on].any()
    assert all(rises[k * 100:k * 100 + 50].any() for k in range(4))
