import json
import os

import pandas as pd
import pytest

from m3t._cli import main


@pytest.fixture
def config_file(tmp_path):
    synth = tmp_path / "synth.cfg"
    synth.write_text("avg_daily_volume=200000\n")
    path = tmp_path / "run.cfg"
    path.write_text(
        f"n_days=2\nagent=vwap\nmacro_estimator=ma\nsynth_params={synth}\n"
        f"output_dir={tmp_path / 'out'}\n"
    )
    return str(path)


def test_gen_data(config_file, tmp_path):
    out = tmp_path / "days"
    assert main(["gen-data", "--config", config_file, "--out", str(out)]) == 0
    names = os.listdir(out)
    assert len([n for n in names if n.endswith(".snapshots.csv")]) == 22
    assert len([n for n in names if n.endswith(".trades.csv")]) == 22


def test_profiles(config_file, tmp_path):
    out = tmp_path / "profiles.csv"
    assert main(["profiles", "--config", config_file, "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 22


def test_backtest_and_report(config_file, tmp_path, capsys):
    assert main(["backtest", "--config", config_file]) == 0
    assert "vwap@ma synthetic:" in capsys.readouterr().out
    result = tmp_path / "out" / "backtest_vwap@ma_synthetic.json"
    with open(result) as f:
        assert len(json.load(f)["days"]) == 1

    report = tmp_path / "report"
    assert main(["report", "--config", config_file, str(result), "--out", str(report)]) == 0
    table = pd.read_csv(report / "slippage.csv")
    assert table["strategy"].tolist() == ["vwap@ma"]


def test_error_exit(config_file, capsys):
    assert main(["backtest", "--config", config_file, "--agent", "m3t"]) == 2
    assert "m3t: error:" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "none.cfg")]) == 2
    assert "m3t: error:" in capsys.readouterr().err


def test_missing_command():
    with pytest.raises(SystemExit):
        main([])
