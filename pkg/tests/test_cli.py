import json
import subprocess
import sys

import numpy as np
import pytest

from modclass.cli import main
from modclass.harness import read_results_csv
from modclass.signal import ChannelConfig, standard_constellation, transmit


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "classes": ["4QAM", "16QAM"], "snr_db_grid": [0.0], "M": 100, "trials": 25,
        "L_grid": [2, 3], "classifiers": ["bayes", "vd", "kuiper"], "seed": 5,
    }))
    return path


def test_crossings(capsys):
    assert main(["crossings", "--pair", "4QAM,16QAM", "--snr-db", "0"]) == 0
    vals = [float(v) for v in capsys.readouterr().out.split()]
    assert len(vals) == 4


def test_build_run_classify(tmp_path, config_file, capsys):
    models = tmp_path / "models"
    assert main(["build-models", "--config", str(config_file), "--model-dir", str(models)]) == 0
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--model-dir", str(models),
                 "--out", str(out), "--no-build", "--trials", "10"]) == 0
    rows = read_results_csv(out / "results.csv")
    assert {r["classifier"] for r in rows} == {"bayes", "vd", "kuiper"}
    model = models / "4QAM-16QAM" / "snr_+0.00" / "L3.model.json"
    block = transmit(standard_constellation("4QAM"), ChannelConfig(0.0), 100,
                     np.random.default_rng(0))
    iq = tmp_path / "capture.csv"
    iq.write_text("re,im\n" + "".join(f"{float(v.real)!r},{float(v.imag)!r}\n" for v in block.received))
    capsys.readouterr()
    assert main(["classify", "--model", str(model), "--iq", str(iq)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["class"] in ("4QAM", "16QAM") and set(res["scores"]) == {"4QAM", "16QAM"}


def test_classify_other_length_rescales(tmp_path, config_file, capsys):
    models = tmp_path / "m"
    assert main(["build-models", "--config", str(config_file), "--model-dir", str(models)]) == 0
    iq = tmp_path / "iq.csv"
    block = transmit(standard_constellation("16QAM"), ChannelConfig(10.0), 3000,
                     np.random.default_rng(1))
    iq.write_text("".join(f"{v.real},{v.imag}\n" for v in block.received))
    capsys.readouterr()
    model = models / "4QAM-16QAM" / "snr_+0.00" / "L2.model.json"
    assert main(["classify", "--model", str(model), "--iq", str(iq)]) == 0
    assert json.loads(capsys.readouterr().out)["class"] == "16QAM"


def test_run_without_models_fails(tmp_path, config_file, capsys):
    rc = main(["run", "--config", str(config_file), "--model-dir", str(tmp_path / "none"),
               "--out", str(tmp_path / "o"), "--no-build"])
    assert rc != 0
    assert "missing models" in capsys.readouterr().err


def test_bad_inputs_exit_nonzero(tmp_path, capsys):
    assert main(["crossings", "--pair", "4QAM", "--snr-db", "0"]) != 0
    assert main(["crossings", "--pair", "4QAM,9QAM", "--snr-db", "0"]) != 0
    bad = tmp_path / "iq.csv"
    bad.write_text("1,2\nfoo,bar\n")
    assert main(["classify", "--model", str(tmp_path / "nope.json"), "--iq", str(bad)]) != 0
    err = capsys.readouterr().err
    assert err.count("modclass: error:") == 3


def test_user_constellation(tmp_path, capsys):
    path = tmp_path / "bpsk.json"
    path.write_text(json.dumps({"name": "BPSK", "points": [[1, 0], [-1, 0]]}))
    assert main(["--constellation", str(path), "crossings", "--pair", "BPSK,4QAM",
                 "--snr-db", "3"]) == 0
    assert capsys.readouterr().out.strip()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "modclass.cli", "crossings", "--pair",
                          "4QAM,16QAM", "--snr-db", "0"], capture_output=True, text=True)
    assert res.returncode == 0 and len(res.stdout.split()) == 4
