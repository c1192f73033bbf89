import json
import os
import shutil

import pytest

from newsload.cli import run

CONFIG = """\
# small synthetic run
seed = 1
synthetic = true
synth_n_days = 60
synth_text_signal_gain = 800
synth_noise_sd = 200
synth_n_noise_channels = 3
synth_embedding_dims = 10
max_epochs = 2
ae_max_epochs = 3
variant = LSTM-S
variants = LSTM,LSTM-S,LSTM-S-G-CG
"""


def _snapshot(directory):
    out = {}
    for root, _, files in os.walk(directory):
        for f in files:
            p = os.path.join(root, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, directory)] = fh.read()
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "run.cfg"
    cfg.write_text(CONFIG)
    return base, str(cfg)


def _run(workspace, command, *extra):
    base, cfg = workspace
    out = str(base / command)
    return run([command, "--config", cfg, "--out", out, *extra]), out


def test_synth_and_ingest_row_count(workspace):
    code, out = _run(workspace, "ingest")
    assert code == 0
    lines = open(os.path.join(out, "frame.csv")).read().splitlines()
    assert len(lines) == 1 + 60 * 48
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert man["command"] == "ingest" and man["config"]["seed"] == 1 and man["version"]
    assert man["outputs"]["rows"] == 60 * 48


def test_directory_ingest_and_missing_demand(workspace, tmp_path):
    code, out = _run(workspace, "synth")
    assert code == 0
    data = os.path.join(out, "data")
    cfg = tmp_path / "dir.cfg"
    cfg.write_text(f"seed = 1\ndata_dir = {data}\n")
    assert run(["ingest", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    rows = open(tmp_path / "a" / "frame.csv").read().splitlines()
    assert len(rows) == 1 + 60 * 48
    os.remove(os.path.join(data, "demand.csv"))
    assert run(["ingest", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 2


def test_usage_errors(workspace, tmp_path):
    bad = tmp_path / "noseed.cfg"
    bad.write_text("synthetic = true\n")
    assert run(["ingest", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 1
    _, cfg = workspace
    assert run(["ablate", "--config", cfg, "--out", str(tmp_path / "y"), "--variants", "LSTM-Q"]) == 1


def test_train_predict_evaluate(workspace, tmp_path):
    code, train_out = _run(workspace, "train")
    assert code == 0
    model = os.path.join(train_out, "model.json")
    code, pred_out = _run(workspace, "predict", "--model", model)
    assert code == 0
    assert open(os.path.join(pred_out, "forecasts.csv")).readline().startswith("anchor_day,target_day,slot,point")
    code, eval_out = _run(workspace, "evaluate", "--model", model)
    assert code == 0
    for name in ("metrics.json", "segments.csv", "pinball_by_quantile.csv", "winkler_by_segment.csv", "crps_by_segment.csv"):
        assert os.path.exists(os.path.join(eval_out, name))
    broken = tmp_path / "model.json"
    broken.write_text(open(model).read()[:200])
    assert run(["evaluate", "--config", workspace[1], "--out", str(tmp_path / "e"), "--model", str(broken)]) == 3


def test_ablate_and_report(workspace):
    code, out = _run(workspace, "ablate")
    assert code == 0
    rows = open(os.path.join(out, "comparison.csv")).read().splitlines()
    assert len(rows) == 4 and "rmse_improvement_pct" in rows[0]
    base, cfg = workspace
    assert run(["report", "--config", cfg, "--out", out]) == 0
    table = open(os.path.join(out, "table.txt")).read().splitlines()
    assert len(table) == 4


def test_ablate_identical_variants_give_identical_rows(workspace, tmp_path):
    _, cfg = workspace
    assert run(["ablate", "--config", cfg, "--out", str(tmp_path), "--variants", "LSTM,LSTM"]) == 0
    header, a, b = open(tmp_path / "comparison.csv").read().splitlines()
    assert a == b


@pytest.mark.parametrize("command", ["synth", "ingest", "granger", "autoencode", "train"])
def test_rerun_is_byte_identical(workspace, command):
    code, out = _run(workspace, command)
    assert code == 0
    first = _snapshot(out)
    shutil.rmtree(out)
    assert _run(workspace, command)[0] == 0
    assert _snapshot(out) == first
