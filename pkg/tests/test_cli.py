import json
import os

import numpy as np
import pytest

from fatigue_eeg.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--subjects", "3", "--duration-s", "12", "--seed", "3"]) == 0
    return out


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_synth_layout(corpus):
    names = sorted(os.listdir(corpus))
    assert "labels.csv" in names and "labels.csv.meta.json" in names
    assert len([n for n in names if n.startswith("S")]) == 6
    lines = (corpus / "labels.csv").read_text().splitlines()
    assert lines[0] == "recording,label" and len(lines) == 7


def test_select_channel_prints_tp7(tmp_path, capsys):
    rng = np.random.default_rng(1)
    data = np.column_stack([rng.normal(0, 5, 500), rng.normal(0, 30, 500), rng.normal(0, 10, 500)])
    path = tmp_path / "multi.csv"
    with open(path, "w") as fh:
        fh.write("FP1,TP7,O1\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")
    code, out, _ = run(capsys, "select-channel", path)
    assert code == 0 and out.strip() == "TP7"


def test_extract(corpus, tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, _ = run(capsys, "extract", "--labels", corpus / "labels.csv", "--out", out)
    assert code == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 1 + 6 * 21
    meta = json.loads((tmp_path / "f.csv.meta.json").read_text())
    assert meta["flags"]["window_s"] == 2.0 and meta["channel"] == "TP7"


def test_train_is_deterministic(corpus, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(capsys, "train", "--labels", corpus / "labels.csv", "--trees", 9, "--out", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_from_features_needs_channel(corpus, tmp_path, capsys):
    feats = tmp_path / "f.csv"
    run(capsys, "extract", "--labels", corpus / "labels.csv", "--out", feats)
    code, _, err = run(capsys, "train", "--features", feats, "--out", tmp_path / "m.json")
    assert code == 2 and "--channel" in err
    code, _, _ = run(capsys, "train", "--features", feats, "--channel", "TP7", "--out", tmp_path / "m.json")
    assert code == 0


def test_evaluate_outputs(corpus, tmp_path, capsys):
    code, out, _ = run(capsys, "evaluate", "--labels", corpus / "labels.csv", "--k", 3, "--trees", 9,
                       "--out-dir", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["metrics"]["accuracy"] >= 0.95
    assert sum(f["n_test"] for f in report["per_fold"]) == 126
    assert (tmp_path / "roc.csv").read_text().startswith("fpr,tpr,threshold\n")
    assert "accuracy" in (tmp_path / "report.txt").read_text()


def test_evaluate_row_split(corpus, tmp_path, capsys):
    code, _, _ = run(capsys, "evaluate", "--labels", corpus / "labels.csv", "--k", 4, "--trees", 5,
                     "--split", "row", "--out-dir", tmp_path)
    assert code == 0
    assert json.loads((tmp_path / "report.json").read_text())["protocol"]["split"] == "row"


def test_evaluate_missing_labels(tmp_path, capsys):
    missing = tmp_path / "nope" / "labels.csv"
    code, _, err = run(capsys, "evaluate", "--labels", missing, "--out-dir", tmp_path)
    assert code == 1 and str(missing) in err


def test_evaluate_k_exceeds_groups(corpus, tmp_path, capsys):
    code, _, err = run(capsys, "evaluate", "--labels", corpus / "labels.csv", "--k", 30, "--out-dir", tmp_path)
    assert code == 2 and "k exceeds group count" in err


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--split", "diagonal"])
    assert exc.value.code == 2


def test_predict_and_stream_agree(corpus, tmp_path, capsys):
    model = tmp_path / "m.json"
    run(capsys, "train", "--labels", corpus / "labels.csv", "--trees", 9, "--out", model)
    rec = corpus / "S02_fatigue.csv"
    code, batch, _ = run(capsys, "predict", rec, "--model", model)
    assert code == 0
    code, streamed, err = run(capsys, "stream", rec, "--model", model, "--summary", tmp_path / "s.json")
    assert code == 0
    batch_rows = [line.split(",") for line in batch.splitlines()]
    stream_rows = [line.split(",")[:3] for line in streamed.splitlines()]
    assert stream_rows[0] == batch_rows[0] == ["window_end_time_s", "label", "vote_fraction"]
    assert stream_rows == batch_rows
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["n_decisions"] == 21 and summary["majority_label"] == 1


def test_stream_channel_mismatch(corpus, tmp_path, capsys):
    model = tmp_path / "m.json"
    run(capsys, "train", "--labels", corpus / "labels.csv", "--trees", 3, "--out", model)
    other = tmp_path / "other.csv"
    with open(other, "w") as fh:
        fh.write("Cz\n")
        np.savetxt(fh, np.zeros(3000), fmt="%.1f")
    code, _, err = run(capsys, "stream", other, "--model", model)
    assert code == 1 and "channel mismatch" in err


def test_stream_malformed_model(corpus, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": "1", "trees": [')
    code, _, err = run(capsys, "stream", corpus / "S01_alert.csv", "--model", bad)
    assert code == 1 and "not valid JSON" in err
