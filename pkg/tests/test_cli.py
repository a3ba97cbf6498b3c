import json

import pytest

from pcdual.cli import main

TINY = """\
points = 16
allow_any_points = true
widths = tiny
n1_levels = 8,4
k_levels = 4,4
batch_size = 4
epochs = 2
downstream_epochs = 2
test_fraction = 0.25
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "tiny.cfg").write_text(TINY)
    assert main(["gen-synth", "--out", str(root / "data"), "--healthy", "6", "--aneurysm", "6",
                 "--cloud-points", "40"]) == 0
    return root


def common(root, task="cls"):
    return ["--config", str(root / "tiny.cfg"), "--data", str(root / "data" / "manifest.txt"), "--task", task]


def test_gen_synth_layout(workspace):
    lines = (workspace / "data" / "manifest.txt").read_text().splitlines()
    assert len(lines) == 12
    assert lines[0] == "clouds/00000.txt 0" and lines[1].endswith(" 1")


@pytest.mark.parametrize("task", ["cls", "seg"])
def test_pretrain_downstream_evaluate(workspace, task, capsys):
    out = workspace / f"run-{task}"
    assert main(["pretrain", *common(workspace, task), "--out", str(out)]) == 0
    records = [json.loads(x) for x in (out / "pretrain.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in records] == [0, 1]
    assert {"epoch", "lr", "loss", "wall_time"} <= set(records[0])
    assert main(["train-downstream", *common(workspace, task), "--out", str(out),
                 "--encoder", str(out / "encoder.ckpt")]) == 0
    assert main(["evaluate", *common(workspace, task), "--out", str(out), "--encoder", str(out / "encoder.ckpt"),
                 "--head", str(out / "head.ckpt")]) == 0
    record = json.loads((out / "metrics.jsonl").read_text().splitlines()[-1])
    assert record["task"] == task and len(record["config_hash"]) == 64
    assert ("F1" if task == "cls" else "IoU_A.(%)") in capsys.readouterr().out


def test_resume(workspace):
    out = workspace / "resume"
    assert main(["pretrain", *common(workspace), "--out", str(out)]) == 0
    cfg = workspace / "longer.cfg"
    cfg.write_text(TINY.replace("epochs = 2", "epochs = 3"))
    args = ["--config", str(cfg), "--data", str(workspace / "data" / "manifest.txt")]
    assert main(["pretrain", *args, "--out", str(out), "--resume", str(out / "encoder.ckpt")]) == 0
    epochs = [json.loads(x)["epoch"] for x in (out / "pretrain.jsonl").read_text().splitlines()]
    assert epochs == [0, 1, 2]


def test_incompatible_encoder(workspace, capsys):
    out = workspace / "run-cls"
    if not (out / "encoder.ckpt").exists():
        main(["pretrain", *common(workspace), "--out", str(out)])
    code = main(["train-downstream", *common(workspace, "seg"), "--out", str(workspace / "x"),
                 "--encoder", str(out / "encoder.ckpt")])
    assert code == 2 and "incompatible" in capsys.readouterr().err


def test_config_errors(workspace, capsys):
    bad = workspace / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["gradcheck", "--config", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["pretrain", "--points", "100", "--data", "x"])


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10


def test_ablations(workspace, capsys):
    out = workspace / "ablate"
    assert main(["ablate-augment", *common(workspace), "--out", str(out)]) == 0
    table = capsys.readouterr().out
    for kind in ("rotation", "perturbation", "jitter+perturbation", "jitter"):
        assert kind in table
    # a 1% labeled split needs at least 100 clouds per class in the remainder
    assert main(["ablate-labels", *common(workspace), "--out", str(out)]) == 2
    assert "no samples in the labeled part" in capsys.readouterr().err


def test_label_ablation(tmp_path, capsys):
    assert main(["gen-synth", "--out", str(tmp_path / "data"), "--healthy", "140", "--aneurysm", "140",
                 "--cloud-points", "16"]) == 0
    (tmp_path / "cfg").write_text(TINY.replace("epochs = 2", "epochs = 1").replace("batch_size = 4", "batch_size = 32"))
    capsys.readouterr()
    assert main(["ablate-labels", "--config", str(tmp_path / "cfg"), "--data", str(tmp_path / "data" / "manifest.txt"),
                 "--out", str(tmp_path / "out")]) == 0
    table = capsys.readouterr().out
    for row in ("10%", "5%", "1%"):
        assert row in table
    assert (tmp_path / "out" / "labels_0.01" / "head.ckpt").exists()


def test_fixed_test_manifest(workspace, tmp_path):
    assert main(["gen-synth", "--out", str(tmp_path / "held"), "--healthy", "2", "--aneurysm", "2",
                 "--cloud-points", "40", "--seed", "5"]) == 0
    out = tmp_path / "run"
    args = [*common(workspace), "--test-data", str(tmp_path / "held" / "manifest.txt"), "--out", str(out)]
    assert main(["pretrain", *args]) == 0
    assert main(["train-downstream", *args, "--encoder", str(out / "encoder.ckpt")]) == 0
    assert main(["evaluate", *args, "--encoder", str(out / "encoder.ckpt"), "--head", str(out / "head.ckpt")]) == 0
    record = json.loads((out / "metrics.jsonl").read_text())
    assert record["counts"]["tp"] + record["counts"]["fp"] + record["counts"]["fn"] + record["counts"]["tn"] == 4
