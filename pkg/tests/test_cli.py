import json
import os

from boundary_srl import cli, conll_io
from boundary_srl.boundary_tags import BEGIN_TAG, END_TAG


def run(capsys, *argv):
    code = cli.run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def kv(stdout):
    pairs = {}
    for line in stdout.splitlines():
        if "=" in line and " " not in line.split("=", 1)[0]:
            key, _, value = line.partition("=")
            pairs[key] = value
    return pairs


def test_usage_errors_exit_one(capsys):
    code, _, _ = run(capsys, "no-such-command")
    assert code == 1
    code, _, _ = run(capsys, "stats")  # missing --data
    assert code == 1
    code, out, _ = run(capsys, "--help")
    assert code == 0


def test_data_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("a\ta\tN\t_\t_\nb\tb\tN\n")
    code, _, err = run(capsys, "stats", "--data", str(bad))
    assert code == 2
    assert "error:" in err


def test_gen_augment_stats_pipeline(tmp_path, capsys):
    data = tmp_path / "train.txt"
    code, _, _ = run(capsys, "gen-data", "--out", str(data), "--sentences", "40", "--seed", "3")
    assert code == 0
    corpus = conll_io.parse_file(str(data))
    assert len(corpus.sentences) == 40

    augmented = tmp_path / "train.aug.txt"
    code, _, _ = run(capsys, "augment", "--data", str(data), "--out", str(augmented))
    assert code == 0
    aug_corpus = conll_io.parse_file(str(augmented))
    tags = {
        lab
        for sent in aug_corpus.sentences
        for tok in sent.tokens
        for lab in tok.arg_labels
    }
    assert BEGIN_TAG in tags and END_TAG in tags

    code, out, _ = run(capsys, "stats", "--data", str(data), "--scope", "full_sequence")
    assert code == 0
    full = kv(out)
    code, out, _ = run(capsys, "stats", "--data", str(augmented), "--scope", "window_only")
    assert code == 0
    window = kv(out)
    assert float(window["arg_fraction"]) > float(full["arg_fraction"])
    assert float(full["arg_fraction"]) + float(full["nonarg_fraction"]) == 1.0


def test_stats_augments_on_the_fly(tmp_path, capsys):
    data = tmp_path / "train.txt"
    run(capsys, "gen-data", "--out", str(data), "--sentences", "10", "--seed", "4")
    code, out, _ = run(capsys, "stats", "--data", str(data), "--scope", "window_only")
    assert code == 0
    assert "arg_fraction" in kv(out)


def test_eval_gold_against_itself(tmp_path, capsys):
    data = tmp_path / "gold.txt"
    run(capsys, "gen-data", "--out", str(data), "--sentences", "12", "--seed", "5")
    code, out, _ = run(capsys, "eval", "--data", str(data), "--pred", str(data))
    assert code == 0
    assert kv(out)["f1"] == "1.000000"


TINY = [
    "--set", "hidden_size=8", "--set", "num_layers=1", "--set", "attention_hops=2",
    "--set", "attention_dim=8", "--set", "word_dim=8", "--set", "pretrained_dim=2",
    "--set", "lemma_dim=4", "--set", "pos_dim=2", "--set", "indicator_dim=2",
    "--set", "max_epochs=2", "--set", "batch_size=8", "--set", "keep_prob=1.0",
]


def test_train_predict_eval_cycle(tmp_path, capsys):
    data = tmp_path / "train.txt"
    dev = tmp_path / "dev.txt"
    run(capsys, "gen-data", "--out", str(data), "--sentences", "10", "--seed", "6")
    run(capsys, "gen-data", "--out", str(dev), "--sentences", "4", "--seed", "7")
    out_dir = tmp_path / "model"
    code, out, err = run(
        capsys, "train", "--data", str(data), "--dev", str(dev),
        "--out", str(out_dir), "--seed", "1", *TINY,
    )
    assert code == 0
    pairs = kv(out)
    assert os.path.exists(pairs["checkpoint"])
    assert os.path.exists(pairs["checkpoint"] + ".json")
    history = json.loads((out_dir / "history.json").read_text())
    assert len(history) == 2
    assert "epoch" in err

    pred = tmp_path / "pred.txt"
    code, _, _ = run(
        capsys, "predict", "--data", str(dev), "--checkpoint", pairs["checkpoint"],
        "--out", str(pred),
    )
    assert code == 0
    code, out, _ = run(capsys, "eval", "--data", str(dev), "--pred", str(pred))
    assert code == 0
    assert 0.0 <= float(kv(out)["f1"]) <= 1.0

    pred2 = tmp_path / "pred2.txt"
    run(
        capsys, "predict", "--data", str(dev), "--checkpoint", pairs["checkpoint"],
        "--out", str(pred2), "--workers", "2",
    )
    assert pred.read_bytes() == pred2.read_bytes()


def test_ablation_flags_run_end_to_end(tmp_path, capsys):
    data = tmp_path / "train.txt"
    dev = tmp_path / "dev.txt"
    run(capsys, "gen-data", "--out", str(data), "--sentences", "8", "--seed", "8")
    run(capsys, "gen-data", "--out", str(dev), "--sentences", "3", "--seed", "9")
    for flag, directory in (("--no-aux-tags", "m1"), ("--no-self-attention", "m2")):
        code, out, _ = run(
            capsys, "train", "--data", str(data), "--dev", str(dev),
            "--out", str(tmp_path / directory), flag, *TINY,
        )
        assert code == 0
        assert "best_dev_f1" in kv(out)


def test_config_file_with_cli_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("max_epochs=1\nhidden_size=8\nnum_layers=1\nattention_hops=2\n"
                   "attention_dim=8\nword_dim=8\npretrained_dim=2\nlemma_dim=4\n"
                   "pos_dim=2\nindicator_dim=2\nkeep_prob=1.0\n")
    data = tmp_path / "train.txt"
    dev = tmp_path / "dev.txt"
    run(capsys, "gen-data", "--out", str(data), "--sentences", "6", "--seed", "10")
    run(capsys, "gen-data", "--out", str(dev), "--sentences", "3", "--seed", "11")
    code, out, _ = run(
        capsys, "train", "--data", str(data), "--dev", str(dev),
        "--out", str(tmp_path / "m"), "--config", str(cfg),
        "--set", "max_epochs=2", "--loss-window", "window_only",
    )
    assert code == 0
    history = json.loads((tmp_path / "m" / "history.json").read_text())
    assert len(history) == 2  # the --set override beat the config file
    sidecar = json.loads((tmp_path / "m" / "checkpoint.bin.json").read_text())
    assert sidecar["config"]["loss_window"] == "window_only"
