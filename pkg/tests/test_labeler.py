import math

import numpy as np
import pytest

from boundary_srl import boundary_tags, conll_io, decoder, labeler, numerics, synth_corpus
from boundary_srl.boundary_tags import BEGIN_TAG, END_TAG
from boundary_srl.errors import ConfigError, DataError
from boundary_srl.labeler import TrainConfig
from boundary_srl.numerics import GradientTape

from conftest import make_instance


def desk_config(**overrides):
    base = dict(
        hidden_size=16,
        num_layers=1,
        attention_hops=2,
        attention_dim=16,
        word_dim=12,
        pretrained_dim=4,
        lemma_dim=8,
        pos_dim=4,
        indicator_dim=4,
        batch_size=8,
        max_epochs=10,
        keep_prob=1.0,
        lr=0.003,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def small_corpora():
    train = synth_corpus.generate(synth_corpus.GenConfig(sentences=12, word_vocab=16, seed=21))
    dev = synth_corpus.generate(synth_corpus.GenConfig(sentences=5, word_vocab=16, seed=22))
    return train, dev


def test_eval_forward_is_bitwise_deterministic():
    train, _ = small_corpora()
    config = desk_config()
    params = labeler.init_model(config, train)
    inst = conll_io.extract_instances(train)[0]
    a = labeler.forward(inst, params, config, mode="eval")
    b = labeler.forward(inst, params, config, mode="eval")
    assert np.array_equal(a, b)
    assert np.abs(a.sum(axis=1) - 1).max() < 1e-9


def test_forward_output_shape():
    inst = make_instance(["_"] * 7, 3)
    corpus = conll_io.corpus_from_sentences([inst.sentence])
    config = desk_config()
    params = labeler.init_model(config, corpus)
    out = labeler.forward(inst, params, config)
    assert out.shape == (7, len(params.output_labels))


def test_attention_free_forward_matches_reference_recomputation():
    train, _ = small_corpora()
    config = desk_config(use_attention=False)
    params = labeler.init_model(config, train)
    inst = conll_io.extract_instances(train)[0]
    out = labeler.forward(inst, params, config)

    # independent recomposition of the attention-free pipeline
    from boundary_srl import embeddings as emb_mod
    from boundary_srl import encoder as enc_mod

    emb = emb_mod.embed_instance(inst, params.tables, params.vocabs)
    hidden = enc_mod.bilstm_encode(emb, params.stack)
    logits = numerics.add(numerics.matmul(hidden, params.w_out), params.b_out)
    reference = numerics.softmax_rows(logits).data
    assert np.array_equal(out, reference)


def test_compute_loss_values():
    labels = ("_", BEGIN_TAG, END_TAG, "A1")
    gold = ["_", "A1", "_"]
    perfect = np.zeros((3, 4))
    perfect[0, 0] = perfect[2, 0] = 1.0
    perfect[1, 3] = 1.0
    assert labeler.compute_loss(perfect, gold, labels) < 1e-10
    uniform = np.full((3, 4), 0.25)
    assert labeler.compute_loss(uniform, gold, labels) == pytest.approx(math.log(4))


def test_window_only_loss_counts_five_positions():
    labels = ("_", BEGIN_TAG, END_TAG, "A1", "A3")
    gold = ["_", BEGIN_TAG, "A1", "_", "A3", END_TAG, "_"]
    rng = np.random.default_rng(0)
    raw = rng.random((7, 5))
    probs = raw / raw.sum(axis=1, keepdims=True)
    index = {lab: i for i, lab in enumerate(labels)}
    by_hand = -np.mean(
        [np.log(probs[i, index[gold[i]]]) for i in range(1, 6)]
    )
    got = labeler.compute_loss(probs, gold, labels, loss_window="window_only")
    assert got == pytest.approx(by_hand, abs=1e-12)
    mask = labeler.loss_exclusion_mask(gold, "window_only")
    assert mask.tolist() == [True, False, False, False, False, False, True]


def test_compute_loss_agrees_with_taped_cross_entropy():
    train, _ = small_corpora()
    config = desk_config()
    params = labeler.init_model(config, train)
    inst = boundary_tags.augment_labels(conll_io.extract_instances(train)[0])
    index = {lab: i for i, lab in enumerate(params.output_labels)}
    tape = GradientTape()
    logits = labeler.forward_logits(inst, params, config, tape=tape)
    taped = numerics.cross_entropy(
        logits,
        [index[lab] for lab in inst.gold_labels],
        mask=labeler.loss_exclusion_mask(inst.gold_labels, "full_sequence"),
        tape=tape,
    )
    probs = labeler.forward(inst, params, config)
    direct = labeler.compute_loss(probs, inst.gold_labels, params.output_labels)
    assert float(taped.data) == pytest.approx(direct, abs=1e-12)


def test_zero_learning_rate_keeps_initial_parameters():
    train, dev = small_corpora()
    config = desk_config(lr=0.0, max_epochs=1)
    params, _ = labeler.train(train, dev, config)
    fresh = labeler.init_model(config, train)
    for (name_a, a), (name_b, b) in zip(params.trainable(), fresh.trainable()):
        assert name_a == name_b
        assert np.array_equal(a.data, b.data)


def test_two_sentence_overfit_drives_loss_down():
    corpus = synth_corpus.generate(
        synth_corpus.GenConfig(sentences=2, word_vocab=12, seed=30)
    )
    config = desk_config(max_epochs=300, batch_size=2)
    _, history = labeler.train(corpus, corpus, config)
    assert history[-1]["train_loss"] < 0.01


def test_training_loss_decreases_over_first_five_steps():
    train, dev = small_corpora()
    # one batch per epoch: each epoch is exactly one optimizer step
    config = desk_config(batch_size=64, max_epochs=5)
    _, history = labeler.train(train, dev, config)
    losses = [h["train_loss"] for h in history]
    assert all(losses[i + 1] < losses[i] for i in range(4))


def test_twin_runs_are_identical():
    train, dev = small_corpora()
    config = desk_config(max_epochs=3)
    params_a, history_a = labeler.train(train, dev, config)
    params_b, history_b = labeler.train(train, dev, config)
    assert history_a == history_b
    for (_, a), (_, b) in zip(params_a.trainable(), params_b.trainable()):
        assert np.array_equal(a.data, b.data)


def test_returned_checkpoint_has_best_dev_f1():
    train, dev = small_corpora()
    config = desk_config(max_epochs=6)
    params, history = labeler.train(train, dev, config)
    best = max(h["dev_f1"] for h in history)
    report = labeler.evaluate_instances(conll_io.extract_instances(dev), params, config)
    assert report.f1 == pytest.approx(best, abs=1e-12)


def test_empty_training_corpus_rejected():
    empty = conll_io.parse_corpus([])
    _, dev = small_corpora()
    with pytest.raises(DataError):
        labeler.train(empty, dev, desk_config())


def test_aux_tags_off_is_a_plain_tagger():
    train, dev = small_corpora()
    config = desk_config(use_aux_tags=False, max_epochs=2)
    params, _ = labeler.train(train, dev, config)
    assert BEGIN_TAG not in params.output_labels
    assert END_TAG not in params.output_labels
    inst = conll_io.extract_instances(dev)[0]
    probs = labeler.forward(inst, params, config)
    for i in probs.argmax(axis=1):
        assert params.output_labels[i] not in (BEGIN_TAG, END_TAG)


def test_checkpoint_round_trip_preserves_predictions(tmp_path):
    train, dev = small_corpora()
    config = desk_config(max_epochs=2)
    params, _ = labeler.train(train, dev, config)
    path = str(tmp_path / "model.bin")
    labeler.save_checkpoint(path, params, config)
    loaded_params, loaded_config = labeler.load_checkpoint(path)
    assert loaded_config == config
    assert loaded_params.output_labels == params.output_labels
    assert loaded_params.vocabs == params.vocabs
    before = decoder.predict_corpus(dev, params, config)
    after = decoder.predict_corpus(dev, loaded_params, loaded_config)
    assert before == after


def test_config_file_parsing(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text(
        "# comment\nlr=0.01\nbatch_size=16\nuse_attention=false\nloss_window=window_only\n"
    )
    values = labeler.parse_config_file(path)
    assert values == {
        "lr": 0.01,
        "batch_size": 16,
        "use_attention": False,
        "loss_window": "window_only",
    }
    bad = tmp_path / "bad.cfg"
    bad.write_text("warp_speed=9\n")
    with pytest.raises(ConfigError):
        labeler.parse_config_file(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(keep_prob=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(loss_window="everything").validate()
    with pytest.raises(ConfigError):
        TrainConfig(seed=-4).validate()
    TrainConfig().validate()
