import io

import pytest

from boundary_srl import conll_io, synth_corpus
from boundary_srl.conll_io import FormatConfig, extract_instances, parse_corpus, serialize_corpus
from boundary_srl.errors import ConfigError, ParseError, StructureError

EXAMPLE = """\
a\ta\tDT\t_\t_
big\tbig\tJJ\t_\t_
apple\tapple\tNN\t_\tA1
drops\tdrop\tVBZ\tY\t_
from\tfrom\tIN\t_\tA3
the\tthe\tDT\t_\t_
tree\ttree\tNN\t_\t_
"""


def test_parse_seven_token_sentence():
    corpus = parse_corpus(io.StringIO(EXAMPLE))
    assert len(corpus.sentences) == 1
    sent = corpus.sentences[0]
    assert sent.predicate_indices == (3,)
    assert sent.tokens[2].arg_labels == ("A1",)
    assert sent.tokens[4].arg_labels == ("A3",)
    assert sent.tokens[3].is_predicate
    assert corpus.label_inventory.argument_labels() == ("A1", "A3")


def test_empty_stream_gives_empty_corpus():
    corpus = parse_corpus(io.StringIO(""))
    assert corpus.sentences == ()


def test_round_trip_example():
    corpus = parse_corpus(io.StringIO(EXAMPLE))
    again = parse_corpus(io.StringIO(serialize_corpus(corpus)))
    assert again == corpus


def test_instance_extraction_gold_labels():
    corpus = parse_corpus(io.StringIO(EXAMPLE))
    instances = extract_instances(corpus)
    assert len(instances) == 1
    assert list(instances[0].gold_labels) == ["_", "_", "A1", "_", "A3", "_", "_"]


def test_two_sentences_three_predicates():
    text = (
        "x\tx\tN\tY\t_\t_\n"
        "y\ty\tV\tY\tA0\t_\n"
        "\n"
        "p\tp\tN\t_\tA1\n"
        "q\tq\tV\tY\t_\n"
    )
    corpus = parse_corpus(io.StringIO(text))
    instances = extract_instances(corpus)
    assert len(instances) == 3
    assert instances[0].sentence is instances[1].sentence


def test_zero_predicate_corpus_serializes_without_apred_columns():
    text = "x\tx\tN\t_\ny\ty\tN\t_\n"
    corpus = parse_corpus(io.StringIO(text))
    out = serialize_corpus(corpus)
    assert all(len(line.split("\t")) == 4 for line in out.strip().splitlines())
    assert parse_corpus(io.StringIO(out)) == corpus


def test_serialization_is_byte_stable():
    corpus = synth_corpus.generate(synth_corpus.GenConfig(sentences=50, seed=3))
    first = serialize_corpus(corpus)
    second = serialize_corpus(parse_corpus(io.StringIO(first)))
    assert first == second


def test_seventeen_instances_over_ten_sentences():
    # 7 sentences with 2 predicates, 3 with 1: 17 instances total
    blocks = []
    for i in range(10):
        preds = 2 if i < 7 else 1
        lines = []
        for j in range(5):
            fill = "Y" if j < preds else "_"
            labels = "\t".join("_" for _ in range(preds))
            lines.append(f"w{j}\tw{j}\tN\t{fill}\t{labels}")
        blocks.append("\n".join(lines))
    corpus = parse_corpus(io.StringIO("\n\n".join(blocks) + "\n"))
    assert len(extract_instances(corpus)) == 17


def test_ragged_rows_report_line_number():
    text = "a\ta\tN\t_\t_\nb\tb\tN\n"
    with pytest.raises(ParseError, match="line 2"):
        parse_corpus(io.StringIO(text))


def test_predicate_count_mismatch_is_structural():
    text = "a\ta\tN\t_\t_\nb\tb\tN\t_\t_\n"  # one apred column, zero Y marks
    with pytest.raises(StructureError):
        parse_corpus(io.StringIO(text))


def test_over_length_sentence_rejected():
    lines = "\n".join("w\tw\tN\t_" for _ in range(11)) + "\n"
    with pytest.raises(ParseError, match="max"):
        parse_corpus(io.StringIO(lines), max_len=10)


def test_conll09_format_preserves_sense():
    fmt = FormatConfig.conll09()
    row = ["_"] * 14
    row[1], row[2], row[4] = "eats", "eat", "VBZ"
    row[12], row[13] = "Y", "eat.01"
    text = "\t".join(row + ["A0"]) + "\n"
    corpus = parse_corpus(io.StringIO(text), fmt=fmt)
    tok = corpus.sentences[0].tokens[0]
    assert tok.pred_sense == "eat.01"
    assert parse_corpus(io.StringIO(serialize_corpus(corpus, fmt=fmt)), fmt=fmt) == corpus


def test_format_config_from_file(tmp_path):
    path = tmp_path / "cols.cfg"
    path.write_text("form=1\nlemma=2\npos=4\nfillpred=12\npred=13\napred_start=14\n")
    fmt = FormatConfig.from_file(path)
    assert fmt == FormatConfig(form=1, lemma=2, pos=4, fillpred=12, pred=13, apred_start=14)
    bad = tmp_path / "bad.cfg"
    bad.write_text("shape=3\n")
    with pytest.raises(ParseError):
        FormatConfig.from_file(bad)


def test_format_config_validation():
    with pytest.raises(ConfigError):
        FormatConfig(form=0, lemma=0, pos=1, fillpred=2, apred_start=3)
    with pytest.raises(ConfigError):
        FormatConfig(apred_start=2)


def test_instance_count_and_inventory_properties():
    for seed in range(5):
        corpus = synth_corpus.generate(
            synth_corpus.GenConfig(sentences=30, preds_min=0, preds_max=1, seed=seed)
        )
        instances = extract_instances(corpus)
        assert len(instances) == sum(len(s.predicate_indices) for s in corpus.sentences)
        for inst in instances:
            for lab in inst.gold_labels:
                assert lab in corpus.label_inventory
