"""Dependency semantic role labeling with argument-boundary tags.

The pipeline: parse a tabular corpus, explode it into per-predicate labeling
instances, optionally surround each instance's argument window with boundary
tags, encode tokens with a stacked BiLSTM plus multi-hop self-attention,
classify every token, and decode arguments by walking outward from the
predicate until a boundary tag is met.
"""

from .boundary_tags import (
    BEGIN_TAG,
    END_TAG,
    NULL_LABEL,
    LabelSet,
    LabelStats,
    augment_corpus,
    augment_labels,
    compute_label_stats,
    strip_tags,
)
from .conll_io import (
    Corpus,
    FormatConfig,
    PredicateInstance,
    Sentence,
    Token,
    extract_instances,
    parse_corpus,
    parse_file,
    serialize_corpus,
    write_file,
)
from .decoder import ArgumentSet, decode, predict_corpus
from .labeler import ModelParams, TrainConfig, forward, load_checkpoint, save_checkpoint, train
from .scorer import EvalReport, evaluate
from .synth_corpus import GenConfig, generate

__all__ = [
    "BEGIN_TAG",
    "END_TAG",
    "NULL_LABEL",
    "ArgumentSet",
    "Corpus",
    "EvalReport",
    "FormatConfig",
    "GenConfig",
    "LabelSet",
    "LabelStats",
    "ModelParams",
    "PredicateInstance",
    "Sentence",
    "Token",
    "TrainConfig",
    "augment_corpus",
    "augment_labels",
    "compute_label_stats",
    "decode",
    "evaluate",
    "extract_instances",
    "forward",
    "generate",
    "load_checkpoint",
    "parse_corpus",
    "parse_file",
    "predict_corpus",
    "save_checkpoint",
    "serialize_corpus",
    "strip_tags",
    "train",
    "write_file",
]
