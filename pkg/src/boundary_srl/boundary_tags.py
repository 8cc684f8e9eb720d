"""Argument-boundary tag transformation and label bookkeeping.

For each predicate, the span from its leftmost to its rightmost argument
(always including the predicate itself) is the argument window. ``<BOA>`` is
written on the position just left of the window and ``<EOA>`` just right of
it; a tag is silently dropped when the window already touches the sentence
edge. Both tags are ordinary labels during training; the decoder uses them as
stop signals.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

from .errors import ConfigError, DataError

NULL_LABEL = "_"
BEGIN_TAG = "<BOA>"
END_TAG = "<EOA>"
RESERVED_LABELS = (NULL_LABEL, BEGIN_TAG, END_TAG)

SCOPE_FULL = "full_sequence"
SCOPE_WINDOW = "window_only"


def is_argument(label: str) -> bool:
    """True for real argument labels; false for the null label and both tags."""
    return label not in RESERVED_LABELS


@dataclass(frozen=True)
class LabelSet:
    """Ordered label inventory. The three reserved labels always come first."""

    labels: tuple[str, ...]

    def __post_init__(self):
        for reserved in RESERVED_LABELS:
            if self.labels.count(reserved) != 1:
                raise ConfigError(f"label set must contain {reserved!r} exactly once")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("duplicate labels in label set")

    @classmethod
    def from_labels(cls, observed) -> "LabelSet":
        extra = sorted(set(observed) - set(RESERVED_LABELS))
        return cls(RESERVED_LABELS + tuple(extra))

    @cached_property
    def _index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def index(self, label: str) -> int:
        return self._index[label]

    def argument_labels(self) -> tuple[str, ...]:
        return tuple(l for l in self.labels if is_argument(l))

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)


@dataclass(frozen=True)
class LabelStats:
    """Argument / non-argument balance of a set of labeling instances."""

    arg_fraction: float
    nonarg_fraction: float
    ratio_string: str
    scope: str
    arg_count: int
    nonarg_count: int


def argument_window(gold_labels, predicate_index: int) -> tuple[int, int]:
    """Inclusive [start, end] span of all arguments plus the predicate."""
    positions = [i for i, lab in enumerate(gold_labels) if is_argument(lab)]
    positions.append(predicate_index)
    return min(positions), max(positions)


def _augmented_column(gold_labels, predicate_index: int) -> list[str]:
    start, end = argument_window(gold_labels, predicate_index)
    out = list(gold_labels)
    if start - 1 >= 0:
        assert out[start - 1] == NULL_LABEL
        out[start - 1] = BEGIN_TAG
    if end + 1 <= len(out) - 1:
        assert out[end + 1] == NULL_LABEL
        out[end + 1] = END_TAG
    return out


def augment_labels(instance):
    """Return a copy of ``instance`` with boundary tags placed around its window.

    Raises DataError if the instance already carries a boundary tag.
    """
    if any(lab in (BEGIN_TAG, END_TAG) for lab in instance.gold_labels):
        raise DataError("instance already carries boundary tags")
    new_labels = _augmented_column(instance.gold_labels, instance.predicate_index)
    return dataclasses.replace(instance, gold_labels=tuple(new_labels))


def strip_tags(instance):
    """Inverse of augment_labels: boundary tags become the null label."""
    new_labels = tuple(
        NULL_LABEL if lab in (BEGIN_TAG, END_TAG) else lab for lab in instance.gold_labels
    )
    return dataclasses.replace(instance, gold_labels=new_labels)


def augment_corpus(corpus):
    """Corpus copy with every predicate's label column augmented in place."""
    from . import conll_io

    new_sentences = []
    for sent in corpus.sentences:
        columns = []
        for j, pred in enumerate(sent.predicate_indices):
            labels = [tok.arg_labels[j] for tok in sent.tokens]
            if any(lab in (BEGIN_TAG, END_TAG) for lab in labels):
                raise DataError("corpus already carries boundary tags")
            columns.append(_augmented_column(labels, pred))
        tokens = tuple(
            dataclasses.replace(tok, arg_labels=tuple(col[i] for col in columns))
            for i, tok in enumerate(sent.tokens)
        )
        new_sentences.append(dataclasses.replace(sent, tokens=tokens))
    return conll_io.corpus_from_sentences(new_sentences)


def _window_span(labels) -> tuple[int, int]:
    # Sentence edges stand in for tags that were clipped during augmentation.
    start = labels.index(BEGIN_TAG) if BEGIN_TAG in labels else 0
    end = labels.index(END_TAG) if END_TAG in labels else len(labels) - 1
    return start, end


def compute_label_stats(instances, scope: str) -> LabelStats:
    """Count argument vs non-argument positions, over everything or in-window only.

    Boundary tags count as non-arguments. In window scope the tag positions
    themselves are part of the window.
    """
    if scope not in (SCOPE_FULL, SCOPE_WINDOW):
        raise ConfigError(f"unknown stats scope {scope!r}")
    instances = list(instances)
    if not instances:
        raise DataError("cannot compute label statistics over zero instances")

    if scope == SCOPE_WINDOW and not any(
        lab in (BEGIN_TAG, END_TAG) for inst in instances for lab in inst.gold_labels
    ):
        raise DataError("window_only statistics need augmented instances")

    args = 0
    nonargs = 0
    for inst in instances:
        labels = list(inst.gold_labels)
        if scope == SCOPE_WINDOW:
            start, end = _window_span(labels)
            labels = labels[start : end + 1]
        for lab in labels:
            if is_argument(lab):
                args += 1
            else:
                nonargs += 1

    total = args + nonargs
    arg_fraction = args / total
    nonarg_fraction = nonargs / total
    return LabelStats(
        arg_fraction=arg_fraction,
        nonarg_fraction=nonarg_fraction,
        ratio_string=_ratio_string(args, nonargs),
        scope=scope,
        arg_count=args,
        nonarg_count=nonargs,
    )


def _ratio_string(args: int, nonargs: int) -> str:
    if args == 0:
        return "0:1"
    x = nonargs / args
    if x >= 9.95:
        return f"1:{round(x):d}"
    return f"1:{x:.1f}"
