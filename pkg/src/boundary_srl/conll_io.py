"""Reading and writing tabular predicate-argument corpora.

One token per line, whitespace-separated columns, blank line between
sentences, ``_`` for empty cells. Column roles are configurable so both the
full 14+ column dependency format and the compact
``form lemma pos fillpred apred1..apredK`` layout parse with the same code.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .boundary_tags import LabelSet
from .errors import ConfigError, ParseError, StructureError

DEFAULT_MAX_LEN = 200
PREDICATE_MARKER = "Y"
EMPTY_CELL = "_"


@dataclass(frozen=True)
class FormatConfig:
    """Maps column roles to zero-based column indices.

    ``apred_start`` is the first per-predicate argument column; everything
    from there to the end of the row is one column per predicate, in token
    order. ``pred`` points at an opaque predicate-sense cell that is carried
    through unchanged; ``id_col`` is written as a 1-based token counter and
    ignored on read.
    """

    form: int = 0
    lemma: int = 1
    pos: int = 2
    fillpred: int = 3
    apred_start: int = 4
    pred: int | None = None
    id_col: int | None = None

    @classmethod
    def simple(cls) -> "FormatConfig":
        return cls()

    @classmethod
    def conll09(cls) -> "FormatConfig":
        return cls(form=1, lemma=2, pos=4, fillpred=12, apred_start=14, pred=13, id_col=0)

    @classmethod
    def from_file(cls, path) -> "FormatConfig":
        """Read ``key=index`` lines; unknown keys are rejected."""
        values = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ParseError(f"{path}:{lineno}: expected key=index, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in cls.__dataclass_fields__:
                    raise ParseError(f"{path}:{lineno}: unknown column role {key!r}")
                try:
                    values[key] = int(value.strip())
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: index must be an integer") from None
        return cls(**values)

    @classmethod
    def resolve(cls, name: str | None) -> "FormatConfig":
        """Accept 'simple', 'conll09', or a path to a mapping file."""
        if name is None or name == "simple":
            return cls.simple()
        if name == "conll09":
            return cls.conll09()
        return cls.from_file(name)

    def __post_init__(self):
        fixed = [self.form, self.lemma, self.pos, self.fillpred]
        if self.pred is not None:
            fixed.append(self.pred)
        if self.id_col is not None:
            fixed.append(self.id_col)
        if any(i < 0 for i in fixed) or self.apred_start <= max(fixed):
            raise ConfigError("column indices must be non-negative and precede apred_start")
        if len(set(fixed)) != len(fixed):
            raise ConfigError("column roles must map to distinct indices")


@dataclass(frozen=True)
class Token:
    form: str
    lemma: str
    pos: str
    is_predicate: bool
    arg_labels: tuple[str, ...]
    pred_sense: str = EMPTY_CELL

    def __post_init__(self):
        if not self.form or not self.lemma or not self.pos:
            raise StructureError("token form/lemma/pos must be non-empty")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    predicate_indices: tuple[int, ...]
    sent_id: int = 0

    def __post_init__(self):
        n = len(self.tokens)
        if n < 1:
            raise StructureError("sentence must contain at least one token")
        k = len(self.predicate_indices)
        for p in self.predicate_indices:
            if not (0 <= p < n) or not self.tokens[p].is_predicate:
                raise StructureError(f"predicate index {p} invalid for sentence of length {n}")
        for tok in self.tokens:
            if len(tok.arg_labels) != k:
                raise StructureError("argument label count must equal predicate count")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class PredicateInstance:
    """One (sentence, predicate) labeling problem with one gold label per token."""

    sentence: Sentence
    predicate_index: int
    gold_labels: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    label_inventory: LabelSet = field(default_factory=lambda: LabelSet.from_labels(()))


def corpus_from_sentences(sentences) -> Corpus:
    """Assemble a Corpus, collecting the label inventory from the sentences."""
    observed = set()
    for sent in sentences:
        for tok in sent.tokens:
            observed.update(tok.arg_labels)
    observed.discard(EMPTY_CELL)
    return Corpus(tuple(sentences), LabelSet.from_labels(observed))


def parse_corpus(stream, fmt: FormatConfig | None = None, max_len: int = DEFAULT_MAX_LEN) -> Corpus:
    """Parse a token-per-line stream into a Corpus.

    ``stream`` is any iterable of text lines (an open file works). Sentences
    longer than ``max_len`` are rejected rather than truncated, since
    truncation would silently corrupt argument indices.
    """
    fmt = fmt or FormatConfig.simple()
    sentences = []
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            if rows:
                sentences.append(_build_sentence(rows, fmt, max_len, len(sentences)))
                rows = []
            continue
        rows.append((lineno, line.split()))
    if rows:
        sentences.append(_build_sentence(rows, fmt, max_len, len(sentences)))
    return corpus_from_sentences(sentences)


def parse_file(path, fmt: FormatConfig | None = None, max_len: int = DEFAULT_MAX_LEN) -> Corpus:
    with open(path, encoding="utf-8") as handle:
        return parse_corpus(handle, fmt=fmt, max_len=max_len)


def _build_sentence(rows, fmt: FormatConfig, max_len: int, sent_id: int) -> Sentence:
    first_line, first_cols = rows[0]
    width = len(first_cols)
    for lineno, cols in rows:
        if len(cols) != width:
            raise ParseError(f"line {lineno}: expected {width} columns, got {len(cols)}")
    if width < fmt.apred_start:
        raise ParseError(
            f"line {first_line}: need at least {fmt.apred_start} columns, got {width}"
        )
    if len(rows) > max_len:
        raise ParseError(
            f"line {first_line}: sentence has {len(rows)} tokens, max is {max_len}"
        )

    apred_count = width - fmt.apred_start
    tokens = []
    predicate_indices = []
    for i, (lineno, cols) in enumerate(rows):
        is_pred = cols[fmt.fillpred] == PREDICATE_MARKER
        if is_pred:
            predicate_indices.append(i)
        tokens.append(
            Token(
                form=cols[fmt.form],
                lemma=cols[fmt.lemma],
                pos=cols[fmt.pos],
                is_predicate=is_pred,
                arg_labels=tuple(cols[fmt.apred_start :]),
                pred_sense=cols[fmt.pred] if fmt.pred is not None else EMPTY_CELL,
            )
        )
    if len(predicate_indices) != apred_count:
        raise StructureError(
            f"line {first_line}: {len(predicate_indices)} predicates marked but "
            f"{apred_count} argument columns present"
        )
    return Sentence(tuple(tokens), tuple(predicate_indices), sent_id=sent_id)


def serialize_corpus(corpus: Corpus, fmt: FormatConfig | None = None) -> str:
    """Render a Corpus back to text. parse(serialize(c)) is structurally c."""
    fmt = fmt or FormatConfig.simple()
    blocks = []
    for sent in corpus.sentences:
        width = fmt.apred_start + len(sent.predicate_indices)
        lines = []
        for i, tok in enumerate(sent.tokens):
            cols = [EMPTY_CELL] * width
            if fmt.id_col is not None:
                cols[fmt.id_col] = str(i + 1)
            cols[fmt.form] = tok.form
            cols[fmt.lemma] = tok.lemma
            cols[fmt.pos] = tok.pos
            cols[fmt.fillpred] = PREDICATE_MARKER if tok.is_predicate else EMPTY_CELL
            if fmt.pred is not None:
                cols[fmt.pred] = tok.pred_sense
            cols[fmt.apred_start :] = tok.arg_labels
            lines.append("\t".join(cols))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def write_file(path, corpus: Corpus, fmt: FormatConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_corpus(corpus, fmt=fmt))


def extract_instances(corpus: Corpus) -> list[PredicateInstance]:
    """One PredicateInstance per (sentence, predicate), in corpus order."""
    instances = []
    for sent in corpus.sentences:
        for j, pred in enumerate(sent.predicate_indices):
            instances.append(
                PredicateInstance(
                    sentence=sent,
                    predicate_index=pred,
                    gold_labels=tuple(tok.arg_labels[j] for tok in sent.tokens),
                )
            )
    return instances


def replace_predictions(corpus: Corpus, labels_by_instance) -> Corpus:
    """Corpus copy whose argument columns are replaced by predicted labels.

    ``labels_by_instance`` holds one label sequence per predicate instance,
    in extract_instances order.
    """
    it = iter(labels_by_instance)
    new_sentences = []
    for sent in corpus.sentences:
        columns = [list(next(it)) for _ in sent.predicate_indices]
        for col in columns:
            if len(col) != len(sent.tokens):
                raise StructureError("predicted label column length mismatch")
        tokens = tuple(
            dataclasses.replace(tok, arg_labels=tuple(col[i] for col in columns))
            for i, tok in enumerate(sent.tokens)
        )
        new_sentences.append(dataclasses.replace(sent, tokens=tokens))
    return corpus_from_sentences(new_sentences)
