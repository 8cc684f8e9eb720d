"""Per-token input vectors.

Each token embeds as the concatenation of: a trainable word vector, a frozen
pretrained word vector, a trainable lemma vector, a trainable POS vector, a
trainable 2-row predicate-indicator vector, and (optionally) a precomputed
contextual vector read from a file. Index 0 of every vocabulary is the
unknown entry; pretrained lookups lowercase the word and fall back to a zero
row.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DataError, ParseError, ShapeError
from .numerics import GradientTape, Tensor

UNK = "<unk>"


@dataclass(frozen=True)
class EmbeddingDims:
    word: int = 100
    pretrained: int = 100
    lemma: int = 100
    pos: int = 32
    indicator: int = 16
    external: int = 0  # 0 disables the external component

    def total(self) -> int:
        return self.word + self.pretrained + self.lemma + self.pos + self.indicator + self.external


@dataclass(frozen=True)
class VocabMaps:
    word: dict
    lemma: dict
    pos: dict


def build_vocabs(corpus) -> VocabMaps:
    """First-seen-order vocabularies over a corpus, with UNK at index 0."""
    word = {UNK: 0}
    lemma = {UNK: 0}
    pos = {UNK: 0}
    for sent in corpus.sentences:
        for tok in sent.tokens:
            word.setdefault(tok.form, len(word))
            lemma.setdefault(tok.lemma, len(lemma))
            pos.setdefault(tok.pos, len(pos))
    return VocabMaps(word=word, lemma=lemma, pos=pos)


@dataclass
class EmbeddingTables:
    random_word: Tensor
    pretrained_word: Tensor  # frozen; row 0 is the all-zero OOV row
    pretrained_index: dict  # lowercased word -> row, absent words map to 0
    lemma: Tensor
    pos: Tensor
    indicator: Tensor  # exactly 2 rows: 0 = ordinary token, 1 = the predicate
    dims: EmbeddingDims


def load_pretrained(stream, dim: int):
    """Parse ``word v1 .. v_dim`` lines into (index map, frozen table).

    The table holds exactly one row per distinct word; out-of-vocabulary
    handling (the zero vector) happens at embed time. Repeated words keep
    their first occurrence.
    """
    index = {}
    vectors = []
    for lineno, raw in enumerate(stream, start=1):
        parts = raw.split()
        if not parts:
            continue
        word, values = parts[0], parts[1:]
        if len(values) != dim:
            raise ParseError(f"line {lineno}: expected {dim} values, got {len(values)}")
        if word in index:
            continue
        try:
            vec = np.array([float(v) for v in values])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric vector component") from None
        index[word] = len(vectors)
        vectors.append(vec)
    table = np.vstack(vectors) if vectors else np.zeros((0, dim))
    return index, Tensor(table, requires_grad=False)


def load_pretrained_file(path, dim: int):
    with open(path, encoding="utf-8") as handle:
        return load_pretrained(handle, dim)


def init_tables(vocabs: VocabMaps, dims: EmbeddingDims, rng, pretrained=None) -> EmbeddingTables:
    """Fresh tables, uniform [-0.1, 0.1]. ``pretrained`` is load_pretrained output.

    The stored pretrained table gains a zero row at index 0 that serves every
    out-of-vocabulary lookup; file rows shift up by one.
    """
    if pretrained is None:
        pre_index, pre_table = {}, Tensor(np.zeros((0, dims.pretrained)), requires_grad=False)
    else:
        pre_index, pre_table = pretrained
        if pre_table.shape[1] != dims.pretrained:
            raise ShapeError(
                f"pretrained table is {pre_table.shape[1]}-dimensional, "
                f"config says {dims.pretrained}"
            )
    stored = np.vstack([np.zeros((1, dims.pretrained)), pre_table.data])
    return EmbeddingTables(
        random_word=numerics.uniform((len(vocabs.word), dims.word), rng),
        pretrained_word=Tensor(stored, requires_grad=False),
        pretrained_index={w: i + 1 for w, i in pre_index.items()},
        lemma=numerics.uniform((len(vocabs.lemma), dims.lemma), rng),
        pos=numerics.uniform((len(vocabs.pos), dims.pos), rng),
        indicator=numerics.uniform((2, dims.indicator), rng),
        dims=dims,
    )


class ExternalVectors:
    """Precomputed per-token vectors keyed by (sentence id, token index)."""

    def __init__(self, dim: int, by_sent: dict):
        self.dim = dim
        self._by_sent = by_sent

    def vectors_for(self, sent_id: int, n_tokens: int) -> np.ndarray:
        if sent_id not in self._by_sent:
            raise DataError(f"no external vectors for sentence {sent_id}")
        mat = self._by_sent[sent_id]
        if mat.shape != (n_tokens, self.dim):
            raise DataError(
                f"external vectors for sentence {sent_id} have shape {mat.shape}, "
                f"expected {(n_tokens, self.dim)}"
            )
        return mat


def write_external_vectors(path, by_sent: dict, dim: int) -> None:
    """Binary layout: per sentence, (id, token count, row-major float64 LE values).

    A JSON sidecar at ``path + '.idx.json'`` records the dimension and the
    byte offset of every sentence record.
    """
    offsets = {}
    with open(path, "wb") as handle:
        for sent_id in sorted(by_sent):
            mat = np.ascontiguousarray(by_sent[sent_id], dtype="<f8")
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise ShapeError(f"sentence {sent_id}: vectors must be (n, {dim})")
            offsets[str(sent_id)] = handle.tell()
            handle.write(struct.pack("<II", int(sent_id), mat.shape[0]))
            handle.write(mat.tobytes())
    with open(path + ".idx.json", "w", encoding="utf-8") as handle:
        json.dump({"dim": dim, "offsets": offsets}, handle, sort_keys=True)


def load_external_vectors(path) -> ExternalVectors:
    sidecar = path + ".idx.json"
    if not os.path.exists(sidecar):
        raise DataError(f"missing sidecar index {sidecar}")
    with open(sidecar, encoding="utf-8") as handle:
        meta = json.load(handle)
    dim = int(meta["dim"])
    by_sent = {}
    with open(path, "rb") as handle:
        for key, offset in meta["offsets"].items():
            handle.seek(int(offset))
            sent_id, count = struct.unpack("<II", handle.read(8))
            if sent_id != int(key):
                raise DataError(f"{path}: sidecar offset for sentence {key} is stale")
            raw = handle.read(8 * count * dim)
            if len(raw) != 8 * count * dim:
                raise DataError(f"{path}: truncated record for sentence {sent_id}")
            by_sent[sent_id] = np.frombuffer(raw, dtype="<f8").reshape(count, dim).astype(np.float64)
    return ExternalVectors(dim, by_sent)


def embed_instance(
    instance,
    tables: EmbeddingTables,
    vocabs: VocabMaps,
    external: ExternalVectors | None = None,
    tape: GradientTape | None = None,
) -> Tensor:
    """Stack the per-token concatenated vectors into an (n, D) tensor.

    Gradients reach the trainable tables through the row gathers; the
    pretrained table and external vectors never receive gradient.
    """
    sent = instance.sentence
    n = len(sent.tokens)
    word_ids = [vocabs.word.get(tok.form, 0) for tok in sent.tokens]
    lemma_ids = [vocabs.lemma.get(tok.lemma, 0) for tok in sent.tokens]
    pos_ids = [vocabs.pos.get(tok.pos, 0) for tok in sent.tokens]
    pre_ids = [tables.pretrained_index.get(tok.form.lower(), 0) for tok in sent.tokens]
    flag_ids = [1 if i == instance.predicate_index else 0 for i in range(n)]

    parts = [
        numerics.rows(tables.random_word, word_ids, tape),
        numerics.rows(tables.pretrained_word, pre_ids, tape),
        numerics.rows(tables.lemma, lemma_ids, tape),
        numerics.rows(tables.pos, pos_ids, tape),
        numerics.rows(tables.indicator, flag_ids, tape),
    ]
    if tables.dims.external > 0:
        if external is None:
            raise DataError("config enables external vectors but none were supplied")
        mat = external.vectors_for(sent.sent_id, n)
        if external.dim != tables.dims.external:
            raise DataError(
                f"external vectors are {external.dim}-dimensional, "
                f"config says {tables.dims.external}"
            )
        parts.append(Tensor(mat, requires_grad=False))
    return numerics.concat(parts, axis=1, tape=tape)
