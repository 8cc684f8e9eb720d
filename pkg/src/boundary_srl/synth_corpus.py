"""Deterministic synthetic corpora with controllable argument locality.

Every argument lands within ``window`` tokens of its predicate, so the
generated data embodies the locality premise the boundary tags rely on.
Learnable structure is injected on purpose: argument tokens draw their forms
from a per-label vocabulary bucket, predicates from a verb-like bucket, and
each label is tied to one side of the predicate (first half of the alphabet
left, second half right). A model trained on one sample can therefore
genuinely generalize to a fresh sample instead of only memorizing.

Tokens far away from every predicate may be distractors: they look exactly
like arguments (argument-bucket form, noun tag) but carry no label. A tagger
that scans the whole sentence has to learn to reject them; a decoder that
stops at the argument boundary never meets them.

Forms are ``base + one-letter suffix`` with the lemma being the base, so
lemma vocabularies stay small and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import conll_io, numerics
from .conll_io import Sentence, Token
from .errors import ConfigError

_SUFFIXES = ("a", "o", "e")
# chance that a token more than window+1 away from every predicate mimics an
# argument (form and POS) while staying unlabeled
_DISTRACTOR_RATE = 0.3


@dataclass(frozen=True)
class GenConfig:
    sentences: int = 50
    len_min: int = 7
    len_max: int = 12
    preds_min: int = 1
    preds_max: int = 1
    args_min: int = 1
    args_max: int = 2
    window: int = 3
    word_vocab: int = 40  # filler base-word count; other buckets scale from it
    pos_vocab: int = 3  # filler POS tag count
    labels: tuple = ("A0", "A1")
    seed: int = 0

    def validate(self) -> None:
        if self.sentences < 0:
            raise ConfigError("sentences must be >= 0")
        if not (1 <= self.len_min <= self.len_max):
            raise ConfigError("need 1 <= len_min <= len_max")
        if not (0 <= self.preds_min <= self.preds_max):
            raise ConfigError("need 0 <= preds_min <= preds_max")
        if not (0 <= self.args_min <= self.args_max):
            raise ConfigError("need 0 <= args_min <= args_max")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.args_max > 2 * self.window:
            raise ConfigError(
                f"args_max={self.args_max} cannot fit in a window of {2 * self.window} slots"
            )
        if self.len_min < 2 * self.window + 1:
            raise ConfigError("len_min must be at least 2*window + 1")
        if self.preds_max > self.len_min - 2 * self.window:
            raise ConfigError("preds_max exceeds the guaranteed predicate slots")
        if self.word_vocab < 4 or self.pos_vocab < 1:
            raise ConfigError("vocabulary sizes too small")
        if not self.labels:
            raise ConfigError("need at least one argument label")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def expected_arg_fraction(self) -> float:
        """Analytic full-sequence argument density of the generated instances.

        Argument count and sentence length are independent uniform draws, so
        the corpus-level ratio of argument positions to all positions
        converges to E[args per predicate] / E[sentence length].
        """
        mean_args = (self.args_min + self.args_max) / 2.0
        mean_len = (self.len_min + self.len_max) / 2.0
        return mean_args / mean_len


def _buckets(config: GenConfig):
    per_label = max(4, config.word_vocab // (2 * max(1, len(config.labels))))
    return {
        "fill": [f"fill{i:02d}" for i in range(config.word_vocab)],
        "pred": [f"act{i:02d}" for i in range(max(6, config.word_vocab // 4))],
        **{
            lab: [f"{lab.lower()}w{i:02d}" for i in range(per_label)]
            for lab in config.labels
        },
    }


def _pick_label(config: GenConfig, offset: int, rng) -> str:
    # position-label correlation: the first half of the alphabet lives left
    # of the predicate, the second half right of it
    labels = config.labels
    if len(labels) == 1:
        return labels[0]
    half = (len(labels) + 1) // 2
    pool = labels[:half] if offset < 0 else labels[half:]
    return pool[rng.integers(len(pool))]


def generate(config: GenConfig) -> "conll_io.Corpus":
    """Build a corpus; identical output for identical configs."""
    config.validate()
    buckets = _buckets(config)
    sentences = []
    for sent_id in range(config.sentences):
        rng = numerics.rng_for(config.seed, 21, sent_id)
        n = int(rng.integers(config.len_min, config.len_max + 1))
        n_preds = int(rng.integers(config.preds_min, config.preds_max + 1))
        # keep the whole window inside the sentence so placement is never clipped
        slots = list(range(config.window, n - config.window))
        pred_positions = sorted(rng.choice(slots, size=n_preds, replace=False).tolist())

        role = ["fill"] * n
        for p in pred_positions:
            role[p] = "pred"
        columns = []
        for p in pred_positions:
            column = [conll_io.EMPTY_CELL] * n
            n_args = int(rng.integers(config.args_min, config.args_max + 1))
            offsets = [o for o in range(-config.window, config.window + 1) if o != 0]
            chosen = rng.choice(offsets, size=n_args, replace=False)
            for offset in sorted(int(o) for o in chosen):
                pos = p + offset
                label = _pick_label(config, offset, rng)
                column[pos] = label
                if role[pos] == "fill":
                    role[pos] = label
            columns.append(column)
        for i in range(n):
            if role[i] != "fill" or not pred_positions:
                continue
            if min(abs(i - p) for p in pred_positions) > config.window + 1:
                if rng.random() < _DISTRACTOR_RATE:
                    side = -1 if i < pred_positions[0] else 1
                    role[i] = ("lure", _pick_label(config, side, rng))

        tokens = []
        for i in range(n):
            kind = role[i]
            if isinstance(kind, tuple):
                bucket = buckets[kind[1]]
                pos_tag = "NN"
            elif kind == "pred":
                bucket = buckets["pred"]
                pos_tag = "VB"
            elif kind == "fill":
                bucket = buckets["fill"]
                pos_tag = f"F{rng.integers(config.pos_vocab)}"
            else:
                bucket = buckets[kind]
                pos_tag = "NN"
            base = bucket[rng.integers(len(bucket))]
            form = base + _SUFFIXES[rng.integers(len(_SUFFIXES))]
            tokens.append(
                Token(
                    form=form,
                    lemma=base,
                    pos=pos_tag,
                    is_predicate=(role[i] == "pred"),
                    arg_labels=tuple(col[i] for col in columns),
                )
            )
        sentences.append(Sentence(tuple(tokens), tuple(pred_positions), sent_id=sent_id))
    return conll_io.corpus_from_sentences(sentences)
