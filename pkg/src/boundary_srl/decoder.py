"""Greedy two-direction inference.

Decoding walks outward from the predicate. Each scan takes the argmax label
at every position; the scan stops at its own boundary tag (``<BOA>`` going
left, ``<EOA>`` going right) or at the sentence edge. A boundary tag met from
the wrong direction is treated as the null label and the scan continues. The
predicate position itself is classified too; a boundary-tag argmax there
degrades to the null label.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conll_io
from .boundary_tags import BEGIN_TAG, END_TAG, NULL_LABEL, is_argument
from .errors import DataError


@dataclass(frozen=True)
class ArgumentSet:
    """The labeled argument tokens of one predicate."""

    predicate_index: int
    arguments: frozenset  # of (token index, label) pairs
    sentence_id: int | None = None


def decode(pred_matrix, predicate_index: int, labels, use_aux_tags: bool = True) -> ArgumentSet:
    """Read an argument set off a (n, |labels|) probability matrix."""
    probs = np.asarray(pred_matrix)
    n = probs.shape[0]
    if probs.ndim != 2 or probs.shape[1] != len(labels):
        raise DataError("prediction matrix shape does not match the label list")
    if not (0 <= predicate_index < n):
        raise DataError(f"predicate index {predicate_index} out of range for {n} tokens")
    if (probs < -1e-9).any() or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise DataError("prediction rows must be probability distributions")

    best = [labels[i] for i in probs.argmax(axis=1)]
    found = set()

    if not use_aux_tags:
        for i, lab in enumerate(best):
            if is_argument(lab):
                found.add((i, lab))
        return ArgumentSet(predicate_index, frozenset(found))

    if is_argument(best[predicate_index]):
        found.add((predicate_index, best[predicate_index]))
    for i in range(predicate_index - 1, -1, -1):
        lab = best[i]
        if lab == BEGIN_TAG:
            break
        if lab == END_TAG or lab == NULL_LABEL:
            continue
        found.add((i, lab))
    for i in range(predicate_index + 1, n):
        lab = best[i]
        if lab == END_TAG:
            break
        if lab == BEGIN_TAG or lab == NULL_LABEL:
            continue
        found.add((i, lab))
    return ArgumentSet(predicate_index, frozenset(found))


def predict_corpus(corpus, params, config, external=None, workers: int = 1):
    """Decode every predicate instance and write the labels back into a copy
    of the corpus. Boundary tags never reach the output."""
    from . import labeler  # deferred: labeler imports this module

    corpus_args = set(corpus.label_inventory.argument_labels())
    model_args = {lab for lab in params.output_labels if is_argument(lab)}
    if not corpus_args <= model_args:
        missing = sorted(corpus_args - model_args)
        raise DataError(f"corpus uses labels unknown to the checkpoint: {missing}")

    instances = conll_io.extract_instances(corpus)

    def run(inst):
        probs = labeler.forward(inst, params, config, mode="eval", external=external)
        argset = decode(probs, inst.predicate_index, params.output_labels, config.use_aux_tags)
        column = [NULL_LABEL] * len(inst.sentence.tokens)
        for i, lab in argset.arguments:
            column[i] = lab
        return column

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(run, instances))
    else:
        columns = [run(inst) for inst in instances]
    return conll_io.replace_predictions(corpus, columns)
