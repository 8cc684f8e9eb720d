"""Labeled argument precision/recall/F1 over aligned argument sets."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    predicted: int
    gold: int
    correct: int


def evaluate(predicted, gold) -> EvalReport:
    """Count (predicate, token, label) triple matches.

    The two lists must be aligned pairwise on (sentence id, predicate index).
    Empty/empty ratios define to 0, except the fully empty corpus where all
    three metrics are 1.0 so oracle round-trips score perfectly.
    """
    predicted = list(predicted)
    gold = list(gold)
    if len(predicted) != len(gold):
        raise DataError(f"{len(predicted)} predicted sets vs {len(gold)} gold sets")
    n_pred = 0
    n_gold = 0
    n_correct = 0
    for p, g in zip(predicted, gold):
        if (p.sentence_id, p.predicate_index) != (g.sentence_id, g.predicate_index):
            raise DataError(
                f"misaligned instances: predicted {(p.sentence_id, p.predicate_index)} "
                f"vs gold {(g.sentence_id, g.predicate_index)}"
            )
        n_pred += len(p.arguments)
        n_gold += len(g.arguments)
        n_correct += len(p.arguments & g.arguments)

    if n_pred == 0 and n_gold == 0:
        return EvalReport(1.0, 1.0, 1.0, 0, 0, 0)
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(precision, recall, f1, n_pred, n_gold, n_correct)
