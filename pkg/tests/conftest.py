import numpy as np

from boundary_srl import conll_io


def make_instance(labels, predicate_index):
    """Build a one-predicate sentence around a single label column."""
    tokens = tuple(
        conll_io.Token(
            form=f"w{i}",
            lemma=f"l{i}",
            pos="P",
            is_predicate=(i == predicate_index),
            arg_labels=(lab,),
        )
        for i, lab in enumerate(labels)
    )
    sentence = conll_io.Sentence(tokens, (predicate_index,), sent_id=0)
    return conll_io.PredicateInstance(
        sentence=sentence, predicate_index=predicate_index, gold_labels=tuple(labels)
    )


def fd_grad(f, tensor, eps=1e-4):
    """Central finite differences of scalar-valued f() w.r.t. tensor.data."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def rel_err(analytic, numeric):
    diff = float(np.abs(analytic - numeric).max())
    denom = max(float(np.abs(analytic).max()), float(np.abs(numeric).max()), 1e-6)
    return diff / denom
