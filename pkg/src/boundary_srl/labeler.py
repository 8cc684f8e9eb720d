"""Classification head, training objective, and the training loop.

A model instance bundles the embedding tables, the BiLSTM stack, the
attention parameters (optional under ablation), and the output projection.
Training is per-instance forward/backward on a private tape, gradients merged
across the minibatch, then one Adam step; the checkpoint with the best dev F1
is returned.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from . import boundary_tags, conll_io, decoder, embeddings, encoder, numerics, scorer
from .boundary_tags import BEGIN_TAG, END_TAG, SCOPE_FULL, SCOPE_WINDOW
from .embeddings import EmbeddingDims, EmbeddingTables, VocabMaps
from .encoder import AttentionParams, BiLstmStack
from .errors import ConfigError, DataError
from .numerics import GradientTape, Tensor

# rng stream roles, combined with the config seed via numerics.rng_for
_INIT_STREAM = 11
_SHUFFLE_STREAM = 12
_DROPOUT_STREAM = 13


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 64
    max_epochs: int = 20
    keep_prob: float = 0.9
    hidden_size: int = 512
    num_layers: int = 4
    attention_hops: int = 10
    attention_dim: int = 0  # 0 means "same as hidden_size"
    loss_window: str = SCOPE_FULL
    use_aux_tags: bool = True
    use_attention: bool = True
    seed: int = 0
    word_dim: int = 100
    pretrained_dim: int = 100
    lemma_dim: int = 100
    pos_dim: int = 32
    indicator_dim: int = 16
    external_dim: int = 0
    grad_clip: float = 0.0  # 0 disables clipping; 5.0 is the suggested cap

    def validate(self) -> None:
        positive = {
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "hidden_size": self.hidden_size,
            "num_layers": self.num_layers,
            "attention_hops": self.attention_hops,
            "word_dim": self.word_dim,
            "pretrained_dim": self.pretrained_dim,
            "lemma_dim": self.lemma_dim,
            "pos_dim": self.pos_dim,
            "indicator_dim": self.indicator_dim,
        }
        for name, value in positive.items():
            if value <= 0 and not (name == "lr" and value == 0.0):
                raise ConfigError(f"{name} must be positive, got {value}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError("keep_prob must be in (0, 1]")
        if self.loss_window not in (SCOPE_FULL, SCOPE_WINDOW):
            raise ConfigError(f"unknown loss_window {self.loss_window!r}")
        if self.attention_dim < 0 or self.attention_dim > 4096:
            raise ConfigError("attention_dim out of range")
        if self.external_dim < 0:
            raise ConfigError("external_dim must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0")

    @property
    def attn_dim(self) -> int:
        return self.attention_dim if self.attention_dim else self.hidden_size

    def embedding_dims(self) -> EmbeddingDims:
        return EmbeddingDims(
            word=self.word_dim,
            pretrained=self.pretrained_dim,
            lemma=self.lemma_dim,
            pos=self.pos_dim,
            indicator=self.indicator_dim,
            external=self.external_dim,
        )


def parse_config_file(path) -> dict:
    """Flat key=value file; keys must be TrainConfig fields."""
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    out = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = coerce_config_value(key, value.strip())
    return out


def coerce_config_value(key: str, value: str):
    field = TrainConfig.__dataclass_fields__[key]
    kind = field.type if isinstance(field.type, type) else type(field.default)
    if kind is bool:
        lowered = value.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    return value


@dataclass
class ModelParams:
    tables: EmbeddingTables
    stack: BiLstmStack
    attention: AttentionParams | None
    w_out: Tensor
    b_out: Tensor
    vocabs: VocabMaps
    output_labels: tuple

    def named_tensors(self) -> dict:
        """Stable name -> tensor map covering every weight, frozen included."""
        named = {
            "embed.word": self.tables.random_word,
            "embed.pretrained": self.tables.pretrained_word,
            "embed.lemma": self.tables.lemma,
            "embed.pos": self.tables.pos,
            "embed.indicator": self.tables.indicator,
        }
        for i, layer in enumerate(self.stack.layers):
            for tag, direction in (("fwd", layer.fwd), ("bwd", layer.bwd)):
                named[f"lstm.{i}.{tag}.wx"] = direction.wx
                named[f"lstm.{i}.{tag}.wh"] = direction.wh
                named[f"lstm.{i}.{tag}.b"] = direction.b
        if self.attention is not None:
            named["attn.w1"] = self.attention.w1
            named["attn.w2"] = self.attention.w2
        named["out.w"] = self.w_out
        named["out.b"] = self.b_out
        return named

    def trainable(self) -> list:
        return [(n, t) for n, t in self.named_tensors().items() if t.requires_grad]


def model_label_list(label_set, use_aux_tags: bool) -> tuple:
    """Output label order; boundary tags are dropped when aux tags are off."""
    if use_aux_tags:
        return tuple(label_set.labels)
    return tuple(l for l in label_set.labels if l not in (BEGIN_TAG, END_TAG))


def init_model(config: TrainConfig, corpus, pretrained=None) -> ModelParams:
    """Deterministic initialization from config.seed and the training corpus."""
    config.validate()
    rng = numerics.rng_for(config.seed, _INIT_STREAM)
    vocabs = embeddings.build_vocabs(corpus)
    dims = config.embedding_dims()
    tables = embeddings.init_tables(vocabs, dims, rng, pretrained=pretrained)
    stack = encoder.init_stack(
        dims.total(), config.hidden_size, config.num_layers, config.keep_prob, rng
    )
    attention = None
    fused_width = 2 * config.hidden_size
    if config.use_attention:
        attention = encoder.init_attention(
            config.hidden_size, config.attn_dim, config.attention_hops, rng
        )
        fused_width = 2 * config.hidden_size * (1 + config.attention_hops)
    labels = model_label_list(corpus.label_inventory, config.use_aux_tags)
    w_out = numerics.uniform((fused_width, len(labels)), rng)
    b_out = numerics.uniform((1, len(labels)), rng)
    return ModelParams(
        tables=tables,
        stack=stack,
        attention=attention,
        w_out=w_out,
        b_out=b_out,
        vocabs=vocabs,
        output_labels=labels,
    )


def forward_logits(
    instance,
    params: ModelParams,
    config: TrainConfig,
    training: bool = False,
    external=None,
    rng=None,
    tape: GradientTape | None = None,
) -> Tensor:
    emb = embeddings.embed_instance(instance, params.tables, params.vocabs, external, tape)
    encoded = encoder.encode(
        emb,
        params.stack,
        params.attention if config.use_attention else None,
        rng=rng,
        training=training,
        tape=tape,
    )
    return numerics.add(numerics.matmul(encoded.fused, params.w_out, tape), params.b_out, tape)


def forward(
    instance,
    params: ModelParams,
    config: TrainConfig,
    mode: str = "eval",
    external=None,
    rng=None,
    tape: GradientTape | None = None,
) -> np.ndarray:
    """Per-token label distributions, shape (n, |labels|); rows sum to 1.

    Eval mode disables dropout and is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown forward mode {mode!r}")
    logits = forward_logits(
        instance,
        params,
        config,
        training=(mode == "train"),
        external=external,
        rng=rng,
        tape=tape,
    )
    return numerics.softmax_rows(logits, tape=None).data


def loss_exclusion_mask(gold_labels, loss_window: str) -> np.ndarray:
    """True where a position is excluded from the loss."""
    n = len(gold_labels)
    if loss_window == SCOPE_FULL:
        return np.zeros(n, dtype=bool)
    labels = list(gold_labels)
    start = labels.index(BEGIN_TAG) if BEGIN_TAG in labels else 0
    end = labels.index(END_TAG) if END_TAG in labels else n - 1
    mask = np.ones(n, dtype=bool)
    mask[start : end + 1] = False
    return mask


def compute_loss(pred_matrix: np.ndarray, gold_labels, labels, loss_window: str = SCOPE_FULL) -> float:
    """Mean negative log probability of the gold label over in-scope positions.

    Computed from the probability matrix directly, independent of the taped
    logits path used in training; both agree to rounding.
    """
    if loss_window not in (SCOPE_FULL, SCOPE_WINDOW):
        raise ConfigError(f"unknown loss_window {loss_window!r}")
    index = {lab: i for i, lab in enumerate(labels)}
    targets = np.array([index[lab] for lab in gold_labels])
    kept = ~loss_exclusion_mask(gold_labels, loss_window)
    assert kept.any(), "loss window cannot be empty: it always contains the predicate"
    picked = pred_matrix[np.arange(len(targets)), targets]
    return float(-(np.log(np.clip(picked, numerics.LOG_FLOOR, None)) * kept).sum() / kept.sum())


def _instance_targets(instance, label_index) -> np.ndarray:
    try:
        return np.array([label_index[lab] for lab in instance.gold_labels])
    except KeyError as exc:
        raise DataError(f"gold label {exc.args[0]!r} missing from model labels") from None


def _gold_argument_sets(instances) -> list:
    sets = []
    for inst in instances:
        stripped = boundary_tags.strip_tags(inst)
        args = frozenset(
            (i, lab)
            for i, lab in enumerate(stripped.gold_labels)
            if boundary_tags.is_argument(lab)
        )
        sets.append(
            decoder.ArgumentSet(
                predicate_index=inst.predicate_index,
                arguments=args,
                sentence_id=inst.sentence.sent_id,
            )
        )
    return sets


def evaluate_instances(instances, params, config, external=None):
    """Decode every instance in eval mode and score against its gold labels."""
    gold = _gold_argument_sets(instances)
    predicted = []
    for inst in instances:
        probs = forward(inst, params, config, mode="eval", external=external)
        argset = decoder.decode(
            probs, inst.predicate_index, params.output_labels, config.use_aux_tags
        )
        predicted.append(dataclasses.replace(argset, sentence_id=inst.sentence.sent_id))
    return scorer.evaluate(predicted, gold)


def _batches(instances, order, batch_size):
    """Shuffled order, then grouped by length so batches stay homogeneous."""
    ordered = sorted(order, key=lambda i: len(instances[i].sentence.tokens))
    return [ordered[i : i + batch_size] for i in range(0, len(ordered), batch_size)]


def train(corpus_train, corpus_dev, config: TrainConfig, callbacks=None, pretrained=None, external=None):
    """Fit a model; returns (params at the best dev-F1 epoch, history).

    History holds one record per epoch: mean training loss plus dev
    precision/recall/F1.
    """
    config.validate()
    train_instances = conll_io.extract_instances(corpus_train)
    if not train_instances:
        raise DataError("training corpus contains no predicate instances")
    if config.use_aux_tags:
        train_instances = [boundary_tags.augment_labels(inst) for inst in train_instances]
    dev_instances = conll_io.extract_instances(corpus_dev)

    params = init_model(config, corpus_train, pretrained=pretrained)
    label_index = {lab: i for i, lab in enumerate(params.output_labels)}
    trainable = params.trainable()
    adam = numerics.AdamState([t for _, t in trainable])

    history = []
    best_f1 = -1.0
    best_weights = None
    for epoch in range(config.max_epochs):
        shuffle_rng = numerics.rng_for(config.seed, _SHUFFLE_STREAM, epoch)
        order = np.arange(len(train_instances))
        shuffle_rng.shuffle(order)
        batches = _batches(train_instances, list(order), config.batch_size)
        batch_order = np.arange(len(batches))
        shuffle_rng.shuffle(batch_order)

        losses = []
        for batch_id in batch_order:
            batch = batches[batch_id]
            for pos, idx in enumerate(batch):
                inst = train_instances[idx]
                tape = GradientTape()
                drop_rng = numerics.rng_for(config.seed, _DROPOUT_STREAM, epoch, int(idx))
                logits = forward_logits(
                    inst, params, config, training=True, external=external, rng=drop_rng, tape=tape
                )
                loss = numerics.cross_entropy(
                    logits,
                    _instance_targets(inst, label_index),
                    mask=loss_exclusion_mask(inst.gold_labels, config.loss_window),
                    tape=tape,
                )
                numerics.backward(loss, tape)
                losses.append(float(loss.data))
            grads = []
            for _, t in trainable:
                g = t.grad if t.grad is not None else np.zeros_like(t.data)
                grads.append(g / len(batch))
            if config.grad_clip > 0:
                numerics.clip_global_norm(grads, config.grad_clip)
            numerics.adam_step([t for _, t in trainable], grads, adam, lr=config.lr)
            for _, t in trainable:
                t.zero_grad()

        report = evaluate_instances(dev_instances, params, config, external=external)
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "dev_precision": report.precision,
            "dev_recall": report.recall,
            "dev_f1": report.f1,
        }
        history.append(record)
        if callbacks:
            for cb in callbacks:
                cb(record)
        if report.f1 > best_f1:
            best_f1 = report.f1
            best_weights = {n: t.data.copy() for n, t in params.named_tensors().items()}

    if best_weights is not None:
        for name, t in params.named_tensors().items():
            t.data = best_weights[name]
    return params, history


# ---------------------------------------------------------------------------
# checkpoint = binary tensor bank + JSON sidecar with config/labels/vocabs

CHECKPOINT_SIDECAR_VERSION = 1


def save_checkpoint(path, params: ModelParams, config: TrainConfig) -> None:
    numerics.save_tensors(path, params.named_tensors())
    pre_words = [None] * (len(params.tables.pretrained_index) + 1)
    for word, row in params.tables.pretrained_index.items():
        pre_words[row] = word
    sidecar = {
        "version": CHECKPOINT_SIDECAR_VERSION,
        "config": dataclasses.asdict(config),
        "output_labels": list(params.output_labels),
        "vocabs": {
            "word": _ordered_vocab(params.vocabs.word),
            "lemma": _ordered_vocab(params.vocabs.lemma),
            "pos": _ordered_vocab(params.vocabs.pos),
        },
        "pretrained_words": pre_words[1:],
    }
    tmp = path + ".json.tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, sort_keys=True)
    os.replace(tmp, path + ".json")


def _ordered_vocab(mapping) -> list:
    out = [None] * len(mapping)
    for key, idx in mapping.items():
        out[idx] = key
    return out


def load_checkpoint(path):
    """Rebuild (params, config) from a checkpoint written by save_checkpoint."""
    with open(path + ".json", encoding="utf-8") as handle:
        sidecar = json.load(handle)
    if sidecar.get("version") != CHECKPOINT_SIDECAR_VERSION:
        raise DataError(f"{path}.json: unsupported checkpoint sidecar version")
    config = TrainConfig(**sidecar["config"])
    config.validate()
    arrays = numerics.load_tensors(path)

    def grab(name, requires_grad=True):
        if name not in arrays:
            raise DataError(f"{path}: checkpoint is missing tensor {name!r}")
        return Tensor(arrays.pop(name), requires_grad=requires_grad)

    vocabs = VocabMaps(
        word={w: i for i, w in enumerate(sidecar["vocabs"]["word"])},
        lemma={w: i for i, w in enumerate(sidecar["vocabs"]["lemma"])},
        pos={w: i for i, w in enumerate(sidecar["vocabs"]["pos"])},
    )
    tables = EmbeddingTables(
        random_word=grab("embed.word"),
        pretrained_word=grab("embed.pretrained", requires_grad=False),
        pretrained_index={w: i + 1 for i, w in enumerate(sidecar["pretrained_words"])},
        lemma=grab("embed.lemma"),
        pos=grab("embed.pos"),
        indicator=grab("embed.indicator"),
        dims=config.embedding_dims(),
    )
    layers = []
    for i in range(config.num_layers):
        layers.append(
            encoder.LstmLayer(
                fwd=encoder.LstmDirection(
                    wx=grab(f"lstm.{i}.fwd.wx"), wh=grab(f"lstm.{i}.fwd.wh"), b=grab(f"lstm.{i}.fwd.b")
                ),
                bwd=encoder.LstmDirection(
                    wx=grab(f"lstm.{i}.bwd.wx"), wh=grab(f"lstm.{i}.bwd.wh"), b=grab(f"lstm.{i}.bwd.b")
                ),
            )
        )
    stack = BiLstmStack(layers=layers, hidden=config.hidden_size, keep_prob=config.keep_prob)
    attention = None
    if config.use_attention:
        attention = AttentionParams(w1=grab("attn.w1"), w2=grab("attn.w2"))
    params = ModelParams(
        tables=tables,
        stack=stack,
        attention=attention,
        w_out=grab("out.w"),
        b_out=grab("out.b"),
        vocabs=vocabs,
        output_labels=tuple(sidecar["output_labels"]),
    )
    return params, config
