"""Training loop, length-bucketed batching, early stopping, checkpoints.

Batching shuffles examples once per epoch, then sorts each window of
``prefetch_batches`` consecutive batches by document length before cutting
it into batches, and finally shuffles the batch order inside the window.
Rows inside a batch then have similar lengths, which keeps padding cheap,
while the window shuffle stops the model from seeing documents in strict
length order.

Training logs one tab-separated line per evaluation: step number, the
step's loss (full repr), validation accuracy, and wall-clock seconds.
Everything except the wall column is reproducible bit for bit for a
fixed seed.
"""

from __future__ import annotations

import json
import random
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ClozereaderError
from .asreader import Batch, Model, ModelConfig, Prediction
from .numerics import Adam, clip_gradients, write_tensor, read_tensor, zero_grads
from .numerics.serialize import TensorFormatError
from .seeding import derive_seed
from .vocab import EncodedExample, Vocabulary

CHECKPOINT_MAGIC = b"CLZR"
CHECKPOINT_VERSION = 1

DEFAULT_BATCH_SIZE = 128
DEFAULT_PREFETCH = 10


class TrainingDivergedError(ClozereaderError):
    """Raised when the loss becomes NaN or infinite."""


class CheckpointError(ClozereaderError):
    """Raised for unreadable or mismatched checkpoint files."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = DEFAULT_BATCH_SIZE
    prefetch_batches: int = DEFAULT_PREFETCH
    eval_every: int | None = None  # examples between evaluations; epoch ends always evaluate
    max_epochs: int = 2
    patience: int = 1
    rng_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_threshold: float = 10.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.prefetch_batches < 1:
            raise ValueError("prefetch_batches must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.patience < 1:
            raise ValueError("patience must be positive")


def make_batches(
    examples: list[EncodedExample],
    config: TrainConfig,
    epoch_seed: int,
) -> list[Batch]:
    """Length-bucketed batches over a seeded epoch shuffle."""
    if not examples:
        return []
    rng = random.Random(epoch_seed)
    order = list(range(len(examples)))
    rng.shuffle(order)
    window_size = config.batch_size * config.prefetch_batches
    batches: list[Batch] = []
    for start in range(0, len(order), window_size):
        window = order[start : start + window_size]
        window.sort(key=lambda i: len(examples[i].context_ids))
        chunks = [
            window[j : j + config.batch_size]
            for j in range(0, len(window), config.batch_size)
        ]
        rng.shuffle(chunks)
        for chunk in chunks:
            batches.append(Batch.from_examples([examples[i] for i in chunk], chunk))
    return batches


class EarlyStopper:
    """Stop after ``patience`` consecutive evaluations without strict
    improvement over the best value seen so far."""

    def __init__(self, patience: int = 1):
        if patience < 1:
            raise ValueError("patience must be positive")
        self.patience = patience
        self.best_value: float | None = None
        self.best_index: int = -1
        self.last_value: float | None = None
        self._count = 0
        self._seen = 0

    def update(self, value: float) -> bool:
        """Record one evaluation; return True when training should stop."""
        index = self._seen
        self._seen += 1
        self.last_value = value
        if self.best_value is None or value > self.best_value:
            self.best_value = value
            self.best_index = index
            self._count = 0
            return False
        self._count += 1
        return self._count >= self.patience

    @property
    def improved(self) -> bool:
        return self._count == 0 and self._seen > 0


@dataclass
class EvalResult:
    accuracy: float
    n_examples: int
    predictions: list[Prediction]


def evaluate(
    model: Model,
    examples: list[EncodedExample],
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> EvalResult:
    """Greedy accuracy plus per-example predictions, in input order."""
    if not examples:
        raise ValueError("nothing to evaluate")
    order = sorted(range(len(examples)), key=lambda i: len(examples[i].context_ids))
    predictions: list[Prediction | None] = [None] * len(examples)
    correct = 0
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        batch = Batch.from_examples([examples[i] for i in chunk], chunk)
        for row, prediction in zip(chunk, model.predict(batch)):
            predictions[row] = prediction
            if prediction.predicted_id == examples[row].answer_id:
                correct += 1
    return EvalResult(
        accuracy=correct / len(examples),
        n_examples=len(examples),
        predictions=predictions,  # type: ignore[arg-type]
    )


def most_frequent_candidate_accuracy(examples: list[EncodedExample]) -> float:
    """Baseline: always pick the candidate occurring most often in the
    document (ties go to the earlier candidate in the list)."""
    if not examples:
        raise ValueError("nothing to evaluate")
    correct = 0
    for ex in examples:
        context = np.asarray(ex.context_ids)
        counts = [int((context == c).sum()) for c in ex.candidate_ids]
        pick = ex.candidate_ids[int(np.argmax(counts))]
        correct += pick == ex.answer_id
    return correct / len(examples)


@dataclass
class TrainResult:
    best_accuracy: float
    best_step: int
    steps: int
    epochs: int
    log_lines: list[str] = field(default_factory=list)
    checkpoint_path: str | None = None


def train(
    model: Model,
    train_examples: list[EncodedExample],
    valid_examples: list[EncodedExample],
    config: TrainConfig,
    checkpoint_path: str | None = None,
    log_fh=None,
) -> TrainResult:
    """Optimize the model, keeping the checkpoint with the best validation
    accuracy.

    Evaluations run every ``eval_every`` consumed training examples (when
    set) and at the end of every epoch; each one appends a log line.  A
    NaN or infinite loss saves a diagnostic checkpoint (when a path is
    given) and raises TrainingDivergedError.
    """
    if not train_examples:
        raise ValueError("no training examples")
    params = model.parameters()
    optimizer = Adam(
        params,
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )
    stopper = EarlyStopper(config.patience)
    result = TrainResult(best_accuracy=0.0, best_step=0, steps=0, epochs=0)
    started = time.monotonic()

    def emit(step: int, loss_value: float) -> None:
        line = (
            f"{step}\t{loss_value!r}\t{stopper.last_value:.6f}"
            f"\t{time.monotonic() - started:.3f}"
        )
        result.log_lines.append(line)
        if log_fh is not None:
            log_fh.write(line + "\n")
            log_fh.flush()

    def run_eval(step: int, loss_value: float) -> bool:
        accuracy = evaluate(model, valid_examples, config.batch_size).accuracy
        stop = stopper.update(accuracy)
        if stopper.improved:
            result.best_accuracy = accuracy
            result.best_step = step
            if checkpoint_path is not None:
                save_checkpoint(
                    model,
                    checkpoint_path,
                    extra={"validation_accuracy": accuracy, "step": step},
                )
                result.checkpoint_path = checkpoint_path
        emit(step, loss_value)
        return stop

    step = 0
    examples_seen = 0
    eval_marks = 0
    stop = False
    for epoch in range(config.max_epochs):
        epoch_seed = derive_seed(config.rng_seed, "epoch", epoch)
        evaluated_at = -1
        for batch in make_batches(train_examples, config, epoch_seed):
            zero_grads(params)
            loss = model.loss(batch)
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                if checkpoint_path is not None:
                    save_checkpoint(
                        model,
                        checkpoint_path + ".diverged",
                        extra={"step": step, "loss": loss_value},
                    )
                raise TrainingDivergedError(
                    f"non-finite loss {loss_value!r} at step {step}"
                )
            loss.backward()
            clip_gradients(
                [p.grad for p in params if p.grad is not None],
                config.clip_threshold,
            )
            optimizer.step()
            step += 1
            examples_seen += batch.size
            result.steps = step
            if config.eval_every and examples_seen // config.eval_every > eval_marks:
                eval_marks = examples_seen // config.eval_every
                stop = run_eval(step, loss_value)
                evaluated_at = step
                if stop:
                    break
        result.epochs = epoch + 1
        if stop:
            break
        if step != evaluated_at:
            stop = run_eval(step, loss_value)
        if stop:
            break
    return result


# ------------------------------------------------------------- checkpoints
#
# Layout: magic, version, length-prefixed JSON header (model config, seed,
# vocabulary words, extra metadata), tensor count, then length-prefixed
# tensor names each followed by one serialized tensor.


def save_checkpoint(model: Model, path: str, extra: dict | None = None) -> None:
    header = {
        "config": asdict(model.config),
        "rng_seed": model.rng_seed,
        "vocab": {
            "words": model.vocabulary.words,
            "cap": model.vocabulary.cap,
            "anon_count": model.vocabulary.anon_count,
        },
        "extra": extra or {},
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    named = model.named_parameters()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sH", CHECKPOINT_MAGIC, CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(named)))
        for name in sorted(named):
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            write_tensor(fh, named[name].data)


def load_checkpoint(path: str) -> tuple[Model, dict]:
    """Rebuild a model from a checkpoint; returns (model, extra metadata)."""
    with open(path, "rb") as fh:
        head = fh.read(6)
        if len(head) < 6 or head[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<H", head[4:6])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {version}"
            )
        raw = fh.read(8)
        if len(raw) < 8:
            raise CheckpointError(f"{path}: truncated header")
        (blob_len,) = struct.unpack("<Q", raw)
        blob = fh.read(blob_len)
        if len(blob) < blob_len:
            raise CheckpointError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: bad header: {exc}") from exc
        try:
            vocab_info = header["vocab"]
            vocabulary = Vocabulary(
                words=vocab_info["words"],
                cap=vocab_info["cap"],
                anon_count=vocab_info["anon_count"],
            )
            config = ModelConfig(**header["config"])
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"{path}: bad header: {exc}") from exc
        model = Model(vocabulary, config, header.get("rng_seed", 0))
        raw = fh.read(4)
        if len(raw) < 4:
            raise CheckpointError(f"{path}: truncated tensor table")
        (count,) = struct.unpack("<I", raw)
        named = model.named_parameters()
        seen = set()
        for _ in range(count):
            raw = fh.read(2)
            if len(raw) < 2:
                raise CheckpointError(f"{path}: truncated tensor name")
            (name_len,) = struct.unpack("<H", raw)
            name = fh.read(name_len).decode("utf-8")
            try:
                data = read_tensor(fh)
            except TensorFormatError as exc:
                raise CheckpointError(f"{path}: tensor {name!r}: {exc}") from exc
            if name not in named:
                raise CheckpointError(f"{path}: unexpected tensor {name!r}")
            if named[name].data.shape != data.shape:
                raise CheckpointError(
                    f"{path}: tensor {name!r} has shape {data.shape}, "
                    f"expected {named[name].data.shape}"
                )
            named[name].data = data.astype(named[name].data.dtype)
            seen.add(name)
        missing = sorted(set(named) - seen)
        if missing:
            raise CheckpointError(f"{path}: missing tensors {missing}")
    return model, header.get("extra", {})
