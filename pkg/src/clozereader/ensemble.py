"""Prediction averaging and greedy ensemble selection.

An ensemble averages the candidate-renormalized probability vectors of
its members and predicts the argmax of the average.  Greedy selection
sorts members by validation accuracy (best first, ties broken by name),
seeds the ensemble with the best one, then walks the rest in order and
keeps each member only if adding it strictly improves the ensemble's
validation accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ClozereaderError
from .asreader import Prediction


class EnsembleError(ClozereaderError):
    pass


@dataclass
class EnsembleMember:
    """One model's name, validation accuracy, and validation predictions."""

    name: str
    validation_accuracy: float
    predictions: list[Prediction]


def average_predictions(
    member_predictions: list[list[Prediction]],
) -> list[Prediction]:
    """Average probability vectors example by example."""
    if not member_predictions:
        raise EnsembleError("no members to average")
    lengths = {len(preds) for preds in member_predictions}
    if len(lengths) != 1:
        raise EnsembleError(f"members disagree on example count: {sorted(lengths)}")
    out: list[Prediction] = []
    for i, first in enumerate(member_predictions[0]):
        for preds in member_predictions[1:]:
            if not np.array_equal(preds[i].candidate_ids, first.candidate_ids):
                raise EnsembleError(
                    f"members disagree on candidates for example {i}"
                )
        probabilities = np.mean(
            [preds[i].probabilities for preds in member_predictions], axis=0
        )
        attention = np.mean(
            [preds[i].attention for preds in member_predictions], axis=0
        )
        out.append(
            Prediction(
                candidate_ids=first.candidate_ids.copy(),
                probabilities=probabilities,
                predicted_index=int(np.argmax(probabilities)),
                attention=attention,
            )
        )
    return out


def prediction_accuracy(predictions: list[Prediction], answer_ids: list[int]) -> float:
    if len(predictions) != len(answer_ids):
        raise EnsembleError("predictions and answers differ in length")
    if not predictions:
        raise EnsembleError("nothing to score")
    hits = sum(
        p.predicted_id == a for p, a in zip(predictions, answer_ids)
    )
    return hits / len(predictions)


def union_accuracy(
    member_predictions: list[list[Prediction]],
    answer_ids: list[int],
) -> float:
    """Fraction of examples at least one member answers correctly: an
    upper bound on what any combination of these members could reach."""
    if not member_predictions:
        raise EnsembleError("no members")
    hits = 0
    for i, answer in enumerate(answer_ids):
        if any(preds[i].predicted_id == answer for preds in member_predictions):
            hits += 1
    return hits / len(answer_ids)


def greedy_select(
    members: list[EnsembleMember],
    answer_ids: list[int],
) -> tuple[list[EnsembleMember], float]:
    """Pick members greedily; returns (selected, ensemble accuracy)."""
    if not members:
        raise EnsembleError("no members to select from")
    ordered = sorted(members, key=lambda m: (-m.validation_accuracy, m.name))
    selected = [ordered[0]]
    best = prediction_accuracy(
        average_predictions([m.predictions for m in selected]), answer_ids
    )
    for member in ordered[1:]:
        trial = selected + [member]
        accuracy = prediction_accuracy(
            average_predictions([m.predictions for m in trial]), answer_ids
        )
        if accuracy > best:
            selected = trial
            best = accuracy
    return selected, best


# ------------------------------------------------------------- spec files
#
# A saved ensemble is a small text file: a version line, the validation
# accuracy the selection achieved, then one member checkpoint path per
# line, in selection order.

SPEC_HEADER = "# ensemble spec v1"


def write_ensemble_spec(
    path: str,
    member_paths: list[str],
    validation_accuracy: float,
) -> None:
    if not member_paths:
        raise EnsembleError("refusing to write an empty ensemble")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SPEC_HEADER + "\n")
        fh.write(f"# validation_accuracy={validation_accuracy:.6f}\n")
        for member in member_paths:
            fh.write(member + "\n")


def read_ensemble_spec(path: str) -> tuple[list[str], float]:
    """Returns (member paths, recorded validation accuracy)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0].strip() != SPEC_HEADER:
        raise EnsembleError(f"{path}: not an ensemble spec file")
    accuracy = float("nan")
    members: list[str] = []
    for line in lines[1:]:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("validation_accuracy="):
                accuracy = float(body.partition("=")[2])
            continue
        members.append(line)
    if not members:
        raise EnsembleError(f"{path}: ensemble spec lists no members")
    return members, accuracy
