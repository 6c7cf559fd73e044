"""Scoring, the p^L full-string law, and the length-complexity study.

A string is only as correct as its weakest character: per-character accuracy
overstates usefulness, so reports carry both it and the exact-match rate,
plus a confusion matrix over characters. The study retrains the same
multi-head backbone at several CAPTCHA lengths under one fixed budget and
emits the measured accuracies next to an external reference column.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .capgen import GenStyle, generate_dataset
from .dataset import load_split
from .nn import TrainConfig, encode_labels, multihead_spec, predict_strings, train
from .rng import Rng

# External benchmark: full-string accuracy (percent) on the railway corpus
# at lengths 3 through 7. Emitted alongside study results for comparison,
# never asserted against.
REFERENCE_FULL_PERCENT = {3: 80, 4: 79, 5: 77, 6: 77, 7: 75}


@dataclass
class EvalReport:
    per_char_accuracy: float
    full_string_accuracy: float
    per_head_accuracy: list[float]
    confusion: np.ndarray  # counts, [truth, predicted]
    charset: str
    n: int


def score(preds: list[str], truths: list[str], charset: str | None = None) -> EvalReport:
    """Position-wise and exact-match accuracy with a character confusion
    matrix. Pred/truth pairs must agree in length pairwise."""
    if len(preds) != len(truths):
        raise ValueError(f"{len(preds)} predictions for {len(truths)} truths")
    if not preds:
        raise ValueError("nothing to score")
    if charset is None:
        charset = "".join(sorted({ch for s in list(preds) + list(truths) for ch in s}))
    lut = {ch: i for i, ch in enumerate(charset)}
    confusion = np.zeros((len(charset), len(charset)), dtype=np.int64)
    max_len = 0
    full_hits = 0
    char_hits = 0
    positions = 0
    head_hits: list[int] = []
    head_totals: list[int] = []
    for i, (pred, truth) in enumerate(zip(preds, truths)):
        if len(pred) != len(truth):
            raise ValueError(
                f"pair {i}: prediction {pred!r} and truth {truth!r} differ in length"
            )
        if len(truth) > max_len:
            head_hits.extend([0] * (len(truth) - max_len))
            head_totals.extend([0] * (len(truth) - max_len))
            max_len = len(truth)
        full_hits += pred == truth
        for j, (p, t) in enumerate(zip(pred, truth)):
            if p not in lut or t not in lut:
                bad = t if t not in lut else p
                raise ValueError(f"pair {i}: character {bad!r} outside the charset")
            confusion[lut[t], lut[p]] += 1
            hit = p == t
            char_hits += hit
            head_hits[j] += hit
            head_totals[j] += 1
            positions += 1
    return EvalReport(
        per_char_accuracy=char_hits / positions,
        full_string_accuracy=full_hits / len(preds),
        per_head_accuracy=[h / t for h, t in zip(head_hits, head_totals)],
        confusion=confusion,
        charset=charset,
        n=len(preds),
    )


def expected_full_accuracy(p: float, length: int) -> float:
    """Exact-match rate implied by independent per-character accuracy p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"per-character accuracy must be in [0, 1], got {p}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    return p**length


def simulate_full_accuracy(p: float, length: int, trials: int, seed: int) -> float:
    """Monte-Carlo check of the independence law: fraction of simulated
    strings with every position independently correct."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    draws = Rng(seed).uniform_block(trials * length).reshape(trials, length)
    return float((draws < p).all(axis=1).mean())


@dataclass
class LengthStudyRow:
    length: int
    full_acc: float
    per_char_acc: float
    reference_percent: int | None


def length_study(
    lengths: list[int],
    work_dir,
    samples_per_length: int = 10_000,
    cfg: TrainConfig | None = None,
    style_name: str = "railway",
    seed: int = 42,
    height: int = 32,
    width_per_char: int = 32,
) -> list[LengthStudyRow]:
    """Train the same multi-head backbone at each length on a fresh balanced
    dataset, scoring exact-match accuracy on the held-out test split.

    One budget (samples, epochs, architecture) is shared by every length so
    the trend across lengths is meaningful."""
    if not lengths or any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"lengths must be ascending, got {lengths}")
    cfg = cfg or TrainConfig()
    rows = []
    for length in lengths:
        style = GenStyle.preset(style_name, length)
        data_dir = os.path.join(work_dir, f"len{length}")
        generate_dataset(style, samples_per_length, (0.8, 0.1, 0.1), seed + length, data_dir)
        spec = multihead_spec(style.charset, length, height, width_per_char * length)
        splits = {}
        for split in ("train", "val", "test"):
            xs, labels = load_split(data_dir, split, preprocess=style_name)
            splits[split] = (xs, encode_labels(labels, style.charset, length), labels)
        model, _ = train(
            spec, splits["train"][0], splits["train"][1],
            splits["val"][0], splits["val"][1], cfg,
        )
        preds = predict_strings(model, splits["test"][0])
        report = score(preds, splits["test"][2], charset=style.charset)
        rows.append(
            LengthStudyRow(
                length,
                report.full_string_accuracy,
                report.per_char_accuracy,
                REFERENCE_FULL_PERCENT.get(length),
            )
        )
    return rows


def write_length_study_csv(rows: list[LengthStudyRow], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["L", "ours_full", "ours_per_char", "reference_percent"])
        for r in rows:
            writer.writerow(
                [
                    r.length,
                    f"{r.full_acc:.6f}",
                    f"{r.per_char_acc:.6f}",
                    "" if r.reference_percent is None else r.reference_percent,
                ]
            )


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        writer.writerow(["n", report.n])
        writer.writerow(["per_char_accuracy", f"{report.per_char_accuracy:.6f}"])
        writer.writerow(["full_string_accuracy", f"{report.full_string_accuracy:.6f}"])
        for j, acc in enumerate(report.per_head_accuracy):
            writer.writerow([f"head{j}_accuracy", f"{acc:.6f}"])


def write_confusion_csv(report: EvalReport, path) -> None:
    """Truth rows, predicted columns, labeled by charset characters."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["truth\\pred"] + list(report.charset))
        for ch, row in zip(report.charset, report.confusion):
            writer.writerow([ch] + row.tolist())
