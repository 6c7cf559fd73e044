import csv
import os
from collections import Counter

import numpy as np
import pytest

from captchakit.evalx import (
    REFERENCE_FULL_PERCENT,
    EvalReport,
    expected_full_accuracy,
    length_study,
    score,
    simulate_full_accuracy,
    write_confusion_csv,
    write_length_study_csv,
    write_report_csv,
)
from captchakit.nn import TrainConfig
from captchakit.rng import Rng


class TestScore:
    def test_hand_case(self):
        report = score(["AB", "CD"], ["AB", "CC"])
        assert report.full_string_accuracy == 0.5
        assert report.per_char_accuracy == 0.75
        assert report.per_head_accuracy == [1.0, 0.5]
        assert report.n == 2

    def test_hand_case_confusion(self):
        report = score(["AB", "CD"], ["AB", "CC"])
        assert report.charset == "ABCD"
        lut = {ch: i for i, ch in enumerate(report.charset)}
        expected = np.zeros((4, 4), dtype=np.int64)
        expected[lut["A"], lut["A"]] = 1
        expected[lut["B"], lut["B"]] = 1
        expected[lut["C"], lut["C"]] = 1
        expected[lut["C"], lut["D"]] = 1
        assert np.array_equal(report.confusion, expected)

    def test_perfect_predictions_give_diagonal_confusion(self):
        truths = ["012", "120", "201", "210"]
        report = score(list(truths), truths)
        assert report.full_string_accuracy == 1.0
        assert report.per_char_accuracy == 1.0
        off_diag = report.confusion - np.diag(np.diag(report.confusion))
        assert not off_diag.any()
        assert report.confusion.sum() == 12

    def test_explicit_charset_orders_confusion(self):
        report = score(["A"], ["B"], charset="ZBA")
        assert report.charset == "ZBA"
        assert report.confusion[1, 2] == 1
        assert report.confusion.sum() == 1

    def test_mixed_lengths_across_pairs(self):
        report = score(["AB", "XYZ"], ["AB", "XYW"])
        assert report.full_string_accuracy == 0.5
        assert report.per_char_accuracy == pytest.approx(4 / 5)
        assert report.per_head_accuracy == [1.0, 1.0, 0.0]

    def test_per_head_isolates_positions(self):
        preds = ["AX", "BX", "CX"]
        truths = ["AY", "BY", "CY"]
        report = score(preds, truths)
        assert report.per_head_accuracy == [1.0, 0.0]
        assert report.full_string_accuracy == 0.0

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="2 predictions for 3 truths"):
            score(["A", "B"], ["A", "B", "C"])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nothing to score"):
            score([], [])

    def test_length_mismatch_names_pair(self):
        with pytest.raises(ValueError, match="pair 1"):
            score(["AB", "CDE"], ["AB", "CD"])

    def test_foreign_character_names_pair(self):
        with pytest.raises(ValueError, match="pair 1.*'#' outside the charset"):
            score(["AB", "A#"], ["AB", "AB"], charset="AB")

    def test_confusion_row_sums_count_truth_characters(self):
        rng = Rng(5)
        charset = "0123456789"
        truths = [
            "".join(charset[rng.randint(0, 9)] for _ in range(4)) for _ in range(300)
        ]
        preds = [
            "".join(charset[rng.randint(0, 9)] for _ in range(4)) for _ in range(300)
        ]
        report = score(preds, truths, charset=charset)
        truth_counts = Counter("".join(truths))
        for i, ch in enumerate(charset):
            assert report.confusion[i].sum() == truth_counts[ch]
        assert report.confusion.sum() == 1200

    def test_full_never_exceeds_per_char(self):
        rng = Rng(6)
        charset = "AB"
        for trial in range(20):
            truths = [
                "".join(charset[rng.randint(0, 1)] for _ in range(3)) for _ in range(40)
            ]
            preds = [
                "".join(charset[rng.randint(0, 1)] for _ in range(3)) for _ in range(40)
            ]
            report = score(preds, truths, charset=charset)
            assert report.full_string_accuracy <= report.per_char_accuracy <= 1.0

    def test_against_independent_recount(self):
        rng = Rng(7)
        charset = "XYZW"
        truths = [
            "".join(charset[rng.randint(0, 3)] for _ in range(5)) for _ in range(1000)
        ]
        preds = [
            "".join(charset[rng.randint(0, 3)] for _ in range(5)) for _ in range(1000)
        ]
        report = score(preds, truths, charset=charset)

        full = sum(p == t for p, t in zip(preds, truths))
        chars = sum(a == b for p, t in zip(preds, truths) for a, b in zip(p, t))
        pair_counts = Counter(
            (b, a) for p, t in zip(preds, truths) for a, b in zip(p, t)
        )
        assert report.full_string_accuracy == full / 1000
        assert report.per_char_accuracy == chars / 5000
        for i, t in enumerate(charset):
            for j, p in enumerate(charset):
                assert report.confusion[i, j] == pair_counts[(t, p)]


class TestExpectedFullAccuracy:
    def test_tabulated_value(self):
        assert expected_full_accuracy(0.95, 10) == pytest.approx(0.5987, abs=1e-4)

    def test_decay_with_length(self):
        values = [expected_full_accuracy(0.9, length) for length in range(1, 6)]
        assert values == pytest.approx(
            [0.9, 0.81, 0.729, 0.6561, 0.59049], rel=1e-9
        )

    def test_perfect_and_single(self):
        assert expected_full_accuracy(1.0, 50) == 1.0
        assert expected_full_accuracy(0.37, 1) == 0.37
        assert expected_full_accuracy(0.0, 3) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            expected_full_accuracy(1.2, 3)
        with pytest.raises(ValueError, match=">= 1"):
            expected_full_accuracy(0.9, 0)


class TestSimulateFullAccuracy:
    def test_matches_law_within_three_se(self):
        trials = 20_000
        for p in (0.9, 0.95):
            for length in (3, 5, 10):
                q = expected_full_accuracy(p, length)
                se = (q * (1 - q) / trials) ** 0.5
                est = simulate_full_accuracy(p, length, trials, seed=31)
                assert abs(est - q) < 3 * se

    def test_deterministic_per_seed(self):
        a = simulate_full_accuracy(0.9, 4, 5000, seed=8)
        b = simulate_full_accuracy(0.9, 4, 5000, seed=8)
        c = simulate_full_accuracy(0.9, 4, 5000, seed=9)
        assert a == b
        assert a != c

    def test_validation(self):
        with pytest.raises(ValueError, match="trials"):
            simulate_full_accuracy(0.9, 3, 0, seed=1)


class TestReferenceTable:
    def test_values(self):
        assert REFERENCE_FULL_PERCENT == {3: 80, 4: 79, 5: 77, 6: 77, 7: 75}


class TestCsvWriters:
    def test_report_csv(self, tmp_path):
        report = score(["AB", "CD"], ["AB", "CC"])
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["metric", "value"]
        assert rows[1] == ["n", "2"]
        assert rows[2] == ["per_char_accuracy", "0.750000"]
        assert rows[3] == ["full_string_accuracy", "0.500000"]
        assert rows[4] == ["head0_accuracy", "1.000000"]
        assert rows[5] == ["head1_accuracy", "0.500000"]

    def test_confusion_csv(self, tmp_path):
        report = score(["AB", "CD"], ["AB", "CC"])
        path = tmp_path / "confusion.csv"
        write_confusion_csv(report, path)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["truth\\pred", "A", "B", "C", "D"]
        assert rows[1] == ["A", "1", "0", "0", "0"]
        assert rows[3] == ["C", "0", "0", "1", "1"]
        assert len(rows) == 5


class TestLengthStudy:
    def test_rejects_unordered_lengths(self, tmp_path):
        with pytest.raises(ValueError, match="ascending"):
            length_study([3, 2], tmp_path, samples_per_length=10)
        with pytest.raises(ValueError, match="ascending"):
            length_study([], tmp_path)

    def test_tiny_study_end_to_end(self, tmp_path):
        cfg = TrainConfig(epochs=2, batch_size=32, seed=7)
        rows = length_study(
            [1, 2], tmp_path, samples_per_length=200, cfg=cfg, seed=11
        )
        assert [r.length for r in rows] == [1, 2]
        for row in rows:
            assert 0.0 <= row.full_acc <= row.per_char_acc <= 1.0
            # 1 and 2 sit outside the reference table
            assert row.reference_percent is None
        assert os.path.isdir(tmp_path / "len1")
        assert os.path.isdir(tmp_path / "len2")

        out = tmp_path / "study.csv"
        write_length_study_csv(rows, out)
        with open(out, newline="") as f:
            parsed = list(csv.reader(f))
        assert parsed[0] == ["L", "ours_full", "ours_per_char", "reference_percent"]
        assert parsed[1][0] == "1"
        assert parsed[1][3] == ""
        assert float(parsed[2][1]) == pytest.approx(rows[1].full_acc, abs=1e-6)

    def test_csv_carries_reference_for_tabulated_lengths(self, tmp_path):
        rows = [
            type(
                "Row",
                (),
                {
                    "length": 3,
                    "full_acc": 0.61,
                    "per_char_acc": 0.85,
                    "reference_percent": 80,
                },
            )()
        ]
        out = tmp_path / "study.csv"
        write_length_study_csv(rows, out)
        with open(out, newline="") as f:
            parsed = list(csv.reader(f))
        assert parsed[1] == ["3", "0.610000", "0.850000", "80"]
