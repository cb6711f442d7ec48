"""Evaluation statistics and the experiment grid.

The binomial test is checked against exact rational arithmetic
(math.comb plus Fraction), a fully independent route.
"""

import csv
import io
import math
from fractions import Fraction

import pytest

from genebench.datasetgen import PairRecord
from genebench.errors import DataError
from genebench.evalharness import (
    BadPrediction,
    Confusion,
    EmptyEvaluation,
    EvalReport,
    GridColumn,
    GridRow,
    LengthMismatch,
    accuracy,
    binomial_test,
    confusion,
    evaluate_predictions,
    label_swap_check,
    random_indistinguishable,
    render_csv,
    render_text,
    run_grid,
)


def exact_two_sided(k, n, p=Fraction(1, 2)):
    """Oracle: exact tail doubling in rational arithmetic."""
    q = 1 - p
    pmf = lambda i: math.comb(n, i) * p**i * q ** (n - i)
    lower = sum(pmf(i) for i in range(0, k + 1))
    upper = sum(pmf(i) for i in range(k, n + 1))
    return min(Fraction(1), 2 * min(lower, upper))


class TestAccuracy:
    def test_basic(self):
        assert accuracy([1, 0, 1, 1], [1, 0, 0, 1]) == 0.75
        assert accuracy([0, 1], [0, 1]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy([1, 0], [1])

    def test_empty(self):
        with pytest.raises(EmptyEvaluation):
            accuracy([], [])

    def test_bad_values(self):
        with pytest.raises(BadPrediction):
            accuracy([2, 0], [1, 0])
        with pytest.raises(BadPrediction):
            accuracy([1, 0], [1, "0"])
        with pytest.raises(BadPrediction):
            accuracy([True, 0], [1, 0])


class TestConfusion:
    def test_counts(self):
        m = confusion([1, 0, 1, 0, 1], [1, 0, 0, 1, 1])
        assert (m.tn, m.fp, m.fn, m.tp) == (1, 1, 1, 2)
        assert m.total == 5
        assert m.accuracy == 0.6

    def test_to_dict(self):
        m = confusion([1, 0], [1, 0])
        assert m.to_dict() == {"tn": 1, "fp": 0, "fn": 0, "tp": 1}

    def test_all_cells_exercised(self):
        m = confusion([0, 0, 1, 1], [0, 1, 0, 1])
        assert m == Confusion(tn=1, fp=1, fn=1, tp=1)


class TestBinomialTest:
    def test_symmetric_midpoint_is_one(self):
        assert binomial_test(50, 100) == 1.0

    def test_known_value(self):
        # exact value of the two-sided test at 60/100, frozen from the
        # rational-arithmetic oracle
        assert abs(binomial_test(60, 100) - 0.05688793364098079) < 1e-9

    def test_matches_exact_oracle(self):
        cases = [
            (0, 1), (1, 1), (0, 20), (20, 20), (10, 20), (13, 20),
            (60, 100), (45, 100), (99, 100), (128, 256), (150, 256),
        ]
        for k, n in cases:
            ref = float(exact_two_sided(k, n))
            got = binomial_test(k, n)
            assert abs(got - ref) <= 1e-12 * max(ref, 1e-300), (k, n)

    def test_biased_coin_matches_oracle(self):
        for k, n in [(3, 10), (9, 10), (30, 100)]:
            ref = float(exact_two_sided(k, n, Fraction(3, 10)))
            got = binomial_test(k, n, p=0.3)
            assert abs(got - ref) <= 1e-10 * max(ref, 1e-300), (k, n)

    def test_symmetry_at_half(self):
        for n in (10, 31, 100):
            for k in range(n + 1):
                assert binomial_test(k, n) == pytest.approx(
                    binomial_test(n - k, n), rel=1e-12
                )

    def test_extreme_tail(self):
        assert binomial_test(0, 20) == pytest.approx(2.0 ** (-19), rel=1e-12)

    def test_validation(self):
        with pytest.raises(DataError):
            binomial_test(-1, 10)
        with pytest.raises(DataError):
            binomial_test(11, 10)
        with pytest.raises(DataError):
            binomial_test(5, 0)
        with pytest.raises(DataError):
            binomial_test(5, 10, p=0.0)
        with pytest.raises(DataError):
            binomial_test(True, 10)


class TestRandomIndistinguishable:
    def test_chance_level(self):
        assert random_indistinguishable(50, 100)
        assert random_indistinguishable(128, 256)

    def test_just_inside_threshold(self):
        # p = 0.0569 >= 0.05, still inside the chance band
        assert random_indistinguishable(60, 100)

    def test_clearly_better(self):
        assert not random_indistinguishable(65, 100)
        assert not random_indistinguishable(90, 100)

    def test_clearly_worse_also_flags(self):
        # far below chance is also distinguishable from a fair coin
        assert not random_indistinguishable(10, 100)

    def test_alpha_validation(self):
        with pytest.raises(DataError):
            random_indistinguishable(5, 10, alpha=0.0)


class TestLabelSwap:
    def test_inverted_predictor_detected(self):
        labels = [i % 2 for i in range(100)]
        preds = [1 - l for l in labels]
        report = label_swap_check(preds, labels)
        assert report.detected
        assert report.direct_accuracy == 0.0
        assert report.swapped_accuracy == 1.0
        assert report.swapped_p_value < 1e-20

    def test_good_predictor_clean(self):
        labels = [i % 2 for i in range(100)]
        report = label_swap_check(labels, labels)
        assert not report.detected
        assert report.direct_accuracy == 1.0

    def test_noisy_inversion_detected(self):
        labels = [i % 2 for i in range(100)]
        preds = [1 - l for l in labels]
        for i in range(10):  # 10% of flips undone
            preds[i] = labels[i]
        report = label_swap_check(preds, labels)
        assert report.detected
        assert report.swapped_accuracy == 0.9

    def test_chance_level_not_flagged(self):
        # 45% direct looks inverted but the flip is not significant
        labels = [i % 2 for i in range(100)]
        preds = labels[:45] + [1 - l for l in labels[45:]]
        report = label_swap_check(preds, labels)
        assert not report.detected

    def test_swap_accuracy_is_complement(self):
        import random

        rng = random.Random(5)
        for _ in range(20):
            n = rng.randrange(5, 60)
            labels = [rng.randrange(2) for _ in range(n)]
            preds = [rng.randrange(2) for _ in range(n)]
            report = label_swap_check(preds, labels)
            assert report.swapped_accuracy == pytest.approx(
                1.0 - report.direct_accuracy, abs=1e-12
            )


class TestEvaluatePredictions:
    def test_report_consistency(self):
        labels = [i % 2 for i in range(40)]
        preds = labels[:30] + [1 - l for l in labels[30:]]
        report = evaluate_predictions(preds, labels)
        assert report.n == 40
        assert report.n_correct == 30
        assert report.accuracy == 0.75
        assert report.confusion.total == report.n
        assert report.confusion.tn + report.confusion.tp == report.n_correct
        assert report.p_value == binomial_test(30, 40)
        assert not report.random_indistinguishable

    def test_chance_report(self):
        labels = [i % 2 for i in range(100)]
        preds = [0] * 100  # 50% on balanced labels
        report = evaluate_predictions(preds, labels)
        assert report.accuracy == 0.5
        assert report.p_value == 1.0
        assert report.random_indistinguishable
        assert not report.label_swap.detected

    def test_to_dict_shape(self):
        report = evaluate_predictions([1, 0, 1], [1, 0, 0])
        d = report.to_dict()
        assert set(d) == {
            "n",
            "n_correct",
            "accuracy",
            "confusion",
            "p_value",
            "random_indistinguishable",
            "label_swap",
        }
        assert set(d["confusion"]) == {"tn", "fp", "fn", "tp"}
        assert set(d["label_swap"]) == {
            "direct_accuracy",
            "swapped_accuracy",
            "swapped_p_value",
            "detected",
        }


def _records(n):
    out = []
    for i in range(n):
        label = i % 2
        out.append(PairRecord(f"ACGT{i:03d}A", f"TTAA{i:03d}C", label))
    return out


def _grid_fixture():
    perfect = GridRow("perfect", lambda: lambda recs: [r.label for r in recs])
    inverted = GridRow("inverted", lambda: lambda recs: [1 - r.label for r in recs])
    coin = GridRow("coin", lambda: lambda recs: [0 for _ in recs])

    def broken_prepare():
        raise RuntimeError("no weights on disk")

    broken = GridRow("broken", broken_prepare)
    cols = [GridColumn("dev", _records(40)), GridColumn("test", _records(100))]
    return [perfect, inverted, coin, broken], cols


class TestGrid:
    def test_shape_and_reports(self):
        rows, cols = _grid_fixture()
        result = run_grid(rows, cols)
        assert result.rows == ("perfect", "inverted", "coin", "broken")
        assert result.columns == ("dev", "test")
        assert len(result.cells) == 8
        assert result.cell("perfect", "dev").report.accuracy == 1.0
        assert result.cell("inverted", "test").report.accuracy == 0.0
        assert result.cell("inverted", "test").report.label_swap.detected
        assert result.cell("coin", "test").report.random_indistinguishable

    def test_prepare_failure_marks_whole_row(self):
        rows, cols = _grid_fixture()
        result = run_grid(rows, cols)
        for col in ("dev", "test"):
            cell = result.cell("broken", col)
            assert cell.report is None
            assert "RuntimeError" in cell.error
            assert "no weights on disk" in cell.error

    def test_cell_failure_is_isolated(self):
        def touchy():
            def predict(recs):
                if len(recs) == 40:
                    raise ValueError("bad batch")
                return [r.label for r in recs]

            return predict

        rows = [GridRow("touchy", touchy)]
        cols = [GridColumn("dev", _records(40)), GridColumn("test", _records(100))]
        result = run_grid(rows, cols)
        assert result.cell("touchy", "dev").error is not None
        assert result.cell("touchy", "test").report.accuracy == 1.0

    def test_unknown_cell(self):
        rows, cols = _grid_fixture()
        result = run_grid(rows, cols)
        with pytest.raises(KeyError):
            result.cell("perfect", "nope")

    def test_validation(self):
        rows, cols = _grid_fixture()
        with pytest.raises(DataError):
            run_grid([], cols)
        with pytest.raises(DataError):
            run_grid(rows, [])
        with pytest.raises(DataError):
            run_grid([rows[0], rows[0]], cols)
        with pytest.raises(DataError):
            GridColumn("bad", ["not a record"])

    def test_render_text(self):
        rows, cols = _grid_fixture()
        text = render_text(run_grid(rows, cols))
        assert "perfect" in text and "dev" in text and "test" in text
        assert "1.000" in text
        assert "0.000!" in text  # inverted row flagged
        assert "0.500~" in text  # coin row at chance
        assert "ERR" in text
        assert "no weights on disk" in text
        assert "tn=" in text and "tp=" in text

    def test_render_csv_matches_reports(self):
        rows, cols = _grid_fixture()
        result = run_grid(rows, cols)
        parsed = list(csv.DictReader(io.StringIO(render_csv(result))))
        assert len(parsed) == len(result.cells)
        for line in parsed:
            cell = result.cell(line["row"], line["column"])
            if cell.report is None:
                assert line["accuracy"] == ""
                assert line["error"]
            else:
                assert float(line["accuracy"]) == cell.report.accuracy
                assert float(line["p_value"]) == cell.report.p_value
                assert int(line["tn"]) == cell.report.confusion.tn
                assert int(line["tp"]) == cell.report.confusion.tp

    def test_text_and_csv_agree(self):
        rows, cols = _grid_fixture()
        result = run_grid(rows, cols)
        text = render_text(result)
        for line in csv.DictReader(io.StringIO(render_csv(result))):
            if line["accuracy"]:
                assert f"{float(line['accuracy']):.3f}" in text
