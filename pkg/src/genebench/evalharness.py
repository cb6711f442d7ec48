"""Classifier evaluation with exact small-sample statistics.

Accuracy alone cannot say whether a run beat chance or silently learned
inverted labels, so every report carries an exact two-sided binomial
test against p = 0.5 plus a label-swap probe that rescores the flipped
predictions.  A grid runner evaluates a table of (training regime,
test set) cells and renders it as text or CSV, capturing per-cell
failures instead of aborting the table.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .datasetgen import PairRecord
from .errors import DataError


class LengthMismatch(DataError):
    """Predictions and labels of different lengths."""


class EmptyEvaluation(DataError):
    """An evaluation over zero examples."""


class BadPrediction(DataError):
    """A prediction or label outside {0, 1}."""


def _check_pairs(predictions, labels):
    preds = list(predictions)
    gold = list(labels)
    if len(preds) != len(gold):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gold)} labels")
    if not preds:
        raise EmptyEvaluation("no examples to evaluate")
    for i, value in enumerate(preds):
        if value not in (0, 1) or isinstance(value, bool):
            raise BadPrediction(f"prediction {i}: {value!r} is not 0 or 1")
    for i, value in enumerate(gold):
        if value not in (0, 1) or isinstance(value, bool):
            raise BadPrediction(f"label {i}: {value!r} is not 0 or 1")
    return preds, gold


def accuracy(predictions, labels) -> float:
    preds, gold = _check_pairs(predictions, labels)
    return sum(p == g for p, g in zip(preds, gold)) / len(preds)


@dataclass(frozen=True)
class Confusion:
    """Binary confusion counts; ``tp`` counts label 1 predicted as 1."""

    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        return (self.tn + self.tp) / self.total

    def to_dict(self) -> dict:
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}


def confusion(predictions, labels) -> Confusion:
    preds, gold = _check_pairs(predictions, labels)
    tn = fp = fn = tp = 0
    for p, g in zip(preds, gold):
        if g == 0:
            if p == 0:
                tn += 1
            else:
                fp += 1
        elif p == 1:
            tp += 1
        else:
            fn += 1
    return Confusion(tn=tn, fp=fp, fn=fn, tp=tp)


def _log_pmf(k: int, n: int, p: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def binomial_test(k: int, n: int, p: float = 0.5) -> float:
    """Exact two-sided binomial p-value by tail doubling.

    Returns min(1, 2 * min(P(X <= k), P(X >= k))) for X ~ Binomial(n, p).
    For p = 0.5 the distribution is symmetric, so doubling the smaller
    tail equals the minimum-likelihood two-sided definition.  Tails are
    summed in log space with compensated addition, so values stay exact
    to near machine precision.
    """
    if isinstance(k, bool) or isinstance(n, bool):
        raise DataError("k and n must be integers, not booleans")
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise DataError(f"k must be in [0, {n}], got {k}")
    if not 0.0 < p < 1.0:
        raise DataError(f"p must be in (0, 1), got {p}")
    lower = math.fsum(math.exp(_log_pmf(i, n, p)) for i in range(0, k + 1))
    upper = math.fsum(math.exp(_log_pmf(i, n, p)) for i in range(k, n + 1))
    return min(1.0, 2.0 * min(lower, upper))


def random_indistinguishable(k: int, n: int, alpha: float = 0.05) -> bool:
    """True when k successes out of n cannot be told apart from coin flips."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    return binomial_test(k, n) >= alpha


@dataclass(frozen=True)
class LabelSwapReport:
    """Did the flipped predictions score significantly better?"""

    direct_accuracy: float
    swapped_accuracy: float
    swapped_p_value: float
    detected: bool

    def to_dict(self) -> dict:
        return {
            "direct_accuracy": self.direct_accuracy,
            "swapped_accuracy": self.swapped_accuracy,
            "swapped_p_value": self.swapped_p_value,
            "detected": self.detected,
        }


def label_swap_check(predictions, labels, alpha: float = 0.05) -> LabelSwapReport:
    """Score predictions with every label flipped and flag an inversion.

    A swap is reported only when the flipped scoring both beats the
    direct one and is itself significantly better than chance; a merely
    bad classifier near 0.5 stays unflagged.
    """
    preds, gold = _check_pairs(predictions, labels)
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    direct = sum(p == g for p, g in zip(preds, gold)) / len(preds)
    flipped = [1 - p for p in preds]
    swapped = sum(p == g for p, g in zip(flipped, gold)) / len(preds)
    k_swapped = sum(p == g for p, g in zip(flipped, gold))
    p_value = binomial_test(k_swapped, len(preds))
    detected = swapped > direct and p_value < alpha
    return LabelSwapReport(
        direct_accuracy=direct,
        swapped_accuracy=swapped,
        swapped_p_value=p_value,
        detected=detected,
    )


@dataclass(frozen=True)
class EvalReport:
    n: int
    n_correct: int
    accuracy: float
    confusion: Confusion
    p_value: float
    random_indistinguishable: bool
    label_swap: LabelSwapReport

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "confusion": self.confusion.to_dict(),
            "p_value": self.p_value,
            "random_indistinguishable": self.random_indistinguishable,
            "label_swap": self.label_swap.to_dict(),
        }


def evaluate_predictions(predictions, labels, alpha: float = 0.05) -> EvalReport:
    preds, gold = _check_pairs(predictions, labels)
    matrix = confusion(preds, gold)
    n_correct = matrix.tn + matrix.tp
    p_value = binomial_test(n_correct, matrix.total)
    return EvalReport(
        n=matrix.total,
        n_correct=n_correct,
        accuracy=n_correct / matrix.total,
        confusion=matrix,
        p_value=p_value,
        random_indistinguishable=p_value >= alpha,
        label_swap=label_swap_check(preds, gold, alpha=alpha),
    )


def model_predictor(model, tokenizer, mode, batch_size: int = 64):
    """Wrap a trained model as a records -> labels callable for the grid."""
    from .model import predict_batch  # deferred so stats-only use skips torch

    def call(records):
        return predict_batch(model, tokenizer, records, mode, batch_size=batch_size)

    return call


@dataclass(frozen=True)
class GridRow:
    """A named training regime; ``prepare`` builds its predictor once."""

    name: str
    prepare: object  # () -> (records -> labels)


@dataclass(frozen=True)
class GridColumn:
    """A named test set of pair records."""

    name: str
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for r in self.records:
            if not isinstance(r, PairRecord):
                raise DataError(f"grid column {self.name}: not a PairRecord: {r!r}")


@dataclass(frozen=True)
class GridCell:
    row: str
    column: str
    report: EvalReport | None
    error: str | None


@dataclass(frozen=True)
class GridResult:
    rows: tuple
    columns: tuple
    cells: tuple

    def cell(self, row: str, column: str) -> GridCell:
        for cell in self.cells:
            if cell.row == row and cell.column == column:
                return cell
        raise KeyError(f"no cell ({row!r}, {column!r})")


def run_grid(rows, columns, alpha: float = 0.05) -> GridResult:
    """Evaluate every (row, column) cell, capturing failures per cell.

    A failing ``prepare`` marks the whole row; a failing evaluation marks
    only its cell.  The rest of the table still runs.
    """
    rows = tuple(rows)
    columns = tuple(columns)
    if not rows or not columns:
        raise DataError("the grid needs at least one row and one column")
    row_names = [r.name for r in rows]
    col_names = [c.name for c in columns]
    if len(set(row_names)) != len(row_names) or len(set(col_names)) != len(col_names):
        raise DataError("row and column names must be unique")
    cells = []
    for row in rows:
        try:
            predictor = row.prepare()
        except Exception as exc:  # noqa: BLE001 - captured into the cell
            message = f"{type(exc).__name__}: {exc}"
            for col in columns:
                cells.append(GridCell(row.name, col.name, None, message))
            continue
        for col in columns:
            try:
                predictions = predictor(list(col.records))
                labels = [r.label for r in col.records]
                report = evaluate_predictions(predictions, labels, alpha=alpha)
                cells.append(GridCell(row.name, col.name, report, None))
            except Exception as exc:  # noqa: BLE001
                cells.append(GridCell(row.name, col.name, None, f"{type(exc).__name__}: {exc}"))
    return GridResult(tuple(row_names), tuple(col_names), tuple(cells))


def _cell_text(cell: GridCell) -> str:
    if cell.report is None:
        return "ERR"
    flags = ""
    if cell.report.random_indistinguishable:
        flags += "~"
    if cell.report.label_swap.detected:
        flags += "!"
    return f"{cell.report.accuracy:.3f}{flags}"


def render_text(result: GridResult) -> str:
    """Fixed-width accuracy table plus per-cell confusion lines.

    Cell flags: ``~`` not distinguishable from chance, ``!`` label swap
    suspected, ``ERR`` the cell failed (details at the bottom).
    """
    width = max(
        [len(name) for name in result.columns]
        + [len(_cell_text(c)) for c in result.cells]
        + [5]
    )
    label_width = max([len(name) for name in result.rows] + [4])
    lines = []
    header = " " * label_width + " | " + " | ".join(
        name.rjust(width) for name in result.columns
    )
    lines.append(header)
    lines.append("-" * len(header))
    for row in result.rows:
        cells = [_cell_text(result.cell(row, col)).rjust(width) for col in result.columns]
        lines.append(row.ljust(label_width) + " | " + " | ".join(cells))
    lines.append("")
    lines.append("flags: ~ chance-level, ! label swap suspected, ERR failed cell")
    lines.append("")
    for cell in result.cells:
        if cell.report is not None:
            r = cell.report
            c = r.confusion
            lines.append(
                f"{cell.row} / {cell.column}: n={r.n} acc={r.accuracy:.4f} "
                f"p={r.p_value:.4g} tn={c.tn} fp={c.fp} fn={c.fn} tp={c.tp}"
            )
    errors = [c for c in result.cells if c.error is not None]
    if errors:
        lines.append("")
        lines.append("errors:")
        for cell in errors:
            lines.append(f"{cell.row} / {cell.column}: {cell.error}")
    return "\n".join(lines) + "\n"


def render_csv(result: GridResult) -> str:
    """One line per cell with the full report, machine-readable."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "row",
            "column",
            "n",
            "accuracy",
            "p_value",
            "random_indistinguishable",
            "swap_detected",
            "tn",
            "fp",
            "fn",
            "tp",
            "error",
        ]
    )
    for cell in result.cells:
        if cell.report is None:
            writer.writerow([cell.row, cell.column] + [""] * 9 + [cell.error])
        else:
            r = cell.report
            c = r.confusion
            writer.writerow(
                [
                    cell.row,
                    cell.column,
                    r.n,
                    repr(r.accuracy),
                    repr(r.p_value),
                    int(r.random_indistinguishable),
                    int(r.label_swap.detected),
                    c.tn,
                    c.fp,
                    c.fn,
                    c.tp,
                    "",
                ]
            )
    return buffer.getvalue()
