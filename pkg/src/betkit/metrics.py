"""Classification metrics, per-cell gains against the baseline condition,
marginal gain distributions, report emission, and the JSONL results store.

Zero-denominator conventions: precision, recall, and F1 are all defined as 0
when their denominators vanish. Distribution summaries use linear-
interpolation quartiles and 1.5 * IQR whiskers. Gains are kept at full float
precision; only the markdown rendering rounds to 3 decimals.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .ioutil import append_jsonl, atomic_write_text

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
BASELINE = "base"
AXES = ("dataset", "language", "model")
STORE_KEYS = (
    "model",
    "dataset",
    "language",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "n_test",
    "timestamp",
)
REPORT_FORMATS = ("csv", "md", "boxplot-json")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts

    def value(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise ValidationError(f"unknown metric {metric!r}")
        return getattr(self, metric)


def compute_metrics(predictions: list[int], golds: list[int]) -> EvalMetrics:
    """Confusion counts and the accuracy/precision/recall/F1 set, with the
    positive class being label 1."""
    if len(predictions) != len(golds):
        raise ValidationError(
            f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise ValidationError("cannot compute metrics on empty inputs")
    tp = fp = fn = tn = 0
    for pred, gold in zip(predictions, golds):
        if pred not in (0, 1) or gold not in (0, 1):
            raise ValidationError(f"labels must be 0 or 1, got pred={pred!r} gold={gold!r}")
        if pred == 1 and gold == 1:
            tp += 1
        elif pred == 1 and gold == 0:
            fp += 1
        elif pred == 0 and gold == 1:
            fn += 1
        else:
            tn += 1
    n = len(predictions)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalMetrics(
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        counts=ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn),
    )


def gain(augmented: EvalMetrics, baseline: EvalMetrics, metric: str) -> float:
    """Exact subtraction of the baseline metric, no clamping. Both sides must
    have been evaluated on the same number of pairs."""
    if augmented.counts.total != baseline.counts.total:
        raise ValidationError(
            f"incompatible evaluations: N={augmented.counts.total} vs N={baseline.counts.total}"
        )
    return augmented.value(metric) - baseline.value(metric)


# ---------------------------------------------------------------------------
# Results store


@dataclass(frozen=True)
class EvalResult:
    model: str
    dataset: str
    language: str  # condition: a pivot code, "all", or "base"
    accuracy: float
    precision: float
    recall: float
    f1: float
    n_test: int
    timestamp: str

    def value(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise ValidationError(f"unknown metric {metric!r}")
        return getattr(self, metric)

    def cell_key(self) -> tuple[str, str, str]:
        return (self.model, self.dataset, self.language)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in STORE_KEYS}


@dataclass(frozen=True)
class FailedCell:
    model: str
    dataset: str
    language: str
    error: str
    timestamp: str

    def cell_key(self) -> tuple[str, str, str]:
        return (self.model, self.dataset, self.language)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "dataset": self.dataset,
            "language": self.language,
            "error": self.error,
            "timestamp": self.timestamp,
        }


def validate_result_record(obj: dict, where: str = "results record") -> EvalResult:
    """Check a dict against the results-store schema and build an EvalResult.
    Extra keys are tolerated; every schema key must be present and valid."""
    missing = [k for k in STORE_KEYS if k not in obj]
    if missing:
        raise ValidationError(f"{where}: missing keys {missing}")
    for key in ("model", "dataset", "language"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise ValidationError(f"{where}: {key} must be a non-empty string")
    for metric in METRIC_NAMES:
        v = obj[metric]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"{where}: {metric}={v!r} outside [0, 1]")
    n_test = obj["n_test"]
    if not isinstance(n_test, int) or isinstance(n_test, bool) or n_test < 1:
        raise ValidationError(f"{where}: n_test={n_test!r} must be a positive integer")
    if not isinstance(obj["timestamp"], str):
        raise ValidationError(f"{where}: timestamp must be a string")
    return EvalResult(
        model=obj["model"],
        dataset=obj["dataset"],
        language=obj["language"],
        accuracy=float(obj["accuracy"]),
        precision=float(obj["precision"]),
        recall=float(obj["recall"]),
        f1=float(obj["f1"]),
        n_test=n_test,
        timestamp=obj["timestamp"],
    )


def load_results_store(path) -> list[EvalResult | FailedCell]:
    """Read the store; lines carrying an `error` key are failed cells. Every
    (model, dataset, language) triple must be unique."""
    path = Path(path)
    if not path.exists():
        return []
    rows: list[EvalResult | FailedCell] = []
    seen: dict[tuple[str, str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            where = f"{path}: line {lineno}"
            if "error" in obj:
                row: EvalResult | FailedCell = FailedCell(
                    model=str(obj.get("model", "")),
                    dataset=str(obj.get("dataset", "")),
                    language=str(obj.get("language", "")),
                    error=str(obj["error"]),
                    timestamp=str(obj.get("timestamp", "")),
                )
            else:
                row = validate_result_record(obj, where=where)
            key = row.cell_key()
            if key in seen:
                raise ValidationError(
                    f"{where}: duplicate cell {key} (first seen on line {seen[key]})"
                )
            seen[key] = lineno
            rows.append(row)
    return rows


def append_result(path, row: EvalResult | FailedCell) -> None:
    append_jsonl(path, row.to_dict())


def completed_cells(rows: list[EvalResult | FailedCell]) -> set[tuple[str, str, str]]:
    return {row.cell_key() for row in rows}


# ---------------------------------------------------------------------------
# Gains


@dataclass(frozen=True)
class GainRecord:
    model: str
    dataset: str
    language: str  # never "base"
    metric: str
    gain: float


def compute_gains(results: list[EvalResult]) -> tuple[list[GainRecord], list[str]]:
    """Pair every non-base row with its (model, dataset) baseline and emit one
    GainRecord per metric. Rows without a baseline are skipped and reported in
    the warnings list; a baseline evaluated on a different n_test is an error."""
    baselines = {
        (r.model, r.dataset): r for r in results if r.language == BASELINE
    }
    records: list[GainRecord] = []
    warnings: list[str] = []
    for row in results:
        if row.language == BASELINE:
            continue
        base = baselines.get((row.model, row.dataset))
        if base is None:
            warnings.append(f"no baseline for model={row.model} dataset={row.dataset}")
            continue
        if row.n_test != base.n_test:
            raise ValidationError(
                f"incompatible evaluations for model={row.model} dataset={row.dataset}: "
                f"n_test {row.n_test} vs baseline {base.n_test}"
            )
        for metric in METRIC_NAMES:
            records.append(
                GainRecord(
                    model=row.model,
                    dataset=row.dataset,
                    language=row.language,
                    metric=metric,
                    gain=row.value(metric) - base.value(metric),
                )
            )
    return records, warnings


@dataclass(frozen=True)
class DistributionSummary:
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "min": self.min,
            "max": self.max,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
        }


def summarize_distribution(values: list[float]) -> DistributionSummary:
    arr = np.asarray(sorted(values), dtype=float)
    q1, median, q3 = (float(q) for q in np.percentile(arr, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = tuple(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)])
    return DistributionSummary(
        n=len(arr),
        mean=float(arr.mean()),
        median=median,
        q1=q1,
        q3=q3,
        min=float(arr.min()),
        max=float(arr.max()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
    )


def marginal_gain_distribution(records: list[GainRecord], axis: str,
                               metric: str) -> dict[str, DistributionSummary]:
    """Pool gains along one categorical axis, the other axes free. Every record
    of the requested metric lands in exactly one bucket."""
    if axis not in AXES:
        raise ValidationError(f"unknown axis {axis!r}; expected one of {AXES}")
    if metric not in METRIC_NAMES:
        raise ValidationError(f"unknown metric {metric!r}")
    attr = {"dataset": "dataset", "language": "language", "model": "model"}[axis]
    buckets: dict[str, list[float]] = {}
    for record in records:
        if record.metric != metric:
            continue
        buckets.setdefault(getattr(record, attr), []).append(record.gain)
    if not buckets:
        raise ValidationError(f"no gain records for metric {metric!r}")
    return {key: summarize_distribution(vals) for key, vals in sorted(buckets.items())}


def best_by_metric(results: list[EvalResult], metric: str) -> dict[tuple[str, str], str]:
    """Per (model, dataset) group, the non-base condition with the maximal
    metric value; ties break toward the ascending language code."""
    if metric not in METRIC_NAMES:
        raise ValidationError(f"unknown metric {metric!r}")
    groups: dict[tuple[str, str], list[EvalResult]] = {}
    for row in results:
        if row.language == BASELINE:
            continue
        groups.setdefault((row.model, row.dataset), []).append(row)
    winners = {}
    for key, rows in groups.items():
        ordered = sorted(rows, key=lambda r: (-r.value(metric), r.language))
        winners[key] = ordered[0].language
    return winners


# ---------------------------------------------------------------------------
# Reports


def report_csv(results: list[EvalResult]) -> tuple[str, list[str]]:
    """Gain report, full precision: one row per (non-base cell, metric)."""
    gains, warnings = compute_gains(results)
    by_cell_metric = {(g.model, g.dataset, g.language, g.metric): g.gain for g in gains}
    lines = ["model,dataset,language,metric,value,gain"]
    rows = sorted(
        (r for r in results if r.language != BASELINE),
        key=lambda r: (r.dataset, r.model, r.language),
    )
    for row in rows:
        for metric in METRIC_NAMES:
            key = (row.model, row.dataset, row.language, metric)
            if key not in by_cell_metric:
                continue
            lines.append(
                f"{row.model},{row.dataset},{row.language},{metric},"
                f"{row.value(metric)!r},{by_cell_metric[key]!r}"
            )
    return "\n".join(lines) + "\n", warnings


def report_markdown(results: list[EvalResult]) -> str:
    """Store rows rendered per (dataset, model) group, baseline first, values
    rounded to 3 decimals."""
    lines = [
        "| Model | Dataset | Condition | Acc | F1 | P | R |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    ordered = sorted(
        results,
        key=lambda r: (r.dataset, r.model, r.language != BASELINE, r.language),
    )
    for row in ordered:
        lines.append(
            f"| {row.model} | {row.dataset} | {row.language} "
            f"| {row.accuracy:.3f} | {row.f1:.3f} | {row.precision:.3f} | {row.recall:.3f} |"
        )
    return "\n".join(lines) + "\n"


def boxplot_payload(results: list[EvalResult], axis: str) -> dict:
    """Plot-ready distribution summaries of the gains along one axis, every
    metric included; whiskers at 1.5 * IQR."""
    gains, _ = compute_gains(results)
    payload: dict = {"axis": axis, "metrics": {}}
    for metric in METRIC_NAMES:
        if any(g.metric == metric for g in gains):
            buckets = marginal_gain_distribution(gains, axis, metric)
            payload["metrics"][metric] = {k: s.to_dict() for k, s in buckets.items()}
        else:
            payload["metrics"][metric] = {}
    return payload


def emit_report(results: list[EvalResult], fmt: str, out_path,
                axis: str = "language") -> Path:
    """Write one report file; output bytes are a pure function of the inputs."""
    if fmt not in REPORT_FORMATS:
        raise ValidationError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
    if fmt == "csv":
        text, _ = report_csv(results)
    elif fmt == "md":
        text = report_markdown(results)
    else:
        if axis not in AXES:
            raise ValidationError(f"unknown axis {axis!r}; expected one of {AXES}")
        text = json.dumps(boxplot_payload(results, axis), ensure_ascii=False,
                          sort_keys=True, indent=2) + "\n"
    return atomic_write_text(out_path, text)
