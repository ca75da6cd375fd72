"""Experiment grid orchestration: plan the model x dataset x condition matrix,
run each cell through a trainer adapter, and persist results resumably.

The adapter protocol is file based: the harness writes a manifest JSON and
launches ``<adapter-cmd> <manifest-path>``; the adapter trains, evaluates on
the test split itself, and writes a results-store-schema record at the
manifest's ``output`` path (exit 0 on success). The harness validates the
record's schema and cell identity but never recomputes the adapter's metrics;
that trust boundary is deliberate. A trainer may also be an in-process
callable taking the manifest path, which is how the built-in overlap trainer
is wired.

Dataset directory layout expected under ``data_root`` (interchange files):

    <data_root>/<dataset>/train.jsonl     original train split
    <data_root>/<dataset>/dev.jsonl       dev split
    <data_root>/<dataset>/test.jsonl      test split
    <data_root>/<dataset>/<code>.jsonl    augmented-only records per language
    <data_root>/<dataset>/all.jsonl       originals + every augmented record

Condition "base" trains on train.jsonl, condition "all" on all.jsonl, and a
language condition on train.jsonl concatenated with <code>.jsonl (materialized
once as train_with_<code>.jsonl).
"""

import datetime as _dt
import json
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from . import corpus as corpus_mod
from .errors import ParseError, TrainerError, ValidationError
from .ioutil import atomic_write_text
from .metrics import (
    EvalResult,
    FailedCell,
    append_result,
    completed_cells,
    compute_metrics,
    load_results_store,
    validate_result_record,
)

MODELS = ("bert", "xlnet", "roberta", "albert")
DATASETS = ("mrpc", "tpc", "quora")
LANGUAGES = ("zh", "es", "ar", "ja", "te", "jv", "ko", "vi", "tr", "yo")
BASE_CONDITION = "base"
ALL_CONDITION = "all"

# Adapter command token that routes a cell to the in-process baseline trainer.
BUILTIN_OVERLAP = "builtin:overlap"

DEFAULT_MODEL_OVERRIDES = {"xlnet": {"batch_size": 16}}
DEFAULT_CELL_TIMEOUT_S = 24 * 3600.0


@dataclass(frozen=True)
class ExperimentCell:
    model: str
    dataset: str
    condition: str

    def key(self) -> tuple[str, str, str]:
        return (self.model, self.dataset, self.condition)


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 3
    batch_size: int = 32
    learning_rate: float = 3e-5
    max_sequence_length: int = 128
    seed: int = 42

    def validate(self) -> "TrainerConfig":
        for name in ("epochs", "batch_size", "max_sequence_length"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        return self


def config_for_model(model: str, base: TrainerConfig | None = None,
                     overrides: dict[str, dict] | None = None) -> TrainerConfig:
    """Per-model hyperparameter overrides applied to the shared defaults."""
    config = base or TrainerConfig()
    merged = dict(DEFAULT_MODEL_OVERRIDES)
    if overrides:
        for key, value in overrides.items():
            merged[key] = {**merged.get(key, {}), **value}
    if model in merged:
        config = replace(config, **merged[model])
    return config.validate()


@dataclass
class TrainerManifest:
    cell: ExperimentCell
    train_path: Path
    dev_path: Path
    test_path: Path
    config: TrainerConfig
    output_path: Path

    def to_dict(self) -> dict:
        return {
            "cell": {
                "model": self.cell.model,
                "dataset": self.cell.dataset,
                "language": self.cell.condition,
            },
            "files": {
                "train": str(self.train_path),
                "dev": str(self.dev_path),
                "test": str(self.test_path),
            },
            "config": {
                "epochs": self.config.epochs,
                "batch_size": self.config.batch_size,
                "learning_rate": self.config.learning_rate,
                "max_sequence_length": self.config.max_sequence_length,
                "seed": self.config.seed,
            },
            "output": str(self.output_path),
        }

    def write(self, path) -> Path:
        for name, p in (("train", self.train_path), ("dev", self.dev_path),
                        ("test", self.test_path)):
            if not Path(p).exists():
                raise ValidationError(f"manifest {name} file does not exist: {p}")
        return atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")


def plan_matrix(models: Sequence[str], datasets: Sequence[str],
                conditions: Sequence[str],
                known_models: Sequence[str] | None = None,
                known_datasets: Sequence[str] | None = None,
                known_conditions: Sequence[str] | None = None) -> list[ExperimentCell]:
    """Cartesian product in deterministic (dataset, model, condition) order.
    Identifiers are free-form tokens unless explicit known sets are given."""
    for name, values in (("models", models), ("datasets", datasets), ("conditions", conditions)):
        if not values:
            raise ValidationError(f"{name} must be non-empty")
        if len(set(values)) != len(values):
            raise ValidationError(f"{name} contains duplicates")
        for v in values:
            if not v or any(c.isspace() for c in v) or "/" in v:
                raise ValidationError(f"bad identifier {v!r} in {name}")
    for name, values, known in (
        ("model", models, known_models),
        ("dataset", datasets, known_datasets),
        ("condition", conditions, known_conditions),
    ):
        if known is not None:
            unknown = [v for v in values if v not in known]
            if unknown:
                raise ValidationError(f"unknown {name} identifier(s): {unknown}")
    return [
        ExperimentCell(model=m, dataset=d, condition=c)
        for d in datasets
        for m in models
        for c in conditions
    ]


# ---------------------------------------------------------------------------
# Trainer invocation

TrainerCallable = Callable[[str], dict]
Trainer = TrainerCallable | str | list


def invoke_trainer(adapter_command: str | list, manifest: TrainerManifest,
                   run_dir, timeout_s: float = DEFAULT_CELL_TIMEOUT_S) -> EvalResult:
    """Write the manifest file, launch the adapter with the manifest path as
    its sole argument, and validate the record it writes."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = manifest.write(run_dir / "manifest.json")
    argv = shlex.split(adapter_command) if isinstance(adapter_command, str) else list(adapter_command)
    try:
        proc = subprocess.run(
            argv + [str(manifest_path)],
            capture_output=True,
            text=True,
            timeout=timeout_s,
        )
    except subprocess.TimeoutExpired as exc:
        raise TrainerError(f"adapter timed out after {timeout_s:.0f}s: {argv}") from exc
    except OSError as exc:
        raise TrainerError(f"could not launch adapter {argv}: {exc}") from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise TrainerError(
            f"adapter exited with {proc.returncode}: {' | '.join(tail) or 'no output'}"
        )
    return _read_record(manifest)


def run_callable_trainer(trainer: TrainerCallable, manifest: TrainerManifest,
                         run_dir) -> EvalResult:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = manifest.write(run_dir / "manifest.json")
    try:
        trainer(str(manifest_path))
    except TrainerError:
        raise
    except Exception as exc:
        raise TrainerError(f"in-process trainer failed: {exc}") from exc
    return _read_record(manifest)


def _read_record(manifest: TrainerManifest) -> EvalResult:
    output = Path(manifest.output_path)
    if not output.exists():
        raise TrainerError(f"adapter wrote no metrics record at {output}")
    try:
        obj = json.loads(output.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TrainerError(f"metrics record at {output} is not valid JSON: {exc}") from exc
    try:
        record = validate_result_record(obj, where=str(output))
    except ValidationError as exc:
        raise TrainerError(str(exc)) from exc
    expected = (manifest.cell.model, manifest.cell.dataset, manifest.cell.condition)
    if record.cell_key() != expected:
        raise TrainerError(
            f"metrics record identifies cell {record.cell_key()}, expected {expected}"
        )
    return record


# ---------------------------------------------------------------------------
# Data resolution


def resolve_cell_files(data_root, cell: ExperimentCell) -> tuple[Path, Path, Path]:
    """Locate (and for language conditions, materialize) the train/dev/test
    interchange files for a cell."""
    dataset_dir = Path(data_root) / cell.dataset
    dev = dataset_dir / "dev.jsonl"
    test = dataset_dir / "test.jsonl"
    if cell.condition == BASE_CONDITION:
        train = dataset_dir / "train.jsonl"
    elif cell.condition == ALL_CONDITION:
        train = dataset_dir / "all.jsonl"
    else:
        train = dataset_dir / f"train_with_{cell.condition}.jsonl"
        if not train.exists():
            aug_path = dataset_dir / f"{cell.condition}.jsonl"
            base_path = dataset_dir / "train.jsonl"
            for path in (base_path, aug_path):
                if not path.exists():
                    raise ValidationError(f"missing corpus file for cell {cell.key()}: {path}")
            base = corpus_mod.load_corpus(
                base_path, "interchange", dataset_id=cell.dataset, split_tag="train"
            )
            aug = corpus_mod.load_corpus(
                aug_path, "interchange", dataset_id=cell.dataset, split_tag="train"
            )
            corpus_mod.write_corpus(corpus_mod.concat_corpora(base, aug), train)
    for path in (train, dev, test):
        if not path.exists():
            raise ValidationError(f"missing corpus file for cell {cell.key()}: {path}")
    return train, dev, test


# ---------------------------------------------------------------------------
# Matrix execution


def run_matrix(cells: list[ExperimentCell], trainer: Trainer, results_store_path,
               data_root, run_dir=None,
               base_config: TrainerConfig | None = None,
               model_overrides: dict[str, dict] | None = None,
               timeout_s: float = DEFAULT_CELL_TIMEOUT_S,
               workers: int = 1) -> list[EvalResult | FailedCell]:
    """Execute every cell not already present in the store. Results (including
    failures, carried as error-marker lines) are appended one line per cell;
    re-running a completed store performs zero trainer invocations."""
    results_store_path = Path(results_store_path)
    run_dir = Path(run_dir) if run_dir is not None else results_store_path.parent / "runs"
    existing = completed_cells(load_results_store(results_store_path))
    todo = [cell for cell in cells if cell.key() not in existing]
    store_lock = threading.Lock()
    outcomes: list[EvalResult | FailedCell] = []

    def run_cell(cell: ExperimentCell) -> EvalResult | FailedCell:
        cell_dir = run_dir / f"{cell.dataset}_{cell.model}_{cell.condition}"
        try:
            train, dev, test = resolve_cell_files(data_root, cell)
            manifest = TrainerManifest(
                cell=cell,
                train_path=train,
                dev_path=dev,
                test_path=test,
                config=config_for_model(cell.model, base_config, model_overrides),
                output_path=cell_dir / "metrics.json",
            )
            if callable(trainer):
                record = run_callable_trainer(trainer, manifest, cell_dir)
            else:
                record = invoke_trainer(trainer, manifest, cell_dir, timeout_s=timeout_s)
        except (TrainerError, ValidationError, ParseError) as exc:
            record = FailedCell(
                model=cell.model,
                dataset=cell.dataset,
                language=cell.condition,
                error=str(exc),
                timestamp=_now(),
            )
        with store_lock:
            append_result(results_store_path, record)
            outcomes.append(record)
        return record

    if workers <= 1:
        for cell in todo:
            run_cell(cell)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_cell, todo))
    return outcomes


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# Built-in offline trainer


def jaccard(sentence: str, paraphrase: str) -> float:
    """Token-set overlap over lowercased whitespace tokens."""
    a = set(sentence.lower().split())
    b = set(paraphrase.lower().split())
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def builtin_overlap_trainer(manifest_path: str) -> dict:
    """Deterministic baseline trainer fulfilling the adapter protocol: sweep a
    decision threshold over the distinct dev-set Jaccard overlaps, keep the
    one maximizing dev F1 (ties: lowest threshold), then score the test split
    with `predict 1 iff J >= threshold`. No randomness anywhere."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    cell = manifest["cell"]
    files = manifest["files"]
    splits = {}
    for name in ("train", "dev", "test"):
        split = corpus_mod.load_corpus(files[name], "interchange", dataset_id=cell["dataset"])
        if not split.records:
            raise TrainerError(f"{name} split at {files[name]} is empty")
        splits[name] = split

    dev_scores = [jaccard(r.sentence, r.paraphrase) for r in splits["dev"].records]
    dev_golds = [r.quality for r in splits["dev"].records]
    best_threshold = select_overlap_threshold(dev_scores, dev_golds)

    test_scores = [jaccard(r.sentence, r.paraphrase) for r in splits["test"].records]
    test_preds = [1 if s >= best_threshold else 0 for s in test_scores]
    test_golds = [r.quality for r in splits["test"].records]
    evaluated = compute_metrics(test_preds, test_golds)
    record = {
        "model": cell["model"],
        "dataset": cell["dataset"],
        "language": cell["language"],
        "accuracy": evaluated.accuracy,
        "precision": evaluated.precision,
        "recall": evaluated.recall,
        "f1": evaluated.f1,
        "n_test": len(test_golds),
        "timestamp": _now(),
    }
    atomic_write_text(manifest["output"], json.dumps(record, ensure_ascii=False) + "\n")
    return record


def select_overlap_threshold(scores: list[float], golds: list[int]) -> float:
    """Threshold selection used by the built-in trainer, exposed for tests."""
    best_threshold = None
    best_f1 = -1.0
    for candidate in sorted(set(scores)):
        preds = [1 if s >= candidate else 0 for s in scores]
        f1 = compute_metrics(preds, golds).f1
        if f1 > best_f1:
            best_f1 = f1
            best_threshold = candidate
    return best_threshold
