import json
import sys
from pathlib import Path

import pytest

from betkit.corpus import downsample_balanced, load_corpus, write_corpus
from betkit.errors import TrainerError, ValidationError
from betkit.harness import (
    DATASETS,
    LANGUAGES,
    MODELS,
    ExperimentCell,
    TrainerConfig,
    TrainerManifest,
    builtin_overlap_trainer,
    config_for_model,
    invoke_trainer,
    jaccard,
    plan_matrix,
    run_matrix,
    select_overlap_threshold,
)
from betkit.metrics import EvalResult, FailedCell, load_results_store
from helpers import make_corpus, make_dataset_dir

STUB_ADAPTER = """\
import json, sys
manifest = json.load(open(sys.argv[1]))
record = {
    "model": manifest["cell"]["model"],
    "dataset": manifest["cell"]["dataset"],
    "language": manifest["cell"]["language"],
    "accuracy": 0.75, "precision": 0.7, "recall": 0.8, "f1": 0.7466666666666667,
    "n_test": 40, "timestamp": "2020-01-01T00:00:00+00:00",
}
__EXTRA__
with open(manifest["output"], "w") as fh:
    json.dump(record, fh)
"""


def write_stub_adapter(tmp_path, extra: str = "") -> list:
    script = tmp_path / "stub_adapter.py"
    script.write_text(STUB_ADAPTER.replace("__EXTRA__", extra), encoding="utf-8")
    return [sys.executable, str(script)]


def make_manifest(tmp_path, cell=None, dataset_dir=None) -> TrainerManifest:
    cell = cell or ExperimentCell("overlap", "synthetic", "base")
    dataset_dir = dataset_dir or make_dataset_dir(tmp_path / "data")
    return TrainerManifest(
        cell=cell,
        train_path=dataset_dir / "train.jsonl",
        dev_path=dataset_dir / "dev.jsonl",
        test_path=dataset_dir / "test.jsonl",
        config=TrainerConfig(),
        output_path=tmp_path / "metrics.json",
    )


# ---------------------------------------------------------------------------
# plan_matrix


def test_full_grid_has_144_cells():
    conditions = ("base",) + LANGUAGES + ("all",)
    cells = plan_matrix(MODELS, DATASETS, conditions)
    assert len(cells) == 144
    # Oracle: brute-force triple loop.
    expected = []
    for d in DATASETS:
        for m in MODELS:
            for c in conditions:
                expected.append((m, d, c))
    assert [(c.model, c.dataset, c.condition) for c in cells] == expected
    assert len({c.key() for c in cells}) == 144


def test_single_cell_plan():
    cells = plan_matrix(["bert"], ["mrpc"], ["base"])
    assert cells == [ExperimentCell("bert", "mrpc", "base")]


def test_plan_rejects_bad_identifiers():
    with pytest.raises(ValidationError, match="non-empty"):
        plan_matrix([], ["mrpc"], ["base"])
    with pytest.raises(ValidationError, match="duplicates"):
        plan_matrix(["bert", "bert"], ["mrpc"], ["base"])
    with pytest.raises(ValidationError, match="bad identifier"):
        plan_matrix(["a model"], ["mrpc"], ["base"])
    with pytest.raises(ValidationError, match="unknown model"):
        plan_matrix(["gru"], ["mrpc"], ["base"], known_models=MODELS)


# ---------------------------------------------------------------------------
# trainer config


def test_xlnet_batch_size_override():
    assert config_for_model("bert").batch_size == 32
    assert config_for_model("xlnet").batch_size == 16
    custom = config_for_model("bert", overrides={"bert": {"epochs": 5}})
    assert custom.epochs == 5 and custom.batch_size == 32


def test_trainer_config_defaults():
    config = TrainerConfig()
    assert (config.epochs, config.batch_size, config.learning_rate,
            config.max_sequence_length, config.seed) == (3, 32, 3e-5, 128, 42)


# ---------------------------------------------------------------------------
# invoke_trainer


def test_stub_adapter_roundtrips(tmp_path):
    manifest = make_manifest(tmp_path)
    manifest = TrainerManifest(
        cell=ExperimentCell("bert", "synthetic", "base"),
        train_path=manifest.train_path,
        dev_path=manifest.dev_path,
        test_path=manifest.test_path,
        config=TrainerConfig(),
        output_path=manifest.output_path,
    )
    record = invoke_trainer(write_stub_adapter(tmp_path), manifest, tmp_path / "run")
    assert isinstance(record, EvalResult)
    assert record.cell_key() == ("bert", "synthetic", "base")
    assert record.accuracy == 0.75


def test_adapter_malformed_output_fails_cell(tmp_path):
    manifest = make_manifest(tmp_path, cell=ExperimentCell("bert", "synthetic", "base"))
    adapter = write_stub_adapter(tmp_path, extra="record = {'oops': True}")
    with pytest.raises(TrainerError, match="missing keys"):
        invoke_trainer(adapter, manifest, tmp_path / "run")


def test_adapter_identity_mismatch_fails_cell(tmp_path):
    manifest = make_manifest(tmp_path, cell=ExperimentCell("bert", "synthetic", "base"))
    adapter = write_stub_adapter(tmp_path, extra="record['model'] = 'other'")
    with pytest.raises(TrainerError, match="identifies cell"):
        invoke_trainer(adapter, manifest, tmp_path / "run")


def test_adapter_nonzero_exit_fails_cell(tmp_path):
    manifest = make_manifest(tmp_path, cell=ExperimentCell("bert", "synthetic", "base"))
    adapter = write_stub_adapter(tmp_path, extra="sys.exit(3)")
    with pytest.raises(TrainerError, match="exited with 3"):
        invoke_trainer(adapter, manifest, tmp_path / "run")


def test_adapter_sees_exactly_the_downsampled_ids(tmp_path):
    corpus = downsample_balanced(make_corpus(300, seed=1), n_per_class=50, seed=42)
    dataset_dir = tmp_path / "data" / "synthetic"
    write_corpus(corpus, dataset_dir / "train.jsonl")
    write_corpus(corpus, dataset_dir / "dev.jsonl")
    write_corpus(corpus, dataset_dir / "test.jsonl")
    ids_file = tmp_path / "seen_ids.json"
    adapter = write_stub_adapter(
        tmp_path,
        extra=(
            "ids = [json.loads(l)['id'] for l in open(manifest['files']['train'])]\n"
            f"json.dump(ids, open({str(ids_file)!r}, 'w'))"
        ),
    )
    manifest = TrainerManifest(
        cell=ExperimentCell("bert", "synthetic", "base"),
        train_path=dataset_dir / "train.jsonl",
        dev_path=dataset_dir / "dev.jsonl",
        test_path=dataset_dir / "test.jsonl",
        config=TrainerConfig(),
        output_path=tmp_path / "metrics.json",
    )
    invoke_trainer(adapter, manifest, tmp_path / "run")
    seen = set(json.loads(ids_file.read_text(encoding="utf-8")))
    assert seen == corpus.ids()
    assert len(seen) == 100


def test_adapter_timeout_fails_cell(tmp_path):
    manifest = make_manifest(tmp_path, cell=ExperimentCell("bert", "synthetic", "base"))
    adapter = write_stub_adapter(tmp_path, extra="import time\ntime.sleep(30)")
    with pytest.raises(TrainerError, match="timed out"):
        invoke_trainer(adapter, manifest, tmp_path / "run", timeout_s=1.0)


def test_manifest_requires_existing_files(tmp_path):
    manifest = TrainerManifest(
        cell=ExperimentCell("bert", "synthetic", "base"),
        train_path=tmp_path / "absent.jsonl",
        dev_path=tmp_path / "absent.jsonl",
        test_path=tmp_path / "absent.jsonl",
        config=TrainerConfig(),
        output_path=tmp_path / "metrics.json",
    )
    with pytest.raises(ValidationError, match="does not exist"):
        manifest.write(tmp_path / "manifest.json")


def test_manifest_schema(tmp_path):
    dataset_dir = make_dataset_dir(tmp_path / "data")
    manifest = make_manifest(tmp_path, dataset_dir=dataset_dir)
    path = manifest.write(tmp_path / "manifest.json")
    obj = json.loads(path.read_text(encoding="utf-8"))
    assert set(obj) == {"cell", "files", "config", "output"}
    assert set(obj["cell"]) == {"model", "dataset", "language"}
    assert set(obj["files"]) == {"train", "dev", "test"}
    assert set(obj["config"]) == {"epochs", "batch_size", "learning_rate",
                                  "max_sequence_length", "seed"}


# ---------------------------------------------------------------------------
# run_matrix


class CountingTrainer:
    def __init__(self):
        self.invocations = 0

    def __call__(self, manifest_path):
        self.invocations += 1
        return builtin_overlap_trainer(manifest_path)


def test_run_matrix_store_line_count_matches_plan(tmp_path):
    data_root = tmp_path / "data"
    make_dataset_dir(data_root, languages=("zh", "es"))
    cells = plan_matrix(["overlap"], ["synthetic"], ["base", "zh", "es", "all"])
    store = tmp_path / "results.jsonl"
    trainer = CountingTrainer()
    run_matrix(cells, trainer, store, data_root)
    assert trainer.invocations == 4
    # Oracle: recount the store lines.
    lines = store.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == len(cells)
    rows = load_results_store(store)
    assert {r.cell_key() for r in rows} == {c.key() for c in cells}


def test_run_matrix_is_idempotent(tmp_path):
    data_root = tmp_path / "data"
    make_dataset_dir(data_root)
    cells = plan_matrix(["overlap"], ["synthetic"], ["base"])
    store = tmp_path / "results.jsonl"
    trainer = CountingTrainer()
    run_matrix(cells, trainer, store, data_root)
    assert trainer.invocations == 1
    run_matrix(cells, trainer, store, data_root)
    assert trainer.invocations == 1  # zero new invocations


def test_run_matrix_resumes_partial_store(tmp_path):
    data_root = tmp_path / "data"
    make_dataset_dir(data_root, languages=("zh",))
    cells = plan_matrix(["overlap"], ["synthetic"], ["base", "zh"])
    store = tmp_path / "results.jsonl"
    trainer = CountingTrainer()
    run_matrix(cells[:1], trainer, store, data_root)
    assert trainer.invocations == 1
    run_matrix(cells, trainer, store, data_root)
    assert trainer.invocations == 2  # exactly one more for the missing cell
    assert len(load_results_store(store)) == 2


def test_run_matrix_records_failures(tmp_path):
    data_root = tmp_path / "data"
    make_dataset_dir(data_root)
    cells = plan_matrix(["overlap"], ["synthetic"], ["base", "missingcond"])
    store = tmp_path / "results.jsonl"
    run_matrix(cells, builtin_overlap_trainer, store, data_root)
    rows = load_results_store(store)
    assert len(rows) == 2
    failed = [r for r in rows if isinstance(r, FailedCell)]
    assert len(failed) == 1
    assert failed[0].language == "missingcond"
    assert "missing corpus file" in failed[0].error


def test_run_matrix_materializes_language_condition(tmp_path):
    data_root = tmp_path / "data"
    dataset_dir = make_dataset_dir(data_root, languages=("zh",))
    cells = plan_matrix(["overlap"], ["synthetic"], ["zh"])
    run_matrix(cells, builtin_overlap_trainer, tmp_path / "results.jsonl", data_root)
    combined = load_corpus(dataset_dir / "train_with_zh.jsonl", "interchange",
                           dataset_id="synthetic")
    train = load_corpus(dataset_dir / "train.jsonl", "interchange", dataset_id="synthetic")
    aug = load_corpus(dataset_dir / "zh.jsonl", "interchange", dataset_id="synthetic")
    assert len(combined) == len(train) + len(aug)


# ---------------------------------------------------------------------------
# built-in overlap trainer


def test_jaccard_extremes():
    assert jaccard("a b c", "a b c") == 1.0
    assert jaccard("a b c", "x y z") == 0.0
    assert jaccard("A b", "a B") == 1.0  # lowercased tokens


def test_threshold_matches_bruteforce_oracle():
    corpus = make_corpus(50, seed=3)
    scores = [jaccard(r.sentence, r.paraphrase) for r in corpus.records]
    golds = [r.quality for r in corpus.records]

    # Oracle: exhaustive scan with an independent F1 computation.
    def oracle_f1(threshold):
        tp = sum(1 for s, g in zip(scores, golds) if s >= threshold and g == 1)
        fp = sum(1 for s, g in zip(scores, golds) if s >= threshold and g == 0)
        fn = sum(1 for s, g in zip(scores, golds) if s < threshold and g == 1)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return 2 * p * r / (p + r) if p + r else 0.0

    best = None
    best_f1 = -1.0
    for candidate in sorted(set(scores)):
        f1 = oracle_f1(candidate)
        if f1 > best_f1:
            best_f1 = f1
            best = candidate
    assert select_overlap_threshold(scores, golds) == best


def test_builtin_trainer_end_to_end(tmp_path):
    manifest = make_manifest(tmp_path)
    manifest_path = manifest.write(tmp_path / "manifest.json")
    record = builtin_overlap_trainer(str(manifest_path))
    assert record["model"] == "overlap"
    assert 0.0 <= record["f1"] <= 1.0
    assert json.loads(Path(manifest.output_path).read_text(encoding="utf-8")) == record
    again = builtin_overlap_trainer(str(manifest_path))
    assert {k: v for k, v in again.items() if k != "timestamp"} == {
        k: v for k, v in record.items() if k != "timestamp"
    }


def test_builtin_trainer_rejects_empty_split(tmp_path):
    dataset_dir = make_dataset_dir(tmp_path / "data")
    (dataset_dir / "dev.jsonl").write_text("", encoding="utf-8")
    manifest = make_manifest(tmp_path, dataset_dir=dataset_dir)
    manifest_path = manifest.write(tmp_path / "manifest.json")
    with pytest.raises(TrainerError, match="dev split"):
        builtin_overlap_trainer(str(manifest_path))
