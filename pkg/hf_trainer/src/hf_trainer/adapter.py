"""Fine-tuning trainer adapter.

Invoked as ``bet-hf-trainer <manifest-path>``. The manifest (JSON) names the
train/dev/test interchange files, the hyperparameters, and the output path;
this adapter fine-tunes a sequence-pair classifier, evaluates on the test
split, and writes a results-store record at the output path. Predictions are
saved to ``predictions.jsonl`` and per-epoch dev metrics to
``training_log.json`` next to the record. Exit 0 on success.

The adapter reads only the files named in the manifest and talks to the
orchestrator exclusively through those files; it does not import the
orchestrating package.
"""

import argparse
import datetime
import json
import random
import sys
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, TensorDataset

# Base checkpoints per model id; ids that name an existing directory are
# loaded as local checkpoints instead (offline runs, smoke fixtures).
CHECKPOINTS = {
    "bert": "bert-base-uncased",
    "roberta": "roberta-base",
    "albert": "albert-base-v2",
    "xlnet": "xlnet-base-cased",
}

MANIFEST_KEYS = ("cell", "files", "config", "output")
CONFIG_KEYS = ("epochs", "batch_size", "learning_rate", "max_sequence_length", "seed")


class AdapterError(RuntimeError):
    pass


def resolve_checkpoint(model_id: str) -> str:
    if Path(model_id).is_dir():
        return model_id
    return CHECKPOINTS.get(model_id, model_id)


def set_seed(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if torch.cuda.is_available():
        torch.cuda.manual_seed_all(seed)


def load_manifest(path: str) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AdapterError(f"cannot read manifest {path}: {exc}") from exc
    missing = [k for k in MANIFEST_KEYS if k not in manifest]
    if missing:
        raise AdapterError(f"manifest {path} missing keys {missing}")
    bad = [k for k in CONFIG_KEYS if k not in manifest["config"]]
    if bad:
        raise AdapterError(f"manifest config missing keys {bad}")
    return manifest


def load_pairs(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for key in ("id", "sentence", "paraphrase", "quality"):
                if key not in obj:
                    raise AdapterError(f"{path}: line {lineno}: missing {key}")
            if obj["quality"] not in (0, 1):
                raise AdapterError(f"{path}: line {lineno}: label outside {{0, 1}}")
            rows.append(obj)
    if not rows:
        raise AdapterError(f"{path}: empty split")
    return rows


def encode(tokenizer, rows: list[dict], max_length: int) -> TensorDataset:
    batch = tokenizer(
        [r["sentence"] for r in rows],
        [r["paraphrase"] for r in rows],
        truncation=True,
        max_length=max_length,
        padding="max_length",
        return_tensors="pt",
    )
    labels = torch.tensor([r["quality"] for r in rows], dtype=torch.long)
    tensors = [batch["input_ids"], batch["attention_mask"]]
    token_type_ids = batch.get("token_type_ids")
    has_token_types = token_type_ids is not None
    if has_token_types:
        tensors.append(token_type_ids)
    tensors.append(labels)
    dataset = TensorDataset(*tensors)
    dataset.has_token_types = has_token_types
    return dataset


def _batch_inputs(batch, has_token_types: bool, device) -> tuple[dict, torch.Tensor]:
    inputs = {"input_ids": batch[0].to(device), "attention_mask": batch[1].to(device)}
    if has_token_types:
        inputs["token_type_ids"] = batch[2].to(device)
    return inputs, batch[-1].to(device)


@torch.no_grad()
def predict(model, dataset: TensorDataset, batch_size: int, device) -> list[int]:
    model.eval()
    preds = []
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    for batch in loader:
        inputs, _ = _batch_inputs(batch, dataset.has_token_types, device)
        logits = model(**inputs).logits
        preds.extend(int(i) for i in logits.argmax(dim=-1).cpu())
    return preds


def classification_metrics(predictions: list[int], golds: list[int]) -> dict:
    tp = sum(1 for p, g in zip(predictions, golds) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(predictions, golds) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(predictions, golds) if p == 0 and g == 1)
    tn = sum(1 for p, g in zip(predictions, golds) if p == 0 and g == 0)
    n = len(golds)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": (tp + tn) / n,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def train_and_evaluate(manifest_path: str) -> dict:
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    manifest = load_manifest(manifest_path)
    cell = manifest["cell"]
    config = manifest["config"]
    set_seed(int(config["seed"]))

    checkpoint = resolve_checkpoint(cell["model"])
    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForSequenceClassification.from_pretrained(checkpoint, num_labels=2)
    except Exception as exc:
        raise AdapterError(f"cannot load checkpoint {checkpoint!r}: {exc}") from exc
    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    model.to(device)

    splits = {name: load_pairs(manifest["files"][name]) for name in ("train", "dev", "test")}
    max_length = int(config["max_sequence_length"])
    batch_size = int(config["batch_size"])
    datasets = {name: encode(tokenizer, rows, max_length) for name, rows in splits.items()}

    generator = torch.Generator().manual_seed(int(config["seed"]))
    train_loader = DataLoader(
        datasets["train"], batch_size=batch_size, shuffle=True, generator=generator
    )
    optimizer = torch.optim.AdamW(model.parameters(), lr=float(config["learning_rate"]))

    # Dev is monitoring only: fixed epoch count, no early stopping, final
    # checkpoint is evaluated.
    epoch_log = []
    for epoch in range(int(config["epochs"])):
        model.train()
        total_loss = 0.0
        batches = 0
        for batch in train_loader:
            inputs, labels = _batch_inputs(batch, datasets["train"].has_token_types, device)
            optimizer.zero_grad()
            out = model(**inputs, labels=labels)
            out.loss.backward()
            optimizer.step()
            total_loss += out.loss.item()
            batches += 1
        dev_preds = predict(model, datasets["dev"], batch_size, device)
        dev_metrics = classification_metrics(dev_preds, [r["quality"] for r in splits["dev"]])
        epoch_log.append(
            {
                "epoch": epoch + 1,
                "train_loss": total_loss / max(batches, 1),
                "train_batches": batches,
                "dev_accuracy": dev_metrics["accuracy"],
                "dev_f1": dev_metrics["f1"],
            }
        )
        print(
            f"epoch {epoch + 1}/{config['epochs']}: "
            f"loss={epoch_log[-1]['train_loss']:.4f} dev_f1={dev_metrics['f1']:.3f}",
            file=sys.stderr,
        )

    test_golds = [r["quality"] for r in splits["test"]]
    test_preds = predict(model, datasets["test"], batch_size, device)
    metrics = classification_metrics(test_preds, test_golds)

    output = Path(manifest["output"])
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output.parent / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for row, pred in zip(splits["test"], test_preds):
            fh.write(json.dumps({"id": row["id"], "gold": row["quality"],
                                 "prediction": pred}) + "\n")
    with open(output.parent / "training_log.json", "w", encoding="utf-8") as fh:
        json.dump({"config": config, "epochs": epoch_log, "device": str(device)}, fh, indent=2)

    record = {
        "model": cell["model"],
        "dataset": cell["dataset"],
        "language": cell["language"],
        **metrics,
        "n_test": len(test_golds),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(output, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return record


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("manifest", help="manifest JSON path")
    args = parser.parse_args(argv)
    try:
        record = train_and_evaluate(args.manifest)
    except AdapterError as exc:
        print(f"bet-hf-trainer: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(record))
    return 0


if __name__ == "__main__":
    sys.exit(main())
