#!/usr/bin/env python3
"""End-to-end offline demo: build a synthetic paraphrase dataset, downsample
it, augment the train split through mock pivot languages, run the built-in
overlap trainer over the condition grid, and emit gain reports.

Everything is deterministic and needs no network. Outputs land under --out.

Usage:
    python3 scripts/offline_demo.py --out out/demo
"""

import argparse
import random
import sys
from pathlib import Path

from betkit.augment import augment_corpus, write_augmentation
from betkit.cli import main as betkit_main
from betkit.corpus import (
    Corpus,
    PairRecord,
    downsample_balanced,
    split_test,
    split_train_dev,
    write_corpus,
)
from betkit.translate import BackendPolicy, CachingTranslator, MockConfig, MockTranslationBackend

VOCAB = [
    "market", "rain", "bridge", "signal", "garden", "engine", "window",
    "harbor", "paper", "stone", "river", "light", "summer", "road", "tower",
    "big", "old", "new", "good", "house", "city", "world", "fast", "plan",
]


def synthetic_corpus(n: int, seed: int) -> Corpus:
    rng = random.Random(seed)
    records = []
    for i in range(n):
        quality = i % 2
        base = [rng.choice(VOCAB) for _ in range(7)]
        sentence = " ".join(base)
        if quality:
            shuffled = base[:]
            rng.shuffle(shuffled)
            paraphrase = " ".join(shuffled[:6]) + f" {i}"
        else:
            paraphrase = " ".join(rng.choice(VOCAB) for _ in range(7))
        records.append(
            PairRecord(id=f"demo-{i}", sentence=sentence, paraphrase=paraphrase, quality=quality)
        )
    return Corpus("demo", records)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/demo")
    parser.add_argument("--pairs", type=int, default=600)
    parser.add_argument("--per-class", type=int, default=50)
    parser.add_argument("--languages", default="zh,es,ar")
    parser.add_argument("--substitution-rate", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    out = Path(args.out)
    data_root = out / "data"
    languages = [code.strip() for code in args.languages.split(",") if code.strip()]

    full = synthetic_corpus(args.pairs, args.seed)
    rest, test = split_test(full, 0.2, seed=args.seed)
    small = downsample_balanced(rest, n_per_class=args.per_class, seed=args.seed)
    train, dev = split_train_dev(small, 0.2, seed=args.seed)
    dataset_dir = data_root / "demo"
    write_corpus(train, dataset_dir / "train.jsonl")
    write_corpus(dev, dataset_dir / "dev.jsonl")
    write_corpus(test, dataset_dir / "test.jsonl")
    print(f"splits: train={len(train)} dev={len(dev)} test={len(test)}")

    backend = MockTranslationBackend(
        MockConfig(substitution_rate=args.substitution_rate, seed=args.seed)
    )
    translator = CachingTranslator(
        backend,
        BackendPolicy(max_requests_per_second=1e6),
        cache_dir=out / "cache",
    )
    result = augment_corpus(train, languages, translator)
    write_augmentation(result, data_root)
    for code in languages:
        counts = result.manifest.per_language[code]
        print(f"aug {code}: generated={counts.generated} kept={counts.kept}")

    store = out / "results.jsonl"
    conditions = ",".join(["base", *languages, "all"])
    code = betkit_main([
        "run", "--data-root", str(data_root), "--models", "overlap",
        "--datasets", "demo", "--conditions", conditions, "--store", str(store),
    ])
    if code != 0:
        return code
    return betkit_main([
        "analyze", "--store", str(store), "--axis", "language", "--out", str(out / "reports"),
    ])


if __name__ == "__main__":
    sys.exit(main())
