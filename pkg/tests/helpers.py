"""Shared builders used across the test modules."""

import random
from pathlib import Path

from betkit.augment import augment_corpus, write_augmentation
from betkit.corpus import Corpus, PairRecord, split_test, split_train_dev, write_corpus
from betkit.translate import (
    BackendPolicy,
    CachingTranslator,
    MockConfig,
    MockTranslationBackend,
    TranslationBackend,
)

WORDS = [
    "red", "blue", "green", "cat", "dog", "sun", "moon", "sky", "tree",
    "rock", "river", "cloud", "road", "house", "bird", "fish", "wind",
    "rain", "light", "stone",
]


def make_corpus(n: int, seed: int = 0, dataset_id: str = "synthetic",
                split_tag: str = "unsplit", positive_fraction: float = 0.5,
                id_prefix: str = "r") -> Corpus:
    """Deterministic corpus where positives share tokens across the pair and
    negatives do not, so overlap-based classifiers have signal."""
    rng = random.Random(seed)
    records = []
    n_positive = round(n * positive_fraction)
    for i in range(n):
        quality = 1 if i < n_positive else 0
        sentence = " ".join(rng.choice(WORDS) for _ in range(6))
        if quality:
            paraphrase = sentence + " " + rng.choice(WORDS)
        else:
            paraphrase = " ".join(rng.choice(WORDS) for _ in range(6)) + " spare"
        records.append(
            PairRecord(id=f"{id_prefix}{i}", sentence=sentence, paraphrase=paraphrase,
                       quality=quality)
        )
    return Corpus(dataset_id=dataset_id, records=records, split_tag=split_tag)


def make_dataset_dir(root, dataset_id: str = "synthetic", n: int = 200,
                     languages: tuple[str, ...] = (), substitution_rate: float = 1.0,
                     seed: int = 0) -> Path:
    """Materialize a full dataset directory (train/dev/test splits plus
    optional mock-augmented corpora) under `root`."""
    full = make_corpus(n, seed=seed, dataset_id=dataset_id)
    rest, test = split_test(full, 0.2, seed=42)
    train, dev = split_train_dev(rest, 0.2, seed=42)
    dataset_dir = Path(root) / dataset_id
    write_corpus(train, dataset_dir / "train.jsonl")
    write_corpus(dev, dataset_dir / "dev.jsonl")
    write_corpus(test, dataset_dir / "test.jsonl")
    if languages:
        lexicon = {w: w + "x" for w in WORDS + ["spare"]}
        backend = MockTranslationBackend(
            MockConfig(substitution_rate=substitution_rate, seed=7, lexicon=lexicon)
        )
        translator = CachingTranslator(
            backend, BackendPolicy(max_requests_per_second=1e9), sleep=lambda s: None
        )
        result = augment_corpus(train, list(languages), translator)
        write_augmentation(result, root)
    return dataset_dir


class CountingBackend(TranslationBackend):
    """Wraps another backend and counts invocations."""

    def __init__(self, inner: TranslationBackend):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.calls = 0
        self.seen_texts: list[str] = []

    def translate(self, text, source_lang, target_lang):
        self.calls += 1
        self.seen_texts.append(text)
        return self.inner.translate(text, source_lang, target_lang)

    def supports(self, source_lang, target_lang):
        return self.inner.supports(source_lang, target_lang)


class FlakyBackend(TranslationBackend):
    """Fails `failures` times per distinct text, then succeeds."""

    backend_id = "flaky-v1"

    def __init__(self, failures: int):
        self.failures = failures
        self.calls = 0
        self._seen: dict[str, int] = {}

    def translate(self, text, source_lang, target_lang):
        self.calls += 1
        count = self._seen.get(text, 0)
        self._seen[text] = count + 1
        if count < self.failures:
            raise ConnectionError(f"transient failure #{count + 1}")
        return f"[{target_lang}] {text}"


class EchoBackend(TranslationBackend):
    """Zero-latency fake returning a tagged copy of the input."""

    backend_id = "echo-v1"

    def __init__(self):
        self.calls = 0

    def translate(self, text, source_lang, target_lang):
        self.calls += 1
        return f"[{target_lang}] {text}"
