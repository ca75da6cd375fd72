"""Backtranslation augmentation: round-trip the paraphrase side of every
train pair through each intermediary language, drop candidates that are an
exact match of the original paraphrase, and assemble per-language plus
combined corpora with provenance.

Only the paraphrase text is ever sent to the backend; the sentence side is
copied through byte-identical, and every augmented record inherits its source
record's label. Exact-match comparison happens after normalization (Unicode
NFC, trim, internal whitespace runs collapsed to single spaces), since
translation providers routinely perturb whitespace.
"""

import datetime as _dt
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .corpus import Corpus, PairRecord, augmented_origin, write_corpus
from .errors import BackendError, ValidationError
from .ioutil import atomic_write_text
from .translate import BackendPolicy, CachingTranslator, TranslationRequest

_WS_RUN = re.compile(r"\s+")


def normalize_for_match(text: str) -> str:
    return _WS_RUN.sub(" ", unicodedata.normalize("NFC", text).strip())


def filter_exact_match(original: str, candidate: str) -> bool:
    """True = keep the candidate, False = drop it as an exact match of the
    original paraphrase under the documented normalization."""
    if not original or not candidate:
        raise ValidationError("filter_exact_match requires non-empty texts")
    return normalize_for_match(candidate) != normalize_for_match(original)


@dataclass
class LanguageCounts:
    generated: int = 0
    filtered_exact: int = 0

    @property
    def kept(self) -> int:
        return self.generated - self.filtered_exact


@dataclass
class AugmentationManifest:
    source_dataset_id: str
    source_lang: str
    languages: list[str]
    backend_id: str
    created_at: str
    per_language: dict[str, LanguageCounts] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "source_dataset_id": self.source_dataset_id,
                "source_lang": self.source_lang,
                "languages": self.languages,
                "backend_id": self.backend_id,
                "created_at": self.created_at,
                "per_language": {
                    code: {
                        "generated": c.generated,
                        "filtered_exact": c.filtered_exact,
                        "kept": c.kept,
                    }
                    for code, c in self.per_language.items()
                },
                "failures": self.failures,
            },
            ensure_ascii=False,
            indent=2,
        )


class AugmentationResult(NamedTuple):
    per_language: dict[str, Corpus]
    combined_all: Corpus
    manifest: AugmentationManifest


def backtranslate_pair(pair: PairRecord, pivot: str, translator: CachingTranslator,
                       source_lang: str = "en") -> str:
    """Round-trip the pair's paraphrase through `pivot`. The sentence side is
    never sent anywhere."""
    if pivot == source_lang:
        raise ValidationError(f"pivot language equals source language {source_lang!r}")
    try:
        forward = translator.translate(TranslationRequest(pair.paraphrase, source_lang, pivot))
        return translator.translate(TranslationRequest(forward, pivot, source_lang))
    except BackendError as exc:
        raise BackendError(f"pair {pair.id!r} via pivot {pivot!r}: {exc}") from exc


def augment_corpus(train: Corpus, languages: list[str], translator: CachingTranslator,
                   policy: BackendPolicy | None = None,
                   source_lang: str = "en") -> AugmentationResult:
    """Backtranslate every train pair through every language, filter exact
    matches, and return per-language corpora (augmented records only), the
    combined corpus (originals followed by every kept record, in language
    order then source order), and the counting manifest."""
    if train.split_tag != "train":
        raise ValidationError(
            f"augmentation runs on the train split only, got split_tag={train.split_tag!r}"
        )
    if not languages:
        raise ValidationError("languages list is empty")
    if len(set(languages)) != len(languages):
        raise ValidationError("languages list contains duplicates")
    if source_lang in languages:
        raise ValidationError(f"source language {source_lang!r} cannot be a pivot")
    policy = policy or translator.policy

    manifest = AugmentationManifest(
        source_dataset_id=train.dataset_id,
        source_lang=source_lang,
        languages=list(languages),
        backend_id=translator.backend.backend_id,
        created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    per_language: dict[str, Corpus] = {}
    combined_records: list[PairRecord] = list(train.records)

    for code in languages:
        counts = LanguageCounts()
        manifest.per_language[code] = counts
        forward_results = translator.translate_batch(
            [TranslationRequest(r.paraphrase, source_lang, code) for r in train.records],
            policy,
        )
        backward_requests: list[tuple[int, TranslationRequest]] = []
        for i, res in enumerate(forward_results):
            if res.ok:
                backward_requests.append(
                    (i, TranslationRequest(res.text, code, source_lang))
                )
            else:
                _record_failure(manifest, policy, train.records[i], code, res.error)
        backward_results = translator.translate_batch([r for _, r in backward_requests], policy)

        kept_records = []
        for (i, _), res in zip(backward_requests, backward_results):
            source = train.records[i]
            if not res.ok:
                _record_failure(manifest, policy, source, code, res.error)
                continue
            if not res.text.strip():
                _record_failure(manifest, policy, source, code, "empty candidate")
                continue
            counts.generated += 1
            if not filter_exact_match(source.paraphrase, res.text):
                counts.filtered_exact += 1
                continue
            kept_records.append(
                PairRecord(
                    id=f"{source.id}#{code}",
                    sentence=source.sentence,
                    paraphrase=res.text,
                    quality=source.quality,
                    origin=augmented_origin(code),
                )
            )
        per_language[code] = Corpus(
            dataset_id=train.dataset_id, records=kept_records, split_tag="train"
        )
        combined_records.extend(kept_records)

    combined_all = Corpus(
        dataset_id=train.dataset_id, records=combined_records, split_tag="train"
    )
    return AugmentationResult(per_language, combined_all, manifest)


def _record_failure(manifest: AugmentationManifest, policy: BackendPolicy,
                    pair: PairRecord, code: str, error: str | None) -> None:
    message = f"pair {pair.id!r} via pivot {code!r}: {error}"
    if not policy.allow_partial:
        raise BackendError(message)
    manifest.failures.append({"pair_id": pair.id, "language": code, "error": str(error)})


def write_augmentation(result: AugmentationResult, out_dir) -> Path:
    """Write ``<out>/<dataset>/<code>.jsonl``, ``<out>/<dataset>/all.jsonl``,
    and ``<out>/<dataset>/manifest.json``. Returns the dataset directory."""
    dataset_dir = Path(out_dir) / result.combined_all.dataset_id
    for code, corpus in result.per_language.items():
        write_corpus(corpus, dataset_dir / f"{code}.jsonl")
    write_corpus(result.combined_all, dataset_dir / "all.jsonl")
    atomic_write_text(dataset_dir / "manifest.json", result.manifest.to_json() + "\n")
    return dataset_dir
