"""Paraphrase-pair corpora: loading, balanced downsampling, stratified
splitting, and the JSONL interchange format.

Randomized operations use the MT19937 generator (Python's ``random.Random``)
seeded directly with the caller's seed, with draws made in a fixed documented
order, so a (corpus, parameters, seed) triple always yields the same output.
The downsampling procedure is: shuffle the positive records (corpus order) in
place, take the first n; same for negatives; concatenate positives-then-
negatives and shuffle the combined list once more. Splits shuffle per-label
index lists and take quota-sized prefixes as the held-out side.
"""

import csv
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ShortageError, ValidationError
from .ioutil import atomic_write_text

ORIGIN_ORIGINAL = "original"
AUG_PREFIX = "aug:"
SPLIT_TAGS = ("train", "dev", "test", "unsplit")
CORPUS_FORMATS = ("mrpc", "tpc", "quora", "interchange")

MRPC_HEADER = ("Quality", "#1 ID", "#2 ID", "#1 String", "#2 String")
QUORA_HEADER = ("id", "qid1", "qid2", "question1", "question2", "is_duplicate")
INTERCHANGE_KEYS = ("id", "sentence", "paraphrase", "quality", "origin")


def augmented_origin(code: str) -> str:
    return AUG_PREFIX + code


@dataclass(frozen=True)
class PairRecord:
    id: str
    sentence: str
    paraphrase: str
    quality: int
    origin: str = ORIGIN_ORIGINAL

    @property
    def intermediary_code(self) -> str | None:
        if self.origin.startswith(AUG_PREFIX):
            return self.origin[len(AUG_PREFIX) :]
        return None


def validate_record(record: PairRecord, where: str = "") -> PairRecord:
    ctx = f"{where}: " if where else ""
    if not record.id:
        raise ValidationError(f"{ctx}record id is empty")
    if record.quality not in (0, 1):
        raise ValidationError(f"{ctx}label {record.quality!r} outside {{0, 1}}")
    if not record.sentence.strip():
        raise ValidationError(f"{ctx}empty sentence in record {record.id!r}")
    if not record.paraphrase.strip():
        raise ValidationError(f"{ctx}empty paraphrase in record {record.id!r}")
    if record.origin != ORIGIN_ORIGINAL:
        if not record.origin.startswith(AUG_PREFIX) or not record.origin[len(AUG_PREFIX) :]:
            raise ValidationError(f"{ctx}bad origin {record.origin!r} in record {record.id!r}")
    return record


@dataclass
class Corpus:
    dataset_id: str
    records: list[PairRecord] = field(default_factory=list)
    split_tag: str = "unsplit"

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise ValidationError(f"unknown split tag {self.split_tag!r}")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate record ids in corpus: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> set[str]:
        return {r.id for r in self.records}

    def label_counts(self) -> dict[int, int]:
        counts = {0: 0, 1: 0}
        for r in self.records:
            counts[r.quality] += 1
        return counts


# ---------------------------------------------------------------------------
# Loading


def _load_mrpc(path: Path) -> list[PairRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file, expected an MRPC header line")
    header = tuple(h.strip() for h in lines[0].split("\t"))
    if header != MRPC_HEADER:
        raise ParseError(f"{path}: line 1: unexpected MRPC header {lines[0]!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ParseError(f"{path}: line {lineno}: expected 5 fields, got {len(fields)}")
        quality_raw, id1, id2, s1, s2 = fields
        quality = _parse_label(quality_raw, f"{path}: line {lineno}")
        records.append(
            validate_record(
                PairRecord(id=f"{id1.strip()}-{id2.strip()}", sentence=s1, paraphrase=s2, quality=quality),
                where=f"{path}: line {lineno}",
            )
        )
    return records


def _load_tpc(path: Path) -> list[PairRecord]:
    # Released-corpus layout: no header, three tab-separated columns
    # (sentence1, sentence2, label); see docs/data_formats.md.
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 fields, got {len(fields)}")
            s1, s2, label_raw = fields
            quality = _parse_label(label_raw, f"{path}: line {lineno}")
            records.append(
                validate_record(
                    PairRecord(id=f"tpc-{len(records)}", sentence=s1, paraphrase=s2, quality=quality),
                    where=f"{path}: line {lineno}",
                )
            )
    return records


def _load_quora(path: Path) -> list[PairRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a Quora CSV header") from None
        if tuple(h.strip() for h in header) != QUORA_HEADER:
            raise ParseError(f"{path}: unexpected Quora header {header!r}")
        for row_index, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 6:
                raise ParseError(
                    f"{path}: line {reader.line_num}: expected 6 CSV fields, got {len(row)}"
                )
            _, _, _, q1, q2, label_raw = row
            quality = _parse_label(label_raw, f"{path}: line {reader.line_num}")
            # Source ids are not guaranteed contiguous; synthesize stable ones.
            records.append(
                validate_record(
                    PairRecord(id=f"quora-{row_index}", sentence=q1, paraphrase=q2, quality=quality),
                    where=f"{path}: line {reader.line_num}",
                )
            )
    return records


def _load_interchange(path: Path) -> list[PairRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            missing = [k for k in INTERCHANGE_KEYS if k not in obj]
            if missing:
                raise ParseError(f"{path}: line {lineno}: missing keys {missing}")
            quality = obj["quality"]
            if quality not in (0, 1):
                raise ValidationError(f"{path}: line {lineno}: label {quality!r} outside {{0, 1}}")
            records.append(
                validate_record(
                    PairRecord(
                        id=str(obj["id"]),
                        sentence=obj["sentence"],
                        paraphrase=obj["paraphrase"],
                        quality=quality,
                        origin=obj["origin"],
                    ),
                    where=f"{path}: line {lineno}",
                )
            )
    return records


def _parse_label(raw: str, where: str) -> int:
    raw = raw.strip()
    if raw not in ("0", "1"):
        raise ValidationError(f"{where}: label {raw!r} outside {{0, 1}}")
    return int(raw)


def load_corpus(path, fmt: str, dataset_id: str | None = None, split_tag: str = "unsplit") -> Corpus:
    """Load a corpus file in one of the supported formats, preserving file
    order. Ids are taken from the file (mrpc) or synthesized (tpc, quora)."""
    path = Path(path)
    if fmt not in CORPUS_FORMATS:
        raise ValidationError(f"unknown corpus format {fmt!r}; expected one of {CORPUS_FORMATS}")
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    loader = {
        "mrpc": _load_mrpc,
        "tpc": _load_tpc,
        "quora": _load_quora,
        "interchange": _load_interchange,
    }[fmt]
    records = loader(path)
    if dataset_id is None:
        dataset_id = fmt if fmt != "interchange" else path.stem
    return Corpus(dataset_id=dataset_id, records=records, split_tag=split_tag)


# ---------------------------------------------------------------------------
# Sampling and splitting


def downsample_balanced(corpus: Corpus, n_per_class: int = 50, seed: int = 42) -> Corpus:
    """Draw exactly `n_per_class` records per label without replacement.
    Output order is the seeded shuffle of the 2n selected records."""
    if n_per_class < 1:
        raise ValidationError(f"n_per_class must be positive, got {n_per_class}")
    positives = [r for r in corpus.records if r.quality == 1]
    negatives = [r for r in corpus.records if r.quality == 0]
    if len(positives) < n_per_class:
        raise ShortageError(
            f"need {n_per_class} paraphrase records (quality=1), corpus has {len(positives)}"
        )
    if len(negatives) < n_per_class:
        raise ShortageError(
            f"need {n_per_class} non-paraphrase records (quality=0), corpus has {len(negatives)}"
        )
    rng = random.Random(seed)
    rng.shuffle(positives)
    rng.shuffle(negatives)
    selected = positives[:n_per_class] + negatives[:n_per_class]
    rng.shuffle(selected)
    return Corpus(dataset_id=corpus.dataset_id, records=selected, split_tag=corpus.split_tag)


def _stratified_heldout_ids(corpus: Corpus, fraction: float, seed: int) -> set[str]:
    """Pick floor(fraction * N) ids, stratified by label with largest-remainder
    rounding (ties: ascending label)."""
    n_total = len(corpus)
    target = math.floor(fraction * n_total)
    by_label: dict[int, list[PairRecord]] = {}
    for r in corpus.records:
        by_label.setdefault(r.quality, []).append(r)
    quotas = {}
    fracs = []
    for label in sorted(by_label):
        exact = fraction * len(by_label[label])
        quotas[label] = math.floor(exact)
        fracs.append((-(exact - quotas[label]), label))
    remainder = target - sum(quotas.values())
    for _, label in sorted(fracs):
        if remainder <= 0:
            break
        if quotas[label] < len(by_label[label]):
            quotas[label] += 1
            remainder -= 1
    rng = random.Random(seed)
    heldout: set[str] = set()
    for label in sorted(by_label):
        indexes = list(range(len(by_label[label])))
        rng.shuffle(indexes)
        for i in indexes[: quotas[label]]:
            heldout.add(by_label[label][i].id)
    return heldout


def _split(corpus: Corpus, fraction: float, seed: int, rest_tag: str, heldout_tag: str):
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must be in (0, 1), got {fraction}")
    if len(corpus) < 2:
        raise ValidationError(f"cannot split a corpus of {len(corpus)} records")
    heldout_ids = _stratified_heldout_ids(corpus, fraction, seed)
    rest = [r for r in corpus.records if r.id not in heldout_ids]
    heldout = [r for r in corpus.records if r.id in heldout_ids]
    return (
        Corpus(dataset_id=corpus.dataset_id, records=rest, split_tag=rest_tag),
        Corpus(dataset_id=corpus.dataset_id, records=heldout, split_tag=heldout_tag),
    )


def split_train_dev(corpus: Corpus, dev_fraction: float = 0.2, seed: int = 42) -> tuple[Corpus, Corpus]:
    """Stratified train/dev partition; |dev| = floor(dev_fraction * |corpus|).
    Both sides preserve the input's relative record order."""
    return _split(corpus, dev_fraction, seed, "train", "dev")


def split_test(corpus: Corpus, test_fraction: float = 0.2, seed: int = 42) -> tuple[Corpus, Corpus]:
    """Stratified remainder/test partition, same mechanics as split_train_dev.
    The remainder keeps the input's split tag."""
    return _split(corpus, test_fraction, seed, corpus.split_tag, "test")


def concat_corpora(first: Corpus, *rest: Corpus, split_tag: str | None = None) -> Corpus:
    records = list(first.records)
    for other in rest:
        records.extend(other.records)
    return Corpus(
        dataset_id=first.dataset_id,
        records=records,
        split_tag=split_tag if split_tag is not None else first.split_tag,
    )


# ---------------------------------------------------------------------------
# Writing


def record_to_json(record: PairRecord) -> str:
    return json.dumps(
        {
            "id": record.id,
            "sentence": record.sentence,
            "paraphrase": record.paraphrase,
            "quality": record.quality,
            "origin": record.origin,
        },
        ensure_ascii=False,
    )


def write_corpus(corpus: Corpus, path, fmt: str = "interchange") -> Path:
    """Serialize to the interchange format (one JSON object per line).
    Byte-deterministic for a fixed corpus; written atomically."""
    if fmt != "interchange":
        raise ValidationError(f"write_corpus supports only the interchange format, got {fmt!r}")
    text = "".join(record_to_json(r) + "\n" for r in corpus.records)
    return atomic_write_text(path, text)
