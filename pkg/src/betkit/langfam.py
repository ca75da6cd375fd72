"""Language-family database: parse, cluster into a family tree, pick one
representative per family by native-speaker count, keep the top k.

The database is a versioned fixture shipped with the package (curated by hand
from public language infoboxes); nothing is scraped at runtime. File format:
UTF-8 TSV with header ``code<TAB>name<TAB>family_path<TAB>l1_speakers_millions``,
family path elements joined by ``>``, comment lines starting with ``#``.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError

DB_HEADER = ("code", "name", "family_path", "l1_speakers_millions")


@dataclass(frozen=True)
class Language:
    code: str
    name: str
    family_path: tuple[str, ...]
    l1_speakers_millions: float

    @property
    def family(self) -> str:
        """Top-level family name."""
        return self.family_path[0]


@dataclass
class FamilyNode:
    family_name: str
    children: list["FamilyNode"] = field(default_factory=list)
    members: list[Language] = field(default_factory=list)

    def iter_languages(self):
        yield from self.members
        for child in self.children:
            yield from child.iter_languages()

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()


@dataclass
class FamilyTree:
    roots: list[FamilyNode]

    def iter_languages(self):
        for root in self.roots:
            yield from root.iter_languages()

    def iter_nodes(self):
        for root in self.roots:
            yield from root.iter_nodes()


def format_speaker_count(value: float) -> str:
    """Canonical rendering: integral counts without a decimal point."""
    if value == int(value):
        return str(int(value))
    return repr(value)


def parse_language_db(text: str) -> list[Language]:
    """Parse the TSV language database. Rows with missing or non-numeric
    speaker counts are rejected, never defaulted."""
    languages: list[Language] = []
    seen: dict[str, int] = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if not header_seen:
            if tuple(f.strip() for f in fields) != DB_HEADER:
                raise ParseError(
                    f"line {lineno}: expected header {'<TAB>'.join(DB_HEADER)!r}"
                )
            header_seen = True
            continue
        if len(fields) != 4:
            raise ParseError(f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}")
        code, name, path_raw, speakers_raw = (f.strip() for f in fields)
        if not code:
            raise ParseError(f"line {lineno}: empty language code")
        if code in seen:
            raise ParseError(
                f"line {lineno}: duplicate language code {code!r} (first seen on line {seen[code]})"
            )
        path = tuple(p.strip() for p in path_raw.split(">") if p.strip())
        if not path:
            raise ParseError(f"line {lineno}: empty family_path for {code!r}")
        if not speakers_raw:
            raise ParseError(f"line {lineno}: missing speaker count for {code!r}")
        try:
            speakers = float(speakers_raw)
        except ValueError:
            raise ParseError(
                f"line {lineno}: speaker count {speakers_raw!r} for {code!r} is not a number"
            ) from None
        if speakers < 0:
            raise ParseError(f"line {lineno}: negative speaker count for {code!r}")
        seen[code] = lineno
        languages.append(Language(code, name, path, speakers))
    if not header_seen and text.strip():
        raise ParseError("missing header line")
    return languages


def serialize_language_db(languages: list[Language]) -> str:
    lines = ["\t".join(DB_HEADER)]
    for lang in languages:
        lines.append(
            "\t".join(
                (
                    lang.code,
                    lang.name,
                    ">".join(lang.family_path),
                    format_speaker_count(lang.l1_speakers_millions),
                )
            )
        )
    return "\n".join(lines) + "\n"


def load_language_db(path) -> list[Language]:
    return parse_language_db(Path(path).read_text(encoding="utf-8"))


def bundled_db_path() -> Path:
    return Path(resources.files("betkit").joinpath("data/languages.tsv"))


def load_bundled_db() -> list[Language]:
    return load_language_db(bundled_db_path())


def build_family_tree(languages: list[Language]) -> FamilyTree:
    """Cluster languages into a tree keyed by family-path prefixes. Each
    language becomes a member of exactly the node at its full path."""
    if not languages:
        raise ValidationError("cannot build a family tree from an empty language list")
    codes = [lang.code for lang in languages]
    if len(set(codes)) != len(codes):
        raise ValidationError("language codes must be unique")

    roots: list[FamilyNode] = []
    index: dict[tuple[str, ...], FamilyNode] = {}
    for lang in languages:
        prefix: tuple[str, ...] = ()
        node = None
        for part in lang.family_path:
            parent = node
            prefix = prefix + (part,)
            node = index.get(prefix)
            if node is None:
                node = FamilyNode(family_name=part)
                index[prefix] = node
                if parent is None:
                    roots.append(node)
                else:
                    parent.children.append(node)
        node.members.append(lang)
    return FamilyTree(roots=roots)


def select_representatives(tree: FamilyTree) -> list[Language]:
    """One language per top-level family: the member with the most L1
    speakers. Ties break toward the lexicographically larger code."""
    reps = []
    for root in tree.roots:
        members = list(root.iter_languages())
        reps.append(max(members, key=lambda l: (l.l1_speakers_millions, l.code)))
    return reps


def top_k_languages(representatives: list[Language], k: int) -> list[Language]:
    """Sort descending by speaker count (ties: descending code) and truncate
    to min(k, n)."""
    if not representatives:
        raise ValidationError("representatives list is empty")
    if k < 1:
        raise ValidationError(f"k must be a positive integer, got {k}")
    ordered = sorted(
        representatives,
        key=lambda l: (l.l1_speakers_millions, l.code),
        reverse=True,
    )
    return ordered[: min(k, len(ordered))]


def select_top_languages(languages: list[Language], k: int) -> list[Language]:
    """Convenience pipeline: tree, representatives, top k."""
    return top_k_languages(select_representatives(build_family_tree(languages)), k)
