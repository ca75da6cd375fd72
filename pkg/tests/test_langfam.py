import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from betkit.errors import ParseError, ValidationError
from betkit.langfam import (
    Language,
    build_family_tree,
    format_speaker_count,
    load_bundled_db,
    parse_language_db,
    select_representatives,
    serialize_language_db,
    top_k_languages,
)

TOP10_CODES = ["zh", "es", "ar", "ja", "te", "jv", "ko", "vi", "tr", "yo"]
TOP10_SPEAKERS = [1200, 483, 310, 125, 82, 82, 77.2, 76, 75.7, 40]


def random_languages(n: int, seed: int) -> list[Language]:
    rng = random.Random(seed)
    families = ["FamA", "FamB", "FamC", "FamD", "FamE"]
    branches = ["North", "South", "East", "West"]
    leaves = ["Low", "High"]
    out = []
    for i in range(n):
        depth = rng.randint(1, 3)
        path = [rng.choice(families)]
        if depth >= 2:
            path.append(rng.choice(branches))
        if depth == 3:
            path.append(rng.choice(leaves))
        out.append(
            Language(
                code=f"l{i}",
                name=f"Lang{i}",
                family_path=tuple(path),
                l1_speakers_millions=round(rng.uniform(0.1, 500.0), 1),
            )
        )
    return out


# ---------------------------------------------------------------------------
# parse / serialize


def test_parse_single_row():
    text = (
        "code\tname\tfamily_path\tl1_speakers_millions\n"
        "zh\tChinese\tSino-Tibetan>Sinitic\t1200\n"
    )
    (lang,) = parse_language_db(text)
    assert lang.code == "zh"
    assert lang.name == "Chinese"
    assert lang.family_path == ("Sino-Tibetan", "Sinitic")
    assert lang.l1_speakers_millions == 1200


def test_parse_header_only_is_empty():
    assert parse_language_db("code\tname\tfamily_path\tl1_speakers_millions\n") == []


def test_parse_skips_comments_and_blank_lines():
    text = (
        "# a comment\n"
        "code\tname\tfamily_path\tl1_speakers_millions\n"
        "\n"
        "eu\tBasque\tBasque\t0.75\n"
    )
    (lang,) = parse_language_db(text)
    assert lang.family_path == ("Basque",)


def test_parse_rejects_missing_speaker_count():
    text = "code\tname\tfamily_path\tl1_speakers_millions\nxx\tXish\tFamA\t\n"
    with pytest.raises(ParseError, match="missing speaker count"):
        parse_language_db(text)


def test_parse_malformed_row_names_line():
    text = "code\tname\tfamily_path\tl1_speakers_millions\nxx\tXish\tFamA\n"
    with pytest.raises(ParseError, match="line 2"):
        parse_language_db(text)


def test_parse_duplicate_code_errors():
    text = (
        "code\tname\tfamily_path\tl1_speakers_millions\n"
        "xx\tXish\tFamA\t1\n"
        "xx\tOther\tFamB\t2\n"
    )
    with pytest.raises(ParseError, match="duplicate language code 'xx'"):
        parse_language_db(text)


def _normalize_db_text(text: str) -> str:
    """Independent canonicalizer: drop comments/blanks, reformat the speaker
    column with plain string arithmetic."""
    lines = []
    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.split("\t")
        if fields[0] != "code":
            value = float(fields[3])
            fields[3] = str(int(value)) if value == int(value) else repr(value)
        lines.append("\t".join(f.strip() for f in fields))
    return "\n".join(lines) + "\n"


def test_roundtrip_matches_normalized_bundled_db():
    from betkit.langfam import bundled_db_path

    raw = bundled_db_path().read_text(encoding="utf-8")
    assert serialize_language_db(parse_language_db(raw)) == _normalize_db_text(raw)


# ---------------------------------------------------------------------------
# tree


def test_romance_branch_tree():
    langs = [
        Language("es", "Spanish", ("Indo-European", "Romance"), 483),
        Language("fr", "French", ("Indo-European", "Romance"), 76.8),
        Language("it", "Italian", ("Indo-European", "Romance"), 64.6),
        Language("pt", "Portuguese", ("Indo-European", "Romance"), 236),
        Language("ro", "Romanian", ("Indo-European", "Romance"), 23.9),
    ]
    tree = build_family_tree(langs)
    assert len(tree.roots) == 1
    root = tree.roots[0]
    assert root.family_name == "Indo-European"
    assert root.members == []
    (romance,) = root.children
    assert romance.family_name == "Romance"
    assert len(romance.members) == 5


def test_single_language_tree():
    tree = build_family_tree([Language("eu", "Basque", ("Basque",), 0.75)])
    assert len(tree.roots) == 1
    assert tree.roots[0].members[0].code == "eu"


def test_node_count_matches_prefix_enumeration():
    langs = random_languages(50, seed=7)
    tree = build_family_tree(langs)
    # Oracle: brute-force enumeration of distinct family_path prefixes.
    prefixes = set()
    for lang in langs:
        for i in range(1, len(lang.family_path) + 1):
            prefixes.add(lang.family_path[:i])
    assert sum(1 for _ in tree.iter_nodes()) == len(prefixes)


def test_tree_partitions_languages():
    langs = random_languages(80, seed=3)
    tree = build_family_tree(langs)
    seen = [lang.code for lang in tree.iter_languages()]
    assert sorted(seen) == sorted(l.code for l in langs)
    for node in tree.iter_nodes():
        for member in node.members:
            assert member.family_path[-1] == node.family_name


def test_tree_rejects_empty_and_duplicates():
    with pytest.raises(ValidationError):
        build_family_tree([])
    lang = Language("xx", "Xish", ("FamA",), 1.0)
    with pytest.raises(ValidationError):
        build_family_tree([lang, lang])


# ---------------------------------------------------------------------------
# representatives / top-k


def test_bundled_sino_tibetan_representative_is_zh():
    tree = build_family_tree(load_bundled_db())
    reps = {lang.family: lang for lang in select_representatives(tree)}
    assert reps["Sino-Tibetan"].code == "zh"
    assert reps["Sino-Tibetan"].l1_speakers_millions == 1200


def test_singleton_family_representative():
    tree = build_family_tree([Language("eu", "Basque", ("Basque",), 0.75)])
    assert [l.code for l in select_representatives(tree)] == ["eu"]


def test_representatives_match_per_family_max_scan():
    langs = random_languages(60, seed=11)
    tree = build_family_tree(langs)
    reps = select_representatives(tree)
    # Oracle: exhaustive scan per top-level family.
    by_family: dict[str, list[Language]] = {}
    for lang in langs:
        by_family.setdefault(lang.family_path[0], []).append(lang)
    assert len(reps) == len(by_family)
    for rep in reps:
        family = rep.family_path[0]
        best = max(by_family[family], key=lambda l: (l.l1_speakers_millions, l.code))
        assert rep == best
        for other in by_family[family]:
            assert rep.l1_speakers_millions >= other.l1_speakers_millions


def test_top_k_is_prefix_of_full_sort():
    import functools

    langs = random_languages(40, seed=5)
    reps = select_representatives(build_family_tree(langs))

    # Oracle: independent comparison sort (desc speakers, desc code).
    def compare(a, b):
        if a.l1_speakers_millions != b.l1_speakers_millions:
            return -1 if a.l1_speakers_millions > b.l1_speakers_millions else 1
        if a.code != b.code:
            return -1 if a.code > b.code else 1
        return 0

    full = sorted(reps, key=functools.cmp_to_key(compare))
    for k in range(1, len(reps) + 2):
        assert top_k_languages(reps, k) == full[: min(k, len(reps))]


def test_top_k_rejects_zero():
    reps = [Language("xx", "Xish", ("FamA",), 1.0)]
    with pytest.raises(ValidationError):
        top_k_languages(reps, 0)
    assert top_k_languages(reps, 5) == reps


@given(st.integers(min_value=1, max_value=20))
def test_top_k_monotone_prefix(k):
    reps = select_representatives(build_family_tree(random_languages(30, seed=2)))
    assert top_k_languages(reps, k) == top_k_languages(reps, k + 1)[:k]


def test_bundled_db_reproduces_reference_table():
    reps = select_representatives(build_family_tree(load_bundled_db()))
    top = top_k_languages(reps, 10)
    assert [l.code for l in top] == TOP10_CODES
    assert [l.l1_speakers_millions for l in top] == TOP10_SPEAKERS


def test_speaker_count_formatting():
    assert format_speaker_count(1200.0) == "1200"
    assert format_speaker_count(77.2) == "77.2"
    assert format_speaker_count(0.75) == "0.75"
