#!/usr/bin/env python3
"""Print the intermediary-language selection from the bundled database:
the family tree roots, the per-family representative, and the final top-k.

Usage:
    python3 scripts/print_top_languages.py [-k 10] [--db path/to/languages.tsv]
"""

import argparse

from betkit.langfam import (
    build_family_tree,
    format_speaker_count,
    load_bundled_db,
    load_language_db,
    select_representatives,
    top_k_languages,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-k", type=int, default=10)
    parser.add_argument("--db", help="language database TSV (default: bundled)")
    args = parser.parse_args()

    languages = load_language_db(args.db) if args.db else load_bundled_db()
    tree = build_family_tree(languages)
    reps = select_representatives(tree)

    print(f"{len(languages)} languages in {len(tree.roots)} families\n")
    print("family representatives (by L1 speakers, millions):")
    for lang in sorted(reps, key=lambda l: -l.l1_speakers_millions):
        print(f"  {lang.family:<16} {lang.name} ({lang.code}) "
              f"{format_speaker_count(lang.l1_speakers_millions)}")

    print(f"\ntop {args.k}:")
    for rank, lang in enumerate(top_k_languages(reps, args.k), start=1):
        print(f"  {rank:>2}. {lang.code}  {lang.name:<12} "
              f"{format_speaker_count(lang.l1_speakers_millions)}")


if __name__ == "__main__":
    main()
