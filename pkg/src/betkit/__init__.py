"""betkit: backtranslation data augmentation for paraphrase corpora.

Pipeline pieces: language selection by family (`langfam`), corpus loading and
sampling (`corpus`), pluggable translation backends with caching and rate
limiting (`translate`), paraphrase-side backtranslation with exact-match
filtering (`augment`), metric and gain analysis (`metrics`), and the
experiment-matrix harness with its trainer-adapter protocol (`harness`).
"""

__version__ = "0.1.0"
