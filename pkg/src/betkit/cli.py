"""Command-line surface. Every subcommand is a thin wrapper over the library,
so identical inputs via CLI and via library calls yield identical artifacts.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error,
4 trainer error.
"""

import argparse
import sys
from pathlib import Path

from . import augment as augment_mod
from . import corpus as corpus_mod
from . import harness as harness_mod
from . import langfam as langfam_mod
from . import metrics as metrics_mod
from . import translate as translate_mod
from .config import ToolConfig, load_config
from .errors import (
    BackendError,
    BetkitError,
    ParseError,
    ShortageError,
    TrainerError,
    ValidationError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3
EXIT_TRAINER = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _policy_from_config(config: ToolConfig) -> translate_mod.BackendPolicy:
    return translate_mod.BackendPolicy(
        max_concurrent_requests=config.max_concurrent_requests,
        max_requests_per_second=config.max_requests_per_second,
        max_retries=config.max_retries,
        initial_backoff_ms=config.initial_backoff_ms,
        backoff_multiplier=config.backoff_multiplier,
        request_timeout_ms=config.request_timeout_ms,
        allow_partial=config.allow_partial,
    )


def _make_backend(config: ToolConfig) -> translate_mod.TranslationBackend:
    if config.backend == "mock":
        return translate_mod.MockTranslationBackend(
            translate_mod.MockConfig(
                substitution_rate=config.substitution_rate, seed=config.mock_seed
            )
        )
    return translate_mod.HttpTranslationBackend(
        config.base_url, timeout_ms=config.request_timeout_ms
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_langfam(args, config: ToolConfig) -> int:
    languages = (
        langfam_mod.load_language_db(args.db) if args.db else langfam_mod.load_bundled_db()
    )
    selected = langfam_mod.select_top_languages(languages, args.k)
    print("code\tname\tfamily\tl1_speakers_millions")
    for lang in selected:
        print(
            f"{lang.code}\t{lang.name}\t{lang.family}\t"
            f"{langfam_mod.format_speaker_count(lang.l1_speakers_millions)}"
        )
    return EXIT_OK


def cmd_downsample(args, config: ToolConfig) -> int:
    corpus = corpus_mod.load_corpus(args.input, args.format)
    seed = args.seed if args.seed is not None else config.seed
    sampled = corpus_mod.downsample_balanced(corpus, n_per_class=args.n, seed=seed)
    corpus_mod.write_corpus(sampled, args.out)
    print(f"wrote {len(sampled)} records to {args.out}")
    return EXIT_OK


def cmd_augment(args, config: ToolConfig) -> int:
    train = corpus_mod.load_corpus(
        args.train, args.format, dataset_id=args.dataset, split_tag="train"
    )
    if args.backend:
        config.backend = args.backend
        config.validate()
    backend = _make_backend(config)
    policy = _policy_from_config(config)
    cache_dir = args.cache_dir or config.cache_dir
    translator = translate_mod.CachingTranslator(backend, policy, cache_dir=cache_dir)
    languages = [code.strip() for code in args.languages.split(",") if code.strip()]
    result = augment_mod.augment_corpus(train, languages, translator, policy)
    dataset_dir = augment_mod.write_augmentation(result, args.out)
    for code in languages:
        counts = result.manifest.per_language[code]
        print(
            f"{code}: generated={counts.generated} "
            f"filtered_exact={counts.filtered_exact} kept={counts.kept}"
        )
    print(f"wrote augmented corpora to {dataset_dir}")
    return EXIT_OK


def _resolve_trainer(model: str, adapters: dict[str, str]):
    command = adapters.get(model)
    if command is None and model == "overlap":
        command = harness_mod.BUILTIN_OVERLAP
    if command is None:
        raise TrainerError(
            f"no adapter registered for model {model!r} "
            f"(use --adapter {model}=<command> or an adapter.{model} config entry)"
        )
    if command == harness_mod.BUILTIN_OVERLAP:
        return harness_mod.builtin_overlap_trainer
    return command


def cmd_run(args, config: ToolConfig) -> int:
    adapters = dict(config.adapters)
    for spec in args.adapter or []:
        model, _, command = spec.partition("=")
        if not model or not command:
            raise ValidationError(f"bad --adapter entry {spec!r}; expected model=command")
        adapters[model.strip()] = command.strip()
    models = _split_csv(args.models)
    datasets = _split_csv(args.datasets)
    conditions = _split_csv(args.conditions)
    cells = harness_mod.plan_matrix(models, datasets, conditions)
    # One store pass per model so each can use its own adapter command.
    for model in models:
        trainer = _resolve_trainer(model, adapters)
        model_cells = [c for c in cells if c.model == model]
        harness_mod.run_matrix(
            model_cells,
            trainer,
            args.store,
            args.data_root,
            timeout_s=args.timeout_s or config.trainer_timeout_s,
            workers=args.workers or config.workers,
        )
    rows = metrics_mod.load_results_store(args.store)
    failed = [r for r in rows if isinstance(r, metrics_mod.FailedCell)]
    print(f"results store {args.store}: {len(rows)} cells, {len(failed)} failed")
    for row in failed:
        print(f"  FAILED {row.cell_key()}: {row.error}", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args, config: ToolConfig) -> int:
    rows = metrics_mod.load_results_store(args.store)
    results = [r for r in rows if isinstance(r, metrics_mod.EvalResult)]
    if not results:
        raise ValidationError(f"results store {args.store} holds no valid results")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_text, warnings = metrics_mod.report_csv(results)
    from .ioutil import atomic_write_text

    csv_path = out_dir / "gains.csv"
    atomic_write_text(csv_path, csv_text)
    gains, _ = metrics_mod.compute_gains(results)
    if not gains:
        print("warning: no gain rows (store holds only baseline results)", file=sys.stderr)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    box_path = out_dir / f"boxplot_{args.axis}.json"
    metrics_mod.emit_report(results, "boxplot-json", box_path, axis=args.axis)
    if args.metric:
        buckets = metrics_mod.marginal_gain_distribution(gains, args.axis, args.metric)
        for key, summary in buckets.items():
            print(
                f"{args.metric} {args.axis}={key}: n={summary.n} "
                f"mean={summary.mean:+.3f} median={summary.median:+.3f}"
            )
    print(f"wrote {csv_path} and {box_path}")
    return EXIT_OK


def cmd_report(args, config: ToolConfig) -> int:
    rows = metrics_mod.load_results_store(args.store)
    results = [r for r in rows if isinstance(r, metrics_mod.EvalResult)]
    if not results:
        raise ValidationError(f"results store {args.store} holds no valid results")
    metrics_mod.emit_report(results, args.format, args.out, axis=args.axis)
    print(f"wrote {args.out}")
    return EXIT_OK


def _split_csv(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="betkit", description=__doc__)
    parser.add_argument("--config", help="config file path (default ./betkit.conf or $BET_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("langfam", help="select top-k intermediary languages by family")
    p.add_argument("--db", help="language database TSV (default: bundled)")
    p.add_argument("-k", type=int, default=10)
    p.set_defaults(func=cmd_langfam)

    p = sub.add_parser("downsample", help="balanced per-class downsampling")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=corpus_mod.CORPUS_FORMATS, required=True)
    p.add_argument("--n", type=int, default=50, help="records per class")
    p.add_argument("--seed", type=int, default=None, help="default: config seed (42)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("augment", help="backtranslate the train split through pivot languages")
    p.add_argument("--train", required=True, help="train split file")
    p.add_argument("--format", choices=corpus_mod.CORPUS_FORMATS, default="interchange")
    p.add_argument("--dataset", required=True, help="dataset id for output layout")
    p.add_argument("--languages", required=True, help="comma-separated pivot codes")
    p.add_argument("--backend", choices=("mock", "http"), help="override the config backend")
    p.add_argument("--cache-dir", help="translation cache directory (default from config)")
    p.add_argument("--out", required=True, help="output directory root")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("run", help="run the experiment matrix")
    p.add_argument("--data-root", required=True)
    p.add_argument("--models", required=True, help="comma-separated model ids")
    p.add_argument("--datasets", required=True, help="comma-separated dataset ids")
    p.add_argument("--conditions", required=True, help="comma-separated conditions (base, codes, all)")
    p.add_argument("--store", required=True, help="results store path (JSONL)")
    p.add_argument("--adapter", action="append", help="model=command adapter registration")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--timeout-s", type=float, default=0.0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="gain report and marginal distributions")
    p.add_argument("--store", required=True)
    p.add_argument("--axis", choices=metrics_mod.AXES, default="language")
    p.add_argument("--metric", choices=metrics_mod.METRIC_NAMES)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render a results store as csv/md/boxplot-json")
    p.add_argument("--store", required=True)
    p.add_argument("--format", choices=metrics_mod.REPORT_FORMATS, required=True)
    p.add_argument("--axis", choices=metrics_mod.AXES, default="language")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config).validate()
        return args.func(args, config)
    except _UsageError as exc:
        print(f"betkit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainerError as exc:
        print(f"betkit: trainer error: {exc}", file=sys.stderr)
        return EXIT_TRAINER
    except BackendError as exc:
        print(f"betkit: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ParseError, ValidationError, ShortageError, OSError) as exc:
        print(f"betkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BetkitError as exc:
        print(f"betkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
