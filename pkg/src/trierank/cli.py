"""Command-line interface.

Commands: ``rank`` (one completion point), ``eval`` (dataset report),
``stats`` (tree-manipulation statistics), ``compare`` (diff two reports).
Exit codes are stable: 0 success, 2 configuration error, 3 backend error.
Configuration precedence: command-line flags > ``--config`` JSON file >
defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .backend import ModelBackend, SeededBackend, mock_backend_from_spec
from .dataset import load_dataset
from .errors import BackendUnavailable, ContextTooLong, EmptyInput, TrierankError
from .evaluate import (
    BASE_STRATEGIES,
    EvalConfig,
    UnknownStrategy,
    evaluate,
    strategy_adapter,
    tree_statistics,
)
from .ranking import DecodeConfig, ranking_record
from .remote import RemoteBackend
from .vocab import Vocabulary, greedy_tokenize

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND = 0, 2, 3


class ConfigError(TrierankError):
    """Bad command-line arguments or config file."""


@dataclass
class RunConfig:
    backend_spec: str | None = None
    vocab_path: str | None = None
    strategies: list[str] = field(default_factory=lambda: ["treeranker"])
    alpha: float = 1.0
    max_steps: int = 16
    constrained: bool = True
    early_stop: bool = True
    runs: int = 1
    first_token_ms: float = 75.0
    jobs: int = 1
    out: str | None = None
    include_timing: bool = True

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            constrained=self.constrained, early_stop=self.early_stop, max_steps=self.max_steps
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            decode=self.decode_config(),
            alpha=self.alpha,
            runs=self.runs,
            first_token_ms=self.first_token_ms,
            jobs=self.jobs,
        )


_FILE_KEYS = {
    "backend": "backend_spec",
    "vocab": "vocab_path",
    "strategies": "strategies",
    "alpha": "alpha",
    "max_steps": "max_steps",
    "unconstrained": None,  # handled below
    "no_early_stop": None,
    "runs": "runs",
    "first_token_ms": "first_token_ms",
    "jobs": "jobs",
    "out": "out",
    "no_timing": None,
}


def resolve_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        for key, value in raw.items():
            if key not in _FILE_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if key == "unconstrained":
                config.constrained = not value
            elif key == "no_early_stop":
                config.early_stop = not value
            elif key == "no_timing":
                config.include_timing = not value
            else:
                setattr(config, _FILE_KEYS[key], value)
    if args.backend is not None:
        config.backend_spec = args.backend
    if args.vocab is not None:
        config.vocab_path = args.vocab
    if args.strategy:
        config.strategies = list(args.strategy)
    for flag, attr in (
        ("alpha", "alpha"),
        ("max_steps", "max_steps"),
        ("runs", "runs"),
        ("first_token_ms", "first_token_ms"),
        ("jobs", "jobs"),
        ("out", "out"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    if args.unconstrained:
        config.constrained = False
    if args.no_early_stop:
        config.early_stop = False
    if args.no_timing:
        config.include_timing = False
    if config.runs < 1 or not config.strategies:
        raise ConfigError("need runs >= 1 and at least one strategy")
    return config


def load_vocab(config: RunConfig) -> Vocabulary:
    if not config.vocab_path:
        raise ConfigError("--vocab is required")
    try:
        return Vocabulary.load(config.vocab_path)
    except (OSError, TrierankError) as exc:
        raise ConfigError(f"cannot load vocabulary: {exc}") from None


def build_backend(config: RunConfig, vocab: Vocabulary) -> ModelBackend:
    spec = config.backend_spec
    if not spec:
        raise ConfigError("--backend is required (mock:<path|seed> or remote:<endpoint>)")
    scheme, sep, rest = spec.partition(":")
    if not sep:
        raise ConfigError(f"malformed backend spec {spec!r}")
    if scheme == "mock":
        if rest.lstrip("-").isdigit():
            return SeededBackend(vocab.size, int(rest))
        try:
            return mock_backend_from_spec(rest, vocab)
        except (OSError, TrierankError) as exc:
            raise ConfigError(f"cannot load mock spec {rest}: {exc}") from None
    if scheme == "remote":
        return RemoteBackend(rest)
    raise ConfigError(f"unknown backend scheme {scheme!r}")


def _validate_strategies(names) -> None:
    for name in names:
        strategy_adapter(name)  # raises UnknownStrategy


def cmd_rank(args) -> int:
    config = resolve_config(args)
    if len(config.strategies) != 1:
        raise ConfigError("rank takes exactly one --strategy")
    strategy = config.strategies[0]
    _validate_strategies([strategy])
    vocab = load_vocab(config)
    backend = build_backend(config, vocab)
    prefix_text = Path(args.prefix_file).read_text(encoding="utf-8")
    candidates = list(args.candidates)
    if args.candidates_file:
        candidates += [
            line
            for line in Path(args.candidates_file).read_text(encoding="utf-8").splitlines()
            if line
        ]
    deduped: list[str] = []
    seen: set[str] = set()
    for c in candidates:
        if c in seen:
            print(f"warning: duplicate candidate {c!r} dropped", file=sys.stderr)
            continue
        seen.add(c)
        deduped.append(c)
    if not deduped:
        raise ConfigError("no candidates given")
    from .vocab import boundary_merged

    for c in deduped:
        if boundary_merged(prefix_text, c, vocab):
            print(
                f"warning: candidate {c!r} is unreachable as tokenized — the vocabulary "
                "merges the dereference boundary into one token",
                file=sys.stderr,
            )

    if strategy == "treeranker":
        from .ranking import rank

        prefix = greedy_tokenize(prefix_text, vocab)
        ranked, stats = rank(backend.session(), prefix, deduped, vocab, config.decode_config())
        record = ranking_record(ranked, stats, strategy)
    else:
        from .dataset import CompletionPoint
        from .evaluate import _Context
        from .vocab import full_subtoken_map

        point = CompletionPoint("cli", prefix_text, deduped, deduped[0])
        ctx = _Context(vocab, full_subtoken_map(vocab), config.eval_config())
        result = strategy_adapter(strategy)(point, backend.session(), ctx)
        record = {
            "strategy": strategy,
            "ranking": [
                {"identifier": ident, "rank": i + 1, "scored_len": None, "last_prob": None}
                for i, ident in enumerate(result.ranking)
            ],
            "stats": {
                "steps": None,
                "early_stopped": None,
                "splits": None,
                "pushes": None,
                "off_tree_exit": None,
            },
        }
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    config = resolve_config(args)
    _validate_strategies(config.strategies)
    vocab = load_vocab(config)
    backend = build_backend(config, vocab)
    dataset = load_dataset(args.dataset)
    if not len(dataset):
        raise ConfigError(f"dataset {args.dataset} has no valid points")

    warnings = list(dataset.warnings)
    aborted: list[str] = []
    combined = None
    for name in config.strategies:
        try:
            report = evaluate([name], dataset, backend, vocab, config.eval_config())
        except (BackendUnavailable, ContextTooLong) as exc:
            warnings.append(f"strategy {name} aborted: {exc}")
            aborted.append(name)
            continue
        if combined is None:
            combined = report
        else:
            combined.strategies.update(report.strategies)
            combined.details.update(report.details)
    if combined is None:
        print("all strategies aborted", file=sys.stderr)
        return EXIT_BACKEND
    combined.config["strategies"] = [s for s in config.strategies if s not in aborted]
    combined.warnings = warnings

    out = Path(config.out or "report.json")
    out.write_text(combined.to_json(config.include_timing) + "\n", encoding="utf-8")
    table = combined.table()
    out.with_suffix(".txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    if warnings:
        print("\nwarnings:")
        for w in warnings:
            print(f"  {w}")
    print(f"\nreport written to {out}")
    return EXIT_BACKEND if aborted else EXIT_OK


def cmd_stats(args) -> int:
    config = resolve_config(args)
    vocab = load_vocab(config)
    backend = build_backend(config, vocab)
    dataset = load_dataset(args.dataset)
    if not len(dataset):
        raise ConfigError(f"dataset {args.dataset} has no valid points")
    report = evaluate(["treeranker"], dataset, backend, vocab, config.eval_config())
    stats = tree_statistics(report.details["treeranker"])
    width = max(len(k) for k in stats)
    for key, value in stats.items():
        shown = f"{value:.4f}" if isinstance(value, float) else str(value)
        print(f"{key:<{width}}  {shown}")
    if config.out:
        Path(config.out).write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_compare(args) -> int:
    def load(path):
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from None

    a, b = load(args.report_a), load(args.report_b)
    strategies = sorted(set(a.get("strategies", {})) & set(b.get("strategies", {})))
    if not strategies:
        raise ConfigError("reports share no strategies")
    deltas: dict[str, dict[str, float]] = {}
    for name in strategies:
        row: dict[str, float] = {}
        for metric, left in a["strategies"][name].items():
            right = b["strategies"][name].get(metric)
            if isinstance(left, (int, float)) and isinstance(right, (int, float)):
                row[metric] = right - left
        deltas[name] = row
    for name in strategies:
        print(f"{name}:")
        for metric, delta in sorted(deltas[name].items()):
            print(f"  {metric:<22} {delta:+.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(deltas, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trierank", description="Rank code-completion candidates with a language model."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--backend", help="mock:<path|seed> or remote:<endpoint>")
        p.add_argument("--vocab", help="vocabulary file (<id>\\t<token> per line)")
        p.add_argument("--strategy", action="append", help="repeatable; default treeranker")
        p.add_argument("--alpha", type=float, help="length-penalty exponent for beamall")
        p.add_argument("--max-steps", type=int, dest="max_steps")
        p.add_argument("--unconstrained", action="store_true", default=None)
        p.add_argument("--no-early-stop", action="store_true", default=None, dest="no_early_stop")
        p.add_argument("--runs", type=int, help="timing repetitions per point")
        p.add_argument("--first-token-ms", type=float, dest="first_token_ms")
        p.add_argument("--jobs", type=int, help="evaluation worker pool size")
        p.add_argument("--out", help="output path")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--no-timing", action="store_true", default=None, dest="no_timing")

    p_rank = sub.add_parser("rank", help="rank candidates for one completion point")
    common(p_rank)
    p_rank.add_argument("prefix_file", help="file holding the code context before the cursor")
    p_rank.add_argument("candidates", nargs="*", help="candidate identifiers")
    p_rank.add_argument("--candidates-file", dest="candidates_file")
    p_rank.set_defaults(func=cmd_rank)

    p_eval = sub.add_parser("eval", help="evaluate strategies over a JSONL dataset")
    common(p_eval)
    p_eval.add_argument("dataset")
    p_eval.set_defaults(func=cmd_eval)

    p_stats = sub.add_parser("stats", help="tree-manipulation statistics for treeranker")
    common(p_stats)
    p_stats.add_argument("dataset")
    p_stats.set_defaults(func=cmd_stats)

    p_cmp = sub.add_parser("compare", help="diff two report JSON files")
    common(p_cmp)
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownStrategy, EmptyInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendUnavailable, ContextTooLong) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except TrierankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
