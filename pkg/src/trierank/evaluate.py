"""Strategy evaluation over completion-point datasets.

Runs a decoding strategy on every point, locates the ground truth in the
returned ranking, and aggregates MRR, Recall@K, exact match, token
efficiency, decode statistics, and timing. Ranking time is measured from the
first backend response to the end of the decode; total time adds a fixed
first-token constant (75 ms by default). With ``runs > 1`` each point is
timed across repeated runs and confidence intervals use Student's t per
point, averaged across the dataset.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import fmean, median, stdev

from .backend import Distribution, ModelBackend
from .baselines import beam_all, beam_search, filter_to_candidates, greedy_complete
from .errors import EmptyInput, TrierankError
from .metrics import exact_match_rate, mean_and_ci95, mrr, recall_at_k
from .ranking import DecodeConfig, DecodeStats, rank
from .tree import build_tree
from .vocab import SubtokenMap, Vocabulary, full_subtoken_map, greedy_tokenize, identifier_prefix

BASE_STRATEGIES = ("treeranker", "beamall", "greedy", "beam5", "beam20", "beam5f", "beam20f")
IDE_PREFIX = "ide-baseline:"


class UnknownStrategy(TrierankError):
    """Strategy name not in the registered set."""


@dataclass
class EvalConfig:
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    alpha: float = 1.0
    runs: int = 5
    first_token_ms: float = 75.0
    jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class StrategyResult:
    """What one strategy produced for one completion point."""

    ranking: list[str]
    emitted: str | None
    decode: DecodeStats | None = None


@dataclass
class PointDetail:
    rank: int | None
    emitted_match: bool
    backend_calls: int
    gt_token_len: int
    steps: int | None = None
    early_stopped: bool | None = None
    had_split: bool | None = None
    had_push: bool | None = None
    ranking_times: list[float] = field(default_factory=list)


@dataclass
class StrategyReport:
    mrr: float
    recall: dict[int, float]
    em: float
    token_efficiency: float | None
    avg_generated_tokens: float | None
    early_stop_rate: float | None
    split_rate: float | None
    push_rate: float | None
    ranking_time: tuple[float, float]
    total_time: tuple[float, float]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "mrr": self.mrr,
            "recall@1": self.recall[1],
            "recall@5": self.recall[5],
            "recall@20": self.recall[20],
            "em": self.em,
            "token_efficiency": self.token_efficiency,
            "avg_generated_tokens": self.avg_generated_tokens,
            "early_stop_rate": self.early_stop_rate,
            "split_rate": self.split_rate,
            "push_rate": self.push_rate,
        }
        if include_timing:
            out["ranking_time"] = {"mean": self.ranking_time[0], "ci95": self.ranking_time[1]}
            out["total_time"] = {"mean": self.total_time[0], "ci95": self.total_time[1]}
        return out


@dataclass
class EvalReport:
    dataset: dict
    strategies: dict[str, StrategyReport]
    warnings: list[str]
    config: dict
    details: dict[str, list[PointDetail]] = field(default_factory=dict)

    def to_json(self, include_timing: bool = True) -> str:
        payload = {
            "dataset": self.dataset,
            "config": self.config,
            "strategies": {
                name: report.to_dict(include_timing)
                for name, report in self.strategies.items()
            },
            "warnings": self.warnings,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def table(self) -> str:
        header = f"{'strategy':<22}{'MRR':>7}{'R@1':>7}{'R@5':>7}{'R@20':>7}{'EM':>7}{'TER':>7}  ranking-time"
        lines = [header, "-" * len(header)]
        for name, rep in self.strategies.items():
            ter = f"{rep.token_efficiency:.2f}" if rep.token_efficiency is not None else "-"
            timing = f"{rep.ranking_time[0] * 1000:.1f}±{rep.ranking_time[1] * 1000:.1f} ms"
            lines.append(
                f"{name:<22}{rep.mrr:>7.3f}{rep.recall[1]:>7.3f}{rep.recall[5]:>7.3f}"
                f"{rep.recall[20]:>7.3f}{rep.em:>7.3f}{ter:>7}  {timing}"
            )
        return "\n".join(lines)


@dataclass
class _Context:
    vocab: Vocabulary
    submap: SubtokenMap
    config: EvalConfig


class _TimedSession(ModelBackend):
    """Per-point wrapper recording call count and first-response instant."""

    def __init__(self, inner: ModelBackend):
        self.inner = inner
        self.calls = 0
        self.first_response: float | None = None

    def raw_distribution(self, context):
        raise NotImplementedError

    def next_distribution(self, context, allowed=None, query=None) -> Distribution:
        result = self.inner.next_distribution(context, allowed, query)
        self.calls += 1
        if self.first_response is None:
            self.first_response = time.monotonic()
        return result


def _run_treeranker(point, backend, ctx: _Context) -> StrategyResult:
    prefix = greedy_tokenize(point.prefix, ctx.vocab)
    ranked, stats = rank(
        backend, prefix, point.candidates, ctx.vocab, ctx.config.decode, ctx.submap
    )
    if stats.identified is not None:
        emitted = point.candidates[stats.identified]
    else:
        emitted = identifier_prefix(
            "".join(ctx.vocab.texts[t] for t in stats.committed_tokens)
        )
    return StrategyResult([rc.identifier for rc in ranked], emitted, stats)


def _run_beamall(point, backend, ctx: _Context) -> StrategyResult:
    prefix = greedy_tokenize(point.prefix, ctx.vocab)
    tree = build_tree(point.candidates, ctx.vocab)
    scores = beam_all(backend, tree, prefix, ctx.config.alpha)
    ranking = [s.identifier for s in scores]
    return StrategyResult(ranking, ranking[0] if ranking else None)


def _run_greedy(point, backend, ctx: _Context) -> StrategyResult:
    prefix = greedy_tokenize(point.prefix, ctx.vocab)
    emitted = greedy_complete(backend, prefix, ctx.vocab, ctx.config.decode.max_steps)
    return StrategyResult([emitted] if emitted else [], emitted)


def _run_beam(width: int, filtered: bool):
    def adapter(point, backend, ctx: _Context) -> StrategyResult:
        prefix = greedy_tokenize(point.prefix, ctx.vocab)
        beams = beam_search(backend, prefix, ctx.vocab, width, ctx.config.decode.max_steps)
        if filtered:
            beams = filter_to_candidates(beams, set(point.candidates))
        ranking = [b[0] for b in beams]
        return StrategyResult(ranking, ranking[0] if ranking else None)

    return adapter


def _run_ide(name: str):
    def adapter(point, backend, ctx: _Context) -> StrategyResult:
        ranking = point.baselines.get(name)
        if ranking is None:
            raise UnknownStrategy(f"point {point.id!r} carries no baseline ranking {name!r}")
        return StrategyResult(list(ranking), ranking[0] if ranking else None)

    return adapter


def strategy_adapter(name: str):
    table = {
        "treeranker": _run_treeranker,
        "beamall": _run_beamall,
        "greedy": _run_greedy,
        "beam5": _run_beam(5, False),
        "beam20": _run_beam(20, False),
        "beam5f": _run_beam(5, True),
        "beam20f": _run_beam(20, True),
    }
    if name in table:
        return table[name]
    if name.startswith(IDE_PREFIX):
        return _run_ide(name[len(IDE_PREFIX) :])
    raise UnknownStrategy(
        f"unknown strategy {name!r}; valid: {', '.join(BASE_STRATEGIES)}, {IDE_PREFIX}<name>"
    )


def _evaluate_point(adapter, point, backend, ctx: _Context) -> PointDetail:
    gt = point.ground_truth
    gt_len = len(greedy_tokenize(gt, ctx.vocab))

    def one_run() -> tuple[StrategyResult, int, float]:
        session = _TimedSession(backend.session())
        result = adapter(point, session, ctx)
        end = time.monotonic()
        elapsed = (end - session.first_response) if session.first_response else 0.0
        return result, session.calls, elapsed

    result, calls, elapsed = one_run()
    times = [elapsed]
    for _ in range(ctx.config.runs - 1):
        times.append(one_run()[2])

    detail = PointDetail(
        rank=result.ranking.index(gt) + 1 if gt in result.ranking else None,
        emitted_match=result.emitted == gt,
        backend_calls=calls,
        gt_token_len=gt_len,
        ranking_times=times,
    )
    if result.decode is not None:
        result.decode.ground_truth_token_length = gt_len
        detail.steps = result.decode.steps_taken
        detail.early_stopped = result.decode.early_stopped
        detail.had_split = result.decode.splits > 0
        detail.had_push = result.decode.pushes > 0
    return detail


def _aggregate(details: list[PointDetail], config: EvalConfig) -> StrategyReport:
    ranks = [d.rank for d in details]
    point_means, point_cis = zip(*(mean_and_ci95(d.ranking_times) for d in details))
    ranking_mean, ranking_ci = fmean(point_means), fmean(point_cis)
    first_token_s = config.first_token_ms / 1000.0
    with_calls = [d for d in details if d.backend_calls > 0]
    ter = (
        fmean(d.gt_token_len / d.backend_calls for d in with_calls) if with_calls else None
    )
    decoded = [d for d in details if d.steps is not None]
    return StrategyReport(
        mrr=mrr(ranks),
        recall={k: recall_at_k(ranks, k) for k in (1, 5, 20)},
        em=exact_match_rate([d.emitted_match for d in details]),
        token_efficiency=ter,
        avg_generated_tokens=fmean(d.backend_calls for d in with_calls) if with_calls else None,
        early_stop_rate=fmean(d.early_stopped for d in decoded) if decoded else None,
        split_rate=fmean(d.had_split for d in decoded) if decoded else None,
        push_rate=fmean(d.had_push for d in decoded) if decoded else None,
        ranking_time=(ranking_mean, ranking_ci),
        total_time=(first_token_s + ranking_mean, ranking_ci),
    )


def evaluate(
    strategies,
    dataset,
    backend: ModelBackend,
    vocab: Vocabulary,
    config: EvalConfig | None = None,
) -> EvalReport:
    """Evaluate one or more strategies over ``dataset``; see module docstring."""
    if isinstance(strategies, str):
        strategies = [strategies]
    points = list(dataset)
    if not points:
        raise EmptyInput("dataset has no completion points")
    config = config or EvalConfig()
    ctx = _Context(vocab, full_subtoken_map(vocab), config)

    reports: dict[str, StrategyReport] = {}
    details: dict[str, list[PointDetail]] = {}
    for name in strategies:
        adapter = strategy_adapter(name)
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                point_details = list(
                    pool.map(lambda p: _evaluate_point(adapter, p, backend, ctx), points)
                )
        else:
            point_details = [_evaluate_point(adapter, p, backend, ctx) for p in points]
        details[name] = point_details
        reports[name] = _aggregate(point_details, config)

    gt_lens = [len(greedy_tokenize(p.ground_truth, vocab)) for p in points]
    list_lens = [len(p.candidates) for p in points]
    dataset_summary = {
        "points": len(points),
        "avg_candidates": fmean(list_lens),
        "median_candidates": median(list_lens),
        "avg_ground_truth_tokens": fmean(gt_lens),
    }
    warnings = list(getattr(dataset, "warnings", []))
    config_echo = {
        "strategies": list(strategies),
        "constrained": config.decode.constrained,
        "early_stop": config.decode.early_stop,
        "max_steps": config.decode.max_steps,
        "alpha": config.alpha,
        "runs": config.runs,
        "first_token_ms": config.first_token_ms,
    }
    return EvalReport(dataset_summary, reports, warnings, config_echo, details)


def tree_statistics(details: list[PointDetail]) -> dict:
    """Tree-manipulation statistics over treeranker point details."""
    if not details:
        raise EmptyInput("no points evaluated")
    steps = [d.steps for d in details if d.steps is not None]
    if not steps:
        raise EmptyInput("details carry no decode statistics")
    return {
        "points": len(details),
        "early_completion_rate": fmean(d.early_stopped for d in details),
        "split_rate": fmean(d.had_split for d in details),
        "push_rate": fmean(d.had_push for d in details),
        "single_forward_pass_rate": fmean(s == 1 for s in steps),
        "within_two_passes_rate": fmean(s <= 2 for s in steps),
        "avg_generated_tokens": fmean(steps),
        "std_generated_tokens": stdev(steps) if len(steps) > 1 else 0.0,
        "token_efficiency": fmean(
            d.gt_token_len / d.backend_calls for d in details if d.backend_calls
        ),
    }
