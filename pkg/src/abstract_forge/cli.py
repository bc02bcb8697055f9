"""Command-line front end: compress, trace, ablation and corpus generation."""

from __future__ import annotations

import argparse
import json
import os
import resource
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from .compression import compress_iterated
from .expr import Corpus, ParseError, corpus_stats
from .search import UTILITY_MODES, SearchConfig, cts_search
from .synth import SynthConfig, bundled_configs, generate_texts

EXIT_PARSE = 1
EXIT_CONFIG = 2

ABLATIONS = {
    "baseline": {},
    "no-arg-capture": {"opt_arg_capture": False},
    "no-upper-bound": {"opt_upper_bound": False},
    "no-redundant-args": {"opt_redundant_args": False},
    "no-opt": {"opt_arg_capture": False, "opt_upper_bound": False, "opt_redundant_args": False},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    trace: Optional[str] = None
    iterations: int = 1
    max_arity: int = 3
    workers: int = 1
    utility_mode: str = "sum"
    opt_upper_bound: bool = True
    opt_arg_capture: bool = True
    opt_redundant_args: bool = True
    opt_single_task_prune: bool = True
    node_budget: Optional[int] = None
    time_budget: Optional[float] = None
    quiet: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.workers < 1:
            raise ConfigError("threads must be >= 1")
        try:
            self.search_config()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def search_config(self, **overrides) -> SearchConfig:
        kw = dict(max_arity=self.max_arity, utility_mode=self.utility_mode,
                  opt_upper_bound=self.opt_upper_bound, opt_arg_capture=self.opt_arg_capture,
                  opt_redundant_args=self.opt_redundant_args,
                  opt_single_task_prune=self.opt_single_task_prune, workers=self.workers,
                  node_budget=self.node_budget, time_budget=self.time_budget)
        kw.update(overrides)
        return SearchConfig(**kw)


@dataclass
class Report:
    abstractions: list
    rewritten: list
    original_cost: int
    final_cost: int
    compression_ratio: float
    stats: list
    corpus_stats: dict
    wall_time: float
    peak_memory_mb: Optional[float] = None
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> Report:
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def peak_memory_mb() -> Optional[float]:
    """Peak resident set size of this process, if the platform reports it."""
    try:
        rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    except (AttributeError, ValueError):
        return None
    # kilobytes on Linux, bytes on macOS
    return rss / (1024 * 1024) if sys.platform == "darwin" else rss / 1024


def load_corpus(path: str) -> Corpus:
    if not Path(path).is_file():
        raise ParseError(f"no such corpus file: {path}")
    try:
        return Corpus.load(path)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from None


def run_compress(cfg: RunConfig, corpus: Optional[Corpus] = None, echo=print) -> Report:
    corpus = corpus if corpus is not None else load_corpus(cfg.input)
    start = time.perf_counter()
    result = compress_iterated(corpus, cfg.iterations, cfg.search_config())
    wall = time.perf_counter() - start
    s = corpus.store
    before = result.original_cost
    abstractions = []
    cost = before
    for i, la in enumerate(result.abstractions):
        abstractions.append({"name": la.abstraction.name, "body": la.body,
                             "arity": la.abstraction.arity, "utility": la.utility,
                             "num_uses": la.num_uses})
        cost -= la.utility + s.cost[la.abstraction.body]
        if not cfg.quiet:
            echo(f"[{i}] {la.abstraction.name} arity={la.abstraction.arity} utility={la.utility} "
                 f"uses={la.num_uses} ratio={before / max(cost, 1):.4f} :: {la.body}")
    st = corpus_stats(corpus)
    report = Report(
        abstractions=abstractions,
        rewritten=result.rewritten.show(),
        original_cost=before,
        final_cost=result.final_cost,
        compression_ratio=float(result.ratio),
        stats=[la.stats.as_dict() for la in result.abstractions],
        corpus_stats={"count": st.count, "mean_length": st.mean_length, "mean_depth": st.mean_depth},
        wall_time=wall,
        peak_memory_mb=peak_memory_mb(),
        config={k: v for k, v in asdict(cfg).items() if k not in ("input", "output", "trace")},
    )
    if not cfg.quiet:
        echo(f"compression ratio {report.compression_ratio:.4f} "
             f"({before} -> {report.final_cost}) in {wall:.2f}s")
    if cfg.output:
        Path(cfg.output).write_text(report.dumps())
    return report


def run_trace(cfg: RunConfig, corpus: Optional[Corpus] = None, echo=print) -> dict:
    """One search iteration; every strict improvement of the incumbent."""
    corpus = corpus if corpus is not None else load_corpus(cfg.input)
    total = corpus.total_cost()
    res = cts_search(corpus, cfg.search_config())
    points = []
    for tp in res.stats.trace:
        if points and tp.utility <= points[-1]["utility"]:
            continue
        # ratio of the corpus against the rewritten corpus plus the new body
        points.append({"nodes": tp.nodes, "utility": tp.utility,
                       "ratio": total / max(total - tp.utility, 1), "body": tp.body})
    out = {"points": points, "total_nodes": res.stats.nodes_expanded,
           "exhausted": res.stats.exhausted, "utility": res.utility,
           "body": res.show() if res.found else None}
    if not cfg.quiet:
        for p in points:
            echo(f"{p['nodes']:>8} {p['utility']:>8} {p['ratio']:.4f} {p['body']}")
        echo(f"total nodes {out['total_nodes']}")
    if cfg.trace:
        Path(cfg.trace).write_text(json.dumps(out, indent=2))
    return out


def run_ablation(cfg: RunConfig, corpus: Optional[Corpus] = None, echo=print) -> dict:
    corpus = corpus if corpus is not None else load_corpus(cfg.input)
    rows = {}
    for name, toggles in ABLATIONS.items():
        res = cts_search(corpus, cfg.search_config(**toggles))
        rows[name] = {"nodes": res.stats.nodes_expanded, "utility": res.utility,
                      "finished": res.stats.exhausted, "elapsed": res.stats.elapsed,
                      "body": res.show() if res.found else None}
    base = max(rows["baseline"]["nodes"], 1)
    for r in rows.values():
        r["ratio"] = r["nodes"] / base
    if not cfg.quiet:
        for name, r in rows.items():
            cell = f"{r['ratio']:.2f}" if r["finished"] else f">{r['ratio']:.2f} (budget)"
            echo(f"{name:<18} nodes={r['nodes']:<8} ratio={cell:<16} utility={r['utility']}")
    out = {"rows": rows}
    if cfg.output:
        Path(cfg.output).write_text(json.dumps(out, indent=2))
    return out


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abstract-forge",
                                 description="Learn compressive lambda-calculus abstractions.")
    sub = ap.add_subparsers(dest="command", required=True)

    def search_flags(p, iterations=True):
        p.add_argument("input", help="corpus JSON: array of programs or {'programs': [...]}")
        if iterations:
            p.add_argument("--iterations", type=int, default=1)
        p.add_argument("--max-arity", type=int, default=3)
        p.add_argument("--threads", type=int, default=None,
                       help="search workers (default: $ABSTRACT_FORGE_THREADS or 1)")
        p.add_argument("--utility", choices=UTILITY_MODES, default="sum")
        p.add_argument("--no-opt-upper-bound", action="store_true")
        p.add_argument("--no-opt-arg-capture", action="store_true")
        p.add_argument("--no-opt-redundant-args", action="store_true")
        p.add_argument("--no-opt-single-task", action="store_true")
        p.add_argument("--node-budget", type=int, default=None)
        p.add_argument("--time-budget", type=float, default=None, metavar="SECONDS")
        p.add_argument("--output", default=None)
        p.add_argument("--trace", default=None)
        p.add_argument("--quiet", action="store_true")

    search_flags(sub.add_parser("compress", help="iterated abstraction learning"))
    search_flags(sub.add_parser("trace", help="anytime trace of a single search"), iterations=False)
    search_flags(sub.add_parser("ablation", help="nodes expanded per optimization toggle"),
                 iterations=False)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("output")
    g.add_argument("--preset", choices=sorted(bundled_configs()), default=None)
    g.add_argument("--programs", type=int, default=250)
    g.add_argument("--mean-length", type=float, default=76.0)
    g.add_argument("--depth", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    return ap


def _threads(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("ABSTRACT_FORGE_THREADS")
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"ABSTRACT_FORGE_THREADS must be an integer, got {env!r}") from None


def config_from_args(args) -> RunConfig:
    return RunConfig(
        input=args.input, output=args.output, trace=args.trace,
        iterations=getattr(args, "iterations", 1), max_arity=args.max_arity,
        workers=_threads(args.threads), utility_mode=args.utility,
        opt_upper_bound=not args.no_opt_upper_bound,
        opt_arg_capture=not args.no_opt_arg_capture,
        opt_redundant_args=not args.no_opt_redundant_args,
        opt_single_task_prune=not args.no_opt_single_task,
        node_budget=args.node_budget, time_budget=args.time_budget, quiet=args.quiet)


def _generate(args) -> int:
    if args.preset:
        sc = bundled_configs()[args.preset]
    else:
        if args.programs < 0 or args.mean_length <= 0 or args.depth < 1:
            raise ConfigError("programs >= 0, mean length > 0 and depth >= 1 required")
        sc = SynthConfig(programs=args.programs, mean_length=args.mean_length,
                         depth=args.depth, seed=args.seed)
    texts = generate_texts(sc)
    tasks = [f"task_{i // sc.programs_per_task}" for i in range(len(texts))]
    data = {"programs": [{"body": t, "task": k} for t, k in zip(texts, tasks)]}
    Path(args.output).write_text(json.dumps(data, indent=1))
    return 0


def main(argv: Optional[list] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _generate(args)
        cfg = config_from_args(args)
        corpus = load_corpus(cfg.input)
        if args.command == "compress":
            run_compress(cfg, corpus)
            if cfg.trace:
                run_trace(replace(cfg, quiet=True), corpus)
        elif args.command == "trace":
            run_trace(replace(cfg, trace=cfg.trace or cfg.output), corpus)
        else:
            run_ablation(cfg, corpus)
    except ConfigError as e:
        print(f"abstract-forge: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as e:
        print(f"abstract-forge: {e}", file=sys.stderr)
        return EXIT_PARSE
    return 0


if __name__ == "__main__":
    sys.exit(main())
