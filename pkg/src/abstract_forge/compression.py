"""Compression utility, optimal rewriting, and iterated library learning."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .expr import CostParams, Corpus, ExprStore, Kind, NodeId
from .search import SearchConfig, SearchStats, cts_search
from .unify import is_valid_match, lambda_unify, substitute


@dataclass(frozen=True)
class Abstraction:
    name: str
    body: NodeId
    arity: int

    def show(self, store: ExprStore) -> str:
        return store.show(self.body)


def make_abstraction(store: ExprStore, name: str, body: NodeId | str) -> Abstraction:
    """Validate a hole-free body with dense abstraction variables."""
    if isinstance(body, str):
        body = store.parse(body)
    if store.holes(body):
        raise ValueError("abstraction body must not contain holes")
    if store.has_shifted[body] or store.fv[body]:
        raise ValueError("abstraction body must be closed")
    ids = store.absvars(body)
    if ids != set(range(len(ids))):
        raise ValueError(f"abstraction variables must be dense from 0, got {sorted(ids)}")
    return Abstraction(name, body, len(ids))


def _usages(store: ExprStore, body: NodeId, arity: int) -> list[int]:
    counts = [0] * arity
    stack = [body]
    while stack:
        m = stack.pop()
        if not store.has_meta[m]:
            continue
        if store.kind[m] == Kind.ABSVAR:
            counts[store.a[m]] += 1
        else:
            stack.extend(store.children(m))
    return counts


def _cost_star(store: ExprStore, body: NodeId, params: CostParams) -> int:
    return store.cost_of(body, params.starred())


def local_utility(store: ExprStore, A: Abstraction, args: Sequence[NodeId] | dict,
                  params: CostParams | None = None) -> int:
    """Compression from rewriting one match; `args` lists the bound values or is a mapping."""
    params = params or store.params
    if isinstance(args, dict):
        args = [args[store.absvar(j)] for j in range(A.arity)]
    uses = _usages(store, A.body, A.arity)
    out = _cost_star(store, A.body, params) - (params.prim(A.name) + params.cost_app * A.arity)
    for u, x in zip(uses, args):
        out += (u - 1) * store.cost_of(x, params)
    return out


@dataclass
class RewritePlan:
    util_r: dict = field(default_factory=dict)
    util_a: dict = field(default_factory=dict)
    util_star: dict = field(default_factory=dict)
    accepted: set = field(default_factory=set)
    args: dict = field(default_factory=dict)
    local: dict = field(default_factory=dict)


@dataclass
class RewriteResult:
    corpus: Corpus
    utility: int
    uses: int
    plan: RewritePlan
    program_gain: list


class _Rewriter:
    def __init__(self, store: ExprStore, A: Abstraction, params: CostParams):
        self.store = store
        self.A = A
        self.params = params
        self.fn = store.prim(A.name)
        self.uses = _usages(store, A.body, A.arity)
        self.base = _cost_star(store, A.body, params) - (params.prim(A.name) + params.cost_app * A.arity)
        self.head_kind = store.kind[A.body]
        self.plan = RewritePlan()
        self.args: dict[NodeId, Optional[tuple]] = self.plan.args
        self.local: dict[NodeId, int] = self.plan.local
        self.rewritten: dict[NodeId, NodeId] = {}
        self.count: dict[NodeId, int] = {}

    def match(self, n: NodeId) -> Optional[tuple]:
        got = self.args.get(n, False)
        if got is not False:
            return got
        s = self.store
        out = None
        if s.kind[n] == self.head_kind or self.head_kind == Kind.ABSVAR:
            l = lambda_unify(s, self.A.body, n)
            if l is not None and is_valid_match(s, l):
                out = tuple(l[s.absvar(j)] for j in range(self.A.arity))
        self.args[n] = out
        return out

    def _deps(self, n: NodeId) -> tuple:
        args = self.match(n)
        kids = self.store.children(n)
        return kids + args if args else kids

    def util(self, root: NodeId) -> int:
        plan, s = self.plan, self.store
        ustar = plan.util_star
        stack = [root]
        while stack:
            m = stack[-1]
            if m in ustar:
                stack.pop()
                continue
            pending = [d for d in self._deps(m) if d not in ustar]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            ur = sum(ustar[c] for c in s.children(m))
            plan.util_r[m] = ur
            args = self.args[m]
            if args is not None:
                loc = self.base
                for u, x in zip(self.uses, args):
                    loc += (u - 1) * s.cost_of(x, self.params)
                self.local[m] = loc
                ua = loc + sum(ustar[x] for x in args)
                plan.util_a[m] = ua
                ustar[m] = max(ur, ua)
            else:
                ustar[m] = ur
        return ustar[root]

    def _accept(self, m: NodeId) -> bool:
        # ties go to the outermost rewrite when it compresses on its own
        ua = self.plan.util_a.get(m)
        if ua is None:
            return False
        ur = self.plan.util_r[m]
        return ua > ur or (ua == ur and self.local[m] > 0)

    def extract(self, root: NodeId) -> NodeId:
        s, done, count = self.store, self.rewritten, self.count
        stack = [root]
        while stack:
            m = stack[-1]
            if m in done:
                stack.pop()
                continue
            acc = self._accept(m)
            deps = self.args[m] if acc else s.children(m)
            pending = [d for d in deps if d not in done]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            if acc:
                self.plan.accepted.add(m)
                done[m] = s.apps(self.fn, *(done[x] for x in deps))
                count[m] = 1 + sum(count[x] for x in deps)
            elif deps:
                done[m] = s.rebuild(m, *(done[x] for x in deps))
                count[m] = sum(count[x] for x in deps)
            else:
                done[m] = m
                count[m] = 0
        return done[root]


def rewrite_corpus(corpus: Corpus, A: Abstraction, params: CostParams | None = None) -> RewriteResult:
    """Rewrite every program with `A` under the optimal non-conflicting match set."""
    s = corpus.store
    params = params or s.params
    rw = _Rewriter(s, A, params)
    gains = [rw.util(p.root) for p in corpus.programs]
    roots = [rw.extract(p.root) for p in corpus.programs]
    uses = sum(rw.count[p.root] for p in corpus.programs)
    total = sum(gains) - s.cost_of(A.body, params)
    return RewriteResult(corpus.with_roots(roots), total, uses, rw.plan, gains)


def utility(A: Abstraction, corpus: Corpus, config: SearchConfig | None = None,
            params: CostParams | None = None) -> int:
    config = config or SearchConfig()
    s = corpus.store
    params = params or s.params
    res = rewrite_corpus(corpus, A, params)
    if config.utility_mode == "sum":
        return res.utility
    return min_task_utility(corpus, res.corpus, A, params)


def min_task_utility(before: Corpus, after: Corpus, A: Abstraction,
                     params: CostParams | None = None) -> int:
    s = before.store
    params = params or s.params
    best_before: dict[str, int] = {}
    best_after: dict[str, int] = {}
    for p, q in zip(before.programs, after.programs):
        cb = s.cost_of(p.root, params)
        ca = s.cost_of(q.root, params)
        best_before[p.task] = min(best_before.get(p.task, cb), cb)
        best_after[p.task] = min(best_after.get(p.task, ca), ca)
    return sum(best_before.values()) - (s.cost_of(A.body, params) + sum(best_after.values()))


def compression_ratio(before: Corpus, after: Corpus, params: CostParams | None = None) -> Fraction:
    b = before.total_cost(params)
    a = after.total_cost(params)
    if a == 0:
        return Fraction(1) if b == 0 else Fraction(b, 1)
    return Fraction(b, a)


def inline(store: ExprStore, e: NodeId, library: dict[str, Abstraction]) -> NodeId:
    """Expand every saturated use of a library function back into its body."""
    memo: dict[NodeId, NodeId] = {}

    def go(n: NodeId) -> NodeId:
        got = memo.get(n)
        if got is not None:
            return got
        k = store.kind[n]
        if k == Kind.APP or k == Kind.PRIM:
            head, args = store.spine(n)
            args = [go(x) for x in args]
            A = library.get(store.symbol(head)) if store.kind[head] == Kind.PRIM else None
            if A is not None and len(args) >= A.arity:
                mapping = {store.absvar(j): args[j] for j in range(A.arity)}
                out = store.apps(go(substitute(store, mapping, A.body)), *args[A.arity:])
            else:
                out = store.apps(go(head) if store.kind[head] == Kind.LAM else head, *args)
        elif k == Kind.LAM:
            out = store.lam(go(store.a[n]))
        else:
            out = n
        memo[n] = out
        return out

    return go(e)


@dataclass
class LearnedAbstraction:
    abstraction: Abstraction
    body: str
    utility: int
    num_uses: int
    stats: SearchStats


@dataclass
class LibraryResult:
    abstractions: list
    rewritten: Corpus
    utilities: list
    original_cost: int
    final_cost: int
    ratio: Fraction

    @property
    def library(self) -> list[Abstraction]:
        return [x.abstraction for x in self.abstractions]


def _corpus_symbols(corpus: Corpus) -> set[str]:
    s = corpus.store
    seen: set[int] = set()
    out: set[str] = set()
    stack = list(corpus.roots)
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if s.kind[n] == Kind.PRIM:
            out.add(s.symbol(n))
        stack.extend(s.children(n))
    return out


def compress_iterated(corpus: Corpus, iterations: int, config: SearchConfig | None = None) -> LibraryResult:
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    config = config or SearchConfig()
    s = corpus.store
    taken = _corpus_symbols(corpus)
    current = corpus
    learned: list[LearnedAbstraction] = []
    counter = 0
    for _ in range(iterations):
        res = cts_search(current, config)
        if not res.found or res.utility <= 0:
            break
        while f"fn_{counter}" in taken:
            counter += 1
        name = f"fn_{counter}"
        taken.add(name)
        A = Abstraction(name, res.body, res.arity)
        rw = rewrite_corpus(current, A)
        learned.append(LearnedAbstraction(A, s.show(A.body), res.utility, rw.uses, res.stats))
        current = rw.corpus
    before, after = corpus.total_cost(), current.total_cost()
    return LibraryResult(learned, current, [x.utility for x in learned], before, after,
                         compression_ratio(corpus, current))
