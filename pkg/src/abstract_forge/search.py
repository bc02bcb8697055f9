"""Top-down branch-and-bound search for the most compressive abstraction.

Partial abstractions are bodies with holes.  Each partial carries a
columnar match table: one row per distinct corpus subtree the partial
matches, with the subtree each hole covers and the value each abstraction
variable binds.  Expanding the most recent hole partitions the rows by
the shape of the covered subtree, so children never re-run unification.
"""

from __future__ import annotations

import heapq
import itertools
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from . import kernels as K
from .expr import NO_FREE, Corpus, ExprStore, Kind, NodeId
from .unify import downshift, shift_free

PRUNE_REASONS = ("upper_bound", "arg_capture", "redundant_args", "single_task",
                 "free_var", "arity_limit")

UTILITY_MODES = ("sum", "min-task")


@dataclass
class SearchConfig:
    max_arity: int = 3
    utility_mode: str = "sum"
    opt_upper_bound: bool = True
    opt_arg_capture: bool = True
    opt_redundant_args: bool = True
    opt_single_task_prune: bool = True
    workers: int = 1
    node_budget: Optional[int] = None
    time_budget: Optional[float] = None

    def __post_init__(self):
        if self.max_arity < 0:
            raise ValueError("max_arity must be >= 0")
        if self.utility_mode not in UTILITY_MODES:
            raise ValueError(f"utility_mode must be one of {UTILITY_MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.node_budget is not None and self.node_budget < 0:
            raise ValueError("node_budget must be >= 0")
        if self.time_budget is not None and self.time_budget < 0:
            raise ValueError("time_budget must be >= 0")

    @classmethod
    def from_env(cls, **kw) -> SearchConfig:
        threads = os.environ.get("ABSTRACT_FORGE_THREADS")
        if threads and "workers" not in kw:
            kw["workers"] = int(threads)
        return cls(**kw)


class TracePoint(NamedTuple):
    nodes: int
    utility: int
    cost: int
    body: str


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    prunes: dict = field(default_factory=lambda: dict.fromkeys(PRUNE_REASONS, 0))
    trace: list = field(default_factory=list)
    completions: int = 0
    exhausted: bool = True
    elapsed: float = 0.0

    def as_dict(self) -> dict:
        return {"nodes_expanded": self.nodes_expanded, "prunes": dict(self.prunes),
                "completions": self.completions, "exhausted": self.exhausted,
                "elapsed": round(self.elapsed, 6),
                "trace": [list(t[:2]) for t in self.trace]}


@dataclass(frozen=True)
class MatchLocation:
    node: NodeId
    occurrences: int
    tasks: frozenset
    mapping: dict


@dataclass(eq=False)
class MatchTable:
    roots: np.ndarray
    holes: list
    args: list
    origins: list

    def __len__(self) -> int:
        return len(self.roots)

    def columns(self) -> list:
        return [self.roots, *self.holes, *self.args, *self.origins]

    @classmethod
    def from_columns(cls, cols: list, n_holes: int, arity: int) -> MatchTable:
        return cls(cols[0], cols[1:1 + n_holes], cols[1 + n_holes:1 + n_holes + arity],
                   cols[1 + n_holes + arity:])


@dataclass(eq=False)
class PartialAbstraction:
    """Abstraction body with holes; `holes` lists (hole id, lambda depth), top last."""

    body: NodeId
    holes: tuple
    arity: int
    table: MatchTable
    bound: int
    next_hole: int

    @property
    def complete(self) -> bool:
        return not self.holes


@dataclass
class SearchResult:
    body: Optional[NodeId]
    utility: int
    arity: int
    stats: SearchStats
    store: ExprStore

    @property
    def found(self) -> bool:
        return self.body is not None

    def show(self) -> str:
        return self.store.show(self.body) if self.body is not None else "<none>"


class CorpusIndex:
    """Per-corpus numeric views shared by every partial in one search."""

    def __init__(self, corpus: Corpus):
        s = corpus.store
        self.corpus = corpus
        self.store = s
        roots = corpus.roots
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(s.children(n))
        nodes = np.array(sorted(seen), dtype=np.int64)
        self.nodes = nodes
        m = len(s)
        self.kind = np.array(s.kind, dtype=np.int64)
        self.a = np.array(s.a, dtype=np.int64)
        self.b = np.array(s.b, dtype=np.int64)
        self.cost = np.array(s.cost, dtype=np.int64)
        self.depth = np.array(s.depth, dtype=np.int64)
        self.fvmin = np.array(s.fvmin, dtype=np.int64)

        task_names = sorted({p.task for p in corpus.programs})
        task_id = {t: i for i, t in enumerate(task_names)}
        self.task_names = task_names
        self.prog_task = np.array([task_id[p.task] for p in corpus.programs], dtype=np.int64)

        occ = [0] * m
        masks = [0] * m
        for r, p in zip(roots, corpus.programs):
            occ[r] += 1
            masks[r] |= 1 << task_id[p.task]
        kind, a, b = s.kind, s.a, s.b
        for n in reversed(nodes.tolist()):
            k = kind[n]
            if k == Kind.APP:
                for c in (a[n], b[n]):
                    occ[c] += occ[n]
                    masks[c] |= masks[n]
            elif k == Kind.LAM:
                c = a[n]
                occ[c] += occ[n]
                masks[c] |= masks[n]
        self.occ = np.array(occ, dtype=np.int64)
        self.task_mask = masks
        first = np.zeros(m, dtype=np.int64)
        multi = np.zeros(m, dtype=bool)
        for n in nodes.tolist():
            mk = masks[n]
            first[n] = (mk & -mk).bit_length() - 1
            multi[n] = (mk & (mk - 1)) != 0
        self.first_task = first
        self.multi_task = multi
        self.wcost = self.cost * self.occ

        # dense bottom-up layout for the rewrite dynamic program
        big = len(nodes)
        pos = np.full(m, big, dtype=np.int64)
        pos[nodes] = np.arange(big, dtype=np.int64)
        self.pos = pos
        nk = self.kind[nodes]
        da = np.full(big, big, dtype=np.int64)
        db = np.full(big, big, dtype=np.int64)
        inner = (nk == Kind.APP) | (nk == Kind.LAM)
        da[inner] = pos[self.a[nodes[inner]]]
        isapp = nk == Kind.APP
        db[isapp] = pos[self.b[nodes[isapp]]]
        self.da, self.db = da, db
        ndepth = self.depth[nodes]
        order = np.argsort(ndepth, kind="stable")
        cuts = np.flatnonzero(np.diff(ndepth[order])) + 1
        self.levels = np.split(order, cuts) if big else []
        self.level_of = ndepth
        self.prog_pos = pos[np.array(roots, dtype=np.int64)] if roots else np.zeros(0, np.int64)
        self.prog_cost = self.cost[np.array(roots, dtype=np.int64)] if roots else np.zeros(0, np.int64)
        porder = np.argsort(self.prog_task, kind="stable")
        self.task_order = porder
        st = self.prog_task[porder]
        self.task_starts = np.concatenate(([0], np.flatnonzero(np.diff(st)) + 1)) if len(st) else st

    def tasks_of(self, n: NodeId) -> frozenset:
        mk = self.task_mask[n]
        return frozenset(t for i, t in enumerate(self.task_names) if mk >> i & 1)


def _plug(store: ExprStore, body: NodeId, target: NodeId, new: NodeId) -> NodeId:
    if body == target:
        return new
    if not store.has_meta[body]:
        return body
    k = store.kind[body]
    if k == Kind.APP:
        return store.app(_plug(store, store.a[body], target, new),
                         _plug(store, store.b[body], target, new))
    if k == Kind.LAM:
        return store.lam(_plug(store, store.a[body], target, new))
    return body


class _Child(NamedTuple):
    """A refinement of one partial, before its body is built."""

    kind: str          # "prim", "var", "app", "lam", "fresh", "reuse"
    key: int
    cols: list
    holes: tuple
    arity: int
    bound: int
    parent_body: NodeId
    hole: int
    next_hole: int


_TAGS = ("prim", "var", "app", "lam")


class Searcher:
    def __init__(self, corpus: Corpus, config: SearchConfig | None = None):
        self.config = config or SearchConfig()
        self.index = CorpusIndex(corpus)
        self.store = corpus.store
        self.stats = SearchStats()
        params = self.store.params
        self._fn_cost = params.cost_prim_default
        self._app_cost = params.cost_app
        self._best: tuple = (0, 0, "")      # (utility, -cost, printed) of the incumbent
        self._best_body: Optional[NodeId] = None
        self._best_arity = 0
        self._lock = threading.Lock()
        self._seq = itertools.count()
        self._heap: list = []

    # public helpers

    def root(self) -> PartialAbstraction:
        idx = self.index
        roots = idx.nodes.copy()
        table = MatchTable(roots, [roots.copy()], [], [])
        return PartialAbstraction(self.store.hole(0), ((0, 0),), 0, table,
                                  K.weighted_sum(idx.wcost, roots), 1)

    def locations(self, p: PartialAbstraction) -> list[MatchLocation]:
        s, idx = self.store, self.index
        out = []
        for i, r in enumerate(p.table.roots.tolist()):
            mapping = {}
            for hcol, (hid, d) in zip(p.table.holes, p.holes):
                v = int(hcol[i])
                for _ in range(d):
                    v = downshift(s, v, 0)
                mapping[s.hole(hid)] = v
            for j, acol in enumerate(p.table.args):
                mapping[s.absvar(j)] = int(acol[i])
            out.append(MatchLocation(r, int(idx.occ[r]), idx.tasks_of(r), mapping))
        return out

    # expansion

    def children(self, p: PartialAbstraction, threshold: Optional[int] = None) -> list[_Child]:
        """One-step refinements of the most recent hole.

        Children whose bound does not exceed `threshold` are counted as
        pruned and never gathered.
        """
        idx, stats = self.index, self.stats
        t = p.table
        hid, depth = p.holes[-1]
        h = len(p.holes) - 1
        o = t.holes[h]
        groups, alpha_rows, alpha_bound, n_free = K.split_hole(
            o, t.roots, depth, idx.kind, idx.a, idx.fvmin, idx.wcost)
        stats.prunes["free_var"] += n_free
        nb = 1 + h
        cols = [t.roots, *t.holes[:h], *t.args, *t.origins]
        rest = p.holes[:-1]
        info = (p.body, hid, p.next_hole)
        out = []
        for tag, key, rows, bound in groups:
            if threshold is not None and bound <= threshold:
                stats.prunes["upper_bound"] += 1
                continue
            sub = K.take(cols, rows)
            kind = _TAGS[tag]
            holes = rest
            if kind == "app":
                ob = o[rows]
                sub[nb:nb] = [idx.b[ob], idx.a[ob]]
                holes = rest + ((-1, depth), (-2, depth))
            elif kind == "lam":
                sub[nb:nb] = [idx.a[o[rows]]]
                holes = rest + ((-1, depth + 1),)
            out.append(_Child(kind, key, sub, holes, p.arity, bound, *info))
        if self.store.kind[p.body] == Kind.HOLE or len(alpha_rows) == 0:
            return out  # a bare abstraction variable is not an abstraction
        oa = o[alpha_rows]
        vals = oa if depth == 0 else self._shift_col(oa, depth)
        for j in range(p.arity):
            keep = np.flatnonzero(t.args[j][alpha_rows] == vals)
            if len(keep) == 0:
                continue
            rows = alpha_rows[keep]
            bound = K.weighted_sum(idx.wcost, t.roots[rows])
            if threshold is not None and bound <= threshold:
                stats.prunes["upper_bound"] += 1
                continue
            out.append(_Child("reuse", j, K.take(cols, rows), rest, p.arity, bound, *info))
        if p.arity >= self.config.max_arity:
            stats.prunes["arity_limit"] += 1
        elif threshold is not None and alpha_bound <= threshold:
            stats.prunes["upper_bound"] += 1
        else:
            sub = K.take(cols, alpha_rows)
            a0 = nb + p.arity
            sub[a0:a0] = [vals]
            sub.append(oa)
            out.append(_Child("fresh", p.arity, sub, rest, p.arity + 1, alpha_bound, *info))
        return out

    def _shift_col(self, oa: np.ndarray, depth: int) -> np.ndarray:
        uniq, inv = np.unique(oa, return_inverse=True)
        s = self.store
        mapped = np.fromiter((shift_free(s, int(u), -depth) for u in uniq.tolist()),
                             dtype=np.int64, count=len(uniq))
        return mapped[inv]

    def materialize(self, c: _Child) -> PartialAbstraction:
        s = self.store
        nh = c.next_hole
        holes = c.holes
        if c.kind == "prim":
            new = s._intern((Kind.PRIM, c.key, -1))
        elif c.kind == "var":
            new = s.var(c.key)
        elif c.kind == "app":
            new = s.app(s.hole(nh), s.hole(nh + 1))
            holes = holes[:-2] + ((nh + 1, holes[-2][1]), (nh, holes[-1][1]))
            nh += 2
        elif c.kind == "lam":
            new = s.lam(s.hole(nh))
            holes = holes[:-1] + ((nh, holes[-1][1]),)
            nh += 1
        else:
            new = s.absvar(c.key)
        body = _plug(s, c.parent_body, s.hole(c.hole), new)
        table = MatchTable.from_columns(c.cols, len(holes), c.arity)
        return PartialAbstraction(body, holes, c.arity, table, c.bound, nh)

    # pruning

    def dominated(self, c: _Child, fresh_only: bool = False) -> Optional[str]:
        """Reason the child is strictly dominated, or None."""
        cfg = self.config
        nb = 1 + len(c.holes)
        args = c.cols[nb:nb + c.arity]
        origins = c.cols[nb + c.arity:]
        if not args:
            return None
        check = range(c.arity - 1, c.arity) if fresh_only else range(c.arity)
        if cfg.opt_arg_capture:
            fvmin = self.index.fvmin
            for j in check:
                col = origins[j]
                if fvmin[col[0]] == NO_FREE and K.constant_column(args[j]):
                    return "arg_capture"
        if cfg.opt_redundant_args:
            for j in check:
                for i in range(j):
                    if K.equal_columns(args[i], args[j]):
                        return "redundant_args"
        return None

    def single_task(self, roots: np.ndarray) -> bool:
        idx = self.index
        return not K.spans_tasks(idx.first_task, idx.multi_task, roots)

    # utility of complete abstractions

    def evaluate(self, body: NodeId, arity: int, cols: list) -> tuple[int, bool]:
        """(utility, rewrites span >= 2 tasks) for a complete abstraction."""
        idx = self.index
        roots = cols[0]
        args = cols[1:1 + arity]
        origins = cols[1 + arity:]
        local = idx.cost[roots] - (self._fn_cost + self._app_cost * arity)
        for oc in origins:
            local = local - idx.cost[oc]
        pos = np.flatnonzero(local > 0)
        body_cost = self.store.cost[body]
        if len(pos) == 0:
            return -body_cost, False
        proots = roots[pos]
        plocal = local[pos]
        levels = idx.level_of[idx.pos[proots]]
        if self.config.utility_mode == "sum" and (len(pos) == 1 or levels.min() == levels.max()):
            gain = int((idx.occ[proots] * plocal).sum())
            return gain - body_cost, K.spans_tasks(idx.first_task, idx.multi_task, proots)
        ustar = self._ustar(proots, plocal, [oc[pos] for oc in origins], levels)
        per_prog = ustar[idx.prog_pos]
        if self.config.utility_mode == "sum":
            gain = int(per_prog.sum())
        else:
            gain = _min_task_gain(idx, per_prog)
        hit = idx.prog_task[per_prog > 0]
        spans = len(hit) > 0 and bool(hit.min() != hit.max())
        return gain - body_cost, spans

    def _ustar(self, proots, plocal, porigins, levels) -> np.ndarray:
        idx = self.index
        big = len(idx.nodes)
        ustar = np.zeros(big + 1, dtype=np.int64)
        ppos = idx.pos[proots]
        odense = [idx.pos[oc] for oc in porigins]
        order = np.argsort(levels, kind="stable")
        lv_sorted = levels[order]
        cuts = np.flatnonzero(np.diff(lv_sorted)) + 1
        groups = {int(levels[g[0]]): g for g in np.split(order, cuts)}
        da, db = idx.da, idx.db
        lo = int(lv_sorted[0])
        for lv in range(lo, len(idx.levels)):
            L = idx.levels[lv]
            if lv > lo:
                ustar[L] = ustar[da[L]] + ustar[db[L]]
            g = groups.get(lv)
            if g is not None:
                ua = plocal[g].copy()
                for od in odense:
                    ua += ustar[od[g]]
                tgt = ppos[g]
                ustar[tgt] = np.maximum(ustar[tgt], ua)
        return ustar

    # arity-zero seeding

    def best_arity_zero(self) -> tuple[int, Optional[NodeId]]:
        idx = self.index
        nodes = idx.nodes
        if len(nodes) == 0:
            return 0, None
        closed = idx.fvmin[nodes] == NO_FREE
        local = idx.cost[nodes] - self._fn_cost
        util = idx.occ[nodes] * local - idx.cost[nodes]
        ok = closed & (local > 0) & (util > 0)
        if self.config.opt_single_task_prune:
            ok &= idx.multi_task[nodes]
        cand = nodes[ok]
        if len(cand) == 0:
            return 0, None
        cutil = util[ok]
        if self.config.utility_mode == "sum":
            best = int(cutil.max())
            tied = cand[cutil == best].tolist()
            body = min(tied, key=lambda n: (self.store.cost[n], self.store.show(n)))
            return best, body
        # min-task utility never exceeds the summed one, so scan in that order
        order = np.argsort(-cutil, kind="stable")
        best_key = (0, 0, "")
        best_body = None
        for i in order.tolist():
            if cutil[i] < best_key[0]:
                break
            n = int(cand[i])
            u, spans = self.evaluate(n, 0, [np.array([n], dtype=np.int64)])
            key = (u, -self.store.cost[n], _neg_str(self.store.show(n)))
            if u > 0 and (spans or not self.config.opt_single_task_prune) and \
                    (best_body is None or _better(key, best_key)):
                best_key, best_body = key, n
        return (best_key[0], best_body) if best_body is not None else (0, None)

    # driver

    def _offer(self, body: NodeId, arity: int, utility: int) -> None:
        s = self.store
        key = (utility, -s.cost[body], _neg_str(s.show(body)))
        with self._lock:
            if self._best_body is not None and not _better(key, self._best):
                return
            if self._best_body is None and utility <= 0:
                return
            self._best = key
            self._best_body = body
            self._best_arity = arity
            self.stats.trace.append(TracePoint(self.stats.nodes_expanded, utility,
                                               s.cost[body], s.show(body)))

    def _process(self, p: PartialAbstraction) -> list:
        cfg = self.config
        pushes = []
        stats = self.stats
        n_rows = len(p.table.roots)
        threshold = self._best[0] if cfg.opt_upper_bound else None
        for c in self.children(p, threshold):
            same_rows = len(c.cols[0]) == n_rows
            if c.arity and not (same_rows and c.kind != "fresh"):
                reason = self.dominated(c, fresh_only=same_rows)
                if reason:
                    stats.prunes[reason] += 1
                    continue
            if c.holes:
                if cfg.opt_single_task_prune and self.single_task(c.cols[0]):
                    stats.prunes["single_task"] += 1
                    continue
                pushes.append(c)
                continue
            stats.completions += 1
            child = self.materialize(c)
            u, spans = self.evaluate(child.body, child.arity, c.cols)
            if cfg.opt_single_task_prune and not spans:
                stats.prunes["single_task"] += 1
                continue
            self._offer(child.body, child.arity, u)
        return pushes

    def run(self) -> SearchResult:
        cfg = self.config
        start = time.perf_counter()
        u0, b0 = self.best_arity_zero()
        if b0 is not None:
            self._offer(b0, 0, u0)
        root = self.root()
        if len(root.table):
            heapq.heappush(self._heap, (-root.bound, next(self._seq), root))
        if cfg.workers == 1:
            self._loop_serial(start)
        else:
            self._loop_parallel(start)
        self.stats.elapsed = time.perf_counter() - start
        if self._best_body is None:
            return SearchResult(None, 0, 0, self.stats, self.store)
        return SearchResult(self._best_body, self._best[0], self._best_arity, self.stats, self.store)

    def _out_of_budget(self, start: float) -> bool:
        cfg = self.config
        n = self.stats.nodes_expanded
        if cfg.node_budget is not None and n >= cfg.node_budget:
            return True
        if cfg.time_budget is not None and n % 1000 == 0 and n:
            return time.perf_counter() - start >= cfg.time_budget
        return False

    def _pop(self) -> Optional[object]:
        """Next entry worth expanding, or None when the queue is drained."""
        heap, stats, cfg = self._heap, self.stats, self.config
        while heap:
            negb, _, item = heapq.heappop(heap)
            if cfg.opt_upper_bound and -negb <= self._best[0]:
                stats.prunes["upper_bound"] += 1
                continue
            return item
        return None

    def _expand(self, item) -> list:
        p = self.materialize(item) if isinstance(item, _Child) else item
        return self._process(p)

    def _loop_serial(self, start: float) -> None:
        heap, stats = self._heap, self.stats
        while True:
            item = self._pop()
            if item is None:
                return
            if self._out_of_budget(start):
                stats.exhausted = False
                return
            stats.nodes_expanded += 1
            for c in self._expand(item):
                heapq.heappush(heap, (-c.bound, next(self._seq), c))

    def _loop_parallel(self, start: float) -> None:
        cond = threading.Condition()
        heap, stats = self._heap, self.stats
        state = {"busy": 0, "stop": False}

        def worker():
            while True:
                with cond:
                    while True:
                        if state["stop"]:
                            return
                        item = self._pop()
                        if item is not None:
                            if self._out_of_budget(start):
                                stats.exhausted = False
                                state["stop"] = True
                                cond.notify_all()
                                return
                            stats.nodes_expanded += 1
                            state["busy"] += 1
                            break
                        if state["busy"] == 0:
                            cond.notify_all()
                            return
                        cond.wait()
                try:
                    pushes = self._expand(item)
                finally:
                    with cond:
                        state["busy"] -= 1
                        cond.notify_all()
                with cond:
                    for c in pushes:
                        heapq.heappush(heap, (-c.bound, next(self._seq), c))
                    cond.notify_all()

        threads = [threading.Thread(target=worker, daemon=True) for _ in range(self.config.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()


class _NegStr(str):
    """String with reversed ordering, so larger keys mean smaller text."""

    def __lt__(self, other):
        return str.__gt__(self, other)

    def __gt__(self, other):
        return str.__lt__(self, other)

    def __le__(self, other):
        return str.__ge__(self, other)

    def __ge__(self, other):
        return str.__le__(self, other)


def _neg_str(s: str) -> _NegStr:
    return _NegStr(s)


def _better(key: tuple, best: tuple) -> bool:
    return key > best


def _min_task_gain(idx: CorpusIndex, per_prog: np.ndarray) -> int:
    if len(per_prog) == 0:
        return 0
    order, starts = idx.task_order, idx.task_starts
    before = idx.prog_cost[order]
    after = before - per_prog[order]
    return int((np.minimum.reduceat(before, starts) - np.minimum.reduceat(after, starts)).sum())


# module-level API


def cts_search(corpus: Corpus, config: SearchConfig | None = None) -> SearchResult:
    return Searcher(corpus, config).run()


def expansions(searcher: Searcher, p: PartialAbstraction) -> Iterator[PartialAbstraction]:
    """Unpruned children of `p`, hole at the top of the stack filled."""
    for c in searcher.children(p):
        yield searcher.materialize(c)


def upper_bound(p: PartialAbstraction) -> int:
    return p.bound


def strictly_dominated(searcher: Searcher, p: PartialAbstraction) -> Optional[str]:
    cols = p.table.columns()
    c = _Child("probe", 0, cols, p.holes, p.arity, p.bound, p.body, -1, p.next_hole)
    return searcher.dominated(c)
