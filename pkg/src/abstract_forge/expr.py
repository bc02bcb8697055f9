"""Hash-consed lambda-calculus terms, corpora, and the surface syntax."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Mapping, Sequence

NodeId = int

NO_FREE = 1 << 30  # fvmin sentinel for closed nodes


class Kind(IntEnum):
    LAM = 0
    APP = 1
    VAR = 2
    SHIFTED = 3
    PRIM = 4
    ABSVAR = 5
    HOLE = 6


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    cost_lam: int = 1
    cost_app: int = 1
    cost_var: int = 100
    cost_absvar: int = 100
    cost_prim_default: int = 100
    cost_prim: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        costs = [self.cost_lam, self.cost_app, self.cost_var, self.cost_absvar, self.cost_prim_default]
        if any(c < 0 for c in costs) or any(c < 0 for c in self.cost_prim.values()):
            raise ValueError("costs must be non-negative")

    def prim(self, symbol: str) -> int:
        return self.cost_prim.get(symbol, self.cost_prim_default)

    def starred(self) -> CostParams:
        return CostParams(self.cost_lam, self.cost_app, self.cost_var, 0,
                          self.cost_prim_default, dict(self.cost_prim))

    def __hash__(self):
        return hash((self.cost_lam, self.cost_app, self.cost_var, self.cost_absvar,
                     self.cost_prim_default, tuple(sorted(self.cost_prim.items()))))


DEFAULT_COSTS = CostParams()

_EMPTY = frozenset()
_TOKEN = re.compile(r"\(|\)|[^\s()]+")


class ExprStore:
    """Append-only arena of structurally unique nodes.

    Node ids are plain ints; children always have smaller ids than their
    parents, so ascending id order is a valid bottom-up order.  Per-node
    caches (cost, terminal count, depth, free variables) are filled in at
    insertion time.
    """

    def __init__(self, params: CostParams = DEFAULT_COSTS):
        self.params = params
        self.kind: list[int] = []
        self.a: list[int] = []
        self.b: list[int] = []
        self.cost: list[int] = []
        self.size: list[int] = []
        self.depth: list[int] = []
        self.fv: list[frozenset] = []
        self.fvmin: list[int] = []
        self.has_meta: list[bool] = []
        self.has_shifted: list[bool] = []
        self.symbols: list[str] = []
        self._sym_ids: dict[str, int] = {}
        self._ids: dict[tuple, int] = {}
        self._fv_intern: dict[frozenset, frozenset] = {_EMPTY: _EMPTY}
        self._lock = threading.Lock()
        # memo tables used by the shift/unify layer, keyed by (node, depth)
        self.memo: dict[str, dict] = {}

    def __len__(self) -> int:
        return len(self.kind)

    # construction

    def _intern(self, key: tuple) -> NodeId:
        found = self._ids.get(key)
        if found is not None:
            return found
        with self._lock:
            found = self._ids.get(key)
            if found is not None:
                return found
            return self._insert(key)

    def _insert(self, key: tuple) -> NodeId:
        k, a, b = key
        p = self.params
        if k == Kind.APP:
            cost = p.cost_app + self.cost[a] + self.cost[b]
            size = self.size[a] + self.size[b]
            depth = 1 + max(self.depth[a], self.depth[b])
            fa, fb = self.fv[a], self.fv[b]
            fv = fa if not fb else fb if not fa else fa | fb
            meta = self.has_meta[a] or self.has_meta[b]
            shifted = self.has_shifted[a] or self.has_shifted[b]
        elif k == Kind.LAM:
            cost = p.cost_lam + self.cost[a]
            size = self.size[a]
            depth = 1 + self.depth[a]
            fb = self.fv[a]
            fv = frozenset(i - 1 for i in fb if i > 0) if fb else _EMPTY
            meta = self.has_meta[a]
            shifted = self.has_shifted[a]
        else:
            depth, meta, shifted, fv = 0, False, False, _EMPTY
            if k == Kind.VAR:
                cost, size, fv = p.cost_var, 1, frozenset((a,))
            elif k == Kind.PRIM:
                cost, size = p.prim(self.symbols[a]), 1
            elif k == Kind.SHIFTED:
                cost, size, shifted = p.cost_var, 1, True
            elif k == Kind.ABSVAR:
                cost, size, meta = p.cost_absvar, 1, True
            else:
                cost, size, meta = 0, 0, True
        fv = self._fv_intern.setdefault(fv, fv)
        nid = len(self.kind)
        self.kind.append(k)
        self.a.append(a)
        self.b.append(b)
        self.cost.append(cost)
        self.size.append(size)
        self.depth.append(depth)
        self.fv.append(fv)
        self.fvmin.append(min(fv) if fv else NO_FREE)
        self.has_meta.append(meta)
        self.has_shifted.append(shifted)
        self._ids[key] = nid
        return nid

    def lam(self, body: NodeId) -> NodeId:
        return self._intern((Kind.LAM, body, -1))

    def app(self, f: NodeId, x: NodeId) -> NodeId:
        return self._intern((Kind.APP, f, x))

    def apps(self, f: NodeId, *args: NodeId) -> NodeId:
        for x in args:
            f = self._intern((Kind.APP, f, x))
        return f

    def var(self, i: int) -> NodeId:
        if i < 0:
            raise ValueError(f"de Bruijn index must be >= 0, got {i}")
        return self._intern((Kind.VAR, i, -1))

    def shifted(self, i: int) -> NodeId:
        return self._intern((Kind.SHIFTED, i, -1))

    def prim(self, symbol: str) -> NodeId:
        sid = self._sym_ids.get(symbol)
        if sid is None:
            with self._lock:
                sid = self._sym_ids.get(symbol)
                if sid is None:
                    sid = len(self.symbols)
                    self.symbols.append(symbol)
                    self._sym_ids[symbol] = sid
        return self._intern((Kind.PRIM, sid, -1))

    def absvar(self, i: int) -> NodeId:
        return self._intern((Kind.ABSVAR, i, -1))

    def hole(self, i: int) -> NodeId:
        return self._intern((Kind.HOLE, i, -1))

    def rebuild(self, n: NodeId, a: NodeId, b: NodeId = -1) -> NodeId:
        """Same node kind as `n` with new children."""
        return self._intern((self.kind[n], a, b))

    # inspection

    def children(self, n: NodeId) -> tuple[NodeId, ...]:
        k = self.kind[n]
        if k == Kind.APP:
            return (self.a[n], self.b[n])
        if k == Kind.LAM:
            return (self.a[n],)
        return ()

    def symbol(self, n: NodeId) -> str:
        return self.symbols[self.a[n]]

    def is_program(self, n: NodeId) -> bool:
        return not self.fv[n] and not self.has_meta[n] and not self.has_shifted[n]

    def spine(self, n: NodeId) -> tuple[NodeId, list[NodeId]]:
        """Split a curried application into head and argument list."""
        args = []
        while self.kind[n] == Kind.APP:
            args.append(self.b[n])
            n = self.a[n]
        args.reverse()
        return n, args

    def absvars(self, n: NodeId) -> set[int]:
        out: set[int] = set()
        stack = [n]
        while stack:
            m = stack.pop()
            if not self.has_meta[m]:
                continue
            k = self.kind[m]
            if k == Kind.ABSVAR:
                out.add(self.a[m])
            else:
                stack.extend(self.children(m))
        return out

    def holes(self, n: NodeId) -> list[int]:
        out = []
        stack = [n]
        while stack:
            m = stack.pop()
            if not self.has_meta[m]:
                continue
            if self.kind[m] == Kind.HOLE:
                out.append(self.a[m])
            else:
                stack.extend(reversed(self.children(m)))
        return out

    # surface syntax

    def parse(self, text: str) -> NodeId:
        tokens = _TOKEN.findall(text)
        if not tokens:
            raise ParseError("empty input")
        stack: list[list] = []
        result = None
        for pos, tok in enumerate(tokens):
            if result is not None:
                raise ParseError(f"trailing input after expression: {tok!r}")
            if tok == "(":
                stack.append([])
            elif tok == ")":
                if not stack:
                    raise ParseError("unbalanced ')'")
                node = self._from_list(stack.pop())
                if stack:
                    stack[-1].append(node)
                else:
                    result = node
            else:
                if tok == "lam" and stack and not stack[-1]:
                    stack[-1].append(_LAM)
                    continue
                atom = self._atom(tok)
                if stack:
                    stack[-1].append(atom)
                else:
                    result = atom
        if stack:
            raise ParseError("unbalanced '(': missing ')'")
        return result

    def _from_list(self, items: list) -> NodeId:
        if not items:
            raise ParseError("empty list '()'")
        if items[0] is _LAM:
            if len(items) != 2:
                raise ParseError("(lam ...) takes exactly one body")
            return self.lam(items[1])
        if any(x is _LAM for x in items):
            raise ParseError("'lam' may only head a list")
        return self.apps(items[0], *items[1:])

    def _atom(self, tok: str) -> NodeId:
        head = tok[0]
        if head == "$":
            if not tok[1:].isdigit():
                raise ParseError(f"malformed variable {tok!r}")
            return self.var(int(tok[1:]))
        if head == "#":
            try:
                return self.shifted(int(tok[1:]))
            except ValueError:
                raise ParseError(f"malformed shifted variable {tok!r}") from None
        if tok.startswith("??"):
            rest = tok[2:]
            if rest and not rest.isdigit():
                raise ParseError(f"malformed hole {tok!r}")
            return self.hole(int(rest) if rest else 0)
        if head == "α":
            if not tok[1:].isdigit():
                raise ParseError(f"malformed abstraction variable {tok!r}")
            return self.absvar(int(tok[1:]))
        if tok == "lam":
            raise ParseError("'lam' must head a list")
        return self.prim(tok)

    def parse_program(self, text: str) -> NodeId:
        n = self.parse(text)
        if not self.is_program(n):
            raise ParseError(f"not a closed program: {text!r}")
        return n

    def show(self, n: NodeId) -> str:
        out: list[str] = []
        self._show(n, out)
        return "".join(out)

    def _show(self, n: NodeId, out: list[str]) -> None:
        k = self.kind[n]
        if k == Kind.APP:
            head, args = self.spine(n)
            out.append("(")
            self._show(head, out)
            for x in args:
                out.append(" ")
                self._show(x, out)
            out.append(")")
        elif k == Kind.LAM:
            out.append("(lam ")
            self._show(self.a[n], out)
            out.append(")")
        elif k == Kind.VAR:
            out.append(f"${self.a[n]}")
        elif k == Kind.PRIM:
            out.append(self.symbols[self.a[n]])
        elif k == Kind.SHIFTED:
            out.append(f"#{self.a[n]}")
        elif k == Kind.ABSVAR:
            out.append(f"α{self.a[n]}")
        else:
            out.append(f"??{self.a[n]}")

    # costs

    def cost_of(self, n: NodeId, params: CostParams | None = None) -> int:
        if params is None or params == self.params:
            return self.cost[n]
        return _cost_with(self, n, params)

    def cost_star(self, n: NodeId) -> int:
        """Cost with abstraction variables free of charge."""
        if not self.has_meta[n]:
            return self.cost[n]
        return self.cost[n] - self.params.cost_absvar * _absvar_uses(self, n)


_LAM = object()


def _absvar_uses(store: ExprStore, n: NodeId) -> int:
    count = 0
    stack = [n]
    while stack:
        m = stack.pop()
        if not store.has_meta[m]:
            continue
        k = store.kind[m]
        if k == Kind.ABSVAR:
            count += 1
        elif k == Kind.APP:
            stack.append(store.a[m])
            stack.append(store.b[m])
        elif k == Kind.LAM:
            stack.append(store.a[m])
    return count


def _cost_with(store: ExprStore, n: NodeId, params: CostParams) -> int:
    memo: dict[int, int] = {}
    for m in _postorder(store, n):
        k = store.kind[m]
        if k == Kind.APP:
            c = params.cost_app + memo[store.a[m]] + memo[store.b[m]]
        elif k == Kind.LAM:
            c = params.cost_lam + memo[store.a[m]]
        elif k in (Kind.VAR, Kind.SHIFTED):
            c = params.cost_var
        elif k == Kind.PRIM:
            c = params.prim(store.symbols[store.a[m]])
        elif k == Kind.ABSVAR:
            c = params.cost_absvar
        else:
            c = 0
        memo[m] = c
    return memo[n]


def _postorder(store: ExprStore, root: NodeId) -> list[NodeId]:
    """Distinct nodes reachable from root, children before parents."""
    seen = set()
    stack = [root]
    while stack:
        m = stack.pop()
        if m in seen:
            continue
        seen.add(m)
        stack.extend(store.children(m))
    return sorted(seen)


def cost(store: ExprStore, e: NodeId, params: CostParams | None = None) -> int:
    return store.cost_of(e, params)


def cost_star(store: ExprStore, e: NodeId) -> int:
    return store.cost_star(e)


@dataclass(frozen=True)
class Program:
    root: NodeId
    task: str


@dataclass
class Corpus:
    store: ExprStore
    programs: list[Program]

    @classmethod
    def from_strings(cls, texts: Sequence[str], store: ExprStore | None = None,
                     tasks: Sequence[str | None] | None = None) -> Corpus:
        store = store if store is not None else ExprStore()
        tasks = tasks if tasks is not None else [None] * len(texts)
        programs = []
        for i, (text, task) in enumerate(zip(texts, tasks)):
            root = store.parse_program(text)
            programs.append(Program(root, task if task is not None else f"program_{i}"))
        return cls(store, programs)

    @classmethod
    def from_json(cls, data, store: ExprStore | None = None) -> Corpus:
        if isinstance(data, list):
            return cls.from_strings(data, store)
        if isinstance(data, dict) and isinstance(data.get("programs"), list):
            texts, tasks = [], []
            for entry in data["programs"]:
                if isinstance(entry, str):
                    texts.append(entry)
                    tasks.append(None)
                elif isinstance(entry, dict) and isinstance(entry.get("body"), str):
                    texts.append(entry["body"])
                    tasks.append(entry.get("task"))
                else:
                    raise ParseError(f"bad program entry: {entry!r}")
            return cls.from_strings(texts, store, tasks)
        raise ParseError("corpus JSON must be an array of strings or {'programs': [...]}")

    @classmethod
    def load(cls, path: str | Path, store: ExprStore | None = None) -> Corpus:
        with open(path) as f:
            data = json.load(f)
        return cls.from_json(data, store)

    def to_json(self) -> dict:
        return {"programs": [{"body": self.store.show(p.root), "task": p.task}
                             for p in self.programs]}

    def with_roots(self, roots: Sequence[NodeId]) -> Corpus:
        return Corpus(self.store, [Program(r, p.task) for r, p in zip(roots, self.programs)])

    @property
    def roots(self) -> list[NodeId]:
        return [p.root for p in self.programs]

    def __len__(self) -> int:
        return len(self.programs)

    def show(self) -> list[str]:
        return [self.store.show(p.root) for p in self.programs]

    def total_cost(self, params: CostParams | None = None) -> int:
        return sum(self.store.cost_of(p.root, params) for p in self.programs)


@dataclass(frozen=True)
class CorpusStats:
    count: int
    mean_length: float
    mean_depth: float


def corpus_stats(corpus: Corpus) -> CorpusStats:
    if not corpus.programs:
        return CorpusStats(0, 0.0, 0.0)
    s = corpus.store
    n = len(corpus.programs)
    length = sum(s.size[p.root] for p in corpus.programs)
    depth = sum(s.depth[p.root] for p in corpus.programs)
    return CorpusStats(n, length / n, depth / n)


def subtrees(corpus: Corpus) -> Iterator[tuple[int, NodeId]]:
    """Every subtree occurrence, program by program in preorder."""
    s = corpus.store
    for pid, prog in enumerate(corpus.programs):
        stack = [prog.root]
        while stack:
            n = stack.pop()
            yield pid, n
            stack.extend(reversed(s.children(n)))
