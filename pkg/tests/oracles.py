"""Independent reference implementations used by the test-suite.

Nothing here calls the unifier or the search; matching is done by a
direct structural walk with its own de Bruijn shifting.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from abstract_forge.compression import Abstraction, rewrite_corpus
from abstract_forge.expr import Corpus, ExprStore, Kind

PRIMS = ["f", "g", "h", "k", "a", "b", "c"]


# random terms


def random_term(rng: random.Random, store: ExprStore, prims, budget: int, env: int = 0):
    """Closed-by-construction term with at most `budget` nodes."""
    if budget <= 1:
        if env and rng.random() < 0.35:
            return store.var(rng.randrange(env))
        return store.prim(rng.choice(prims))
    r = rng.random()
    if r < 0.15 and budget >= 2:
        return store.lam(random_term(rng, store, prims, budget - 1, env + 1))
    if r < 0.75:
        left = rng.randint(1, budget - 2) if budget > 2 else 1
        right = max(1, budget - 1 - left)
        f = random_term(rng, store, prims, left, env)
        x = random_term(rng, store, prims, right, env)
        return store.app(f, x)
    if env and rng.random() < 0.35:
        return store.var(rng.randrange(env))
    return store.prim(rng.choice(prims))


def node_count(store: ExprStore, n: int) -> int:
    return 1 + sum(node_count(store, c) for c in store.children(n))


def random_corpus(rng: random.Random, max_nodes: int = 15) -> Corpus:
    """3-6 programs over 3-5 primitives, often sharing a parameterized motif."""
    from abstract_forge.expr import Program
    store = ExprStore()
    prims = rng.sample(PRIMS, rng.randint(3, 5))
    template = _template(rng, store, prims)
    motifs = [random_term(rng, store, prims, rng.randint(3, 7)) for _ in range(2)]
    roots = []
    for _ in range(rng.randint(3, 6)):
        while True:
            t = random_term(rng, store, prims, rng.randint(3, max_nodes))
            r = rng.random()
            if r < 0.5:
                t = _graft(rng, store, t, _instantiate(rng, store, prims, template))
            elif r < 0.75:
                t = _graft(rng, store, t, rng.choice(motifs))
            if node_count(store, t) <= max_nodes:
                break
        roots.append(t)
    return Corpus(store, [Program(r, f"task_{i}") for i, r in enumerate(roots)])


def _template(rng, store, prims):
    """Closed term whose leaves may be slot markers, as (kind, ...) tuples."""
    def go(budget, env):
        if budget <= 1:
            r = rng.random()
            if r < 0.4:
                return ("slot", rng.randrange(2))
            if env and r < 0.6:
                return ("leaf", store.var(rng.randrange(env)))
            return ("leaf", store.prim(rng.choice(prims)))
        if rng.random() < 0.15:
            return ("lam", go(budget - 1, env + 1))
        left = rng.randint(1, max(1, budget - 2))
        return ("app", go(left, env), go(max(1, budget - 1 - left), env))
    return go(rng.randint(3, 7), 0)


def _instantiate(rng, store, prims, tmpl):
    args = [random_term(rng, store, prims, rng.randint(1, 3)) for _ in range(2)]

    def go(t, depth):
        tag = t[0]
        if tag == "slot":
            return _raise(store, args[t[1]], depth)
        if tag == "leaf":
            return t[1]
        if tag == "lam":
            return store.lam(go(t[1], depth + 1))
        return store.app(go(t[1], depth), go(t[2], depth))
    return go(tmpl, 0)


def _raise(store, n, by, depth=0):
    k = store.kind[n]
    if k == Kind.VAR:
        i = store.a[n]
        return store.var(i + by) if i >= depth else n
    if k == Kind.LAM:
        return store.lam(_raise(store, store.a[n], by, depth + 1))
    if k == Kind.APP:
        return store.app(_raise(store, store.a[n], by, depth), _raise(store, store.b[n], by, depth))
    return n


def _graft(rng, store, t, motif):
    """Replace a random closed leaf of t by motif."""
    leaves = [n for n in _positions(store, t) if store.kind[n] == Kind.PRIM]
    if not leaves:
        return t
    target = rng.choice(leaves)
    return _replace_first(store, t, target, motif)[0]


def _replace_first(store, n, target, new):
    if n == target:
        return new, True
    k = store.kind[n]
    if k == Kind.APP:
        f, done = _replace_first(store, store.a[n], target, new)
        if done:
            return store.app(f, store.b[n]), True
        x, done = _replace_first(store, store.b[n], target, new)
        return store.app(store.a[n], x), done
    if k == Kind.LAM:
        b, done = _replace_first(store, store.a[n], target, new)
        return store.lam(b), done
    return n, False


def _positions(store, n):
    out = [n]
    for c in store.children(n):
        out.extend(_positions(store, c))
    return out


# naive shifting and matching


def free_vars(store: ExprStore, n: int, depth: int = 0) -> set:
    k = store.kind[n]
    if k == Kind.VAR:
        i = store.a[n]
        return {i - depth} if i >= depth else set()
    if k == Kind.LAM:
        return free_vars(store, store.a[n], depth + 1)
    if k == Kind.APP:
        return free_vars(store, store.a[n], depth) | free_vars(store, store.b[n], depth)
    return set()


def lower(store: ExprStore, n: int, by: int, depth: int = 0) -> int:
    """Subtract `by` from every free variable index."""
    k = store.kind[n]
    if k == Kind.VAR:
        i = store.a[n]
        return store.var(i - by) if i >= depth else n
    if k == Kind.LAM:
        return store.lam(lower(store, store.a[n], by, depth + 1))
    if k == Kind.APP:
        return store.app(lower(store, store.a[n], by, depth), lower(store, store.b[n], by, depth))
    return n


def naive_match(store: ExprStore, body: int, e: int):
    """Argument tuple (by α index) if `body` rewrites `e`, else None."""
    binding: dict[int, int] = {}

    def walk(a, x, depth):
        k = store.kind[a]
        if k == Kind.ABSVAR:
            fv = free_vars(store, x)
            if any(i < depth for i in fv):
                return False
            v = lower(store, x, depth)
            j = store.a[a]
            if j in binding and binding[j] != v:
                return False
            binding[j] = v
            return True
        if k != store.kind[x]:
            return False
        if k == Kind.APP:
            return walk(store.a[a], store.a[x], depth) and walk(store.b[a], store.b[x], depth)
        if k == Kind.LAM:
            return walk(store.a[a], store.a[x], depth + 1)
        return a == x

    if not walk(body, e, 0):
        return None
    return tuple(binding[j] for j in sorted(binding))


def occurrences(corpus: Corpus) -> dict[int, int]:
    s = corpus.store
    occ: dict[int, int] = {}
    for p in corpus.programs:
        for n in _positions(s, p.root):
            occ[n] = occ.get(n, 0) + 1
    return occ


# exhaustive enumeration of complete abstractions


def generalizations(store: ExprStore, e: int, max_slots: int = 4):
    """Every way to replace an antichain of positions in e by abstraction variables."""
    memo: dict = {}

    def gen(n, depth):
        key = (n, depth)
        if key in memo:
            return memo[key]
        out = []
        if all(i >= depth for i in free_vars(store, n)):
            out.append((("slot",), (lower(store, n, depth),)))
        k = store.kind[n]
        if k == Kind.APP:
            for (f, vf), (x, vx) in itertools.product(gen(store.a[n], depth), gen(store.b[n], depth)):
                if len(vf) + len(vx) <= max_slots:
                    out.append((("app", f, x), vf + vx))
        elif k == Kind.LAM:
            for b, vb in gen(store.a[n], depth + 1):
                out.append((("lam", b), vb))
        else:
            out.append((("leaf", n), ()))
        memo[key] = out
        return out

    for tmpl, vals in gen(e, 0):
        if tmpl == ("slot",):
            continue
        for blocks in _partitions(vals):
            yield _build(store, tmpl, blocks)


def _partitions(vals):
    """Assignments slot -> α index merging only equal values, first-use numbering."""
    n = len(vals)

    def rec(i, assign, reps):
        if i == n:
            yield tuple(assign)
            return
        for j, v in enumerate(reps):
            if v == vals[i]:
                yield from rec(i + 1, assign + [j], reps)
        yield from rec(i + 1, assign + [len(reps)], reps + [vals[i]])

    yield from rec(0, [], [])


def _build(store, tmpl, blocks):
    it = iter(blocks)

    def go(t):
        tag = t[0]
        if tag == "slot":
            return store.absvar(next(it))
        if tag == "leaf":
            return t[1]
        if tag == "lam":
            return store.lam(go(t[1]))
        f = go(t[1])
        return store.app(f, go(t[2]))

    return go(tmpl), max(blocks) + 1 if blocks else 0


@dataclass
class OracleResult:
    utility: int
    bodies: list


def oracle_best(corpus: Corpus, max_arity: int = 2, single_task: bool = True,
                capture: bool = True) -> OracleResult:
    """Maximum utility over every complete abstraction, by brute force."""
    s = corpus.store
    occ = occurrences(corpus)
    nodes = sorted(occ)
    candidates = set()
    for e in nodes:
        for body, arity in generalizations(s, e):
            if arity <= max_arity and not free_vars(s, body):
                candidates.add((body, arity))
    best, best_bodies = 0, []
    for body, arity in sorted(candidates):
        matches = {}
        for n in nodes:
            m = naive_match(s, body, n)
            if m is not None:
                matches[n] = m
        if not matches:
            continue
        if sum(occ[n] * s.cost[n] for n in matches) - s.cost[body] < best:
            continue
        if capture and arity:
            vals = list(matches.values())
            if any(all(v[j] == vals[0][j] for v in vals) and not free_vars(s, vals[0][j])
                   for j in range(arity)):
                continue
        A = Abstraction("fn_oracle", body, arity)
        rw = rewrite_corpus(corpus, A)
        if single_task:
            tasks = {p.task for p, g in zip(corpus.programs, rw.program_gain) if g > 0}
            if len(tasks) < 2:
                continue
        if rw.utility > best:
            best, best_bodies = rw.utility, [body]
        elif rw.utility == best and best > 0:
            best_bodies.append(body)
    return OracleResult(best, best_bodies)


# subset oracle for the rewrite strategy


def match_positions(store: ExprStore, body: int, e: int):
    """Paths (from e) of the first occurrence of each abstraction variable, or None."""
    if naive_match(store, body, e) is None:
        return None
    firsts: dict[int, tuple] = {}

    def walk(a, path):
        k = store.kind[a]
        if k == Kind.ABSVAR:
            firsts.setdefault(store.a[a], path)
        elif k == Kind.APP:
            walk(store.a[a], path + (0,))
            walk(store.b[a], path + (1,))
        elif k == Kind.LAM:
            walk(store.a[a], path + (0,))

    walk(body, ())
    return [firsts[j] for j in sorted(firsts)]


def subset_oracle(store: ExprStore, root: int, A: Abstraction, fn_cost: int = 100) -> int:
    """Best cost reduction over all conflict-free subsets of match positions."""
    app = store.params.cost_app
    positions = {}

    def collect(n, path):
        args = match_positions(store, A.body, n)
        if args is not None:
            positions[path] = args
        for i, c in enumerate(store.children(n)):
            collect(c, path + (i,))

    collect(root, ())
    spots = sorted(positions)
    if len(spots) > 12:
        raise ValueError("too many match locations for the subset oracle")

    def at(n, path):
        for i in path:
            n = store.children(n)[i]
        return n

    base = store.cost[root]
    best = 0
    for r in range(len(spots) + 1):
        for chosen in itertools.combinations(spots, r):
            chosen_set = set(chosen)
            used = set()

            def cost_rw(path):
                n = at(root, path)
                if path in chosen_set:
                    used.add(path)
                    return fn_cost + app * A.arity + sum(cost_rw(path + a) for a in positions[path])
                k = store.kind[n]
                if k == Kind.APP:
                    return app + cost_rw(path + (0,)) + cost_rw(path + (1,))
                if k == Kind.LAM:
                    return store.params.cost_lam + cost_rw(path + (0,))
                return store.cost[n]

            c = cost_rw(())
            if used != chosen_set:
                continue  # some chosen location was swallowed by another rewrite
            best = max(best, base - c)
    return best


# random inputs for the shifting and unification properties


def random_open_term(rng: random.Random, store: ExprStore, budget: int, env: int = 0,
                     free: int = 3, shifted: bool = False, low: int = -3):
    """Term whose variables may point past `env` binders (up to `free` more).

    With `shifted`, leaves may also be shifted variables &i with low <= i < depth
    where depth counts enclosing binders, which keeps the result well formed
    at depth 0.
    """
    if budget <= 1 or rng.random() < 0.2:
        r = rng.random()
        if shifted and r < 0.25 and env - low > 0:
            return store.shifted(rng.randrange(low, env))
        if r < 0.6:
            return store.var(rng.randrange(env + free))
        return store.prim(rng.choice(PRIMS[:4]))
    if rng.random() < 0.3:
        return store.lam(random_open_term(rng, store, budget - 1, env + 1, free, shifted, low))
    left = rng.randint(1, max(1, budget - 2))
    return store.app(random_open_term(rng, store, left, env, free, shifted, low),
                     random_open_term(rng, store, max(1, budget - 1 - left), env, free, shifted, low))


def punch(rng: random.Random, store: ExprStore, e: int, p: float = 0.25):
    """Pattern from e: random subtrees become holes or abstraction variables.

    Equal subtrees tend to reuse the same abstraction variable, but not
    always, so some patterns fail to unify and some share variables
    across different binder depths.
    """
    names: dict = {}
    counter = itertools.count()

    def go(n):
        if rng.random() < p:
            if rng.random() < 0.5:
                return store.hole(next(counter))
            if n in names and rng.random() < 0.8:
                return names[n]
            j = len(set(names.values()))
            v = store.absvar(j if rng.random() < 0.8 else rng.randrange(j + 1))
            names[n] = v
            return v
        k = store.kind[n]
        if k == Kind.APP:
            return store.app(go(store.a[n]), go(store.b[n]))
        if k == Kind.LAM:
            return store.lam(go(store.a[n]))
        return n

    return go(e)


# abstractions for the utility and rewrite properties


def random_abstraction(rng: random.Random, corpus: Corpus, max_arity: int = 3):
    """A closed generalization of a random corpus subtree, or None."""
    s = corpus.store
    nodes = sorted(occurrences(corpus))
    rng.shuffle(nodes)
    for e in nodes[:10]:
        gens = [(b, a) for b, a in itertools.islice(generalizations(s, e, max_slots=max_arity), 200)
                if a <= max_arity and not free_vars(s, b)]
        if gens:
            body, arity = rng.choice(gens)
            return Abstraction("fn_x", body, arity)
    return None


def decomposed_utility(corpus: Corpus, A: Abstraction, plan, fn_cost: int = 100) -> int:
    """-cost(A) plus the per-location local utility summed over accepted occurrences.

    Walks every occurrence independently (no sharing), following accepted
    rewrites into their arguments, and scores each location directly from
    the body and the arguments rather than from the rewriter's tables.
    """
    s = corpus.store
    uses = [0] * A.arity

    def count(n):
        k = s.kind[n]
        if k == Kind.ABSVAR:
            uses[s.a[n]] += 1
        for c in s.children(n):
            count(c)

    count(A.body)
    starred = s.params.starred()
    total = -s.cost[A.body]
    stack = list(corpus.roots)
    while stack:
        n = stack.pop()
        if n in plan.accepted:
            args = plan.args[n]
            total += s.cost_of(A.body, starred) - fn_cost - s.params.cost_app * A.arity
            total += sum((u - 1) * s.cost[x] for u, x in zip(uses, args))
            stack.extend(args)
        else:
            stack.extend(s.children(n))
    return total
