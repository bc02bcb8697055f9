"""Index shifting, substitution, and lambda-aware unification.

A mapping binds abstraction-variable and hole leaves (keyed by their node
ids) to expressions.  Expressions bound to holes may contain shifted
variables (`#i`, possibly negative); expressions bound to abstraction
variables never do in a valid match.
"""

from __future__ import annotations

from typing import Dict, Optional

from .expr import ExprStore, Kind, NodeId

Mapping = Dict[NodeId, NodeId]


def _memo(store: ExprStore, name: str) -> dict:
    table = store.memo.get(name)
    if table is None:
        table = store.memo.setdefault(name, {})
    return table


def _untouched(store: ExprStore, e: NodeId, d: int) -> bool:
    if store.has_shifted[e]:
        return False
    fv = store.fv[e]
    return not fv or max(fv) < d


def downshift(store: ExprStore, e: NodeId, d: int = 0) -> NodeId:
    """Move `e` out from under one binder at depth `d`.

    A variable pointing at the removed binder becomes `#(i-1)` rather
    than silently capturing a different binder.
    """
    if _untouched(store, e, d):
        return e
    memo = _memo(store, "down")
    key = (e, d)
    out = memo.get(key)
    if out is not None:
        return out
    k = store.kind[e]
    if k == Kind.LAM:
        out = store.lam(downshift(store, store.a[e], d + 1))
    elif k == Kind.APP:
        out = store.app(downshift(store, store.a[e], d), downshift(store, store.b[e], d))
    elif k == Kind.VAR:
        i = store.a[e]
        out = store.var(i - 1) if i > d else store.shifted(i - 1) if i == d else e
    elif k == Kind.SHIFTED:
        out = store.shifted(store.a[e] - 1)
    else:
        out = e
    memo[key] = out
    return out


def upshift(store: ExprStore, e: NodeId, d: int = 0) -> NodeId:
    """Inverse of `downshift` on well-formed terms."""
    if _untouched(store, e, d):
        return e
    memo = _memo(store, "up")
    key = (e, d)
    out = memo.get(key)
    if out is not None:
        return out
    k = store.kind[e]
    if k == Kind.LAM:
        out = store.lam(upshift(store, store.a[e], d + 1))
    elif k == Kind.APP:
        out = store.app(upshift(store, store.a[e], d), upshift(store, store.b[e], d))
    elif k == Kind.VAR:
        i = store.a[e]
        out = store.var(i + 1) if i >= d else e
    elif k == Kind.SHIFTED:
        i = store.a[e]
        out = store.var(i + 1) if i + 1 == d else store.shifted(i + 1)
    else:
        out = e
    memo[key] = out
    return out


def shift_free(store: ExprStore, e: NodeId, delta: int) -> NodeId:
    """Add `delta` to every free variable of `e` (ordinary de Bruijn shift).

    Callers guarantee no free index drops below zero.  For a term whose
    free indices are all >= k this equals k successive `downshift(., 0)`.
    """
    if delta == 0 or not store.fv[e]:
        return e
    memo = _memo(store, "shift")
    key = (e, delta)
    out = memo.get(key)
    if out is None:
        out = _shift(store, e, delta, 0)
        memo[key] = out
    return out


def _shift(store: ExprStore, e: NodeId, delta: int, cutoff: int) -> NodeId:
    fv = store.fv[e]
    if not fv or max(fv) < cutoff:
        return e
    k = store.kind[e]
    if k == Kind.LAM:
        return store.lam(_shift(store, store.a[e], delta, cutoff + 1))
    if k == Kind.APP:
        return store.app(_shift(store, store.a[e], delta, cutoff),
                         _shift(store, store.b[e], delta, cutoff))
    return store.var(store.a[e] + delta)


def downshift_all(store: ExprStore, l: Mapping) -> Mapping:
    return {k: downshift(store, v, 0) for k, v in l.items()}


def upshift_all(store: ExprStore, l: Mapping) -> Mapping:
    return {k: upshift(store, v, 0) for k, v in l.items()}


def substitute(store: ExprStore, l: Mapping, body: NodeId) -> NodeId:
    """Modified beta reduction: plug the mapping into `body`."""
    if not store.has_meta[body]:
        return body
    k = store.kind[body]
    if k == Kind.ABSVAR or k == Kind.HOLE:
        try:
            return l[body]
        except KeyError:
            raise ValueError(f"unbound {store.show(body)} in substitution") from None
    if k == Kind.APP:
        return store.app(substitute(store, l, store.a[body]), substitute(store, l, store.b[body]))
    return store.lam(substitute(store, upshift_all(store, l), store.a[body]))


def merge(l1: Optional[Mapping], l2: Optional[Mapping]) -> Optional[Mapping]:
    if l1 is None or l2 is None:
        return None
    if len(l1) < len(l2):
        l1, l2 = l2, l1
    out = dict(l1)
    for k, v in l2.items():
        prev = out.get(k)
        if prev is None:
            out[k] = v
        elif prev != v:
            return None
    return out


def lambda_unify(store: ExprStore, A: NodeId, e: NodeId) -> Optional[Mapping]:
    """Mapping `l` with `substitute(l, A) == e`, or None."""
    if store.has_meta[e] or store.has_shifted[e]:
        raise ValueError("unification target must be a plain expression")
    return _unify(store, A, e)


def _unify(store: ExprStore, A: NodeId, e: NodeId) -> Optional[Mapping]:
    if not store.has_meta[A]:
        return {} if A == e else None
    k = store.kind[A]
    if k == Kind.ABSVAR or k == Kind.HOLE:
        return {A: e}
    if k != store.kind[e]:
        return None
    if k == Kind.APP:
        l1 = _unify(store, store.a[A], store.a[e])
        if l1 is None:
            return None
        return merge(l1, _unify(store, store.b[A], store.b[e]))
    if k == Kind.LAM:
        l = _unify(store, store.a[A], store.a[e])
        return None if l is None else downshift_all(store, l)
    return None


def well_formed(store: ExprStore, e: NodeId, d: int = 0) -> bool:
    if not store.has_shifted[e]:
        return True
    stack = [(e, d)]
    while stack:
        n, depth = stack.pop()
        if not store.has_shifted[n]:
            continue
        k = store.kind[n]
        if k == Kind.SHIFTED:
            if store.a[n] >= depth:
                return False
        elif k == Kind.LAM:
            stack.append((store.a[n], depth + 1))
        elif k == Kind.APP:
            stack.append((store.a[n], depth))
            stack.append((store.b[n], depth))
    return True


def is_valid_match(store: ExprStore, l: Mapping) -> bool:
    """No abstraction-variable binding may reference a binder inside the body."""
    kind = store.kind
    return all(not store.has_shifted[v] for k, v in l.items() if kind[k] == Kind.ABSVAR)
