"""Builtin predicates: arithmetic, comparison, and the small list/ordset
toolbox the transliterated benchmark programs rely on.

Each builtin receives its argument tuple (already resolved against the
caller's environment) and yields zero or more extended environments.
"""

from __future__ import annotations

from .terms import (
    APPLY, CONS, NIL, RFY, Sym, TLIT, Var, is_ground, list_parts, mklist,
    resolve, unify, walk,
)

NEG_FUNCTOR = "\\neg"


class EvalError(Exception):
    def __init__(self, msg, span=None):
        super().__init__(msg)
        self.span = span


def arith(t, env):
    t = walk(t, env)
    ty = type(t)
    if ty is int or ty is float:
        return t
    if ty is Var:
        raise EvalError("unbound variable in arithmetic expression")
    if ty is tuple and t[0] is APPLY:
        op = t[1]
        args = [arith(a, env) for a in t[2:]]
        try:
            if op == "+":
                return args[0] + args[1] if len(args) == 2 else +args[0]
            if op == "-":
                return args[0] - args[1] if len(args) == 2 else -args[0]
            if op == "*":
                return args[0] * args[1]
            if op == "/":
                q = args[0] / args[1]
                if isinstance(args[0], int) and isinstance(args[1], int) \
                        and args[0] % args[1] == 0:
                    return args[0] // args[1]
                return q
            if op == "mod":
                return args[0] % args[1]
            if op == "min":
                return min(args)
            if op == "max":
                return max(args)
            if op == "abs":
                return abs(args[0])
        except ZeroDivisionError:
            raise EvalError("division by zero")
        except IndexError:
            pass
    raise EvalError("cannot evaluate arithmetic term %r" % (t,))


_TYPE_RANK = {}


def order_key(t):
    """Total order on ground terms: vars < numbers < atoms < internal symbols
    < compounds (by arity, then componentwise)."""
    ty = type(t)
    if ty is Var:
        return (0, t.id)
    if ty is int or ty is float:
        return (1, t, 0 if ty is int else 1)
    if ty is str:
        return (2, t)
    if ty is Sym:
        return (3, t.name)
    if ty is tuple:
        if t[0] is TLIT:
            return (2, t[1] + "^^" + t[2])
        if t[0] is RFY:
            return (5, tuple((lt[0], lt[1]) + tuple(order_key(a) for a in lt[2:])
                             for lt in t[1]))
        return (4, len(t), t[0].name, tuple(order_key(x) for x in t[1:]))
    raise TypeError("not orderable: %r" % (t,))


def _num_pair(args, env):
    return arith(args[0], env), arith(args[1], env)


def bi_is(args, env, ctx=None):
    v = arith(args[1], env)
    e = unify(args[0], v, env)
    if e is not None:
        yield e


def bi_lt(args, env, ctx=None):
    a, b = _num_pair(args, env)
    if a < b:
        yield env


def bi_gt(args, env, ctx=None):
    a, b = _num_pair(args, env)
    if a > b:
        yield env


def bi_le(args, env, ctx=None):
    a, b = _num_pair(args, env)
    if a <= b:
        yield env


def bi_ge(args, env, ctx=None):
    a, b = _num_pair(args, env)
    if a >= b:
        yield env


def bi_unify(args, env, ctx=None):
    e = unify(args[0], args[1], env)
    if e is not None:
        yield e


def bi_not_unify(args, env, ctx=None):
    if unify(args[0], args[1], env) is None:
        yield env


def bi_true(args, env, ctx=None):
    yield env


def bi_fail(args, env, ctx=None):
    return
    yield


def bi_ground(args, env, ctx=None):
    if is_ground(resolve(args[0], env)):
        yield env


def bi_nonvar(args, env, ctx=None):
    if type(walk(args[0], env)) is not Var:
        yield env


def _need_list(t, env, who):
    items, tail = list_parts(resolve(t, env))
    if tail is not NIL:
        raise EvalError("%s: not a proper list: %r" % (who, t))
    return items


def bi_sort(args, env, ctx=None):
    items = _need_list(args[0], env, "sort")
    out = []
    seen = set()
    for x in sorted(items, key=order_key):
        k = order_key(x)
        if k not in seen:
            seen.add(k)
            out.append(x)
    e = unify(args[1], mklist(out), env)
    if e is not None:
        yield e


def _flatten(t, env, acc):
    t = resolve(t, env)
    if t is NIL:
        return
    if isinstance(t, tuple) and t[0] is CONS:
        _flatten(t[1], env, acc)
        _flatten(t[2], env, acc)
        return
    acc.append(t)


def bi_flatten(args, env, ctx=None):
    acc = []
    _flatten(args[0], env, acc)
    e = unify(args[1], mklist(acc), env)
    if e is not None:
        yield e


def bi_member(args, env, ctx=None):
    t = resolve(args[1], env)
    while isinstance(t, tuple) and t[0] is CONS:
        e = unify(args[0], t[1], env)
        if e is not None:
            yield e
        t = t[2]


def bi_ord_subset(args, env, ctx=None):
    small = {order_key(x) for x in _need_list(args[0], env, "ord_subset")}
    big = {order_key(x) for x in _need_list(args[1], env, "ord_subset")}
    if small <= big:
        yield env


def bi_ord_disjoint(args, env, ctx=None):
    a = {order_key(x) for x in _need_list(args[0], env, "ord_disjoint")}
    b = {order_key(x) for x in _need_list(args[1], env, "ord_disjoint")}
    if not (a & b):
        yield env


def bi_ord_subtract(args, env, ctx=None):
    b = {order_key(x) for x in _need_list(args[1], env, "ord_subtract")}
    keep = [x for x in _need_list(args[0], env, "ord_subtract")
            if order_key(x) not in b]
    e = unify(args[2], mklist(keep), env)
    if e is not None:
        yield e


def complement_head(t):
    """Opposite-polarity form of a head term, or None when not derivable."""
    if isinstance(t, tuple):
        if t[0] is APPLY and t[1] == NEG_FUNCTOR and len(t) == 3:
            return t[2]
        if t[0] is RFY and len(t[1]) == 1:
            lt = t[1][0]
            return (RFY, ((lt[0], not lt[1]) + lt[2:],))
        if t[0] is APPLY:
            return (APPLY, NEG_FUNCTOR, t)
    if isinstance(t, (str, int, float)):
        return (APPLY, NEG_FUNCTOR, t)
    return None


def bi_implicit_opp(args, env, ctx=None):
    h1 = resolve(args[0], env)
    h2 = resolve(args[1], env)
    if type(h1) is not Var:
        c = complement_head(h1)
        if c is not None:
            e = unify(args[1], c, env)
            if e is not None:
                yield e
        return
    if type(h2) is not Var:
        c = complement_head(h2)
        if c is not None:
            e = unify(args[0], c, env)
            if e is not None:
                yield e


BUILTINS = {
    "is": bi_is,
    "lt": bi_lt,
    "gt": bi_gt,
    "le": bi_le,
    "ge": bi_ge,
    "unify": bi_unify,
    "not_unify": bi_not_unify,
    "true": bi_true,
    "fail": bi_fail,
    "ground": bi_ground,
    "nonvar": bi_nonvar,
    "sort": bi_sort,
    "flatten": bi_flatten,
    "member": bi_member,
    "ord_subset": bi_ord_subset,
    "ord_disjoint": bi_ord_disjoint,
    "ord_subtract": bi_ord_subtract,
    "implicit_opp": bi_implicit_opp,
}
