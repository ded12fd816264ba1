"""Term representation and the operations everything else sits on.

Terms are plain immutable Python values so they can be hashed, compared,
and used as dict keys without ceremony:

  atom          -> str
  number        -> int | float  (floats are kept distinct from equal ints
                   in canonical keys by tagging their bit pattern)
  variable      -> Var (identity-hashed, unique id)
  application   -> tuple (functor, arg1, ..., argn); the functor slot holds
                   another term.  Surface applications use the SAPP marker
                   until the higher-order encoding rewrites them to APPLY.
  list cell     -> (CONS, head, tail), terminated by NIL
  reified body  -> (RFY, ((wrapper, neg, arg...), ...))
  typed literal -> (TLIT, lexical, tag)   e.g. "2021-12-23"^^\\dt

Internal functor symbols (Sym) are interned objects that cannot be spelled
in the surface syntax, so machinery predicates can never collide with user
atoms.
"""

from __future__ import annotations

import struct
from itertools import count
from typing import Iterator, Optional


class Sym:
    """Interned internal symbol, unspellable in surface syntax."""

    __slots__ = ("name",)
    _interned: dict = {}

    def __new__(cls, name: str):
        sym = cls._interned.get(name)
        if sym is None:
            sym = object.__new__(cls)
            sym.name = name
            cls._interned[name] = sym
        return sym

    def __repr__(self):
        return "<%s>" % self.name


SAPP = Sym("sapp")      # surface (pre-encoding) application marker
APPLY = Sym("apply")    # the distinguished higher-order application functor
CONS = Sym("cons")
NIL = Sym("nil")
RFY = Sym("reify")
TLIT = Sym("typedlit")
TRUEVAL = Sym("true")   # value slot of boolean frame methods o[m]


class Var:
    """Logic variable; identity is the unique id."""

    __slots__ = ("id", "name")
    _counter = count(1)

    def __init__(self, name: Optional[str] = None):
        self.id = next(Var._counter)
        self.name = name

    def __repr__(self):
        return "?%s_%d" % (self.name or "", self.id)


def mkapp(functor, *args):
    """Surface application node; args must be non-empty."""
    assert args
    return (SAPP, functor) + tuple(args)


def mklist(items, tail=NIL):
    out = tail
    for x in reversed(items):
        out = (CONS, x, out)
    return out


def list_parts(t):
    """Split a cons chain into (items, tail); tail is NIL for proper lists."""
    items = []
    while isinstance(t, tuple) and t[0] is CONS:
        items.append(t[1])
        t = t[2]
    return items, t


def hilog_encode(t):
    """Rewrite surface applications to the distinguished APPLY functor.

    Base terms (atoms, numbers, variables) are fixpoints; list cells and
    reified bodies keep their structure but their components are encoded.
    """
    if isinstance(t, tuple):
        h = t[0]
        if h is SAPP:
            return (APPLY,) + tuple(hilog_encode(x) for x in t[1:])
        if h is CONS:
            return (CONS, hilog_encode(t[1]), hilog_encode(t[2]))
        if h is RFY:
            return (RFY, tuple((lt[0], lt[1]) + tuple(hilog_encode(a) for a in lt[2:])
                               for lt in t[1]))
        if h is APPLY:
            return (APPLY,) + tuple(hilog_encode(x) for x in t[1:])
        if h is TLIT:
            return t
        return tuple(hilog_encode(x) for x in t)
    return t


# ---------------------------------------------------------------------------
# Binding environments.
#
# An environment is an immutable-by-convention dict {Var: term}.  `walk`
# dereferences one level of variable chains, `resolve` substitutes fully.
# ---------------------------------------------------------------------------

def walk(t, env):
    while type(t) is Var:
        b = env.get(t)
        if b is None:
            return t
        t = b
    return t


def resolve(t, env):
    """Substitute env into t, fully dereferencing."""
    t = walk(t, env)
    if isinstance(t, tuple) and t[0] is not TLIT:
        if t[0] is RFY:
            return (RFY, tuple((lt[0], lt[1]) + tuple(resolve(a, env) for a in lt[2:])
                               for lt in t[1]))
        return tuple(resolve(x, env) for x in t)
    return t


def occurs(v, t, env):
    t = walk(t, env)
    if t is v:
        return True
    if isinstance(t, tuple):
        if t[0] is TLIT:
            return False
        if t[0] is RFY:
            return any(occurs(v, a, env) for lt in t[1] for a in lt[2:])
        return any(occurs(v, x, env) for x in t)
    return False


def unify(t1, t2, env):
    """Most general unifier extending env, or None.  Occurs-check is on."""
    t1 = walk(t1, env)
    t2 = walk(t2, env)
    if t1 is t2:
        return env
    if type(t1) is Var:
        if occurs(t1, t2, env):
            return None
        e = dict(env)
        e[t1] = t2
        return e
    if type(t2) is Var:
        if occurs(t2, t1, env):
            return None
        e = dict(env)
        e[t2] = t1
        return e
    c1, c2 = isinstance(t1, tuple), isinstance(t2, tuple)
    if c1 and c2:
        if len(t1) != len(t2) or t1[0] is not t2[0]:
            return None
        if t1[0] is RFY:
            return _unify_reified(t1[1], t2[1], env)
        if t1[0] is TLIT:
            return env if t1 == t2 else None
        for a, b in zip(t1[1:], t2[1:]):
            env = unify(a, b, env)
            if env is None:
                return None
        return env
    if c1 or c2:
        return None
    # atoms and numbers: exact equality, with int/float kept apart
    if t1 == t2 and type(t1) is type(t2):
        return env
    return None


def _unify_reified(lits1, lits2, env):
    if len(lits1) != len(lits2):
        return None
    for l1, l2 in zip(lits1, lits2):
        if l1[0] != l2[0] or l1[1] != l2[1] or len(l1) != len(l2):
            return None
        for a, b in zip(l1[2:], l2[2:]):
            env = unify(a, b, env)
            if env is None:
                return None
    return env


def match(pattern, t, env):
    """One-way unification: only pattern variables may bind."""
    pattern = walk(pattern, env)
    if type(pattern) is Var:
        if occurs(pattern, t, env):
            return None
        e = dict(env)
        e[pattern] = t
        return e
    if type(t) is Var:
        return None
    if isinstance(pattern, tuple) and isinstance(t, tuple):
        if len(pattern) != len(t) or pattern[0] is not t[0]:
            return None
        if pattern[0] is RFY:
            for l1, l2 in zip(pattern[1], t[1]):
                if l1[0] != l2[0] or l1[1] != l2[1] or len(l1) != len(l2):
                    return None
                for a, b in zip(l1[2:], l2[2:]):
                    env = match(a, b, env)
                    if env is None:
                        return None
            return env
        if pattern[0] is TLIT:
            return env if pattern == t else None
        for a, b in zip(pattern[1:], t[1:]):
            env = match(a, b, env)
            if env is None:
                return None
        return env
    if isinstance(pattern, tuple) or isinstance(t, tuple):
        return None
    if pattern == t and type(pattern) is type(t):
        return env
    return None


def rename(t, mapping):
    """Copy t with fresh variables; mapping collects old -> new."""
    if type(t) is Var:
        nv = mapping.get(t)
        if nv is None:
            nv = Var(t.name)
            mapping[t] = nv
        return nv
    if isinstance(t, tuple):
        if t[0] is TLIT:
            return t
        if t[0] is RFY:
            return (RFY, tuple((lt[0], lt[1]) + tuple(rename(a, mapping) for a in lt[2:])
                               for lt in t[1]))
        return tuple(rename(x, mapping) for x in t)
    return t


def term_vars(t, acc=None):
    if acc is None:
        acc = []
    if type(t) is Var:
        if t not in acc:
            acc.append(t)
    elif isinstance(t, tuple):
        if t[0] is RFY:
            for lt in t[1]:
                for a in lt[2:]:
                    term_vars(a, acc)
        elif t[0] is not TLIT:
            for x in t:
                term_vars(x, acc)
    return acc


def is_ground(t):
    if type(t) is Var:
        return False
    if isinstance(t, tuple):
        if t[0] is TLIT:
            return True
        if t[0] is RFY:
            return all(is_ground(a) for lt in t[1] for a in lt[2:])
        return all(is_ground(x) for x in t)
    return True


# ---------------------------------------------------------------------------
# Canonical variant keys.
#
# Two terms get equal keys iff they are variants (equal up to variable
# renaming).  Variables are numbered left to right; floats are serialized by
# exact bit pattern so 1 and 1.0 never collide.  The byte layout is internal
# but stable across a process run (bump _KEY_VERSION when it changes).
# ---------------------------------------------------------------------------

_KEY_VERSION = b"k1"


def variant_key(t, env=None) -> bytes:
    out = [_KEY_VERSION]
    seen: dict = {}
    _vk(t, env or {}, out, seen)
    return b"".join(out)


def variant_key_seq(ts, env=None) -> bytes:
    out = [_KEY_VERSION]
    seen: dict = {}
    for t in ts:
        _vk(t, env or {}, out, seen)
        out.append(b";")
    return b"".join(out)


def _vk(t, env, out, seen):
    t = walk(t, env)
    ty = type(t)
    if ty is Var:
        n = seen.get(t)
        if n is None:
            n = len(seen)
            seen[t] = n
        out.append(b"v%d " % n)
    elif ty is str:
        out.append(b"a%d:" % len(t))
        out.append(t.encode("utf-8"))
    elif ty is int:
        out.append(b"i%d " % t)
    elif ty is float:
        out.append(b"f" + struct.pack(">d", t))
    elif ty is bool:
        out.append(b"b1 " if t else b"b0 ")
    elif ty is Sym:
        out.append(b"s%d:" % len(t.name))
        out.append(t.name.encode("utf-8"))
    elif ty is tuple:
        if t and t[0] is RFY:
            out.append(b"R(")
            for lt in t[1]:
                out.append(("L%s/%d " % (lt[0], lt[1])).encode())
                for a in lt[2:]:
                    _vk(a, env, out, seen)
            out.append(b")")
        else:
            out.append(b"(%d " % len(t))
            for x in t:
                _vk(x, env, out, seen)
            out.append(b")")
    else:
        raise TypeError("not a term: %r" % (t,))


def ground_key(t):
    """Fast dict key for a term known to be ground.

    Ground terms are their own keys unless they contain floats (equal-valued
    ints and floats would collide under Python hashing).
    """
    if _has_float(t):
        return variant_key(t)
    return t


def _has_float(t):
    if type(t) is float:
        return True
    if isinstance(t, tuple):
        if t[0] is RFY:
            return any(_has_float(a) for lt in t[1] for a in lt[2:])
        return any(_has_float(x) for x in t)
    return False


def canonical(t, env=None):
    """Variant-canonical copy: variables renamed to position-numbered ones."""
    env = env or {}
    seen: dict = {}

    def go(x):
        x = walk(x, env)
        if type(x) is Var:
            nv = seen.get(x)
            if nv is None:
                nv = Var("C%d" % len(seen))
                seen[x] = nv
            return nv
        if isinstance(x, tuple):
            if x[0] is TLIT:
                return x
            if x[0] is RFY:
                return (RFY, tuple((lt[0], lt[1]) + tuple(go(a) for a in lt[2:])
                                   for lt in x[1]))
            return tuple(go(e) for e in x)
        return x

    return go(t)


# ---------------------------------------------------------------------------
# Term size: the metric behind the goal/answer tripwires.
#
# Counts atom and number occurrences in a prefix traversal.  Variables count
# 0; each list cons cell counts 1 (a fixed choice, documented so tripwire
# behavior is reproducible); application nodes contribute only through their
# functor and argument subterms.
# ---------------------------------------------------------------------------

def term_size(t, env=None) -> int:
    env = env or {}
    n = 0
    stack = [t]
    while stack:
        x = walk(stack.pop(), env)
        ty = type(x)
        if ty is Var:
            continue
        if ty is tuple:
            h = x[0]
            if h is CONS:
                n += 1
                stack.append(x[1])
                stack.append(x[2])
            elif h is TLIT:
                n += 1
            elif h is RFY:
                for lt in x[1]:
                    n += 1
                    stack.extend(lt[2:])
            elif h is APPLY or h is SAPP:
                stack.extend(x[1:])
            else:
                stack.extend(x)
        elif x is NIL:
            pass
        elif ty is Sym:
            n += 1
        else:
            n += 1
    return n


def subterm_depth_max(t):
    """(depth, path) of the deepest non-variable subterm, ties left to right."""
    best = (-1, None)
    stack = [(t, 0, ())]
    order = 0
    found = []
    while stack:
        x, d, path = stack.pop(0)
        if type(x) is Var:
            continue
        found.append((d, order, path, x))
        order += 1
        if isinstance(x, tuple) and x[0] is not TLIT:
            kids = x[1:] if x[0] in (APPLY, SAPP, CONS) else x[1:]
            for i, k in enumerate(kids):
                stack.append((k, d + 1, path + (i + 1,)))
    if not found:
        return best
    found.sort(key=lambda e: (-e[0], e[1]))
    d, _, path, _ = found[0]
    return (d, path)


def replace_path(t, path, new):
    if not path:
        return new
    i = path[0]
    return t[:i] + (replace_path(t[i], path[1:], new),) + t[i + 1:]


def abstract_terms(args, limit, size_fn=None):
    """Replace deepest subterms with fresh variables until the tuple of terms
    measures at most `limit` under Σ term_size.  Returns the new tuple."""
    size_fn = size_fn or (lambda xs: sum(term_size(a) for a in xs))
    args = tuple(args)
    while size_fn(args) > limit:
        # pick the deepest replaceable subterm across all args
        best = None
        for i, a in enumerate(args):
            d, path = subterm_depth_max(a)
            if d < 0:
                continue
            if best is None or d > best[0]:
                best = (d, i, path)
        if best is None:
            break
        _, i, path = best
        args = args[:i] + (replace_path(args[i], path, Var("abs")),) + args[i + 1:]
    return args
