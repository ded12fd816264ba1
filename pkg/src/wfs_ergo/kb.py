"""Clause storage and the dynamic module registry.

Every literal resolves to a structured PredicateKey (module, wrapper,
outermost functor, arity) instead of a string-mangled predicate name.  A
debug spelling in the classic salted format is still available from
`salted_name` for dumps.

Wrappers with an `_x` suffix hold what the user actually asserted; the
bare wrappers are derived relations answered by internally installed
closure rules (see frames.py).  HiLog predicates need no closure layer, so
`apply` clauses are stored and queried under the same wrapper.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .terms import (
    Sym, Var, canonical, is_ground, rename, term_vars, variant_key,
    variant_key_seq, walk,
)

# module-reference placeholder for "the current module"
CURRENT = Sym("currentmod")

# derived wrappers (query side) -> explicit wrappers (store side)
FRAME_WRAPPERS = ("mvd", "imvd", "isa", "sub", "type", "itype")
STORE_SUFFIX = "_x"

MAIN_MODULE = "main"


def store_wrapper(w: str) -> str:
    base = w[4:] if w.startswith("neg_") else w
    if base in FRAME_WRAPPERS:
        return w + STORE_SUFFIX
    return w


@dataclass(frozen=True)
class PredicateKey:
    module: str
    wrapper: str
    functor: object  # outermost functor when indexable, else None
    arity: int

    def sort_key(self):
        f = self.functor
        ftag = repr(f) if f is not None else ""
        return (self.module, self.wrapper, ftag, self.arity)


def salted_name(key: PredicateKey) -> str:
    """Debug spelling in the traditional salted-wrapper format."""
    base = key.wrapper[:-len(STORE_SUFFIX)] if key.wrapper.endswith(STORE_SUFFIX) \
        else key.wrapper
    return "'_$_$_salt^%s^%s'/%d" % (key.module, base, key.arity)


class Lit:
    """Compiled body literal."""

    __slots__ = ("neg", "wrapper", "args", "mod", "delayq", "builtin", "span")

    def __init__(self, wrapper, args, mod=CURRENT, neg=False, delayq=None,
                 builtin=None, span=None):
        self.wrapper = wrapper
        self.args = tuple(args)
        self.mod = mod
        self.neg = neg
        self.delayq = delayq
        self.builtin = builtin
        self.span = span

    def with_args(self, args):
        return Lit(self.wrapper, args, self.mod, self.neg, self.delayq,
                   self.builtin, self.span)

    def key_in(self, module: str) -> PredicateKey:
        w = self.wrapper
        if w in ("apply", "neg_apply"):
            f = self.args[0]
            if not isinstance(f, (str, int, float, Sym)):
                f = None
            return PredicateKey(module, w, f, len(self.args) - 1)
        return PredicateKey(module, w, None, len(self.args))

    def __repr__(self):
        return "Lit(%s%s%s %r @%r)" % ("naf " if self.neg else "",
                                       self.wrapper, "", self.args, self.mod)


class Clause:
    __slots__ = ("key", "args", "body", "rid", "tag", "meta", "defeasible",
                 "enabled", "internal", "seq", "span")

    def __init__(self, key, args, body=(), rid=None, tag=None, meta=(),
                 defeasible=False, internal=False, span=None):
        self.key = key
        self.args = tuple(args)
        self.body = tuple(body)
        self.rid = rid
        self.tag = tag
        self.meta = tuple(meta)
        self.defeasible = defeasible
        self.enabled = True
        self.internal = internal
        self.seq = 0
        self.span = span

    @property
    def is_fact(self):
        return not self.body

    def __repr__(self):
        return "Clause(%r %r :- %d lits)" % (self.key, self.args, len(self.body))


class KeyStore:
    """Clauses for one PredicateKey plus a lazily built fact index."""

    __slots__ = ("clauses", "facts_only", "_index", "_fact_keys")

    def __init__(self):
        self.clauses = []
        self.facts_only = True
        self._index = None       # (pos, {val: [argtuples]}, rest-list) or None
        self._fact_keys = {}     # variant key -> clause, for dedup and delete

    def live_clauses(self):
        return [c for c in self.clauses if c.enabled]

    def invalidate_cache(self):
        self._index = None

    def add(self, clause, position=None):
        if position is None:
            self.clauses.append(clause)
        else:
            self.clauses.insert(position, clause)
        if clause.body:
            self.facts_only = False
        else:
            self._fact_keys[variant_key_seq(clause.args)] = clause
        self.invalidate_cache()

    def find_fact(self, args):
        return self._fact_keys.get(variant_key_seq(args))

    def remove_fact(self, args):
        c = self._fact_keys.pop(variant_key_seq(args), None)
        if c is None:
            return None
        pos = self.clauses.index(c)
        self.clauses.pop(pos)
        self.invalidate_cache()
        return (c, pos)

    def fact_index(self, pos=0):
        """Index ground facts by argument `pos`; non-indexable facts listed
        separately.  Only valid while facts_only holds."""
        if self._index is not None and self._index[0] == pos:
            return self._index[1], self._index[2]
        idx: dict = {}
        rest = []
        for c in self.clauses:
            if not c.enabled:
                continue
            a = c.args[pos] if pos < len(c.args) else None
            if isinstance(a, (str, int, Sym)) and is_ground(c.args):
                idx.setdefault(a, []).append(c.args)
            else:
                rest.append(c)
        self._index = (pos, idx, rest)
        return idx, rest


class EncapsulationError(Exception):
    pass


class RuleIdClash(Exception):
    pass


class Module:
    def __init__(self, name: str):
        self.name = name
        self.stores: dict = {}          # PredicateKey -> KeyStore
        self.exports = None             # None = open; else list of (Lit, allow)
        self.semantics = {"inheritance": "nonmonotonic"}
        self.arg_theory = None          # None | ("gclp"|"refuteclp", theory module name)
        self.prolog_preds = set()       # (functor, arity) evaluated untabled
        self.rule_ids: dict = {}        # variant key of rid -> Clause
        self.cards = []                 # (class, attr, lo, hi) cardinality notes
        self.seq = 0
        self.epoch = 0

    def store(self, key: PredicateKey, create=True) -> Optional[KeyStore]:
        ks = self.stores.get(key)
        if ks is None and create:
            ks = self.stores[key] = KeyStore()
        return ks

    def touch(self):
        self.epoch += 1

    def add_clause(self, clause: Clause, position=None, share_id=False):
        if clause.rid is not None and not clause.internal:
            rk = variant_key(clause.rid)
            if rk in self.rule_ids and not share_id:
                raise RuleIdClash("duplicate rule id %r in module %s"
                                  % (clause.rid, self.name))
            self.rule_ids.setdefault(rk, []).append(clause)
        clause.seq = self.seq = self.seq + 1
        self.store(clause.key).add(clause, position)
        self.touch()

    def wipe(self):
        self.stores.clear()
        self.rule_ids.clear()
        self.exports = None
        self.arg_theory = None
        self.prolog_preds.clear()
        self.cards = []
        self.semantics = {"inheritance": "nonmonotonic"}
        self.touch()


class Registry:
    """All modules plus the dynamically scoped current module."""

    def __init__(self):
        self.modules: dict = {}
        self.current = MAIN_MODULE
        self.on_invalidate = None    # callback(PredicateKey) from the engine
        self.on_new_module = None    # callback(Module): closure installation
        self.get(MAIN_MODULE)

    def get(self, name: str, create=True) -> Optional[Module]:
        m = self.modules.get(name)
        if m is None and create:
            m = self.modules[name] = Module(name)
            if self.on_new_module:
                self.on_new_module(m)
        return m

    def exists(self, name: str) -> bool:
        return name in self.modules

    def invalidate(self, key: PredicateKey):
        if self.on_invalidate:
            self.on_invalidate(key)

    # -- call resolution -----------------------------------------------------

    def resolve_call(self, lit: Lit, current: str, env=None):
        """Target module names for a literal; a variable module reference
        defers to enumeration over all registered modules."""
        mod = lit.mod
        if mod is CURRENT:
            return [current]
        if type(mod) is Var:
            mod = walk(mod, env or {})
        if type(mod) is Var:
            return [name for name in sorted(self.modules)
                    if not name.startswith("$")]
        if isinstance(mod, str):
            return [mod]
        raise TypeError("bad module reference %r" % (mod,))

    def check_export(self, lit: Lit, target: str, caller: str, quiet=False):
        """Encapsulation: cross-module calls must match an export template."""
        if target == caller:
            return True
        m = self.modules.get(target)
        if m is None or m.exports is None:
            return True
        for tmpl, allow in m.exports:
            if allow is not None and caller not in allow:
                continue
            if tmpl.wrapper != lit.wrapper and not (
                    tmpl.wrapper == "apply" and lit.wrapper == "apply"):
                continue
            from .terms import unify
            mapping: dict = {}
            targs = tuple(rename(a, mapping) for a in tmpl.args)
            if len(targs) != len(lit.args):
                continue
            e: Optional[dict] = {}
            for a, b in zip(targs, lit.args):
                e = unify(a, rename(b, {}), e)
                if e is None:
                    break
            if e is not None:
                return True
        if quiet:
            return False
        raise EncapsulationError(
            "call %s/%d is not exported by module %s"
            % (lit.wrapper, len(lit.args), target))

    # -- canonical state hash --------------------------------------------------

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.modules):
            m = self.modules[name]
            if name.startswith("$"):
                continue
            h.update(b"M")
            h.update(name.encode())
            h.update(repr(sorted(m.semantics.items())).encode())
            h.update(repr(m.arg_theory).encode())
            h.update(repr(sorted(m.prolog_preds, key=repr)).encode())
            for key in sorted(m.stores, key=PredicateKey.sort_key):
                ks = m.stores[key]
                user_clauses = [c for c in ks.clauses if not c.internal]
                if not user_clauses:
                    continue
                h.update(repr(key.sort_key()).encode())
                for c in user_clauses:
                    h.update(b"C")
                    h.update(variant_key_seq(
                        c.args + tuple(_lit_sig(l) for l in c.body)))
                    h.update(b"1" if c.enabled else b"0")
                    if c.tag is not None:
                        h.update(b"T")
                        h.update(variant_key(c.tag))
        return h.hexdigest()


def _lit_sig(lit: Lit):
    mod = lit.mod if isinstance(lit.mod, str) else (
        "$current" if lit.mod is CURRENT else "$var")
    args = tuple(_lit_sig(a) if isinstance(a, Lit) else a for a in lit.args)
    return ("lit", lit.wrapper, "naf" if lit.neg else "pos", mod,
            lit.builtin or "") + args
