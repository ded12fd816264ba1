"""Updates, transactions, and integrity constraints.

Plain insert/delete take effect immediately and survive backtracking but
are still recorded, so a constraint configured with the rollback action can
restore the exact pre-transaction state.  The t_-prefixed operators are
additionally backtrackable: the procedural machine drops a trail marker and
undoes them when the search retreats past the update.

Every applied change invalidates the tables that depend on the touched
predicate key (conservative transitive invalidation), which is what keeps
inferences consistent with the data without differential maintenance.
"""

from __future__ import annotations

from .kb import Clause, Lit, PredicateKey, store_wrapper
from .terms import is_ground, resolve, variant_key_seq


class UpdateError(Exception):
    pass


class ConstraintViolation(Exception):
    def __init__(self, violations):
        super().__init__("integrity constraint violated: %d answer(s)"
                         % len(violations))
        self.violations = violations


class Entry:
    __slots__ = ("kind", "module", "key", "args", "pos", "clause",
                 "transactional", "committed", "prev")

    def __init__(self, kind, module, key, args=None, pos=None, clause=None,
                 transactional=False, prev=None):
        self.kind = kind            # ins | del | enable | disable
        self.module = module
        self.key = key
        self.args = args
        self.pos = pos
        self.clause = clause
        self.transactional = transactional
        self.committed = False
        self.prev = prev


class TransactionLog:
    def __init__(self):
        self.entries = []

    def open_count(self):
        return sum(1 for e in self.entries if not e.committed)

    def mark(self):
        return len(self.entries)


def _store_lit(lit: Lit, current: str):
    w = store_wrapper(lit.wrapper)
    mod = lit.mod if isinstance(lit.mod, str) else current
    return w, mod


def apply_insert(session, lit: Lit, env, current, transactional):
    w, mod = _store_lit(lit, current)
    args = tuple(resolve(a, env) for a in lit.args)
    m = session.registry.get(mod)
    sl = Lit(w, args, mod=mod)
    key = sl.key_in(mod)
    ks = m.store(key)
    if ks.find_fact(args) is not None:
        return None
    clause = Clause(key, args, internal=False)
    m.add_clause(clause)
    session.registry.invalidate(key)
    e = Entry("ins", mod, key, args=args, clause=clause,
              transactional=transactional)
    session.txlog.entries.append(e)
    return e


def apply_delete(session, lit: Lit, env, current, transactional):
    w, mod = _store_lit(lit, current)
    args = tuple(resolve(a, env) for a in lit.args)
    m = session.registry.get(mod)
    sl = Lit(w, args, mod=mod)
    key = sl.key_in(mod)
    ks = m.store(key, create=False)
    if ks is None:
        return None
    hit = ks.remove_fact(args)
    if hit is None:
        return None
    clause, pos = hit
    m.touch()
    session.registry.invalidate(key)
    e = Entry("del", mod, key, args=args, pos=pos, clause=clause,
              transactional=transactional)
    session.txlog.entries.append(e)
    return e


def apply_setenabled(session, rid, enabled, current, transactional):
    from .terms import variant_key
    m = session.registry.get(current)
    cl = m.rule_ids.get(variant_key(rid))
    if cl is None:
        raise UpdateError("unknown rule id %r in module %s" % (rid, current))
    clauses = cl if isinstance(cl, list) else [cl]
    entries = []
    for c in clauses:
        if c.enabled == enabled:
            continue
        c.enabled = enabled
        ks = m.stores.get(c.key)
        if ks is not None:
            ks.invalidate_cache()
        m.touch()
        session.registry.invalidate(c.key)
        e = Entry("enable" if enabled else "disable", current, c.key,
                  clause=c, transactional=transactional, prev=not enabled)
        session.txlog.entries.append(e)
        entries.append(e)
    return entries


def undo_entry(session, e: Entry):
    if e.committed:
        return
    m = session.registry.get(e.module)
    if e.kind == "ins":
        ks = m.store(e.key, create=False)
        if ks is not None:
            ks.remove_fact(e.args)
    elif e.kind == "del":
        ks = m.store(e.key)
        ks.add(e.clause, position=e.pos)
    else:
        e.clause.enabled = e.prev
        ks = m.stores.get(e.clause.key)
        if ks is not None:
            ks.invalidate_cache()
    m.touch()
    session.registry.invalidate(e.key)
    try:
        session.txlog.entries.remove(e)
    except ValueError:
        pass


def rollback_all(session):
    for e in reversed(list(session.txlog.entries)):
        e.committed = False
        undo_entry(session, e)
    session.txlog.entries.clear()


def check_constraints(session):
    """Run every declared constraint query; true answers violate.  Answers
    that are merely undefined produce a logged warning."""
    violations = []
    warnings = []
    session.in_constraint = True
    try:
        for (module, tmpl, action, cb) in session.constraints:
            for (bind, uflag) in session.run_goal_lit(tmpl, module):
                if uflag:
                    warnings.append((tmpl, bind))
                else:
                    violations.append((module, tmpl, action, cb, bind))
    finally:
        session.in_constraint = False
    for w in warnings:
        session.warn("constraint query undefined for %r" % (w[1],))
    return violations


def commit(session):
    violations = check_constraints(session)
    if violations:
        hard = [v for v in violations if v[2] == "rollback"]
        for (module, tmpl, action, cb, bind) in violations:
            if action == "callback" and cb is not None:
                session.in_constraint = True
                try:
                    list(session.run_goal_lit(cb, module, env=bind))
                finally:
                    session.in_constraint = False
            elif action == "warn":
                session.warn("constraint violated: %r" % (bind,))
        if hard:
            rollback_all(session)
            raise ConstraintViolation([v[4] for v in hard])
    for e in session.txlog.entries:
        e.committed = True
    session.txlog.entries.clear()
