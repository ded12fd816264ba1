"""Defeasible reasoning: rule tags, the guard transform, and pluggable
argumentation theories.

A tagged rule gets `\\naf defeated(Tag, Head)` appended to its body, aimed
at the theory module bound to the rule's home module.  The theory itself is
ordinary rules evaluated by the same engine, so conditional defeat
propagates three-valuedly for free.  Each user module gets its own theory
module instance (named `$at$<module>`) whose rules call back into the user
module for the control predicates and rule bodies.

Control predicates, written in the user module:
  \\opposes(Tag1, Head1, Tag2, Head2)   opposition (closed symmetrically)
  \\overrides(Tag1, Tag2)               priority; also the 4-argument form
  \\cancel(Tag) / \\cancel(Tag, Head)   withdraw rules from consideration

An atom and its explicit negation always oppose.  A strict rule deriving a
head defeats every defeasible derivation of an opposing head.
"""

from __future__ import annotations

from .kb import Clause, Lit, PredicateKey
from .terms import APPLY, RFY, Sym, Var

NEG_FUNCTOR = "\\neg"

THEORIES = ("gclp", "refuteclp")


def theory_module_name(module: str) -> str:
    return "$at$" + module


def head_term(headlit: Lit):
    """Reified form of a rule head, as seen by the control predicates."""
    w = headlit.wrapper
    neg = w.startswith("neg_")
    base = w[4:] if neg else w
    if base == "apply":
        args = headlit.args
        t = args[0] if len(args) == 1 else (APPLY,) + tuple(args)
        return (APPLY, NEG_FUNCTOR, t) if neg else t
    return (RFY, ((base, neg) + tuple(headlit.args),))


def guard_literal(module: str, tag, headlit: Lit) -> Lit:
    return Lit("apply", ("defeated", tag, head_term(headlit)),
               mod=theory_module_name(module), neg=True)


def candidate_clause(tm: str, um: str, tag, headlit: Lit, body) -> Clause:
    lit = Lit("apply", ("candidate", tag, head_term(headlit)), mod=tm)
    return Clause(lit.key_in(tm), lit.args, body=tuple(body), internal=True)


def strict_candidate_clause(tm: str, headlit: Lit, body) -> Clause:
    lit = Lit("apply", ("strict_candidate", head_term(headlit)), mod=tm)
    return Clause(lit.key_in(tm), lit.args, body=tuple(body), internal=True)


def _a(tm, functor, *args, neg=False):
    return Lit("apply", (functor,) + tuple(args), mod=tm, neg=neg)


def _u(um, functor, *args):
    return Lit("apply", (functor,) + tuple(args), mod=um)


def theory_clauses(theory: str, um: str):
    tm = theory_module_name(um)
    T1, H1, T2, H2, T3, H3 = (Var("T1"), Var("H1"), Var("T2"), Var("H2"),
                              Var("T3"), Var("H3"))
    cs = []

    def add(functor, args, body):
        lit = Lit("apply", (functor,) + tuple(args), mod=tm)
        cs.append(Clause(lit.key_in(tm), lit.args, body=tuple(body),
                         internal=True))

    add("defeated", (T1, H1), [_a(tm, "refutes", Var(), Var(), T1, H1)])
    if theory == "gclp":
        add("defeated", (T1, H1), [_a(tm, "rebuts", Var(), Var(), T1, H1)])
    add("defeated", (T1, H1), [_a(tm, "disqualified", T1, H1)])
    add("defeated", (T1, H1), [_a(tm, "strict_defeat", T1, H1)])

    add("refutes", (T1, H1, T2, H2),
        [_a(tm, "conflicts", T1, H1, T2, H2),
         _a(tm, "overrides4", T1, H1, T2, H2),
         _a(tm, "refuted", T1, H1, neg=True)])
    add("refuted", (T2, H2), [_a(tm, "refutes", Var(), Var(), T2, H2)])
    add("rebuts", (T1, H1, T2, H2),
        [_a(tm, "conflicts", T1, H1, T2, H2),
         _a(tm, "refuted", T1, H1, neg=True)])
    add("rebutted", (T2, H2), [_a(tm, "rebuts", Var(), Var(), T2, H2)])

    # candidates are enumerated before the opposition check so that the
    # control predicates always see instantiated tags and heads
    add("conflicts", (T1, H1, T2, H2),
        [_a(tm, "candidate", T1, H1),
         _a(tm, "candidate", T2, H2),
         _a(tm, "opposes_any", T1, H1, T2, H2),
         _a(tm, "cancel_any", T1, H1, neg=True),
         _a(tm, "cancel_any", T2, H2, neg=True)])

    add("opposes_any", (T1, H1, T2, H2), [_u(um, "\\opposes", T1, H1, T2, H2)])
    add("opposes_any", (T1, H1, T2, H2), [_u(um, "\\opposes", T2, H2, T1, H1)])
    add("opposes_any", (T1, H1, T2, H2),
        [Lit("builtin", (H1, H2), builtin="implicit_opp")])

    add("overrides4", (T1, H1, T2, H2), [_u(um, "\\overrides", T1, T2)])
    add("overrides4", (T1, H1, T2, H2),
        [_u(um, "\\overrides", T1, H1, T2, H2)])

    add("cancel_any", (T1, H1), [_u(um, "\\cancel", T1)])
    add("cancel_any", (T1, H1), [_u(um, "\\cancel", T1, H1)])

    add("disqualified", (T2, H2),
        [_a(tm, "transitively_defeats", T1, H1, T2, H2),
         _a(tm, "rebutted", T1, H1, neg=True)])
    add("disqualified", (T1, H1), [_a(tm, "cancel_any", T1, H1)])

    add("defeats", (T1, H1, T2, H2), [_a(tm, "refutes", T1, H1, T2, H2)])
    add("defeats", (T1, H1, T2, H2), [_a(tm, "rebuts", T1, H1, T2, H2)])
    add("transitively_defeats", (T1, H1, T2, H2),
        [_a(tm, "defeats", T1, H1, T2, H2)])
    add("transitively_defeats", (T1, H1, T2, H2),
        [_a(tm, "defeats", T1, H1, T3, H3),
         _a(tm, "transitively_defeats", T3, H3, T2, H2)])

    add("strict_defeat", (T1, H1),
        [_a(tm, "opposes_any", T1, H1, Var(), H2),
         _a(tm, "strict_candidate", H2)])
    return cs


def bind_theory(registry, module_name: str, theory: str):
    if theory not in THEORIES:
        raise ValueError("unknown argumentation theory %r" % (theory,))
    m = registry.get(module_name)
    tm_name = theory_module_name(module_name)
    tm = registry.get(tm_name)
    tm.wipe()
    for c in theory_clauses(theory, module_name):
        tm.add_clause(c)
    m.arg_theory = (theory, tm_name)
    return tm


def complement_key(key: PredicateKey) -> PredicateKey:
    w = key.wrapper
    base = w[4:] if w.startswith("neg_") else "neg_" + w
    return PredicateKey(key.module, base, key.functor, key.arity)


def refresh_strict_candidates(registry, module_name: str):
    """(Re)generate strict_candidate clauses: one per strict rule whose head
    key is the polarity complement of some defeasible rule's head key."""
    m = registry.get(module_name, create=False)
    if m is None or m.arg_theory is None:
        return
    tm = registry.get(m.arg_theory[1])
    # drop previous generation
    key = PredicateKey(tm.name, "apply", "strict_candidate", 1)
    tm.stores.pop(key, None)
    defeasible_keys = set()
    for k, ks in m.stores.items():
        for c in ks.clauses:
            if c.defeasible:
                defeasible_keys.add(complement_key(k))
    if not defeasible_keys:
        return
    for k, ks in m.stores.items():
        if k not in defeasible_keys:
            continue
        qw = k.wrapper[:-2] if k.wrapper.endswith("_x") else k.wrapper
        for c in ks.clauses:
            if c.defeasible or c.internal or not c.enabled:
                continue
            hl = Lit(qw, c.args, mod=module_name)
            tm.add_clause(strict_candidate_clause(tm.name, hl, tuple(c.body)))
    registry.invalidate(key)
