"""Small construction helpers for driving the engine directly in tests."""

from wfs_ergo.context import Context
from wfs_ergo.engine import Engine
from wfs_ergo.kb import Clause, Lit
from wfs_ergo.oracle import wfs_oracle


def lit(functor, *args, neg=False, mod="m"):
    return Lit("apply", (functor,) + tuple(args), mod=mod, neg=neg)


def fact(ctx, functor, *args, mod="m"):
    l = lit(functor, *args, mod=mod)
    ctx.registry.get(mod).add_clause(Clause(l.key_in(mod), l.args))


def rule(ctx, head, body, mod="m"):
    ctx.registry.get(mod).add_clause(
        Clause(head.key_in(mod), head.args, body=tuple(body)))


def fresh():
    return Context()


def query(ctx, functor, *args, mod="m", engine=None):
    eng = engine or Engine(ctx)
    eng.start_run()
    return eng.solve_literal(lit(functor, *args, mod=mod), mod)


def truth_of(ctx, atom, mod="m", engine=None):
    """True / False / 'u' for a 0-ary predicate."""
    res = query(ctx, atom, mod=mod, engine=engine)
    if not res:
        return False
    if any(not cond for (_a, cond, _s, _m) in res):
        return True
    return "u"


def load_ground_program(ctx, rules, mod="m"):
    """rules: [(head_atom, [(atom, positive), ...])] exactly as the oracle
    takes them."""
    for head, body in rules:
        blits = [lit(a, mod=mod, neg=not positive) for (a, positive) in body]
        rule(ctx, lit(head, mod=mod), blits, mod=mod)


def engine_partition(ctx, atoms, mod="m"):
    eng = Engine(ctx)
    true, undef = set(), set()
    for a in atoms:
        eng.start_run()
        t = truth_of(ctx, a, mod=mod, engine=eng)
        if t is True:
            true.add(a)
        elif t == "u":
            undef.add(a)
    return true, undef
