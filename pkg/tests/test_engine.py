import random

import pytest

from wfs_ergo.engine import Engine
from wfs_ergo.oracle import wfs_oracle
from wfs_ergo.terms import Var

from helpers import (
    engine_partition, fact, fresh, lit, load_ground_program, query, rule,
    truth_of,
)


def naf(a):
    return (a, False)


def pos(a):
    return (a, True)


FIG2_UNFOUNDED1 = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [pos("q"), naf("r")]),
    ("q", [pos("r"), naf("p")]),
    ("r", [pos("p"), naf("q")]),
]

FIG2_UNDEFINED = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [naf("r")]),
    ("q", [naf("p")]),
    ("r", [naf("q")]),
]

FIG2_UNFOUNDED2 = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [naf("r"), pos("q")]),
    ("q", [naf("p"), pos("r")]),
    ("r", [naf("q"), pos("p")]),
]


def test_positive_loop_reachability():
    ctx = fresh()
    for a, b in [(1, 2), (2, 3), (3, 1)]:
        fact(ctx, "edge", a, b)
    x, z, y = Var("X"), Var("Z"), Var("Y")
    rule(ctx, lit("reachable", x, y),
         [lit("reachable", x, z), lit("edge", z, y)])
    x2, y2 = Var("X"), Var("Y")
    rule(ctx, lit("reachable", x2, y2), [lit("edge", x2, y2)])
    res = query(ctx, "reachable", 1, Var("N"))
    nodes = sorted(a[2] for (a, cond, _s, _m) in res)
    assert nodes == [1, 2, 3]
    assert all(not cond for (_a, cond, _s, _m) in res)


def test_unfounded_set_success():
    ctx = fresh()
    load_ground_program(ctx, FIG2_UNFOUNDED1)
    assert truth_of(ctx, "s") is True
    assert truth_of(ctx, "p") is False


def test_negative_loop_undefined():
    ctx = fresh()
    load_ground_program(ctx, FIG2_UNDEFINED)
    assert truth_of(ctx, "s") == "u"
    assert truth_of(ctx, "p") == "u"


def test_unfounded_after_delaying():
    ctx = fresh()
    load_ground_program(ctx, FIG2_UNFOUNDED2)
    assert truth_of(ctx, "s") is True
    assert truth_of(ctx, "q") is False


def test_simplification_deletes_conditional_answer():
    # r :- naf s.  s.  p :- naf r.   => r false, p true
    ctx = fresh()
    load_ground_program(ctx, [
        ("r", [naf("s")]),
        ("s", []),
        ("p", [naf("r")]),
    ])
    assert truth_of(ctx, "p") is True
    assert truth_of(ctx, "r") is False


def test_idempotent_requery():
    ctx = fresh()
    load_ground_program(ctx, FIG2_UNDEFINED)
    eng = Engine(ctx)
    first = [truth_of(ctx, a, engine=eng) for a in "spqr"]
    second = [truth_of(ctx, a, engine=eng) for a in "spqr"]
    assert first == second


def test_fixed_order_dynamically_stratified_is_two_valued():
    ctx = fresh()
    load_ground_program(ctx, FIG2_UNFOUNDED1)
    true, undef = engine_partition(ctx, "spqr")
    assert undef == set()


def random_ground_program(rng, n_atoms, n_rules):
    atoms = ["a%d" % i for i in range(n_atoms)]
    rules = []
    for _ in range(n_rules):
        head = rng.choice(atoms)
        body = []
        for _ in range(rng.randrange(0, 4)):
            body.append((rng.choice(atoms), rng.random() < 0.6))
        rules.append((head, body))
    return atoms, rules


@pytest.mark.parametrize("seed", range(8))
def test_oracle_equivalence_small(seed):
    rng = random.Random(seed)
    for _ in range(12):
        atoms, rules = random_ground_program(rng, rng.randrange(3, 14),
                                             rng.randrange(2, 24))
        ctx = fresh()
        load_ground_program(ctx, rules)
        got_true, got_u = engine_partition(ctx, atoms)
        want_true, want_u = wfs_oracle(rules)
        assert got_true == want_true, (rules, got_true, want_true)
        assert got_u == want_u, (rules, got_u, want_u)


def test_nonground_answers_and_variant_dedup():
    ctx = fresh()
    fact(ctx, "p", Var("Any"))
    fact(ctx, "p", Var("Other"))
    res = query(ctx, "p", Var("X"))
    assert len(res) == 1


def test_module_isolation():
    ctx = fresh()
    fact(ctx, "p", "a", mod="m1")
    fact(ctx, "p", "b", mod="m2")
    res = query(ctx, "p", Var("X"), mod="m1")
    assert [a[1] for (a, _c, _s, _m) in res] == ["a"]


def test_variable_module_enumeration():
    ctx = fresh()
    fact(ctx, "p", "a", mod="m1")
    fact(ctx, "p", "b", mod="m2")
    eng = Engine(ctx)
    eng.start_run()
    mv = Var("M")
    res = eng.solve_literal(lit("p", Var("X"), mod=mv), "m1")
    got = sorted((m, a[1]) for (a, _c, _s, m) in res)
    assert got == [("m1", "a"), ("m2", "b")]
