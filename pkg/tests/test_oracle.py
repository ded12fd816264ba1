import random

from wfs_ergo.oracle import wfs_oracle


def naf(a):
    return (a, False)


def pos(a):
    return (a, True)


P_UNFOUNDED1 = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [pos("q"), naf("r")]),
    ("q", [pos("r"), naf("p")]),
    ("r", [pos("p"), naf("q")]),
]

P_UNDEFINED = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [naf("r")]),
    ("q", [naf("p")]),
    ("r", [naf("q")]),
]

P_UNFOUNDED2 = [
    ("s", [naf("p"), naf("q"), naf("r")]),
    ("p", [naf("r"), pos("q")]),
    ("q", [naf("p"), pos("r")]),
    ("r", [naf("q"), pos("p")]),
]


def test_unfounded_positive_loop_is_false():
    true, undef = wfs_oracle(P_UNFOUNDED1)
    assert "s" in true
    assert undef == set()
    assert not {"p", "q", "r"} & true


def test_negative_loop_is_undefined():
    true, undef = wfs_oracle(P_UNDEFINED)
    assert true == set()
    assert undef == {"s", "p", "q", "r"}


def test_unfounded_set_behind_delayed_negation():
    true, undef = wfs_oracle(P_UNFOUNDED2)
    assert true == {"s"}
    assert undef == set()


def test_stratified_program_is_two_valued():
    prog = [
        ("a", []),
        ("b", [pos("a")]),
        ("c", [naf("b")]),
        ("d", [naf("c"), pos("a")]),
    ]
    true, undef = wfs_oracle(prog)
    assert undef == set()
    assert true == {"a", "b", "d"}


def test_simplification_chain():
    # r is false, so p (guarded by naf r) is true even though r loops on s
    prog = [
        ("r", [naf("s")]),
        ("s", []),
        ("p", [naf("r")]),
    ]
    true, undef = wfs_oracle(prog)
    assert true == {"s", "p"}
    assert undef == set()


def test_definite_program_matches_reachability():
    rng = random.Random(5)
    nodes = list(range(12))
    edges = [(a, b) for a in nodes for b in nodes if rng.random() < 0.2]
    prog = [(("e", a, b), []) for a, b in edges]
    prog += [(("tc", a, b), [pos(("e", a, b))]) for a in nodes for b in nodes]
    prog += [(("tc", a, b), [pos(("tc", a, c)), pos(("e", c, b))])
             for a in nodes for b in nodes for c in nodes]
    true, undef = wfs_oracle(prog)
    assert undef == set()
    # brute-force closure
    reach = {(a, b) for a, b in edges}
    changed = True
    while changed:
        changed = False
        for a, c in list(reach):
            for c2, b in edges:
                if c2 == c and (a, b) not in reach:
                    reach.add((a, b))
                    changed = True
    assert {(a, b) for (t, a, b) in true if t == "tc"} == reach
