import random

import pytest

from wfs_ergo.terms import (
    APPLY, CONS, NIL, Var, abstract_terms, canonical, hilog_encode, is_ground,
    match, mkapp, mklist, rename, resolve, term_size, term_vars, unify,
    variant_key,
)


def test_encode_recurses_into_all_argument_positions():
    x = Var("X")
    t = mkapp(mkapp("p", mkapp("fact", 7)), "a", mkapp("f", "b", "b"),
              mklist([3, x]))
    enc = hilog_encode(t)
    assert enc == (APPLY, (APPLY, "p", (APPLY, "fact", 7)), "a",
                   (APPLY, "f", "b", "b"), (CONS, 3, (CONS, x, NIL)))


def test_encode_base_terms_are_fixpoints():
    assert hilog_encode("a") == "a"
    assert hilog_encode(42) == 42
    v = Var()
    assert hilog_encode(v) is v


def test_encode_nested_functor():
    x = Var("X")
    t = mkapp(mkapp("g", x), "h")
    assert hilog_encode(t) == (APPLY, (APPLY, "g", x), "h")


def test_unify_var_to_atom():
    x = Var("X")
    env = unify(x, "a", {})
    assert env == {x: "a"}


def test_unify_occurs_check():
    x = Var("X")
    assert unify(x, hilog_encode(mkapp("f", x)), {}) is None


def test_unify_mgu_two_sided():
    x, y = Var("X"), Var("Y")
    t1 = hilog_encode(mkapp("p", x, "b"))
    t2 = hilog_encode(mkapp("p", "a", y))
    env = unify(t1, t2, {})
    assert resolve(x, env) == "a"
    assert resolve(y, env) == "b"


def test_unify_int_float_distinct():
    assert unify(1, 1.0, {}) is None
    assert unify(1.0, 1.0, {}) == {}


def test_variant_key_renaming():
    x, y, a, b = Var(), Var(), Var(), Var()
    t1 = hilog_encode(mkapp("p", x, y))
    t2 = hilog_encode(mkapp("p", a, b))
    assert variant_key(t1) == variant_key(t2)


def test_variant_key_repeated_var_distinct():
    x, y = Var(), Var()
    assert variant_key(hilog_encode(mkapp("p", x, x))) != \
        variant_key(hilog_encode(mkapp("p", x, y)))


def test_variant_key_argument_order():
    x = Var()
    t1 = (APPLY, "p", x, "a")
    t2 = (APPLY, "p", "a", x)
    assert variant_key(t1) != variant_key(t2)


def test_variant_key_float_bits():
    assert variant_key(1) != variant_key(1.0)
    assert variant_key(0.5) == variant_key(0.5)


def test_term_size_examples():
    assert term_size("a") == 1
    x = Var()
    assert term_size(hilog_encode(mkapp("p", mkapp("f", mkapp("f", x))))) == 3
    assert term_size(x) == 0
    assert term_size(mklist([3, x])) == 3  # two cons cells + one number


# -- randomized structural properties ---------------------------------------

ATOMS = ["a", "b", "c", "f", "g", "p"]


def random_term(rng, depth=3, vars_pool=None):
    vars_pool = vars_pool if vars_pool is not None else []
    roll = rng.random()
    if depth == 0 or roll < 0.35:
        k = rng.random()
        if k < 0.4 and vars_pool:
            return rng.choice(vars_pool)
        if k < 0.55:
            v = Var()
            vars_pool.append(v)
            return v
        if k < 0.8:
            return rng.choice(ATOMS)
        return rng.randrange(-5, 20)
    n = rng.randrange(1, 4)
    f = rng.choice(ATOMS)
    return mkapp(f, *[random_term(rng, depth - 1, vars_pool) for _ in range(n)])


def test_variant_key_invariant_under_renaming():
    rng = random.Random(7)
    for _ in range(300):
        t = hilog_encode(random_term(rng))
        r = rename(t, {})
        assert variant_key(t) == variant_key(r)
        assert term_size(t) == term_size(r)


def test_encode_injective_on_ground_terms():
    rng = random.Random(11)
    seen = {}
    for _ in range(500):
        t = random_term(rng, vars_pool=[])
        if not is_ground(t):
            continue
        enc = hilog_encode(t)
        if enc in seen:
            assert seen[enc] == t
        else:
            seen[enc] = t


def enumerate_ground(t, env, consts=("a", "b")):
    """All ground instantiations of t's variables over a small universe."""
    vs = [v for v in term_vars(resolve(t, env))]
    outs = [dict(env)]
    for v in vs:
        nxt = []
        for e in outs:
            for c in consts:
                d = dict(e)
                d[v] = c
                nxt.append(d)
        outs = nxt
    return outs


def test_unify_returns_most_general_unifier():
    rng = random.Random(3)
    hits = 0
    for _ in range(300):
        pool = []
        t1 = hilog_encode(random_term(rng, 2, pool))
        t2 = hilog_encode(random_term(rng, 2, list(pool)))
        env = unify(t1, t2, {})
        both = mkapp("pair", t1, t2)
        # brute force: every unifier found by grounding must be an instance
        # of the computed mgu (or unify must not have failed)
        for ge in enumerate_ground(both, {}):
            g1, g2 = resolve(t1, ge), resolve(t2, ge)
            if g1 == g2:
                assert env is not None
                hits += 1
                assert match(resolve(both, env), resolve(both, ge), {}) is not None
    assert hits > 0


def test_canonical_collapses_variants():
    x, y = Var(), Var()
    t = hilog_encode(mkapp("p", x, y, x))
    r = rename(t, {})
    assert variant_key(canonical(t)) == variant_key(canonical(r))
    assert variant_key(canonical(t)) == variant_key(t)


def test_abstract_terms_shrinks_to_limit():
    x = Var()
    deep = hilog_encode(mkapp("p", mkapp("f", mkapp("f", mkapp("f", mkapp("f", "a"))))))
    out = abstract_terms((deep,), 4)
    assert sum(term_size(a) for a in out) <= 4
    # the abstraction subsumes the original
    assert match(out[0], deep, {}) is not None
