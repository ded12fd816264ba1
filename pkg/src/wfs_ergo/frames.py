"""Frame semantics: closure rules and the dynamic type checker.

User assertions land in `_x` stores (mvd_x, isa_x, ...).  Queries target
the derived wrappers, answered by internally installed rules:

  - `::` closes transitively; `:` closes under `::`.
  - structural types (`=>`) accumulate from every ancestor, in both modes.
  - behavioral values (`->`) are mode-dependent.  Non-monotonic (default):
    local values override; otherwise inheritable defaults come from the
    nearest ancestor sources, and differing values from incomparable
    nearest sources all come back undefined.  Monotonic: local plus every
    ancestor inheritable value, all true.

Undefinedness of conflicting inheritance rides on an internal atom whose
only rule is its own negation, so the engine's delay machinery produces
the u truth value without special cases.

Class-level `[|...|]` queries accumulate from ancestors in both modes; the
override semantics applies to instance-level inheritance.
"""

from __future__ import annotations

from .kb import Clause, Lit, Module, PredicateKey
from .terms import Sym, TRUEVAL, Var, term_vars

INH = Sym("frames.inherited")
LOCAL = Sym("frames.localdef")
NEAREST = Sym("frames.nearest")
CLOSER = Sym("frames.closer")
HASIV = Sym("frames.hasinheritable")
CONFLICT = Sym("frames.conflict")
UNDEF = Sym("frames.undef")


def _cl(module, wrapper, args, body):
    lit = Lit(wrapper, args, mod=module)
    c = Clause(lit.key_in(module), args, body=tuple(body), internal=True)
    return c


def _alit(module, functor, *args, neg=False):
    return Lit("apply", (functor,) + tuple(args), mod=module, neg=neg)


def closure_clauses(module: str, inheritance: str):
    O, A, V, C, D, E, T = (Var("O"), Var("A"), Var("V"), Var("C"), Var("D"),
                           Var("E"), Var("T"))
    cs = []

    def add(wrapper, args, body):
        cs.append(_cl(module, wrapper, args, body))

    add("sub", (C, D), [Lit("sub_x", (C, D), mod=module)])
    add("sub", (C, D), [Lit("sub", (C, E), mod=module),
                        Lit("sub_x", (E, D), mod=module)])
    add("isa", (O, C), [Lit("isa_x", (O, C), mod=module)])
    add("isa", (O, D), [Lit("isa_x", (O, C), mod=module),
                        Lit("sub", (C, D), mod=module)])
    add("type", (O, A, T), [Lit("type_x", (O, A, T), mod=module)])
    add("type", (O, A, T), [Lit("isa", (O, C), mod=module),
                            Lit("itype", (C, A, T), mod=module)])
    add("itype", (C, A, T), [Lit("itype_x", (C, A, T), mod=module)])
    add("itype", (C, A, T), [Lit("sub", (C, D), mod=module),
                             Lit("itype_x", (D, A, T), mod=module)])
    add("imvd", (C, A, V), [Lit("imvd_x", (C, A, V), mod=module)])
    add("imvd", (C, A, V), [Lit("sub", (C, D), mod=module),
                            Lit("imvd_x", (D, A, V), mod=module)])
    add("mvd", (O, A, V), [Lit("mvd_x", (O, A, V), mod=module)])
    add("mvd", (O, A, V), [_alit(module, INH, O, A, V)])
    for w in ("mvd", "imvd", "isa", "sub", "type", "itype"):
        arity3 = w in ("mvd", "imvd", "type", "itype")
        args = (O, A, V) if arity3 else (O, C)
        add("neg_" + w, args, [Lit("neg_" + w + "_x", args, mod=module)])

    if inheritance == "monotonic":
        add("apply", (INH, O, A, V), [Lit("isa", (O, C), mod=module),
                                      Lit("imvd_x", (C, A, V), mod=module)])
        return cs

    V1, V2, C1, C2 = Var("V1"), Var("V2"), Var("C1"), Var("C2")
    add("apply", (INH, O, A, V),
        [_alit(module, NEAREST, O, A, C),
         Lit("imvd_x", (C, A, V), mod=module),
         _alit(module, LOCAL, O, A, neg=True),
         _alit(module, CONFLICT, O, A, neg=True)])
    add("apply", (INH, O, A, V),
        [_alit(module, NEAREST, O, A, C),
         Lit("imvd_x", (C, A, V), mod=module),
         _alit(module, LOCAL, O, A, neg=True),
         _alit(module, CONFLICT, O, A),
         _alit(module, UNDEF)])
    add("apply", (LOCAL, O, A), [Lit("mvd_x", (O, A, Var()), mod=module)])
    add("apply", (NEAREST, O, A, C),
        [Lit("isa", (O, C), mod=module),
         _alit(module, HASIV, C, A),
         _alit(module, CLOSER, O, A, C, neg=True)])
    add("apply", (CLOSER, O, A, C),
        [Lit("isa", (O, C2), mod=module),
         _alit(module, HASIV, C2, A),
         Lit("sub", (C2, C), mod=module)])
    add("apply", (HASIV, C, A), [Lit("imvd_x", (C, A, Var()), mod=module)])
    add("apply", (CONFLICT, O, A),
        [_alit(module, NEAREST, O, A, C1),
         _alit(module, NEAREST, O, A, C2),
         Lit("imvd_x", (C1, A, V1), mod=module),
         Lit("imvd_x", (C2, A, V2), mod=module),
         Lit("builtin", (C1, C2), builtin="not_unify"),
         Lit("builtin", (V1, V2), builtin="not_unify")])
    add("apply", (UNDEF,), [_alit(module, UNDEF, neg=True)])
    return cs


def install_closure(module: Module):
    if module.name.startswith("$"):
        return
    mode = module.semantics.get("inheritance", "nonmonotonic")
    for c in closure_clauses(module.name, mode):
        module.add_clause(c)


def reinstall_closure(module: Module):
    """Drop the generated rules and rebuild them for the current mode."""
    doomed = []
    for key, ks in module.stores.items():
        kept = [c for c in ks.clauses if not c.internal]
        if len(kept) != len(ks.clauses):
            ks.clauses = kept
            ks.facts_only = all(c.is_fact for c in kept)
            ks.invalidate_cache()
            if not kept:
                doomed.append(key)
    for key in doomed:
        del module.stores[key]
    install_closure(module)
    module.touch()


def subclass_cycles(module: Module):
    """Cycle detection over the ground `::` facts; returns offending classes."""
    key = PredicateKey(module.name, "sub_x", None, 2)
    ks = module.stores.get(key)
    if ks is None:
        return []
    edges = {}
    for c in ks.live_clauses():
        if not c.is_fact:
            continue
        a, b = c.args
        if isinstance(a, (str, int)) and isinstance(b, (str, int)):
            edges.setdefault(a, set()).add(b)
    seen, instack, bad = set(), set(), set()
    for start in list(edges):
        if start in seen:
            continue
        stack = [(start, iter(edges.get(start, ())))]
        instack.add(start)
        while stack:
            node, it = stack[-1]
            moved = False
            for nxt in it:
                if nxt in instack:
                    bad.add(nxt)
                    continue
                if nxt not in seen:
                    instack.add(nxt)
                    stack.append((nxt, iter(edges.get(nxt, ()))))
                    moved = True
                    break
            if not moved:
                stack.pop()
                instack.discard(node)
                seen.add(node)
    return sorted(bad, key=repr)


# ---------------------------------------------------------------------------
# dynamic type checking
# ---------------------------------------------------------------------------

class TypeViolation:
    __slots__ = ("kind", "obj", "attr", "value", "expected")

    def __init__(self, kind, obj, attr, value=None, expected=None):
        self.kind = kind            # 'range' | 'nosig' | 'cardinality'
        self.obj = obj
        self.attr = attr
        self.value = value
        self.expected = expected

    def as_term(self):
        from .terms import APPLY
        if self.kind == "range":
            return (APPLY, "typeViolation", self.obj, self.attr, self.value,
                    self.expected)
        if self.kind == "nosig":
            return (APPLY, "noSignature", self.obj, self.attr, self.value)
        lo, hi, n = self.expected
        return (APPLY, "cardinalityViolation", self.obj, self.attr, n, lo,
                99999999 if hi is None else hi)

    def __repr__(self):
        return "TypeViolation(%s %r.%r)" % (self.kind, self.obj, self.attr)


def type_check(engine, module, obj_pat=None, attr_pat=None):
    """Report objects violating their signatures: values outside the
    declared class, attributes with no signature at all, and cardinality
    bounds counted over distinct values.  Only definitely-true facts count
    as violations."""
    from .engine import Engine
    from .terms import variant_key

    out = []
    O = obj_pat if obj_pat is not None else Var("O")
    A = attr_pat if attr_pat is not None else Var("A")
    data = engine.solve_literal(Lit("mvd", (O, A, Var("V")), mod=module),
                                module)
    seen_pairs = {}
    for (args, cond, _s, _m) in data:
        if cond:
            continue
        o, a, v = args
        k = variant_key((o, a, v))
        if k in seen_pairs:
            continue
        seen_pairs[k] = True
        sigs = engine.solve_literal(Lit("type", (o, a, Var("D")), mod=module),
                                    module)
        if not sigs:
            out.append(TypeViolation("nosig", o, a, v))
            continue
        true_sigs = [sa[2] for (sa, sc, _s2, _m2) in sigs if not sc]
        # only-undefined signatures leave the missing-signature check at u
        for d in true_sigs:
            member = engine.solve_literal(Lit("isa", (v, d), mod=module),
                                          module)
            if not member:
                out.append(TypeViolation("range", o, a, v, d))
    out.extend(check_cardinality(engine, module, obj_pat, attr_pat))
    return out


def check_cardinality(engine, module, obj_pat=None, attr_pat=None):
    from .terms import unify, variant_key
    out = []
    reg_mod = engine.ctx.registry.get(module, create=False)
    if reg_mod is None:
        return out
    for (cls, attr, (lo, hi)) in reg_mod.cards:
        if attr_pat is not None and unify(attr_pat, attr, {}) is None:
            continue
        members = engine.solve_literal(
            Lit("isa", (obj_pat if obj_pat is not None else Var("O"), cls),
                mod=module), module)
        objs = {}
        for (margs, mc, _s, _m) in members:
            if mc:
                continue
            objs.setdefault(variant_key(margs[0]), margs[0])
        for o in objs.values():
            vals = engine.solve_literal(Lit("mvd", (o, attr, Var("V")),
                                            mod=module), module)
            distinct = {variant_key(v[2]) for (v, vc, _s2, _m2) in vals
                        if not vc}
            n = len(distinct)
            if n < lo or (hi is not None and n > hi):
                out.append(TypeViolation("cardinality", o, attr,
                                         expected=(lo, hi, n)))
    return out
