"""Reference well-founded model computation for finite ground programs.

This is the independent oracle the test suite checks the tabled engine
against.  It works on plain ground normal programs: a rule is
(head, [(atom, positive), ...]) over hashable atoms.  The model is computed
by the alternating fixpoint: T_{i+1} = G(G(T_i)) where G(I) is the least
model of the program reduced by I, and U = G(T_inf).
"""

from __future__ import annotations

from typing import Hashable, Iterable, Sequence, Tuple

Rule = Tuple[Hashable, Sequence[Tuple[Hashable, bool]]]


def _least_model(rules, naf_false_in):
    """Least model of the reduct: rules whose naf-literals all miss naf_false_in.

    naf_false_in is the interpretation used to evaluate negative literals:
    `naf a` holds iff a not in naf_false_in.
    """
    heads = []
    needs = []
    watchers: dict = {}
    queue = []
    for head, body in rules:
        pos = set()
        ok = True
        for atom, positive in body:
            if positive:
                pos.add(atom)
            elif atom in naf_false_in:
                ok = False
                break
        if not ok:
            continue
        i = len(heads)
        heads.append(head)
        needs.append(pos)
        if pos:
            for a in pos:
                watchers.setdefault(a, []).append(i)
        else:
            queue.append(head)
    derived = set()
    while queue:
        a = queue.pop()
        if a in derived:
            continue
        derived.add(a)
        for i in watchers.get(a, ()):
            pos = needs[i]
            pos.discard(a)
            if not pos and heads[i] not in derived:
                queue.append(heads[i])
    return derived


def wfs_oracle(rules: Iterable[Rule], atoms=None):
    """Exact well-founded model partition (true_set, undefined_set).

    Atoms absent from both sets are false.  `atoms` optionally widens the
    universe beyond the symbols mentioned in the rules.
    """
    rules = list(rules)
    true_set: set = set()
    while True:
        upper = _least_model(rules, true_set)
        new_true = _least_model(rules, upper)
        if new_true == true_set:
            break
        true_set = new_true
    upper = _least_model(rules, true_set)
    undef = upper - true_set
    return true_set, undef
