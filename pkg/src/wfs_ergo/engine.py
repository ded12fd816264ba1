"""Tabled three-valued resolution.

The evaluator keeps a table per subgoal variant.  Producer derivations run
as forked immutable-environment states; a derivation blocked on an
incomplete table parks as a consumer (positive) or waiter (negative) and is
resumed by the scheduler.  When the agenda drains, strongly connected
components of the active-subgoal dependency graph are examined innermost
first: a component held up only by internal negative waiters gets those
literals delayed (answers past them become conditional), everything else is
completed.  Completed answerless subgoals are false; conditional answers
are undefined until simplification resolves their delay sets.

Delay sets hold references:
  - ('a', table, akey): a consumed conditional answer; true when that
    answer becomes unconditional, false when it is deleted.
  - NafRef: a delayed negative literal over a table; false when a matching
    unconditional answer appears, true when no matching answer survives.
  - RESTRAINT / UFLOOR: permanent undefined floors (answer abstraction,
    the u fallback for unsafe negation); never simplified away.

After a run reaches its fixpoint, a founding pass deletes conditional
answers whose positive references bottom out in nothing (residual
unfounded-support removal), then simplification reruns until stable.
"""

from __future__ import annotations

import time
from collections import deque

from .builtins import BUILTINS, EvalError
from .kb import CURRENT, Lit, PredicateKey
from .terms import (
    RFY, Sym, TLIT, Var, abstract_terms, is_ground, match, rename, resolve,
    term_size, term_vars, unify, variant_key_seq, walk,
)

ACTIVE, COMPLETE = 0, 1

RESTRAINT = ("restraint",)
UFLOOR = ("ufloor",)

MISSING = object()


class EngineError(Exception):
    pass


class UndefinedPredicate(EngineError):
    pass


class TripwireError(EngineError):
    pass


class MustDelayError(EngineError):
    def __init__(self, goal):
        super().__init__("instantiation requirement never satisfied: %r" % (goal,))
        self.goal = goal


class TimeoutAbort(Exception):
    def __init__(self, elapsed_ms):
        super().__init__("goal timed out after %.0f ms" % elapsed_ms)
        self.elapsed_ms = elapsed_ms


def ground_nofloat(args):
    """Ground and float-free: such argument tuples are their own table keys."""
    stack = list(args)
    while stack:
        t = stack.pop()
        ty = type(t)
        if ty is Var or ty is float:
            return False
        if ty is tuple:
            if t[0] is TLIT:
                continue
            if t[0] is RFY:
                for lt in t[1]:
                    stack.extend(lt[2:])
            else:
                stack.extend(t[1:])
    return True


class Susp:
    """A postponed literal waiting on variable instantiation."""

    __slots__ = ("kind", "lit", "goal_args", "conds")

    def __init__(self, kind, lit, goal_args, conds=None):
        self.kind = kind            # 'naf' | 'must' | 'wish'
        self.lit = lit
        self.goal_args = goal_args
        self.conds = conds          # for must/wish: [(test, term)] disjunction

    def renamed(self, mapping):
        return Susp(self.kind, self.lit,
                    tuple(rename(a, mapping) for a in self.goal_args),
                    None if self.conds is None else
                    [(t, rename(v, mapping)) for t, v in self.conds])

    def resolved(self, env):
        return Susp(self.kind, self.lit,
                    tuple(resolve(a, env) for a in self.goal_args),
                    None if self.conds is None else
                    [(t, resolve(v, env)) for t, v in self.conds])


class NafRef:
    __slots__ = ("table", "goal_args", "whole", "keys", "state")

    def __init__(self, table, goal_args, whole):
        self.table = table
        self.goal_args = goal_args
        self.whole = whole          # goal is a variant of the table goal
        self.keys = None            # matching conditional answers, at completion
        self.state = None           # None until decided True/False
        table.nafrefs.append(self)


class Support:
    __slots__ = ("table", "akey", "refs")

    def __init__(self, table, akey, refs):
        self.table = table
        self.akey = akey
        self.refs = set(refs)


class DState:
    __slots__ = ("table", "module", "body", "i", "env", "delays", "pends", "head")

    def __init__(self, table, module, body, i, env, delays, pends, head):
        self.table = table
        self.module = module
        self.body = body
        self.i = i
        self.env = env
        self.delays = delays
        self.pends = pends
        self.head = head


class Consumer:
    __slots__ = ("state", "target", "pattern", "cursor", "queued", "dead")

    def __init__(self, state, target, pattern):
        self.state = state          # positioned one past the literal
        self.target = target
        self.pattern = pattern
        self.cursor = 0
        self.queued = False
        self.dead = False


class NegWaiter:
    __slots__ = ("state", "target", "goal_args", "dead")

    def __init__(self, state, target, goal_args):
        self.state = state          # positioned at the resumption point
        self.target = target
        self.goal_args = goal_args
        self.dead = False


class Table:
    __slots__ = ("vkey", "pkey", "goal", "status", "answers", "order", "aterms",
                 "asusp", "consumers", "negwaiters", "posdeps", "negdeps",
                 "alldeps", "kbkeys", "arefs", "nafrefs", "tripped")

    def __init__(self, vkey, pkey, goal):
        self.vkey = vkey
        self.pkey = pkey
        self.goal = goal
        self.status = ACTIVE
        self.answers = {}           # akey -> None (true) | [Support] (u)
        self.order = []
        self.aterms = {}
        self.asusp = {}
        self.consumers = []
        self.negwaiters = []
        self.posdeps = set()
        self.negdeps = set()
        self.alldeps = set()
        self.kbkeys = set()
        self.arefs = {}
        self.nafrefs = []
        self.tripped = False

    def aref(self, akey):
        r = self.arefs.get(akey)
        if r is None:
            r = self.arefs[akey] = ("a", self, akey)
        return r

    def live_answer(self, akey):
        e = self.answers.get(akey, MISSING)
        if e is MISSING or (e is not None and not e):
            return MISSING
        return e

    def has_live_answers(self):
        return any(self.live_answer(ak) is not MISSING for ak in self.order)

    def __repr__(self):
        return "Table(%s %r %s)" % (self.pkey.wrapper, self.goal,
                                    "C" if self.status == COMPLETE else "A")


def rename_lit(l, mapping):
    mod = mapping[l.mod] if type(l.mod) is Var and l.mod in mapping else l.mod
    delayq = l.delayq
    if delayq is not None:
        delayq = (delayq[0], [(t, rename(v, mapping)) for t, v in delayq[1]])
    args = tuple(rename_lit(a, mapping) if isinstance(a, Lit)
                 else rename(a, mapping) for a in l.args)
    return Lit(l.wrapper, args, mod, l.neg, delayq, l.builtin, l.span)


class Engine:
    def __init__(self, ctx, sub=False):
        self.ctx = ctx               # registry, settings, hooks (see session)
        self.tables = {}             # vkey bytes -> Table
        self.agenda = deque()
        self.events = deque()
        self.holders = {}            # ref -> [Support]
        self.key_tables = {}         # PredicateKey -> set[Table]
        self.rdeps = {}              # Table -> set[Table] depending on it
        self.running = False
        self.steps = 0
        self.sub = sub
        self.deadline = None
        self._created = []

    # ------------------------------------------------------------------
    # public entry points
    # ------------------------------------------------------------------

    def start_run(self, deadline=None):
        self._created = []
        self.deadline = deadline

    def solve_literal(self, lit, caller_module, env=None):
        """Evaluate a positive literal to completion (local scheduling:
        answers cross the top boundary only for finished tables).

        Returns [(answer_args, conditional, susps, module)].
        """
        env = env or {}
        out = []
        enumerating = type(lit.mod) is Var and type(walk(lit.mod, env)) is Var
        for mod in self.ctx.registry.resolve_call(lit, caller_module, env):
            if not self.ctx.registry.check_export(lit, mod, caller_module,
                                                  quiet=enumerating):
                continue
            resolved = tuple(resolve(a, env) for a in lit.args)
            key = lit.key_in(mod)
            if self._is_proc(key, mod):
                for (aargs, cond, susps) in self.ctx.proc_runner(
                        self, lit, resolved, mod):
                    out.append((aargs, cond, susps, mod))
                continue
            if isinstance(mod, str) and mod.startswith("\\"):
                handler = self.ctx.builtin_modules.get(mod)
                if handler is None:
                    raise EngineError("unknown builtin module %r" % (mod,))
                for e2 in handler(lit, env, self, caller_module):
                    out.append((tuple(resolve(a, e2) for a in lit.args),
                                False, (), mod))
                continue
            table = self.table_call(key, resolved, None, lit)
            self.run()
            for ak in table.order:
                entry = table.live_answer(ak)
                if entry is MISSING:
                    continue
                aterm = table.aterms[ak]
                susps = table.asusp.get(ak, ())
                mapping = {}
                if susps or not ground_nofloat(aterm):
                    aterm = tuple(rename(a, mapping) for a in aterm)
                    susps = tuple(s.renamed(mapping) for s in susps)
                e2 = {}
                ok = True
                for p, v in zip(resolved, aterm):
                    e2 = unify(p, v, e2)
                    if e2 is None:
                        ok = False
                        break
                if not ok:
                    continue
                out.append((tuple(resolve(p, e2) for p in resolved),
                            entry is not None, susps, mod))
        return out

    def naf_check(self, lit, caller_module, env=None):
        """Three-valued check of a ground negative literal from outside a
        derivation: True / False / 'u'."""
        saw_cond = False
        for (_args, cond, _s, _m) in self.solve_literal(lit, caller_module,
                                                        env):
            if not cond:
                return False
            saw_cond = True
        return "u" if saw_cond else True

    # ------------------------------------------------------------------
    # tables
    # ------------------------------------------------------------------

    def _is_proc(self, key, mod):
        m = self.ctx.registry.get(mod, create=False)
        return bool(m) and key.wrapper == "apply" and \
            (key.functor, key.arity) in m.prolog_preds

    def table_call(self, key, resolved_args, host, lit):
        gs = self.ctx.settings.goalsize
        if gs is not None:
            size = sum(term_size(a) for a in resolved_args)
            if size > gs[0]:
                resolved_args = self._trip_goal(resolved_args, gs)
        vkey = variant_key_seq(resolved_args) + repr(key.sort_key()).encode()
        tbl = self.tables.get(vkey)
        if tbl is None:
            mapping = {}
            tbl = Table(vkey, key, tuple(rename(a, mapping)
                                         for a in resolved_args))
            self.tables[vkey] = tbl
            self._created.append(tbl)
            self._schedule_producers(tbl)
        if host is not None:
            host.alldeps.add(tbl)
            self.rdeps.setdefault(tbl, set()).add(host)
        return tbl

    def _trip_goal(self, args, gs):
        limit, action = gs
        if action == "abstract":
            return abstract_terms(args, limit)
        if action == "suspend" and self.ctx.on_suspend is not None:
            self.ctx.on_suspend("goalsize", args)
            return args
        raise TripwireError("subgoal size exceeds %d: %r" % (limit, args))

    def _clauses_for(self, key):
        m = self.ctx.registry.get(key.module, create=False)
        clauses = []
        found = False
        if m is not None:
            ks = m.stores.get(key)
            if ks is not None:
                found = True
                clauses.extend(ks.live_clauses())
            if key.wrapper in ("apply", "neg_apply"):
                if key.functor is not None:
                    wk = PredicateKey(key.module, key.wrapper, None, key.arity)
                    ks2 = m.stores.get(wk)
                    if ks2 is not None:
                        found = True
                        clauses.extend(ks2.live_clauses())
                else:
                    for k2, ks2 in list(m.stores.items()):
                        if k2.wrapper == key.wrapper and k2.arity == key.arity \
                                and k2.functor is not None:
                            found = True
                            clauses.extend(ks2.live_clauses())
        return clauses, found

    def _schedule_producers(self, tbl):
        key = tbl.pkey
        clauses, found = self._clauses_for(key)
        if not found and self.ctx.settings.undefined_error \
                and not key.wrapper.endswith("_x") \
                and self.ctx.registry.get(key.module, create=False) is not None:
            raise UndefinedPredicate("undefined predicate %s/%s in %s"
                                     % (key.functor, key.arity, key.module))
        tbl.kbkeys.add(key)
        self.key_tables.setdefault(key, set()).add(tbl)
        clauses.sort(key=lambda c: c.seq)
        for c in clauses:
            mapping = {}
            head = tuple(rename(a, mapping) for a in c.args)
            env = {}
            ok = True
            for p, g in zip(head, tbl.goal):
                env = unify(p, g, env)
                if env is None:
                    ok = False
                    break
            if not ok:
                continue
            body = tuple(rename_lit(l, mapping) for l in c.body)
            self.agenda.append(
                ("s", DState(tbl, key.module, body, 0, env, frozenset(), (),
                             head)))

    # ------------------------------------------------------------------
    # the scheduler
    # ------------------------------------------------------------------

    def run(self):
        if self.running:
            # nested solve while driving: finish new work, the outer loop's
            # fixpoint covers the rest
            self._drain()
            return
        self.running = True
        try:
            self._complete_rounds()
            self._final_fixpoint()
        finally:
            self.running = False

    def _check_time(self):
        self.steps += 1
        if self.steps & 0xFF:
            return
        dl = self.deadline
        if dl is not None and time.monotonic() > dl[0]:
            raise TimeoutAbort((time.monotonic() - dl[1]) * 1000.0)

    def _drain(self):
        agenda = self.agenda
        while agenda:
            self._check_time()
            kind, item = agenda.popleft()
            if kind == "s":
                self.run_state(item)
            else:
                item.queued = False
                if not item.dead:
                    self.pump(item)
        self._process_events()

    def _complete_rounds(self):
        while True:
            self._drain()
            act = [t for t in self._created if t.status == ACTIVE]
            if not act:
                return
            order = self._scc_order(act)
            progressed = False
            done = set()
            for scc in order:
                sccset = set(scc)
                blocked = False
                for t in scc:
                    for d in t.posdeps | t.negdeps:
                        if d.status == ACTIVE and d not in sccset \
                                and d not in done:
                            blocked = True
                            break
                    if blocked:
                        break
                if blocked:
                    break
                waiters = [w for t in scc for w in t.negwaiters
                           if not w.dead and w.state.table in sccset]
                if waiters:
                    for w in waiters:
                        self._delay_waiter(w)
                    progressed = True
                    break
                self._complete_scc(scc)
                done.update(scc)
                progressed = True
                if self.agenda:
                    # resumed waiters must run before more components close
                    break
            if not progressed:
                raise EngineError("tabling engine stalled")

    def _scc_order(self, act):
        """Iterative Tarjan; components come out innermost first."""
        actset = set(act)
        index = {}
        low = {}
        onstk = set()
        stk = []
        out = []
        counter = [0]
        for root in act:
            if root in index:
                continue
            index[root] = low[root] = counter[0]
            counter[0] += 1
            stk.append(root)
            onstk.add(root)
            work = [(root, iter([d for d in root.posdeps | root.negdeps
                                 if d in actset]))]
            while work:
                node, it = work[-1]
                advanced = False
                for nxt in it:
                    if nxt not in index:
                        index[nxt] = low[nxt] = counter[0]
                        counter[0] += 1
                        stk.append(nxt)
                        onstk.add(nxt)
                        work.append((nxt, iter([d for d in nxt.posdeps |
                                                nxt.negdeps if d in actset])))
                        advanced = True
                        break
                    if nxt in onstk:
                        if index[nxt] < low[node]:
                            low[node] = index[nxt]
                if advanced:
                    continue
                work.pop()
                if work and low[node] < low[work[-1][0]]:
                    low[work[-1][0]] = low[node]
                if low[node] == index[node]:
                    comp = []
                    while True:
                        w = stk.pop()
                        onstk.discard(w)
                        comp.append(w)
                        if w is node:
                            break
                    out.append(comp)
        return out

    def _delay_waiter(self, w):
        w.dead = True
        ref = NafRef(w.target, w.goal_args,
                     whole=self._is_whole(w.target, w.goal_args))
        st = w.state
        self.ctx.trace("delay", w.goal_args)
        self.agenda.append(("s", DState(st.table, st.module, st.body, st.i,
                                        st.env, st.delays | {ref}, st.pends,
                                        st.head)))

    @staticmethod
    def _is_whole(table, goal_args):
        return variant_key_seq(goal_args) == variant_key_seq(table.goal)

    def _complete_scc(self, scc):
        for t in scc:
            t.status = COMPLETE
            t.consumers = []
        for t in scc:
            self._resolve_nafrefs_at_completion(t)
            waiters, t.negwaiters = t.negwaiters, []
            for w in waiters:
                if not w.dead:
                    w.dead = True
                    self._resume_neg(w)
        self._process_events()

    def _matching_answers(self, table, goal_args, whole):
        uncond = False
        conds = []
        for ak in table.order:
            entry = table.live_answer(ak)
            if entry is MISSING:
                continue
            if not whole:
                aterm = tuple(rename(a, {}) for a in table.aterms[ak])
                e = {}
                ok = True
                for p, v in zip(goal_args, aterm):
                    e = unify(p, v, e)
                    if e is None:
                        ok = False
                        break
                if not ok:
                    continue
            if entry is None:
                uncond = True
                break
            conds.append(ak)
        return uncond, conds

    def _resume_neg(self, w):
        whole = self._is_whole(w.target, w.goal_args)
        uncond, conds = self._matching_answers(w.target, w.goal_args, whole)
        if uncond:
            return
        st = w.state
        delays = st.delays
        if conds:
            ref = NafRef(w.target, w.goal_args, whole)
            ref.keys = set(conds)
            delays = delays | {ref}
        self.agenda.append(("s", DState(st.table, st.module, st.body, st.i,
                                        st.env, delays, st.pends, st.head)))

    def _resolve_nafrefs_at_completion(self, t):
        for ref in t.nafrefs:
            if ref.state is not None or ref.keys is not None:
                continue
            uncond, conds = self._matching_answers(t, ref.goal_args, ref.whole)
            if uncond:
                self._fire(ref, False)
            elif conds:
                ref.keys = set(conds)
            else:
                self._fire(ref, True)

    # ------------------------------------------------------------------
    # derivation states
    # ------------------------------------------------------------------

    def run_state(self, st0):
        stack = [st0]
        while stack:
            self._check_time()
            st = stack.pop()
            body, i = st.body, st.i
            env, delays, pends = st.env, st.delays, st.pends
            while True:
                if pends:
                    act = self._pend_action(pends, env, body, i, st.head)
                    if act is not None:
                        which, rest = act
                        res = self._exec_susp(which, rest, st, i, env, delays,
                                              stack)
                        if res is None:
                            break
                        env, delays, pends = res
                        continue
                if i >= len(body):
                    self.emit_answer(st.table, st.head, env, delays, pends)
                    break
                lit = body[i]
                i += 1
                step = self._step_literal(lit, st, i, env, delays, pends, stack)
                if step is None:
                    break
                env, delays, pends = step

    def _step_literal(self, lit, st, nexti, env, delays, pends, stack):
        """One literal; returns the inline continuation (env, delays, pends)
        or None when this branch forked away, suspended, or failed."""
        if lit.delayq is not None:
            return self._quantified(lit, st, nexti, env, delays, pends, stack)
        if lit.builtin is not None:
            return self._builtin(lit, st, nexti, env, delays, pends, stack)
        if lit.neg:
            return self._naf(lit, st, nexti, env, delays, pends, stack)
        return self._positive(lit, st, nexti, env, delays, pends, stack)

    def _cont(self, st, i, env, delays, pends):
        return DState(st.table, st.module, st.body, i, env, delays, pends,
                      st.head)

    def _builtin(self, lit, st, nexti, env, delays, pends, stack):
        fn = BUILTINS.get(lit.builtin)
        if fn is None:
            raise EngineError("unknown builtin %r" % (lit.builtin,))
        if lit.builtin in ("insert", "delete", "t_insert", "t_delete",
                           "t_enable", "t_disable", "commit"):
            raise EngineError("updates are not allowed inside tabled rules")
        sols = list(fn(lit.args, env, self.ctx))
        if not sols:
            return None
        for e2 in sols[:0:-1]:
            stack.append(self._cont(st, nexti, e2, delays, pends))
        return sols[0], delays, pends

    def _quantified(self, lit, st, nexti, env, delays, pends, stack):
        kind, conds = lit.delayq
        if self._conds_hold(conds, env):
            bare = Lit(lit.wrapper, lit.args, lit.mod, lit.neg, None,
                       lit.builtin, lit.span)
            return self._step_literal(bare, st, nexti, env, delays, pends,
                                      stack)
        self.ctx.trace("delay-quant", tuple(resolve(a, env) for a in lit.args))
        return env, delays, pends + (Susp(kind, lit, lit.args, conds),)

    @staticmethod
    def _conds_hold(conds, env):
        for test, v in conds:
            t = resolve(v, env)
            if test == "ground" and is_ground(t):
                return True
            if test == "nonvar" and type(t) is not Var:
                return True
        return False

    # -- negation --------------------------------------------------------

    def _naf(self, lit, st, nexti, env, delays, pends, stack):
        resolved = tuple(resolve(a, env) for a in lit.args)
        if not all(is_ground(a) for a in resolved):
            if not self.ctx.settings.subgoal_delay:
                return self._residual_naf(lit, resolved, st.module, env,
                                          delays, pends, host=st.table)
            if self._neg_bridge(lit, resolved, st.module, host=st.table):
                self.ctx.trace("neg-bridge", resolved)
                return env, delays, pends
            self.ctx.trace("delay-naf", resolved)
            return env, delays, pends + (Susp("naf", lit, lit.args, None),)
        return self._ground_naf(lit, resolved, st, nexti, env, delays, pends)

    def _ground_naf(self, lit, resolved, st, conti, env, delays, pends):
        """Ground negative literal; conti is the body resumption index."""
        mods = self.ctx.registry.resolve_call(lit, st.module, env)
        if len(mods) != 1:
            raise EngineError("negative literal with unbound module reference")
        mod = mods[0]
        self.ctx.registry.check_export(lit, mod, st.module)
        key = lit.key_in(mod)
        if self._is_proc(key, mod):
            truth = self._proc_naf(lit, resolved, mod)
            if truth is False:
                return None
            if truth is True:
                return env, delays, pends
            return env, delays | {UFLOOR}, pends
        m = self.ctx.registry.get(mod, create=False)
        ks = m.stores.get(key) if m else None
        if ks is not None and ks.facts_only and not self._tripwired():
            st.table.kbkeys.add(key)
            self.key_tables.setdefault(key, set()).add(st.table)
            for c in ks.live_clauses():
                e = {}
                good = True
                for p, v in zip(tuple(rename(a, {}) for a in c.args), resolved):
                    e = unify(p, v, e)
                    if e is None:
                        good = False
                        break
                if good:
                    return None
            return env, delays, pends
        tbl = self.table_call(key, resolved, st.table, lit)
        if tbl.status == COMPLETE:
            whole = self._is_whole(tbl, resolved)
            uncond, conds = self._matching_answers(tbl, resolved, whole)
            if uncond:
                return None
            if not conds:
                return env, delays, pends
            ref = NafRef(tbl, resolved, whole)
            ref.keys = set(conds)
            return env, delays | {ref}, pends
        st.table.negdeps.add(tbl)
        tbl.negwaiters.append(
            NegWaiter(self._cont(st, conti, env, delays, pends), tbl, resolved))
        return None

    def _proc_naf(self, lit, resolved, mod):
        sols = list(self.ctx.proc_runner(self, lit, resolved, mod))
        if not sols:
            return True
        if any(not cond for (_a, cond, _s) in sols):
            return False
        return "u"

    def _neg_bridge(self, lit, resolved, module, host=None):
        """Derivable explicit-negation complement makes a naf literal succeed
        without evaluating the positive goal."""
        if lit.wrapper.startswith("neg_"):
            return False
        neg_lit = Lit("neg_" + lit.wrapper, resolved, lit.mod)
        mods = self.ctx.registry.resolve_call(neg_lit, module, {})
        if len(mods) != 1:
            return False
        key = neg_lit.key_in(mods[0])
        m = self.ctx.registry.get(mods[0], create=False)
        if m is None or (key not in m.stores and
                         PredicateKey(mods[0], key.wrapper, None, key.arity)
                         not in m.stores):
            return False
        sub = Engine(self.ctx, sub=True)
        sub.start_run(self.deadline)
        hits = sub.solve_literal(neg_lit, module)
        self._absorb_subdeps(sub, host)
        for (aargs, cond, _s, _m) in hits:
            if cond:
                continue
            e = {}
            ok = True
            for p, g in zip(tuple(rename(a, {}) for a in aargs), resolved):
                e = match(p, g, e)
                if e is None:
                    ok = False
                    break
            if ok:
                return True
        return False

    def _residual_naf(self, lit, resolved, module, env, delays, pends,
                      host=None):
        """Negative literal whose variables can no longer be bound: by
        default check that no instance of the positive goal is true."""
        if self.ctx.settings.nafmode == "u":
            self.ctx.trace("residual-u", resolved)
            return env, delays | {UFLOOR}, pends
        self.ctx.trace("not_exists", resolved)
        sub = Engine(self.ctx, sub=True)
        sub.start_run(self.deadline)
        saw_cond = False
        failed = False
        for (_a, cond, _s, _m) in sub.solve_literal(
                lit.with_args(resolved), module):
            if not cond:
                failed = True
                break
            saw_cond = True
        self._absorb_subdeps(sub, host)
        if failed:
            self.ctx.trace("not_exists-fail", resolved)
            return None
        if saw_cond:
            return env, delays | {UFLOOR}, pends
        return env, delays, pends

    def _absorb_subdeps(self, sub, host):
        if host is None:
            return
        for t in sub._created:
            for k in t.kbkeys:
                host.kbkeys.add(k)
                self.key_tables.setdefault(k, set()).add(host)

    # -- suspensions -------------------------------------------------------

    def _pend_action(self, pends, env, body, i, head):
        future = None
        for idx, s in enumerate(pends):
            if s.kind == "naf":
                gargs = tuple(resolve(a, env) for a in s.goal_args)
                if all(is_ground(a) for a in gargs):
                    return ("exec", (s, gargs)), pends[:idx] + pends[idx + 1:]
                if future is None:
                    future = self._future_vars(body, i, head, env)
                if not (set(term_vars(gargs, [])) & future):
                    return ("forced", (s, gargs)), pends[:idx] + pends[idx + 1:]
            else:
                if self._conds_hold(s.conds, env):
                    gargs = tuple(resolve(a, env) for a in s.goal_args)
                    return ("exec", (s, gargs)), pends[:idx] + pends[idx + 1:]
        return None

    @staticmethod
    def _future_vars(body, i, head, env):
        acc = []
        for l in body[i:]:
            for a in l.args:
                term_vars(resolve(a, env), acc)
        for a in head:
            term_vars(resolve(a, env), acc)
        return set(acc)

    def _exec_susp(self, which, rest, st, i, env, delays, stack):
        tag, (s, gargs) = which
        st2 = self._cont(st, i, env, delays, rest)
        if s.kind == "naf":
            if tag == "exec":
                self.ctx.trace("wake-naf", gargs)
                return self._ground_naf(s.lit, gargs, st2, i, env, delays,
                                        rest)
            return self._residual_naf(s.lit, gargs, st.module, env, delays,
                                      rest, host=st.table)
        # must / wish whose condition now holds: run the literal in place
        bare = Lit(s.lit.wrapper, s.lit.args, s.lit.mod, s.lit.neg, None,
                   s.lit.builtin, s.lit.span)
        return self._step_literal(bare, st2, i, env, delays, rest, stack)

    # -- positive literals ---------------------------------------------------

    def _positive(self, lit, st, nexti, env, delays, pends, stack):
        reg = self.ctx.registry
        modt = lit.mod
        if type(modt) is Var:
            bound = walk(modt, env)
            if type(bound) is Var:
                first = None
                for name in reg.resolve_call(lit, st.module, env):
                    if not reg.check_export(lit, name, st.module, quiet=True):
                        continue
                    e2 = unify(bound, name, env)
                    if e2 is None:
                        continue
                    if first is None:
                        first = e2
                    else:
                        stack.append(self._cont(st, nexti - 1, e2, delays,
                                                pends))
                if first is None:
                    return None
                env = first
                mod = walk(modt, env)
            else:
                mod = bound
        elif modt is CURRENT:
            mod = st.module
        else:
            mod = modt
        if isinstance(mod, str) and mod.startswith("\\"):
            handler = self.ctx.builtin_modules.get(mod)
            if handler is None:
                raise EngineError("unknown builtin module %r" % (mod,))
            first = None
            for e2 in handler(lit, env, self, st.module):
                if first is None:
                    first = (e2, delays, pends)
                else:
                    stack.append(self._cont(st, nexti, e2, delays, pends))
            return first
        reg.check_export(lit, mod, st.module)
        key = lit.key_in(mod)
        if self._is_proc(key, mod):
            resolved = tuple(resolve(a, env) for a in lit.args)
            first = None
            for (aargs, cond, susps) in self.ctx.proc_runner(self, lit,
                                                             resolved, mod):
                e2 = env
                for p, v in zip(lit.args, aargs):
                    e2 = unify(p, v, e2)
                    if e2 is None:
                        break
                if e2 is None:
                    continue
                d2 = delays | {UFLOOR} if cond else delays
                p2 = pends + susps
                if first is None:
                    first = (e2, d2, p2)
                else:
                    stack.append(self._cont(st, nexti, e2, d2, p2))
            return first
        m = reg.get(mod, create=False)
        resolved = tuple(resolve(a, env) for a in lit.args)
        ks = m.stores.get(key) if m else None
        if ks is not None and ks.facts_only and not self._tripwired():
            return self._fact_resolve(ks, key, lit, st, nexti, env, delays,
                                      pends, stack, resolved)
        tbl = self.table_call(key, resolved, st.table, lit)
        st.table.posdeps.add(tbl)
        cons = Consumer(self._cont(st, nexti, env, delays, pends), tbl,
                        resolved)
        if tbl.status == COMPLETE:
            self.pump(cons)
        else:
            tbl.consumers.append(cons)
            cons.queued = True
            self.agenda.append(("c", cons))
        return None

    def _tripwired(self):
        s = self.ctx.settings
        return s.maxanswers is not None or s.answersize is not None or \
            s.goalsize is not None

    def _fact_resolve(self, ks, key, lit, st, nexti, env, delays, pends,
                      stack, resolved):
        st.table.kbkeys.add(key)
        self.key_tables.setdefault(key, set()).add(st.table)
        pos = None
        for p, a in enumerate(resolved):
            if type(a) is str or (type(a) is int):
                pos = p
                break
        first = None
        if pos is not None:
            idx, restc = ks.fact_index(pos)
            for fargs in idx.get(resolved[pos], ()):
                e2 = env
                for p, v in zip(lit.args, fargs):
                    e2 = unify(p, v, e2)
                    if e2 is None:
                        break
                if e2 is None:
                    continue
                if first is None:
                    first = (e2, delays, pends)
                else:
                    stack.append(self._cont(st, nexti, e2, delays, pends))
            rest_iter = restc
        else:
            rest_iter = ks.live_clauses()
        for c in rest_iter:
            fargs = tuple(rename(a, {}) for a in c.args)
            e2 = env
            for p, v in zip(lit.args, fargs):
                e2 = unify(p, v, e2)
                if e2 is None:
                    break
            if e2 is None:
                continue
            if first is None:
                first = (e2, delays, pends)
            else:
                stack.append(self._cont(st, nexti, e2, delays, pends))
        return first

    # ------------------------------------------------------------------
    # answers
    # ------------------------------------------------------------------

    def emit_answer(self, tbl, head, env, delays, pends):
        if tbl.status == COMPLETE:
            return
        args = tuple(resolve(a, env) for a in head)
        keep = ()
        rest = []
        if pends:
            avars = set(term_vars(args, []))
            keep_l = []
            for s in pends:
                rs = s.resolved(env)
                if set(term_vars(rs.goal_args, [])) & avars:
                    keep_l.append(rs)
                else:
                    rest.append(rs)
            keep = tuple(keep_l)
        branches = [(env, delays, list(rest))]
        while branches:
            env1, delays1, rs = branches.pop()
            if rs:
                s = rs[0]
                tail = rs[1:]
                if s.kind == "must":
                    raise MustDelayError(s.goal_args)
                if s.kind == "naf":
                    out = self._residual_naf(s.lit, s.goal_args,
                                             tbl.pkey.module, env1, delays1,
                                             (), host=tbl)
                    if out is None:
                        continue
                    e2, d2, _ = out
                    branches.append((e2, d2, tail))
                else:  # wish: run the goal now, however instantiated
                    for (e2, d2) in self._late_goal(s, env1, delays1,
                                                    tbl.pkey.module):
                        branches.append((e2, d2, tail))
                continue
            self._finish_answer(tbl, args, env1, delays1, keep)

    def _late_goal(self, s, env, delays, module):
        lit = s.lit
        if lit.builtin is not None:
            fn = BUILTINS[lit.builtin]
            for e2 in fn(s.goal_args, env, self.ctx):
                yield e2, delays
            return
        if lit.neg:
            out = self._residual_naf(lit, s.goal_args, module, env, delays, ())
            if out is not None:
                yield out[0], out[1]
            return
        sub = Engine(self.ctx, sub=True)
        sub.start_run(self.deadline)
        for (aargs, cond, _s, _m) in sub.solve_literal(
                lit.with_args(s.goal_args), module, env):
            e2 = env
            for p, v in zip(s.goal_args, aargs):
                e2 = unify(p, v, e2)
                if e2 is None:
                    break
            if e2 is None:
                continue
            yield e2, (delays | {UFLOOR} if cond else delays)

    def _finish_answer(self, tbl, args, env, delays, keep):
        args = tuple(resolve(a, env) for a in args)
        az = self.ctx.settings.answersize
        if az is not None:
            limit, action = az
            if self._restraint_size(tbl, args) > limit + 1:
                if action == "abstract":
                    args = self._restraint_abstract(tbl, args, limit + 1)
                    delays = delays | {RESTRAINT}
                elif action == "suspend" and self.ctx.on_suspend is not None:
                    self.ctx.on_suspend("answersize", args)
                else:
                    raise TripwireError("answer size exceeds %d: %r"
                                        % (limit, args))
        self._insert_answer(tbl, args, delays, keep, env)

    def _restraint_size(self, tbl, args):
        n = 0
        for g, a in zip(tbl.goal, args):
            if not is_ground(g):
                n += term_size(a)
        return n

    def _restraint_abstract(self, tbl, args, limit):
        idxs = [i for i, g in enumerate(tbl.goal) if not is_ground(g)]
        sub = abstract_terms(tuple(args[i] for i in idxs), limit)
        out = list(args)
        for i, v in zip(idxs, sub):
            out[i] = v
        return tuple(out)

    def _insert_answer(self, tbl, args, delays, susps, env):
        ma = self.ctx.settings.maxanswers
        if ground_nofloat(args) and not susps:
            akey = args
            canon = args
            csusp = ()
        else:
            canon, csusp = self._canon_seq(args, susps, env)
            akey = variant_key_seq(canon)
        entry = tbl.answers.get(akey, MISSING)
        if entry is MISSING and akey not in tbl.aterms:
            if ma is not None and not tbl.tripped and len(tbl.answers) >= ma[0]:
                self._trip_maxanswers(tbl, ma)
                return
            if delays:
                sup = Support(tbl, akey, delays)
                tbl.answers[akey] = [sup]
                self._register_support(sup)
            else:
                tbl.answers[akey] = None
                self.events.append(("uncond", tbl, akey))
            tbl.aterms[akey] = canon
            if csusp:
                tbl.asusp[akey] = csusp
            tbl.order.append(akey)
            for c in tbl.consumers:
                if not c.queued and not c.dead:
                    c.queued = True
                    self.agenda.append(("c", c))
            return
        if entry is MISSING:
            # deleted earlier; an independent new support revives it
            if delays:
                sup = Support(tbl, akey, delays)
                tbl.answers[akey] = [sup]
                self._register_support(sup)
            else:
                tbl.answers[akey] = None
                self.events.append(("uncond", tbl, akey))
            return
        if entry is None:
            return
        if not delays:
            for s in entry:
                self._unregister_support(s)
                s.refs = None
            tbl.answers[akey] = None
            self.events.append(("uncond", tbl, akey))
            return
        dset = set(delays)
        for s in entry:
            if s.refs == dset:
                return
        sup = Support(tbl, akey, delays)
        entry.append(sup)
        self._register_support(sup)

    def _canon_seq(self, args, susps, env):
        seen = {}

        def go(x):
            x = walk(x, env)
            if type(x) is Var:
                nv = seen.get(x)
                if nv is None:
                    nv = Var("A%d" % len(seen))
                    seen[x] = nv
                return nv
            if isinstance(x, tuple):
                if x[0] is TLIT:
                    return x
                if x[0] is RFY:
                    return (RFY, tuple((lt[0], lt[1]) + tuple(
                        go(a) for a in lt[2:]) for lt in x[1]))
                return tuple(go(e) for e in x)
            return x

        cargs = tuple(go(a) for a in args)
        csusp = tuple(Susp(s.kind, s.lit, tuple(go(a) for a in s.goal_args),
                           None if s.conds is None else
                           [(t, go(v)) for t, v in s.conds])
                      for s in susps)
        return cargs, csusp

    def _trip_maxanswers(self, tbl, ma):
        limit, action = ma
        if action == "error":
            raise TripwireError("answer count exceeds %d for %r"
                                % (limit, tbl.goal))
        tbl.tripped = True
        catch = tuple(rename(a, {}) for a in tbl.goal)
        akey = variant_key_seq(catch)
        sup = Support(tbl, akey, {RESTRAINT})
        tbl.answers[akey] = [sup]
        tbl.aterms[akey] = catch
        tbl.order.append(akey)
        for c in tbl.consumers:
            if not c.queued and not c.dead:
                c.queued = True
                self.agenda.append(("c", c))
        tbl.status = COMPLETE
        tbl.consumers = []
        self._resolve_nafrefs_at_completion(tbl)
        waiters, tbl.negwaiters = tbl.negwaiters, []
        for w in waiters:
            if not w.dead:
                w.dead = True
                self._resume_neg(w)

    # ------------------------------------------------------------------
    # simplification
    # ------------------------------------------------------------------

    def _register_support(self, s):
        for r in s.refs:
            if r is RESTRAINT or r is UFLOOR:
                continue
            self.holders.setdefault(r, []).append(s)

    def _unregister_support(self, s):
        if s.refs is None:
            return
        for r in s.refs:
            lst = self.holders.get(r)
            if lst is not None:
                try:
                    lst.remove(s)
                except ValueError:
                    pass

    def _fire(self, ref, truth):
        if isinstance(ref, NafRef):
            if ref.state is not None:
                return
            ref.state = truth
        self.events.append(("ref", ref, truth))

    def _process_events(self):
        while self.events:
            kind, a, b = self.events.popleft()
            if kind == "uncond":
                tbl, akey = a, b
                r = tbl.arefs.get(akey)
                if r is not None:
                    self.events.append(("ref", r, True))
                for nref in tbl.nafrefs:
                    if nref.state is not None:
                        continue
                    if nref.keys is not None:
                        if akey in nref.keys:
                            self._fire(nref, False)
                    elif self._answer_matches(tbl, akey, nref):
                        self._fire(nref, False)
                continue
            ref, truth = a, b
            supports = self.holders.pop(ref, ())
            if truth:
                for s in supports:
                    if s.refs is None:
                        continue
                    s.refs.discard(ref)
                    if not s.refs:
                        entry = s.table.answers.get(s.akey)
                        if isinstance(entry, list):
                            for o in entry:
                                if o is not s:
                                    self._unregister_support(o)
                                    o.refs = None
                        s.table.answers[s.akey] = None
                        s.refs = None
                        self.events.append(("uncond", s.table, s.akey))
            else:
                for s in supports:
                    if s.refs is None:
                        continue
                    self._unregister_support(s)
                    s.refs = None
                    entry = s.table.answers.get(s.akey)
                    if not isinstance(entry, list):
                        continue
                    try:
                        entry.remove(s)
                    except ValueError:
                        pass
                    if not entry and s.table.status == COMPLETE:
                        self._delete_answer(s.table, s.akey)

    def _answer_matches(self, tbl, akey, nref):
        if nref.whole:
            return True
        aterm = tuple(rename(a, {}) for a in tbl.aterms[akey])
        e = {}
        for p, v in zip(nref.goal_args, aterm):
            e = unify(p, v, e)
            if e is None:
                return False
        return True

    def _delete_answer(self, tbl, akey):
        tbl.answers.pop(akey, None)
        r = tbl.arefs.get(akey)
        if r is not None:
            self.events.append(("ref", r, False))
        for nref in tbl.nafrefs:
            if nref.state is not None:
                continue
            if nref.keys is not None:
                nref.keys.discard(akey)
                if not nref.keys:
                    self._fire(nref, True)
            elif tbl.status == COMPLETE and not tbl.has_live_answers():
                self._fire(nref, True)

    # ------------------------------------------------------------------
    # consumers
    # ------------------------------------------------------------------

    def pump(self, cons):
        tbl = cons.target
        order = tbl.order
        st = cons.state
        while cons.cursor < len(order):
            self._check_time()
            ak = order[cons.cursor]
            cons.cursor += 1
            entry = tbl.live_answer(ak)
            if entry is MISSING:
                continue
            aterm = tbl.aterms[ak]
            susps = tbl.asusp.get(ak, ())
            if susps or not ground_nofloat(aterm):
                mapping = {}
                aterm = tuple(rename(a, mapping) for a in aterm)
                susps = tuple(s.renamed(mapping) for s in susps)
            e2 = st.env
            for p, v in zip(cons.pattern, aterm):
                e2 = unify(p, v, e2)
                if e2 is None:
                    break
            if e2 is None:
                continue
            delays = st.delays if entry is None else st.delays | {tbl.aref(ak)}
            self.run_state(DState(st.table, st.module, st.body, st.i, e2,
                                  delays, st.pends + susps, st.head))

    # ------------------------------------------------------------------
    # final fixpoint: residual unfounded-support removal
    # ------------------------------------------------------------------

    def _final_fixpoint(self):
        while True:
            self._process_events()
            if not self._founding_pass():
                break

    def _founding_pass(self):
        conds = {}
        for tbl in self._created:
            for ak, entry in tbl.answers.items():
                if isinstance(entry, list) and entry:
                    conds[(tbl, ak)] = entry
        founded = set()
        changed = True
        while changed:
            changed = False
            for key, entry in conds.items():
                if key in founded:
                    continue
                for s in entry:
                    if s.refs is None:
                        continue
                    ok = True
                    for r in s.refs:
                        if type(r) is tuple and len(r) == 3 and r[0] == "a":
                            target = (r[1], r[2])
                            tentry = r[1].answers.get(r[2], MISSING)
                            if tentry is None:
                                continue
                            if tentry is MISSING:
                                ok = False
                                break
                            if target in conds:
                                if target not in founded:
                                    ok = False
                                    break
                    if ok:
                        founded.add(key)
                        changed = True
                        break
        removed = False
        for (tbl, ak), entry in conds.items():
            if (tbl, ak) in founded:
                continue
            cur = tbl.answers.get(ak, MISSING)
            if not isinstance(cur, list) or not cur:
                continue
            for s in list(entry):
                self._unregister_support(s)
                s.refs = None
            cur.clear()
            self._delete_answer(tbl, ak)
            removed = True
        return removed

    # ------------------------------------------------------------------
    # reactive invalidation
    # ------------------------------------------------------------------

    def invalidate_key(self, key):
        seeds = self.key_tables.get(key)
        if not seeds:
            return
        doomed = set()
        stack = list(seeds)
        while stack:
            t = stack.pop()
            if t in doomed:
                continue
            doomed.add(t)
            stack.extend(self.rdeps.get(t, ()))
        for t in doomed:
            self.tables.pop(t.vkey, None)
            self.rdeps.pop(t, None)
        for k in list(self.key_tables):
            self.key_tables[k] -= doomed
            if not self.key_tables[k]:
                del self.key_tables[k]
        for s in self.rdeps.values():
            s -= doomed

    def flush(self):
        self.tables.clear()
        self.key_tables.clear()
        self.rdeps.clear()
        self.holders.clear()
