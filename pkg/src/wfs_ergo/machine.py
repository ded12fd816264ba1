"""Depth-first procedural evaluation.

Top-level query bodies and predicates declared `:- prolog{f/n}` run here:
chronological backtracking with a trail, local cut, and backtrackable
updates.  Tabled predicates are evaluated by handing the literal to the
tabling engine, which completes the relevant tables first (local
scheduling), then their answers become ordinary alternatives.  Consuming an
undefined answer taints the current derivation with the u flag.

Bindings live in the machine's own dict, so engine-side structures are
never mutated; the dict doubles as a substitution environment for the
shared term operations.  The explicit goal stack keeps recursion depth flat
no matter how deep the object-level recursion goes (list builders at 10^5+
elements are the normal case, not the exception).
"""

from __future__ import annotations

import time

from .builtins import BUILTINS, EvalError
from .dynamics import (
    UpdateError, apply_delete, apply_insert, apply_setenabled, commit,
    undo_entry,
)
from .engine import Engine, MustDelayError, Susp, TimeoutAbort
from .kb import CURRENT, Lit
from .terms import Var, is_ground, rename, resolve, term_vars, unify, walk


class CP:
    __slots__ = ("goals", "trail_len", "alts", "pends", "uflag", "kind")

    def __init__(self, goals, trail_len, alts, pends, uflag, kind):
        self.goals = goals
        self.trail_len = trail_len
        self.alts = alts          # iterator of continuation thunks
        self.pends = pends
        self.uflag = uflag
        self.kind = kind          # 'clause' | 'answer' | 'alt' | 'builtin'


class Machine:
    def __init__(self, session, engine, module):
        self.session = session
        self.ctx = session.ctx
        self.engine = engine
        self.module = module
        self.bind = {}
        self.trail = []
        self.cps = []
        self.goals = None
        self.pends = ()
        self.uflag = False
        self.steps = 0

    # -- bindings -----------------------------------------------------------

    def _bind(self, v, t):
        self.bind[v] = t
        self.trail.append(v)

    def unify(self, a, b):
        e = unify(a, b, self.bind)
        if e is None:
            return False
        if e is not self.bind:
            for k, v in e.items():
                if k not in self.bind:
                    self._bind(k, v)
        return True

    def _undo_to(self, n):
        bind = self.bind
        trail = self.trail
        while len(trail) > n:
            x = trail.pop()
            if type(x) is Var:
                bind.pop(x, None)
            else:
                x()

    # -- control ------------------------------------------------------------

    def _push_cp(self, alts, kind):
        self.cps.append(CP(self.goals, len(self.trail), alts, self.pends,
                           self.uflag, kind))

    def _backtrack(self):
        while self.cps:
            cp = self.cps[-1]
            self._undo_to(cp.trail_len)
            self.goals = cp.goals
            self.pends = cp.pends
            self.uflag = cp.uflag
            for thunk in cp.alts:
                if thunk():
                    return True
            self.cps.pop()
        return False

    def _check_time(self):
        self.steps += 1
        if self.steps & 0x3FF:
            return
        dl = self.engine.deadline
        if dl is not None and time.monotonic() > dl[0]:
            raise TimeoutAbort((time.monotonic() - dl[1]) * 1000.0)

    # -- driving ------------------------------------------------------------

    def run(self, items, extract):
        """Run the goal list; yield extract(bind), uflag per solution."""
        goals = None
        for it in reversed(items):
            goals = (it, goals)
        self.goals = goals
        live = True
        while live:
            self._check_time()
            if self.goals is None:
                state = self._try_solution()
                if state == "solution":
                    yield extract(self.bind), self.uflag
                    live = self._backtrack()
                elif state == "failed":
                    live = self._backtrack()
                continue
            item, self.goals = self.goals
            if not self._step(item):
                live = self._backtrack()

    def _try_solution(self):
        """Discharge residual suspensions; returns 'solution', 'failed', or
        'retry' when a wish goal was pushed back as a normal goal."""
        while self.pends:
            s = self.pends[0]
            rest = self.pends[1:]
            gargs = tuple(resolve(a, self.bind) for a in s.goal_args)
            if s.kind == "must":
                if self._conds_hold(s.conds):
                    self.pends = rest
                    self.goals = ((s.lit.with_args(s.goal_args), None)
                                  if self.goals is None else self.goals)
                    return "retry"
                raise MustDelayError(gargs)
            if s.kind == "wish":
                self.pends = rest
                bare = Lit(s.lit.wrapper, s.goal_args, s.lit.mod, s.lit.neg,
                           None, s.lit.builtin)
                self.goals = (bare, self.goals)
                return "retry"
            # residual negative literal
            self.pends = rest
            truth = self._residual_naf(s.lit, gargs)
            if truth is False:
                return "failed"
            if truth == "u":
                self.uflag = True
        return "solution"

    def _conds_hold(self, conds):
        for test, v in conds:
            t = resolve(v, self.bind)
            if test == "ground" and is_ground(t):
                return True
            if test == "nonvar" and type(t) is not Var:
                return True
        return False

    def _residual_naf(self, lit, gargs):
        if self.ctx.settings.nafmode == "u":
            self.ctx.trace("residual-u", gargs)
            return "u"
        self.ctx.trace("not_exists", gargs)
        eng = self._eval_engine()
        saw_cond = False
        for (_a, cond, _s, _m) in eng.solve_literal(lit.with_args(gargs),
                                                    self.module, self.bind):
            if not cond:
                self.ctx.trace("not_exists-fail", gargs)
                return False
            saw_cond = True
        return "u" if saw_cond else True

    def _eval_engine(self):
        if self.engine.running:
            sub = Engine(self.ctx, sub=True)
            sub.start_run(self.engine.deadline)
            return sub
        return self.engine

    # -- one step -------------------------------------------------------------

    def _step(self, item):
        if type(item) is tuple:
            kind = item[0]
            if kind == "alt":
                branches = item[1]
                if not branches:
                    return False
                rest = self.goals

                def mk(branch):
                    def thunk():
                        g = rest
                        for it in reversed(branch):
                            g = (it, g)
                        self.goals = g
                        return True
                    return thunk
                thunks = [mk(b) for b in branches[1:]]
                self._push_cp(iter(thunks), "alt")
                g = rest
                for it in reversed(branches[0]):
                    g = (it, g)
                self.goals = g
                return True
            if kind == "cutto":
                del self.cps[item[1]:]
                return True
            raise RuntimeError("unknown goal item %r" % (kind,))
        return self._step_lit(item)

    def _step_lit(self, lit):
        if lit.builtin is not None:
            return self._do_builtin(lit)
        if lit.delayq is not None:
            if self._conds_hold(lit.delayq[1]):
                bare = Lit(lit.wrapper, lit.args, lit.mod, lit.neg, None,
                           lit.builtin, lit.span)
                return self._step_lit(bare)
            self.ctx.trace("delay-quant",
                           tuple(resolve(a, self.bind) for a in lit.args))
            self.pends = self.pends + (Susp(lit.delayq[0], lit, lit.args,
                                            lit.delayq[1]),)
            return True
        if lit.neg:
            return self._do_naf(lit)
        return self._do_call(lit)

    # -- builtins and updates ---------------------------------------------------

    def _do_builtin(self, lit):
        b = lit.builtin
        if b == "cut":
            raise RuntimeError("cut outside a compiled clause")
        if b in ("insert", "delete"):
            return self._do_update(lit, transactional=False)
        if b in ("t_insert", "t_delete"):
            return self._do_update(lit, transactional=True)
        if b in ("t_enable", "t_disable"):
            return self._do_setenabled(lit, b == "t_enable")
        fn = BUILTINS.get(b)
        if fn is None:
            raise EvalError("unknown builtin %r" % (b,))
        sols = list(fn(lit.args, self.bind, self.ctx))
        return self._adopt_env_alternatives(sols)

    def _adopt_env_alternatives(self, sols):
        if not sols:
            return False

        def mk(e):
            def thunk():
                for k, v in e.items():
                    if k not in self.bind:
                        self._bind(k, v)
                return True
            return thunk
        if len(sols) > 1:
            self._push_cp(iter([mk(e) for e in sols[1:]]), "builtin")
        return mk(sols[0])()

    def _guard_updates(self):
        if getattr(self.session, "in_constraint", False):
            raise UpdateError("updates are not allowed inside constraint "
                              "checks or callbacks")

    def _do_update(self, lit, transactional):
        self._guard_updates()
        op = lit.builtin.lstrip("t_") if False else lit.builtin
        insert = op in ("insert", "t_insert")
        for sub in lit.args:
            if insert:
                e = apply_insert(self.session, sub, self.bind, self.module,
                                 transactional)
            else:
                e = apply_delete(self.session, sub, self.bind, self.module,
                                 transactional)
            if e is not None and transactional:
                self.trail.append(lambda e=e: undo_entry(self.session, e))
        return True

    def _do_setenabled(self, lit, enabled):
        self._guard_updates()
        rid = resolve(lit.args[0], self.bind)
        entries = apply_setenabled(self.session, rid, enabled, self.module,
                                   transactional=True)
        for e in entries:
            self.trail.append(lambda e=e: undo_entry(self.session, e))
        return True

    # -- negation -----------------------------------------------------------------

    def _do_naf(self, lit):
        gargs = tuple(resolve(a, self.bind) for a in lit.args)
        if not all(is_ground(a) for a in gargs):
            if not self.ctx.settings.subgoal_delay:
                t = self._residual_naf(lit, gargs)
                if t is False:
                    return False
                if t == "u":
                    self.uflag = True
                return True
            if self._neg_bridge(lit, gargs):
                self.ctx.trace("neg-bridge", gargs)
                return True
            self.ctx.trace("delay-naf", gargs)
            self.pends = self.pends + (Susp("naf", lit, lit.args, None),)
            return True
        eng = self._eval_engine()
        truth = eng.naf_check(lit.with_args(gargs), self.module, {})
        if truth is False:
            return False
        if truth == "u":
            self.uflag = True
        return True

    def _neg_bridge(self, lit, gargs):
        if lit.wrapper.startswith("neg_"):
            return False
        eng = self._eval_engine()
        return eng._neg_bridge(lit, gargs, self.module)

    def _wake_pends(self):
        """Run suspensions whose variables became sufficiently bound."""
        if not self.pends:
            return True
        keep = []
        for s in self.pends:
            if s.kind != "naf":
                if self._conds_hold(s.conds):
                    bare = Lit(s.lit.wrapper, s.lit.args, s.lit.mod,
                               s.lit.neg, None, s.lit.builtin)
                    self.goals = (bare, self.goals)
                else:
                    keep.append(s)
                continue
            gargs = tuple(resolve(a, self.bind) for a in s.goal_args)
            if all(is_ground(a) for a in gargs):
                self.ctx.trace("wake-naf", gargs)
                eng = self._eval_engine()
                truth = eng.naf_check(s.lit.with_args(gargs), self.module, {})
                if truth is False:
                    return False
                if truth == "u":
                    self.uflag = True
            else:
                keep.append(s)
        self.pends = tuple(keep)
        return True

    # -- calls ------------------------------------------------------------------

    def _do_call(self, lit):
        mod = lit.mod
        if mod is CURRENT:
            mod = self.module
        elif type(mod) is Var:
            mod = walk(mod, self.bind)
        if isinstance(mod, str) and mod.startswith("\\"):
            return self._builtin_module(lit, mod)
        reg = self.ctx.registry
        if isinstance(mod, str):
            key = lit.key_in(mod)
            m = reg.get(mod, create=False)
            if m is not None and key.wrapper == "apply" and \
                    (key.functor, key.arity) in m.prolog_preds:
                reg.check_export(lit, mod, self.module)
                return self._call_untabled(lit, mod, m, key)
        # tabled (possibly module-variable) call
        eng = self._eval_engine()
        answers = eng.solve_literal(lit, self.module, self.bind)
        rest = self.goals

        def mk(ans):
            aargs, cond, susps, amod = ans

            def thunk():
                if type(lit.mod) is Var:
                    if not self.unify(lit.mod, amod):
                        return False
                mapping = {}
                pat = tuple(rename(a, mapping) for a in aargs)
                for p, v in zip(lit.args, pat):
                    if not self.unify(p, v):
                        return False
                if cond:
                    self.uflag = True
                if susps:
                    self.pends = self.pends + tuple(
                        s.renamed(mapping) for s in susps)
                self.goals = rest
                return self._wake_pends()
            return thunk
        thunks = [mk(a) for a in answers]
        if not thunks:
            return False
        if len(thunks) > 1:
            self._push_cp(iter(thunks[1:]), "answer")
        return thunks[0]()

    def _call_untabled(self, lit, mod, m, key):
        from .kb import PredicateKey
        clauses = []
        ks = m.stores.get(key)
        if ks is not None:
            clauses.extend(ks.live_clauses())
        wk = PredicateKey(mod, "apply", None, key.arity)
        ks2 = m.stores.get(wk)
        if ks2 is not None:
            clauses.extend(ks2.live_clauses())
        clauses.sort(key=lambda c: c.seq)
        if not clauses:
            if self.ctx.settings.undefined_error:
                from .engine import UndefinedPredicate
                raise UndefinedPredicate("undefined predicate %s/%s in %s"
                                         % (key.functor, key.arity, mod))
            return False
        rest = self.goals
        barrier = len(self.cps)

        def mk(c):
            def thunk():
                mapping = {}
                head = tuple(rename(a, mapping) for a in c.args)
                for p, v in zip(lit.args, head):
                    if not self.unify(p, v):
                        return False
                g = rest
                body = [self._instantiate_body_lit(l, mapping, barrier)
                        for l in reversed(c.body)]
                for it in body:
                    g = (it, g)
                self.goals = g
                return self._wake_pends()
            return thunk
        thunks = [mk(c) for c in clauses]
        if len(thunks) > 1:
            self._push_cp(iter(thunks[1:]), "clause")
        if thunks[0]():
            return True
        # first clause failed at head unification: let backtracking visit
        # the remaining alternatives that were just pushed
        return False

    def _instantiate_body_lit(self, l, mapping, barrier):
        if l.builtin == "cut":
            return ("cutto", barrier)
        from .engine import rename_lit
        return rename_lit(l, mapping)

    def _builtin_module(self, lit, mod):
        if mod == "\\db":
            if lit.args and lit.args[0] == "commit":
                self._guard_updates()
                commit(self.session)
                return True
            raise EvalError("unknown \\db operation %r" % (lit.args,))
        handler = self.ctx.builtin_modules.get(mod)
        if handler is None:
            raise EvalError("unknown builtin module %r" % (mod,))
        sols = list(handler(lit, self.bind, self._eval_engine(), self.module))
        return self._adopt_env_alternatives(sols)
