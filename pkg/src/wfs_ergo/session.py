"""Session: one knowledge base, one settings block, one evaluation at a time.

Statements flow through here: rules are compiled into clauses (complex
negation folded into auxiliary predicates, disjunctive bodies split,
defeasible rules guarded and mirrored as candidate clauses in their theory
module), queries run on the procedural machine, and directives mutate the
registry or the runtime settings.
"""

from __future__ import annotations

import os
from itertools import count

from . import defeasance, dynamics, frames
from .bounds import RuntimeSettings, SettingsError
from .context import Context
from .engine import Engine, EngineError, TimeoutAbort, TripwireError
from .kb import CURRENT, Clause, Lit, Registry, RuleIdClash, store_wrapper
from .machine import Machine
from .reader import SyntaxIssue, parse_program, render_term
from .terms import (
    APPLY, RFY, Sym, Var, is_ground, resolve, term_vars, unify, variant_key,
    variant_key_seq,
)


class LoadError(Exception):
    pass


class Session:
    def __init__(self, base_dir=".", out=None):
        self.ctx = Context()
        self.registry = self.ctx.registry
        self.settings = self.ctx.settings
        self.base_dir = base_dir
        self.engine = Engine(self.ctx)
        self.txlog = dynamics.TransactionLog()
        self.constraints = []
        self.in_constraint = False
        self.out = out or (lambda line: print(line))
        self._aux_counter = count(1)
        self._rid_counter = count(1)
        self.registry.on_invalidate = self.engine.invalidate_key
        self.registry.on_new_module = frames.install_closure
        for m in self.registry.modules.values():
            frames.install_closure(m)
        self.ctx.proc_runner = self._proc_runner
        self.ctx.builtin_modules = {
            "\\db": self._db_in_engine,
            "\\typecheck": self._typecheck_handler,
        }

    # ------------------------------------------------------------------
    # hooks
    # ------------------------------------------------------------------

    def warn(self, msg):
        self.out("Warning: %s" % msg)

    def emit(self, line):
        self.out(line)

    def _proc_runner(self, engine, lit, resolved, mod):
        eng = engine
        if engine.running:
            eng = Engine(self.ctx, sub=True)
            eng.start_run(engine.deadline)
        mach = Machine(self, eng, mod)
        call = lit.with_args(resolved)
        items = [Lit(call.wrapper, call.args, mod, call.neg, None,
                     call.builtin)]
        vars_of = tuple(resolved)

        def extract(bind):
            return tuple(resolve(a, bind) for a in vars_of)
        for (aargs, uflag) in mach.run(items, extract):
            yield (aargs, uflag, ())

    def _db_in_engine(self, lit, env, engine, caller):
        raise EngineError("\\db operations are not allowed inside tabled "
                          "rules; declare the predicate with :- prolog{...}")

    def _typecheck_handler(self, lit, env, engine, caller):
        args = tuple(resolve(a, env) for a in lit.args)
        if len(args) != 3 or not (isinstance(args[1], tuple)
                                  and args[1][0] is APPLY
                                  and args[1][1] == "check"):
            raise EngineError("\\typecheck expects Type[check(Template, ?R)]")
        _check, tmpl, result = args[1][1], args[1][2], args[1][3]
        obj_pat = attr_pat = None
        if isinstance(tmpl, tuple) and tmpl[0] is RFY and tmpl[1]:
            first = tmpl[1][0]
            obj_pat, attr_pat = first[2], first[3]
        eng = Engine(self.ctx, sub=True)
        eng.start_run(engine.deadline)
        for v in frames.type_check(eng, caller, obj_pat, attr_pat):
            e2 = unify(result, v.as_term(), env)
            if e2 is not None:
                yield e2

    # ------------------------------------------------------------------
    # compiling statements
    # ------------------------------------------------------------------

    def _auto_rid(self, module):
        return "$rid%s#%d" % (module, next(self._rid_counter))

    def _fix_mod(self, lit, module):
        if lit.mod is CURRENT:
            return Lit(lit.wrapper, lit.args, module, lit.neg, lit.delayq,
                       lit.builtin, lit.span)
        return lit

    def _norm_body(self, node, module, outer_vars):
        """Body AST -> list of literal sequences (one per disjunct)."""
        k = node[0]
        if k == "lit":
            return [[self._fix_mod(node[1], module)]]
        if k == "and":
            left = self._norm_body(node[1], module, outer_vars)
            right = self._norm_body(node[2], module, outer_vars)
            return [a + b for a in left for b in right]
        if k == "or":
            return self._norm_body(node[1], module, outer_vars) + \
                self._norm_body(node[2], module, outer_vars)
        if k == "naf":
            inner = node[1]
            if inner[0] == "lit" and not inner[1].neg:
                l = self._fix_mod(inner[1], module)
                return [[Lit(l.wrapper, l.args, l.mod, True, l.delayq,
                             l.builtin, l.span)]]
            return [[self._fold_naf_group(inner, module, outer_vars)]]
        if k == "cut":
            return [[Lit("control", (), module, builtin="cut")]]
        if k == "update":
            op, payload = node[1], node[2]
            if op in ("t_enable", "t_disable"):
                return [[Lit("update", (payload,), module, builtin=op)]]
            fixed = tuple(self._fix_mod(l, module) for l in payload)
            return [[Lit("update", fixed, module, builtin=op)]]
        raise LoadError("unexpected body construct %r" % (k,))

    def _fold_naf_group(self, node, module, outer_vars):
        """naf over a complex formula: introduce an auxiliary predicate over
        the variables shared with the surrounding statement."""
        disjuncts = self._norm_body(node, module, outer_vars)
        inner_vars = []
        for d in disjuncts:
            for l in d:
                for a in l.args:
                    term_vars(a, inner_vars)
        shared = tuple(v for v in inner_vars if v in outer_vars)
        functor = Sym("aux.naf%d" % next(self._aux_counter))
        head = Lit("apply", (functor,) + shared, module)
        m = self.registry.get(module)
        for d in disjuncts:
            m.add_clause(Clause(head.key_in(module), head.args, body=tuple(d),
                                internal=True))
        return Lit("apply", (functor,) + shared, module, neg=True)

    def _statement_vars(self, st):
        acc = []
        for l in st.heads or ():
            for a in l.args:
                term_vars(a, acc)
        if st.body is not None:
            self._body_vars(st.body, acc)
        d = st.descriptor
        if d is not None:
            if d.tag is not None:
                term_vars(d.tag, acc)
            for _a, v in d.meta:
                term_vars(v, acc)
        return acc

    def _body_vars(self, node, acc):
        k = node[0]
        if k == "lit":
            for a in node[1].args:
                term_vars(a, acc)
        elif k in ("and", "or"):
            self._body_vars(node[1], acc)
            self._body_vars(node[2], acc)
        elif k == "naf":
            self._body_vars(node[1], acc)
        elif k == "update":
            if node[1] in ("t_enable", "t_disable"):
                term_vars(node[2], acc)
            else:
                for l in node[2]:
                    for a in l.args:
                        term_vars(a, acc)

    def install_rule(self, st, module):
        m = self.registry.get(module)
        d = st.descriptor
        defeasible = d is not None and d.tag is not None
        if defeasible and m.arg_theory is None:
            raise LoadError(
                "defeasible rule in module %s, which has no argumentation "
                "theory; add :- use_argumentation_theory first" % module)
        outer = self._statement_vars(st)
        bodies = [[]] if st.body is None else \
            self._norm_body(st.body, module, outer)
        rid = d.rid if d is not None and d.rid is not None \
            else self._auto_rid(module)
        tag = d.tag if d is not None else None
        meta = tuple(d.meta) if d is not None else ()
        first = True
        made = []
        for headlit in st.heads:
            hl = self._fix_mod(headlit, module)
            target = hl.mod if isinstance(hl.mod, str) else module
            tm = self.registry.get(target)
            sw = store_wrapper(hl.wrapper)
            stored = Lit(sw, hl.args, target)
            for body in bodies:
                guarded = list(body)
                if defeasible:
                    guarded.append(defeasance.guard_literal(module, tag, hl))
                c = Clause(stored.key_in(target), stored.args,
                           body=tuple(guarded), rid=rid, tag=tag, meta=meta,
                           defeasible=defeasible, span=st.span)
                if c.is_fact:
                    ks = tm.store(c.key)
                    if ks.find_fact(c.args) is not None:
                        continue
                tm.add_clause(c, share_id=not first)
                first = False
                made.append(c)
                self.registry.invalidate(c.key)
                if defeasible:
                    at = self.registry.get(m.arg_theory[1])
                    at.add_clause(defeasance.candidate_clause(
                        at.name, module, tag, hl, body))
                    self.registry.invalidate(
                        Lit("apply", ("candidate", 1, 2), at.name)
                        .key_in(at.name))
        for (o, a, card) in st.cards:
            m.cards.append((o, a, card))
        return made

    # ------------------------------------------------------------------
    # executing statements
    # ------------------------------------------------------------------

    def execute_text(self, text, module=None, fname="<input>"):
        statements = parse_program(text, fname)
        return self.execute_statements(statements, module)

    def execute_statements(self, statements, module=None):
        results = []
        touched = set()
        for st in statements:
            results.append(self.execute_statement(st, module))
            touched.add(module or self.registry.current)
        for mod in touched:
            self._finalize_module(mod)
        return results

    def _finalize_module(self, module):
        defeasance.refresh_strict_candidates(self.registry, module)
        m = self.registry.get(module, create=False)
        if m is not None:
            cyc = frames.subclass_cycles(m)
            if cyc:
                self.warn("subclass cycle through %s in module %s"
                          % (", ".join(map(repr, cyc)), module))

    def execute_statement(self, st, module=None):
        module = module or self.registry.current
        if st.kind == "rule":
            return self.install_rule(st, module)
        if st.kind == "query":
            return self.run_query(st, module)
        if st.kind == "runtime":
            return self._runtime_statement(st)
        if st.kind == "constraint":
            return self._constraint_statement(st, module)
        if st.kind == "directive":
            return self._directive(st, module)
        raise LoadError("cannot execute statement kind %r" % (st.kind,))

    # -- directives ----------------------------------------------------------

    def _directive(self, st, module):
        name = st.name
        if name in ("load", "add"):
            files, target = st.args
            for f in files:
                self.load_file(f, target or self.registry.current,
                               add=(name == "add"))
            return None
        if name == "setsemantics":
            key, val = st.args
            if key != "inheritance" or val not in ("monotonic",
                                                   "nonmonotonic"):
                raise SettingsError("setsemantics{inheritance=monotonic|"
                                    "nonmonotonic}")
            m = self.registry.get(module)
            m.semantics["inheritance"] = val
            frames.reinstall_closure(m)
            self.engine.flush()
            return None
        if name == "use_argumentation_theory":
            defeasance.bind_theory(self.registry, module, st.args[0])
            self.engine.flush()
            return None
        if name == "prolog":
            m = self.registry.get(module)
            for fa in st.args:
                m.prolog_preds.add(fa)
            return None
        if name == "export":
            templates, allow = st.args
            m = self.registry.get(module)
            if m.exports is None:
                m.exports = []
            allow_set = set(allow) if allow else None
            for tmpl in templates:
                m.exports.append((tmpl, allow_set))
            return None
        if name == "compiler_options":
            return None  # accepted and recorded only
        raise LoadError("unknown directive %r" % (name,))

    def _runtime_statement(self, st):
        if st.name == "setruntime":
            which, params = st.args
            if which == "nafmode":
                self.settings.set_limit("nafmode", params[0], None)
            elif len(params) == 2:
                self.settings.set_limit(which, params[0], params[1])
            elif len(params) == 1 and params[0] in ("off", "none"):
                self.settings.clear_limit(which)
            else:
                raise SettingsError("setruntime{%s(limit, action)}" % which)
        elif st.name == "disablefeature":
            self._feature(st.args[0], False)
        else:
            self._feature(st.args[0], True)
        self.engine.flush()
        return None

    def _feature(self, feat, on):
        if feat == "subgoal_delay":
            self.settings.subgoal_delay = on
        elif feat == "undefined_error":
            self.settings.undefined_error = on
        else:
            raise SettingsError("unknown feature %r" % (feat,))

    def _constraint_statement(self, st, module):
        tmpl, action, cb = st.args
        tmpl = self._fix_mod(tmpl, module)
        if st.name == "add":
            self.constraints.append((module, tmpl, action, cb))
        else:
            from .reader import _lit_sig
            sig = variant_key(_lit_sig(tmpl))
            self.constraints = [
                c for c in self.constraints
                if variant_key(_lit_sig(c[1])) != sig or c[0] != module]
        return None

    # -- loading ---------------------------------------------------------------

    def resolve_path(self, name):
        cand = name if os.path.isabs(name) else os.path.join(self.base_dir,
                                                             name)
        if os.path.exists(cand):
            return cand
        if os.path.exists(cand + ".mlg"):
            return cand + ".mlg"
        raise LoadError("no such program file: %s(.mlg)" % name)

    def load_file(self, name, target, add=False):
        path = self.resolve_path(name)
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        self.load_text(text, target, add=add, fname=path)

    def load_text(self, text, target, add=False, fname="<load>"):
        m = self.registry.get(target)
        if not add:
            for key in list(m.stores):
                self.registry.invalidate(key)
            m.wipe()
            frames.install_closure(m)
        statements = parse_program(text, fname)  # parse fully before running
        saved = self.registry.current
        self.registry.current = target
        try:
            self.execute_statements(statements, target)
        finally:
            self.registry.current = saved

    # -- queries ---------------------------------------------------------------

    def _compile_query_items(self, node, module, outer_vars):
        k = node[0]
        if k == "lit":
            return [self._fix_mod(node[1], module)]
        if k == "and":
            return self._compile_query_items(node[1], module, outer_vars) + \
                self._compile_query_items(node[2], module, outer_vars)
        if k == "or":
            return [("alt",
                     [self._compile_query_items(node[1], module, outer_vars),
                      self._compile_query_items(node[2], module, outer_vars)])]
        if k == "naf":
            inner = node[1]
            if inner[0] == "lit" and not inner[1].neg:
                l = self._fix_mod(inner[1], module)
                return [Lit(l.wrapper, l.args, l.mod, True, l.delayq,
                            l.builtin, l.span)]
            return [self._fold_naf_group(inner, module, outer_vars)]
        if k == "cut":
            return [("cutto", 0)]
        if k == "update":
            op, payload = node[1], node[2]
            if op in ("t_enable", "t_disable"):
                return [Lit("update", (payload,), module, builtin=op)]
            return [Lit("update",
                        tuple(self._fix_mod(l, module) for l in payload),
                        module, builtin=op)]
        raise LoadError("unexpected query construct %r" % (k,))

    def run_query(self, st, module, collect=None):
        """Execute one `?-` statement; prints answers unless collect is
        given.  Returns (answers, status-text)."""
        acc = []
        self._body_vars(st.body, acc)
        qvars = []
        names = []
        seen = set()
        for v in acc:
            if v.name and not v.name.startswith("_") and v.id not in seen:
                seen.add(v.id)
                qvars.append(v)
                names.append("?" + v.name)
        items = self._compile_query_items(st.body, module, acc)
        mach = Machine(self, self.engine, module)
        self.engine.start_run(self.settings.deadline())

        def extract(bind):
            return tuple(resolve(v, bind) for v in qvars)

        answers = []
        seen_keys = {}
        status = "No"
        try:
            for (vals, uflag) in mach.run(items, extract):
                if not qvars:
                    if not uflag:
                        status = "Yes"
                        break
                    status = "undefined"
                    continue
                key = variant_key_seq(vals)
                if key in seen_keys:
                    idx = seen_keys[key]
                    if answers[idx][1] and not uflag:
                        answers[idx] = (vals, False)
                    continue
                seen_keys[key] = len(answers)
                answers.append((vals, uflag))
        except TimeoutAbort as e:
            mode = (self.settings.timeout or (0, "error"))[1]
            for t in list(self.engine.tables.values()):
                if t.status != 1:
                    self.engine.tables.pop(t.vkey, None)
            if mode == "error":
                raise
            if qvars:
                answers.append((tuple(Var("timeout") for _ in qvars), True))
            else:
                status = "undefined"
        if self.txlog.entries and not self.in_constraint:
            dynamics.commit(self)
        lines = self.format_answers(qvars, names, answers, status)
        sink = collect if collect is not None else self.emit
        for line in lines:
            sink(line)
        return answers, status

    def format_answers(self, qvars, names, answers, status):
        lines = []
        if not qvars:
            return [status]
        if not answers:
            return ["No"]
        for (vals, uflag) in answers:
            shared = {}
            cells = ["%s = %s" % (n, render_term(v, shared))
                     for n, v in zip(names, vals)]
            line = "  ".join(cells)
            if uflag:
                line += "  - undefined"
            lines.append(line)
        return lines

    def run_goal_lit(self, lit, module, env=None):
        """Solve one literal on a fresh machine (constraint checks and
        callbacks); yields (binding-env, uflag)."""
        mach = Machine(self, self.engine, module)
        if env:
            mach.bind.update(env)
        items = [self._fix_mod(lit, module)]

        def extract(bind):
            return dict(bind)
        if not self.engine.running and self.engine.deadline is None:
            self.engine.start_run(self.settings.deadline())
        for (bind, uflag) in mach.run(items, extract):
            yield bind, uflag

    # -- inspection ---------------------------------------------------------------

    def kb_hash(self):
        return self.registry.state_hash()

    def dump_module(self, name):
        from .kb import salted_name
        from .reader import render_lit
        m = self.registry.get(name, create=False)
        if m is None:
            raise LoadError("no module named %s" % name)
        lines = []
        for key in sorted(m.stores, key=lambda k: k.sort_key()):
            ks = m.stores[key]
            user = [c for c in ks.clauses if not c.internal]
            if not user:
                continue
            lines.append("// %s" % salted_name(key))
            for c in sorted(user, key=lambda c: c.seq):
                names = {}
                qw = key.wrapper[:-2] if key.wrapper.endswith("_x") \
                    else key.wrapper
                head = render_lit(Lit(qw, c.args, name), names)
                body = ", ".join(render_lit(l, names) for l in c.body)
                text = head if not c.body else "%s :- %s" % (head, body)
                flags = "" if c.enabled else "  // disabled"
                lines.append("%s.%s" % (text, flags))
        return "\n".join(lines)
