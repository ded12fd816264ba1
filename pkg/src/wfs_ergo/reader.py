"""Surface syntax: tokenizer, parser, frame desugaring, and the unparser.

Statements end with `.` followed by layout.  `//` starts a line comment,
`/* */` a block comment.  Variables are written `?Name`; bare `?` and
`?_Name` are anonymous / don't-warn singletons.  Identifiers of any case
are atoms; quoting (`'two words'`) admits arbitrary atom text.

Operator precedence, loosest to tightest (documented here because the
source listings this grammar was built from never state it):

    :-   ;   ,   \\naf \\neg must/wish^   = != < > =< >= \\is   : ::
    + -   * / mod   unary -   postfix application/frames/@module

Frames appearing on a value inside another frame are lifted out as extra
conjuncts sharing the inner object id; frames in plain argument positions
and `${...}` bodies become opaque reified terms compared by variant
equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .kb import CURRENT, Lit
from .terms import (
    CONS, NIL, RFY, SAPP, TLIT, TRUEVAL, Var, hilog_encode, mkapp, mklist,
    variant_key_seq,
)

NEG_FUNCTOR = "\\neg"


class SyntaxIssue(Exception):
    def __init__(self, msg, span=None, expected=None):
        loc = " at %s:%d:%d" % span if span else ""
        exp = " (expected one of: %s)" % ", ".join(sorted(expected)) \
            if expected else ""
        super().__init__(msg + loc + exp)
        self.span = span
        self.expected = expected or set()


# ---------------------------------------------------------------------------
# tokens
# ---------------------------------------------------------------------------

PUNCT2 = ["@!", ":-", "?-", "::", "=>", "->", ">>", "..", "!=", ">=", "=<",
          "${", "[|", "|]"]
PUNCT1 = list("()[]{},.|:;@=<>+-*/!?^")

IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
IDENT_CONT = IDENT_START | set("0123456789")


@dataclass
class Tok:
    kind: str     # atom var num string punct bsword eof
    val: object
    line: int
    col: int

    def span(self, fname="<input>"):
        return (fname, self.line, self.col)


def tokenize(text: str, fname="<input>") -> List[Tok]:
    toks = []
    i, n = 0, len(text)
    line, col = 1, 1

    def bump(k):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            bump(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                bump(1)
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise SyntaxIssue("unterminated block comment",
                                  (fname, line, col))
            bump(j + 2 - i)
            continue
        l0, c0 = line, col
        if c == "?" and i + 1 < n and (text[i + 1] in IDENT_CONT):
            j = i + 1
            while j < n and text[j] in IDENT_CONT:
                j += 1
            toks.append(Tok("var", text[i + 1:j], l0, c0))
            bump(j - i)
            continue
        if c == "\\" and i + 1 < n and text[i + 1] in IDENT_START:
            j = i + 1
            while j < n and text[j] in IDENT_CONT:
                j += 1
            toks.append(Tok("bsword", text[i:j], l0, c0))
            bump(j - i)
            continue
        if c in IDENT_START:
            j = i
            while j < n and text[j] in IDENT_CONT:
                j += 1
            toks.append(Tok("atom", text[i:j], l0, c0))
            bump(j - i)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
                toks.append(Tok("num", float(text[i:j]), l0, c0))
            else:
                toks.append(Tok("num", int(text[i:j]), l0, c0))
            bump(j - i)
            continue
        if c == "'":
            j = i + 1
            buf = []
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SyntaxIssue("unterminated quoted atom", (fname, l0, c0))
            toks.append(Tok("atom", "".join(buf), l0, c0))
            bump(j + 1 - i)
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                    continue
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SyntaxIssue("unterminated string", (fname, l0, c0))
            bump(j + 1 - i)
            tag = None
            if text.startswith("^^\\", i):
                k = i + 3
                while k < n and text[k] in IDENT_CONT:
                    k += 1
                tag = text[i + 3:k]
                bump(k - i)
            toks.append(Tok("string", ("".join(buf), tag), l0, c0))
            continue
        two = text[i:i + 2]
        if two in PUNCT2:
            # a statement-final '.' never begins '..'
            toks.append(Tok("punct", two, l0, c0))
            bump(2)
            continue
        if c in PUNCT1:
            toks.append(Tok("punct", c, l0, c0))
            bump(1)
            continue
        raise SyntaxIssue("unexpected character %r" % c, (fname, line, col))
    toks.append(Tok("eof", None, line, col))
    return toks


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------

@dataclass
class Descriptor:
    rid: Optional[object] = None       # id term (None -> auto at compile)
    tag: Optional[object] = None       # tag term; presence makes defeasible
    meta: Tuple = ()                   # ((attr, value), ...)

    @property
    def defeasible(self):
        return self.tag is not None


@dataclass
class Statement:
    kind: str          # rule | query | directive | constraint | runtime
    span: tuple = None
    descriptor: Optional[Descriptor] = None
    heads: Optional[list] = None      # [Lit] conjunction of head literals
    body: Optional[object] = None     # body AST or None for facts
    name: Optional[str] = None        # directive name
    args: tuple = ()                  # directive payload
    cards: tuple = ()                 # cardinality notes gathered in heads


# body AST nodes: ('lit', Lit) ('and', a, b) ('or', a, b) ('naf', node)
# ('update', op, payload) ('cut',)


class Parser:
    def __init__(self, text, fname="<input>"):
        self.toks = tokenize(text, fname)
        self.i = 0
        self.fname = fname
        self.vars = {}
        self.cards = []

    # -- token utilities ---------------------------------------------------

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_punct(self, *vals):
        t = self.peek()
        return t.kind == "punct" and t.val in vals

    def eat_punct(self, val):
        t = self.peek()
        if t.kind == "punct" and t.val == val:
            return self.next()
        raise SyntaxIssue("unexpected %r" % (t.val,), t.span(self.fname),
                          expected={val})

    def at_end_dot(self):
        return self.at_punct(".")

    # -- program -----------------------------------------------------------

    def parse_program(self):
        out = []
        while self.peek().kind != "eof":
            out.append(self.parse_statement())
        return out

    def parse_statement(self):
        self.vars = {}
        self.cards = []
        t = self.peek()
        span = t.span(self.fname)
        if t.kind == "punct" and t.val in ("+", "-") and \
                self.peek(1).kind == "atom" and self.peek(1).val == "constraint":
            return self.parse_constraint(span)
        if t.kind == "punct" and t.val == ":-":
            self.next()
            st = self.parse_directive(span, prefix=":-")
            self.eat_punct(".")
            return st
        if t.kind == "punct" and t.val == "?-":
            self.next()
            st = self.parse_query_or_directive(span)
            self.eat_punct(".")
            return st
        # a rule or fact, possibly with descriptors
        desc = self.parse_descriptors()
        heads = self.parse_head_conjunction()
        body = None
        if self.at_punct(":-"):
            self.next()
            body = self.parse_body(0)
        self.eat_punct(".")
        return Statement("rule", span, descriptor=desc, heads=heads, body=body,
                         cards=tuple(self.cards))

    # -- descriptors ---------------------------------------------------------

    def parse_descriptors(self):
        desc = Descriptor()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.val == "@!" and \
                    self.peek(1).kind == "punct" and self.peek(1).val == "{":
                self.next()
                self.next()
                rid = self.parse_term()
                meta = []
                if self.at_punct("["):
                    for (kind, _inh, attr, _card, vals) in self.parse_frameblock():
                        if kind != "data":
                            raise SyntaxIssue("descriptor attributes use ->",
                                              t.span(self.fname))
                        for (v, nested) in vals:
                            if nested:
                                raise SyntaxIssue(
                                    "nested frames in rule descriptors",
                                    t.span(self.fname))
                            ve = hilog_encode(v)
                            if attr == "tag":
                                if desc.tag is not None:
                                    raise SyntaxIssue(
                                        "tag given twice in rule descriptor",
                                        t.span(self.fname))
                                desc.tag = ve
                            else:
                                meta.append((hilog_encode(attr), ve))
                self.eat_punct("}")
                if desc.rid is not None:
                    raise SyntaxIssue("duplicate rule id descriptor",
                                      t.span(self.fname))
                desc.rid = rid
                desc.meta = desc.meta + tuple(meta)
                continue
            if t.kind == "punct" and t.val == "@" and \
                    self.peek(1).kind == "punct" and self.peek(1).val == "{":
                self.next()
                self.next()
                tag = self.parse_term()
                self.eat_punct("}")
                if desc.tag is not None:
                    raise SyntaxIssue("rule carries two tags",
                                      t.span(self.fname))
                desc.tag = tag
                continue
            break
        return desc

    # -- directives ----------------------------------------------------------

    def parse_directive(self, span, prefix):
        t = self.peek()
        if t.kind == "atom":
            name = t.val
            if name == "use_argumentation_theory":
                self.next()
                theory = "gclp"
                if self.at_punct("{"):
                    self.next()
                    theory = self.next().val
                    self.eat_punct("}")
                return Statement("directive", span, name="use_argumentation_theory",
                                 args=(theory,))
            if name == "setsemantics":
                self.next()
                self.eat_punct("{")
                key = self.next().val
                self.eat_punct("=")
                val = self.next().val
                self.eat_punct("}")
                return Statement("directive", span, name="setsemantics",
                                 args=(key, val))
            if name == "prolog":
                self.next()
                self.eat_punct("{")
                preds = []
                while True:
                    f = self.next().val
                    self.eat_punct("/")
                    a = self.next().val
                    preds.append((f, a))
                    if self.at_punct(","):
                        self.next()
                        continue
                    break
                self.eat_punct("}")
                return Statement("directive", span, name="prolog",
                                 args=tuple(preds))
            if name == "export":
                self.next()
                self.eat_punct("{")
                templates = []
                while True:
                    templates.append(self.parse_goal_atom())
                    if self.at_punct(","):
                        self.next()
                        continue
                    break
                self.eat_punct("}")
                allow = None
                if self.at_punct(">>"):
                    self.next()
                    allow = []
                    while True:
                        allow.append(self.next().val)
                        if self.at_punct(","):
                            self.next()
                            continue
                        break
                return Statement("directive", span, name="export",
                                 args=(tuple(templates),
                                       None if allow is None else tuple(allow)))
            if name == "compiler_options":
                self.next()
                self.eat_punct("{")
                depth = 1
                raw = []
                while depth:
                    tk = self.next()
                    if tk.kind == "eof":
                        raise SyntaxIssue("unterminated compiler_options",
                                          span)
                    if tk.kind == "punct" and tk.val == "{":
                        depth += 1
                    elif tk.kind == "punct" and tk.val == "}":
                        depth -= 1
                        if not depth:
                            break
                    raw.append(tk.val)
                return Statement("directive", span, name="compiler_options",
                                 args=tuple(raw))
            if name in ("setruntime", "setsemantics", "disablefeature",
                        "enablefeature"):
                return self.parse_runtime(span, name)
        # generic load-style goal used as a directive
        return self.parse_query_or_directive(span)

    def parse_query_or_directive(self, span):
        t = self.peek()
        if t.kind == "punct" and t.val == "[":
            return self.parse_load(span)
        if t.kind == "atom" and t.val in ("setruntime", "disablefeature",
                                          "enablefeature", "setsemantics"):
            return self.parse_runtime(span, t.val)
        body = self.parse_body(0)
        return Statement("query", span, body=body)

    def parse_runtime(self, span, name):
        self.next()
        self.eat_punct("{")
        if name in ("disablefeature", "enablefeature"):
            feat = self.next().val
            self.eat_punct("}")
            return Statement("runtime", span, name=name, args=(feat,))
        if name == "setsemantics":
            key = self.next().val
            self.eat_punct("=")
            val = self.next().val
            self.eat_punct("}")
            return Statement("directive", span, name="setsemantics",
                             args=(key, val))
        which = self.next().val
        self.eat_punct("(")
        params = []
        while True:
            tk = self.next()
            params.append(tk.val)
            if self.at_punct(","):
                self.next()
                continue
            break
        self.eat_punct(")")
        self.eat_punct("}")
        return Statement("runtime", span, name="setruntime",
                         args=(which, tuple(params)))

    def parse_load(self, span):
        self.eat_punct("[")
        add = False
        if self.at_punct("+"):
            self.next()
            add = True
        files = []
        target = None
        while True:
            files.append(self.next().val)
            if self.at_punct(","):
                self.next()
                continue
            break
        if self.at_punct(">>"):
            self.next()
            target = self.next().val
        self.eat_punct("]")
        return Statement("directive", span, name="add" if add else "load",
                         args=(tuple(files), target))

    def parse_constraint(self, span):
        sign = self.next().val
        self.next()  # 'constraint'
        self.eat_punct("{")
        tmpl = self.parse_goal_atom()
        action = "warn"
        cb = None
        if self.at_punct(","):
            self.next()
            t = self.peek()
            if t.kind == "atom" and t.val in ("warn", "rollback"):
                self.next()
                action = t.val
            elif t.kind == "atom" and t.val == "callback":
                self.next()
                self.eat_punct("(")
                cb = self.parse_goal_atom()
                self.eat_punct(")")
                action = "callback"
            else:
                raise SyntaxIssue("unknown constraint action",
                                  t.span(self.fname))
        self.eat_punct("}")
        self.eat_punct(".")
        return Statement("constraint", span,
                         name="add" if sign == "+" else "drop",
                         args=(tmpl, action, cb))

    # -- heads ----------------------------------------------------------------

    def parse_head_conjunction(self):
        node = self.parse_head_atom()
        heads = list(node)
        while self.at_punct(","):
            self.next()
            heads.extend(self.parse_head_atom())
        return heads

    def parse_head_atom(self):
        t = self.peek()
        neg = False
        if t.kind == "bsword" and t.val == NEG_FUNCTOR:
            self.next()
            neg = True
        lits = self.parse_frame_formula()
        if neg:
            if len(lits) != 1:
                raise SyntaxIssue("explicit negation over a complex frame",
                                  t.span(self.fname))
            l = lits[0]
            if l.wrapper == "builtin":
                raise SyntaxIssue("explicit negation of a builtin",
                                  t.span(self.fname))
            lits = [Lit("neg_" + l.wrapper, l.args, l.mod, False, None, None,
                        l.span)]
        return lits

    # -- bodies -----------------------------------------------------------------

    def parse_body(self, depth):
        node = self.parse_disj()
        return node

    def parse_disj(self):
        left = self.parse_conj()
        while self.at_punct(";"):
            self.next()
            right = self.parse_conj()
            left = ("or", left, right)
        return left

    def parse_conj(self):
        left = self.parse_unary()
        while self.at_punct(","):
            self.next()
            right = self.parse_unary()
            left = ("and", left, right)
        return left

    def parse_unary(self):
        t = self.peek()
        if t.kind == "punct" and t.val == "(":
            self.next()
            inner = self.parse_disj()
            self.eat_punct(")")
            return inner
        if t.kind == "bsword" and t.val == "\\naf":
            self.next()
            return ("naf", self.parse_unary())
        if t.kind == "bsword" and t.val == NEG_FUNCTOR:
            self.next()
            inner = self.parse_unary()
            return self._apply_strong_neg(inner, t)
        if t.kind == "punct" and t.val == "!":
            self.next()
            return ("cut",)
        if t.kind == "atom" and t.val in ("must", "wish") and \
                self.peek(1).kind == "punct" and self.peek(1).val == "(":
            return self.parse_delay_quantifier(t.val)
        if t.kind == "atom" and t.val in ("insert", "delete", "t_insert",
                                          "t_delete") and \
                self.peek(1).kind == "punct" and self.peek(1).val == "{":
            self.next()
            self.next()
            lits = self.parse_head_atom()
            while self.at_punct(","):
                self.next()
                lits.extend(self.parse_head_atom())
            self.eat_punct("}")
            return ("update", t.val, lits)
        if t.kind == "atom" and t.val in ("t_enable", "t_disable") and \
                self.peek(1).kind == "punct" and self.peek(1).val == "{":
            self.next()
            self.next()
            rid = self.parse_term()
            self.eat_punct("}")
            return ("update", t.val, rid)
        lits = [("lit", l) for l in self.parse_goal_atom_list()]
        node = lits[0]
        for l in lits[1:]:
            node = ("and", node, l)
        return node

    def _apply_strong_neg(self, node, t):
        if node[0] != "lit":
            raise SyntaxIssue("explicit negation over a complex formula",
                              t.span(self.fname))
        l = node[1]
        if l.wrapper == "builtin":
            raise SyntaxIssue("explicit negation of a builtin",
                              t.span(self.fname))
        w = l.wrapper
        if w.startswith("neg_"):
            raise SyntaxIssue("doubled explicit negation", t.span(self.fname))
        return ("lit", Lit("neg_" + w, l.args, l.mod, l.neg, l.delayq, None,
                           l.span))

    def parse_delay_quantifier(self, kind):
        self.next()
        self.eat_punct("(")
        conds = [self.parse_delay_cond()]
        while self.peek().kind == "atom" and self.peek().val == "or":
            self.next()
            conds.append(self.parse_delay_cond())
        self.eat_punct(")")
        self.eat_punct("^")
        target = self.parse_unary()
        if target[0] == "naf" and target[1][0] == "lit":
            l = target[1][1]
            l = Lit(l.wrapper, l.args, l.mod, True, (kind, conds), l.builtin,
                    l.span)
            return ("lit", l)
        if target[0] != "lit":
            raise SyntaxIssue("delay quantifier needs an atomic goal")
        l = target[1]
        return ("lit", Lit(l.wrapper, l.args, l.mod, l.neg, (kind, conds),
                           l.builtin, l.span))

    def parse_term(self):
        return hilog_encode(self.parse_additive())

    def parse_delay_cond(self):
        t = self.next()
        if t.kind != "atom" or t.val not in ("ground", "nonvar"):
            raise SyntaxIssue("delay condition is ground(..) or nonvar(..)",
                              t.span(self.fname))
        self.eat_punct("(")
        v = self.parse_term()
        self.eat_punct(")")
        return (t.val, v)

    # -- goal atoms ----------------------------------------------------------

    def parse_goal_atom_list(self):
        """One syntactic goal; frames may desugar to several literals."""
        return self.parse_frame_formula()

    def parse_goal_atom(self):
        lits = self.parse_frame_formula()
        if len(lits) != 1:
            raise SyntaxIssue("expected an atomic goal here")
        return lits[0]

    COMPARE_OPS = {"=": "unify", "!=": "not_unify", "<": "lt", ">": "gt",
                   ">=": "ge", "=<": "le"}

    def parse_frame_formula(self):
        """A term with optional :/:: classification, frame blocks, comparison
        operators, and a module suffix; returns desugared literals."""
        span = self.peek().span(self.fname)
        t1 = self.parse_additive()
        t = self.peek()
        if t.kind == "punct" and t.val in self.COMPARE_OPS:
            self.next()
            t2 = self.parse_additive()
            return [Lit("builtin", (hilog_encode(t1), hilog_encode(t2)),
                        builtin=self.COMPARE_OPS[t.val], span=span)]
        if t.kind == "bsword" and t.val == "\\is":
            self.next()
            t2 = self.parse_additive()
            return [Lit("builtin", (hilog_encode(t1), hilog_encode(t2)),
                        builtin="is", span=span)]
        lits = []
        obj = t1
        cls = None
        kind = None
        if self.at_punct(":", "::"):
            kind = self.next().val
            cls = self.parse_additive()
        frames = []
        while self.at_punct("[", "[|"):
            inherit = self.peek().val == "[|"
            frames.extend(self.parse_frameblock())
        mod = CURRENT
        if self.at_punct("@"):
            self.next()
            mt = self.next()
            if mt.kind == "atom":
                mod = mt.val
            elif mt.kind == "var":
                mod = self._var(mt.val)
            elif mt.kind == "bsword":
                mod = mt.val
                if self.at_punct("("):
                    # host-language module references are out of scope
                    raise SyntaxIssue("host-language modules are not supported",
                                      mt.span(self.fname))
            else:
                raise SyntaxIssue("bad module reference", mt.span(self.fname))
        if kind is not None:
            lits.append(Lit("isa" if kind == ":" else "sub",
                            (hilog_encode(obj), hilog_encode(cls)), mod,
                            span=span))
        for item in frames:
            lits.extend(self.desugar_frame_item(obj, item, mod, span))
        if kind is None and not frames:
            lits.append(self.term_to_lit(obj, mod, span))
        return lits

    def term_to_lit(self, t, mod, span):
        enc = hilog_encode(t)
        if isinstance(enc, tuple) and enc[0] is not TLIT:
            if enc[0] is CONS or enc[0] is RFY:
                raise SyntaxIssue("this term cannot be called as a goal", span)
            args = enc[1:]
            f = args[0]
            if isinstance(f, str) and f == NEG_FUNCTOR and len(args) == 2:
                inner = self.term_to_lit(args[1], mod, span)
                return Lit("neg_" + inner.wrapper, inner.args, mod, span=span)
            return Lit("apply", args, mod, span=span)
        if isinstance(enc, (str,)):
            return Lit("apply", (enc,), mod, span=span)
        raise SyntaxIssue("this term cannot be called as a goal", span)

    # -- frames -----------------------------------------------------------------

    def parse_frameblock(self):
        """Returns items: (kind, inheritable, attr, card, value-spec).

        kind: 'data' (-> value), 'type' (=> class), 'bool' (bare method);
        value-spec for data/type is a list of (value term, nested frames).
        """
        opener = self.next().val
        inherit = opener == "[|"
        closer = "|]" if inherit else "]"
        items = []
        if self.at_punct(closer):
            self.next()
            return items
        while True:
            attr = self.parse_additive()
            card = None
            if self.at_punct("{"):
                self.next()
                lo = self.next().val
                self.eat_punct("..")
                hit = self.next()
                hi = hit.val if hit.kind == "num" else None
                self.eat_punct("}")
                card = (lo, hi)
            if self.at_punct("->", "=>"):
                arrow = self.next().val
                vals = self.parse_value_set()
                items.append(("data" if arrow == "->" else "type", inherit,
                              attr, card, vals))
            else:
                items.append(("bool", inherit, attr, card, None))
            if self.at_punct(","):
                self.next()
                continue
            break
        self.eat_punct(closer)
        return items

    def parse_value_set(self):
        if self.at_punct("{"):
            self.next()
            vals = [self.parse_value()]
            while self.at_punct(","):
                self.next()
                vals.append(self.parse_value())
            self.eat_punct("}")
            return vals
        return [self.parse_value()]

    def parse_value(self):
        v = self.parse_additive()
        nested = []
        while self.at_punct("[", "[|"):
            nested.extend(self.parse_frameblock())
        return (v, nested)

    def desugar_frame_item(self, obj, item, mod, span):
        kind, inherit, attr, card, vals = item
        o = hilog_encode(obj)
        a = hilog_encode(attr)
        out = []
        if card is not None:
            self.cards.append((o, a, card))
        if kind == "bool":
            out.append(Lit("imvd" if inherit else "mvd", (o, a, TRUEVAL), mod,
                           span=span))
            return out
        wrapper = {"data": ("mvd", "imvd"), "type": ("type", "itype")}[kind][
            1 if inherit else 0]
        for (v, nested) in vals:
            ve = hilog_encode(v)
            out.append(Lit(wrapper, (o, a, ve), mod, span=span))
            for sub in nested:
                out.extend(self.desugar_frame_item(v, sub, mod, span))
        return out

    # -- terms ------------------------------------------------------------------

    def _var(self, name):
        # bare ? is fresh per occurrence; ?_Name is a shared variable that is
        # merely exempt from singleton warnings
        if name == "":
            return Var(None)
        v = self.vars.get(name)
        if v is None:
            v = self.vars[name] = Var(name)
        return v

    ADD_OPS = {"+", "-"}
    MUL_OPS = {"*", "/"}

    def parse_additive(self):
        left = self.parse_multiplicative()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.val in self.ADD_OPS:
                self.next()
                right = self.parse_multiplicative()
                left = mkapp(t.val, left, right)
                continue
            return left

    def parse_multiplicative(self):
        left = self.parse_unary_term()
        while True:
            t = self.peek()
            if t.kind == "punct" and t.val in self.MUL_OPS:
                self.next()
                right = self.parse_unary_term()
                left = mkapp(t.val, left, right)
                continue
            if t.kind == "atom" and t.val == "mod" and not (
                    self.peek(1).kind == "punct" and self.peek(1).val == "("):
                self.next()
                right = self.parse_unary_term()
                left = mkapp("mod", left, right)
                continue
            return left

    def parse_unary_term(self):
        t = self.peek()
        if t.kind == "punct" and t.val == "-":
            self.next()
            inner = self.parse_unary_term()
            if isinstance(inner, (int, float)):
                return -inner
            return mkapp("-", inner)
        return self.parse_postfix()

    def parse_postfix(self):
        base = self.parse_primary()
        while self.at_punct("("):
            self.next()
            args = []
            if not self.at_punct(")"):
                args.append(self.parse_arg())
                while self.at_punct(","):
                    self.next()
                    args.append(self.parse_arg())
            self.eat_punct(")")
            if not args:
                raise SyntaxIssue("empty argument list",
                                  self.peek().span(self.fname))
            base = mkapp(base, *args)
        return base

    def parse_arg(self):
        """Argument position: a term; a frame here becomes a reified value."""
        v = self.parse_additive()
        if self.at_punct("[", "[|") or self.at_punct(":", "::"):
            return self.reify_from(v)
        return v

    def reify_from(self, obj):
        lits = []
        if self.at_punct(":", "::"):
            kind = self.next().val
            cls = self.parse_additive()
            lits.append(("isa" if kind == ":" else "sub", False,
                         hilog_encode(obj), hilog_encode(cls)))
        while self.at_punct("[", "[|"):
            for item in self.parse_frameblock():
                for l in self.desugar_frame_item(obj, item, CURRENT, None):
                    lits.append((l.wrapper, l.neg) + l.args)
        return (RFY, tuple(lits))

    def parse_primary(self):
        t = self.next()
        if t.kind == "num":
            return t.val
        if t.kind == "var":
            return self._var(t.val)
        if t.kind == "string":
            lex, tag = t.val
            return (TLIT, lex, tag) if tag else lex
        if t.kind == "bsword":
            return t.val
        if t.kind == "atom":
            return t.val
        if t.kind == "punct":
            if t.val == "(":
                inner = self.parse_additive()
                self.eat_punct(")")
                return inner
            if t.val == "[":
                items = []
                tail = NIL
                if not self.at_punct("]"):
                    items.append(self.parse_arg())
                    while self.at_punct(","):
                        self.next()
                        items.append(self.parse_arg())
                    if self.at_punct("|"):
                        self.next()
                        tail = self.parse_arg()
                self.eat_punct("]")
                return mklist(items, tail)
            if t.val == "${":
                body = self.parse_reified_body()
                self.eat_punct("}")
                return body
            if t.val == "?":
                return Var(None)
        raise SyntaxIssue("unexpected token %r" % (t.val,),
                          t.span(self.fname),
                          expected={"term"})

    def parse_reified_body(self):
        lits = list(self.parse_frame_formula())
        while self.at_punct(","):
            self.next()
            lits.extend(self.parse_frame_formula())
        out = []
        for l in lits:
            if l.wrapper == "builtin":
                raise SyntaxIssue("builtins cannot be reified")
            out.append((l.wrapper, l.neg) + l.args)
        return (RFY, tuple(out))


def parse_program(text, fname="<input>"):
    return Parser(text, fname).parse_program()


def _lit_sig(l):
    mod = l.mod if isinstance(l.mod, str) else (
        "$cur" if l.mod is CURRENT else l.mod)
    dq = ("$nodelay",) if l.delayq is None else \
        (l.delayq[0],) + tuple((t, v) for t, v in l.delayq[1])
    return ("L", l.wrapper, "n" if l.neg else "p", mod,
            l.builtin or "$nobi", dq) + l.args


def _flatten(node, op, acc):
    if node[0] == op:
        _flatten(node[1], op, acc)
        _flatten(node[2], op, acc)
    else:
        acc.append(node)
    return acc


def _body_sig(node):
    k = node[0]
    if k == "lit":
        return _lit_sig(node[1])
    if k in ("and", "or"):
        return (k,) + tuple(_body_sig(n) for n in _flatten(node, k, []))
    if k == "naf":
        return ("naf", _body_sig(node[1]))
    if k == "cut":
        return ("cut",)
    if k == "update":
        if node[1] in ("t_enable", "t_disable"):
            return ("update", node[1], node[2])
        return ("update", node[1]) + tuple(_lit_sig(l) for l in node[2])
    raise ValueError(k)


def statement_signature(st):
    """Variant-canonical signature; equal iff two statements parse the same."""
    from .terms import variant_key
    if st.kind == "rule":
        d = st.descriptor
        dsig = ("D", d.rid if d.rid is not None else "$auto",
                d.tag if d.tag is not None else "$notag") + tuple(d.meta) \
            if d is not None else ("D", "$auto", "$notag")
        sig = ("rule", dsig, tuple(_lit_sig(l) for l in st.heads),
               _body_sig(st.body) if st.body is not None else "$fact",
               tuple((o, a, lo, "*" if hi is None else hi)
                     for (o, a, (lo, hi)) in st.cards))
    elif st.kind == "query":
        sig = ("query", _body_sig(st.body))
    elif st.kind == "constraint":
        tmpl, action, cb = st.args
        sig = ("constraint", st.name, _lit_sig(tmpl), action,
               _lit_sig(cb) if cb is not None else "$nocb")
    else:
        sig = (st.kind, st.name) + tuple(
            _lit_sig(a) if isinstance(a, Lit) else
            (tuple(_lit_sig(x) if isinstance(x, Lit) else x for x in a)
             if isinstance(a, tuple) else a)
            for a in st.args)
    return variant_key(sig)


def parse_term_text(text):
    p = Parser(text)
    t = p.parse_additive()
    return hilog_encode(t)


# ---------------------------------------------------------------------------
# unparser
# ---------------------------------------------------------------------------

_ATOM_OK_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")


def atom_text(a):
    if a and a[0] in _ATOM_OK_FIRST and all(c in IDENT_CONT for c in a):
        return a
    return "'%s'" % a.replace("\\", "\\\\").replace("'", "\\'")


def render_term(t, names=None):
    names = names if names is not None else {}
    ty = type(t)
    if ty is str:
        return atom_text(t)
    if ty is int:
        return str(t)
    if ty is float:
        return repr(t)
    if ty is Var:
        nm = names.get(t)
        if nm is None:
            base = t.name or "_h%d" % t.id
            nm = "?" + base
            if nm in names.values():
                nm = "?%s_%d" % (base, t.id)
            names[t] = nm
        return nm
    if t is NIL:
        return "[]"
    if ty is tuple:
        h = t[0]
        if h is CONS:
            items = []
            cur = t
            while isinstance(cur, tuple) and cur[0] is CONS:
                items.append(render_term(cur[1], names))
                cur = cur[2]
            if cur is NIL:
                return "[%s]" % ", ".join(items)
            return "[%s|%s]" % (", ".join(items), render_term(cur, names))
        if h is TLIT:
            return '"%s"^^\\%s' % (t[1], t[2])
        if h is RFY:
            return "${%s}" % ", ".join(render_reified_lit(l, names)
                                       for l in t[1])
        # application: fold arithmetic back to infix
        f = t[1]
        args = t[2:]
        if isinstance(f, str) and f in ("+", "-", "*", "/", "mod") \
                and len(args) == 2:
            return "(%s %s %s)" % (render_term(args[0], names), f,
                                   render_term(args[1], names))
        if isinstance(f, str) and f == NEG_FUNCTOR and len(args) == 1:
            return "\\neg %s" % render_term(args[0], names)
        fs = render_term(f, names)
        if isinstance(f, tuple) and f[0] not in (CONS, TLIT, RFY):
            pass  # chained application renders as f(..)(..)
        return "%s(%s)" % (fs, ", ".join(render_term(a, names) for a in args))
    if ty.__name__ == "Sym":
        return "<%s>" % t.name
    return repr(t)


def render_reified_lit(l, names):
    wrapper, neg = l[0], l[1]
    args = l[2:]
    body = render_plain_lit(wrapper, args, names)
    return ("\\neg " if wrapper.startswith("neg_") else "") + body


def render_plain_lit(wrapper, args, names, cards=None):
    base = wrapper[4:] if wrapper.startswith("neg_") else wrapper
    if base in ("mvd", "imvd", "type", "itype", "mvd_x", "imvd_x", "type_x",
                "itype_x"):
        base = base[:-2] if base.endswith("_x") else base
        o, a, v = args
        card = ""
        if cards:
            c = cards.get(variant_key_seq((o, a)))
            if c:
                card = "{%s..%s}" % (c[0], "*" if c[1] is None else c[1])
        if v is TRUEVAL:
            inner = render_term(a, names) + card
        else:
            arrow = "->" if base in ("mvd", "imvd") else "=>"
            inner = "%s%s%s%s" % (render_term(a, names), card, arrow,
                                  render_term(v, names))
        if base in ("imvd", "itype"):
            return "%s[|%s|]" % (render_term(o, names), inner)
        return "%s[%s]" % (render_term(o, names), inner)
    if base in ("isa", "sub", "isa_x", "sub_x"):
        op = ":" if base.startswith("isa") else "::"
        return "%s %s %s" % (render_term(args[0], names), op,
                             render_term(args[1], names))
    # hilog application
    if len(args) == 1:
        return render_term(args[0], names)
    f = render_term(args[0], names)
    return "%s(%s)" % (f, ", ".join(render_term(a, names) for a in args[1:]))


BUILTIN_RENDER = {"unify": "=", "not_unify": "!=", "lt": "<", "gt": ">",
                  "ge": ">=", "le": "=<", "is": "\\is"}


def render_lit(l, names=None, cards=None):
    names = names if names is not None else {}
    out = ""
    if l.neg:
        out += "\\naf "
    if l.builtin is not None:
        if l.builtin in BUILTIN_RENDER and len(l.args) == 2:
            core = "%s %s %s" % (render_term(l.args[0], names),
                                 BUILTIN_RENDER[l.builtin],
                                 render_term(l.args[1], names))
        else:
            core = "%s(%s)" % (l.builtin, ", ".join(render_term(a, names)
                                                    for a in l.args))
    else:
        core = render_plain_lit(l.wrapper, l.args, names, cards)
        if l.wrapper.startswith("neg_"):
            core = "\\neg " + core
    out += core
    if isinstance(l.mod, str):
        out += "@%s" % atom_text(l.mod)
    elif type(l.mod) is Var:
        out += "@%s" % render_term(l.mod, names)
    if l.delayq is not None:
        kind, conds = l.delayq
        cs = " or ".join("%s(%s)" % (t, render_term(v, names))
                         for t, v in conds)
        out = "%s(%s)^%s" % (kind, cs, out)
    return out


def render_body(node, names):
    k = node[0]
    if k == "lit":
        return render_lit(node[1], names)
    if k == "and":
        return "%s, %s" % (render_body(node[1], names),
                           render_body(node[2], names))
    if k == "or":
        return "(%s ; %s)" % (render_body(node[1], names),
                              render_body(node[2], names))
    if k == "naf":
        return "\\naf (%s)" % render_body(node[1], names)
    if k == "cut":
        return "!"
    if k == "update":
        op, payload = node[1], node[2]
        if op in ("t_enable", "t_disable"):
            return "%s{%s}" % (op, render_term(payload, names))
        return "%s{%s}" % (op, ", ".join(render_lit(l, names)
                                         for l in payload))
    raise ValueError("unknown body node %r" % (k,))


def render_statement(st):
    names = {}
    if st.kind == "rule":
        parts = []
        d = st.descriptor
        if d is not None and d.rid is not None:
            attrs = ["%s->%s" % (render_term(a, names), render_term(v, names))
                     for a, v in d.meta]
            inner = render_term(d.rid, names)
            if attrs:
                inner += "[%s]" % ", ".join(attrs)
            parts.append("@!{%s}" % inner)
        if d is not None and d.tag is not None:
            parts.append("@{%s}" % render_term(d.tag, names))
        cards = {variant_key_seq((o, a)): c for (o, a, c) in st.cards}
        head = ", ".join(render_lit(l, names, cards) for l in st.heads)
        if st.body is None:
            parts.append("%s." % head)
        else:
            parts.append("%s :- %s." % (head, render_body(st.body, names)))
        return " ".join(parts)
    if st.kind == "query":
        return "?- %s." % render_body(st.body, names)
    if st.kind == "directive":
        if st.name == "load":
            files, target = st.args
            inner = ", ".join(files)
            if target:
                inner += " >> %s" % target
            return "?- [%s]." % inner
        if st.name == "add":
            files, target = st.args
            inner = "+" + ", ".join(files)
            if target:
                inner += " >> %s" % target
            return "?- [%s]." % inner
        if st.name == "setsemantics":
            return ":- setsemantics{%s=%s}." % st.args
        if st.name == "use_argumentation_theory":
            if st.args[0] == "gclp":
                return ":- use_argumentation_theory."
            return ":- use_argumentation_theory{%s}." % st.args[0]
        if st.name == "prolog":
            return ":- prolog{%s}." % ", ".join("%s/%d" % fa
                                                for fa in st.args)
        if st.name == "export":
            templates, allow = st.args
            out = ":- export{%s}" % ", ".join(render_lit(l, dict())
                                              for l in templates)
            if allow:
                out += " >> %s" % ", ".join(allow)
            return out + "."
        if st.name == "compiler_options":
            return ":- compiler_options{%s}." % " ".join(str(a)
                                                         for a in st.args)
    if st.kind == "runtime":
        if st.name == "setruntime":
            which, params = st.args
            return "?- setruntime{%s(%s)}." % (
                which, ",".join(str(p) for p in params))
        return "?- %s{%s}." % (st.name, st.args[0])
    if st.kind == "constraint":
        tmpl, action, cb = st.args
        sign = "+" if st.name == "add" else "-"
        inner = render_lit(tmpl, names)
        if action == "callback":
            inner += ", callback(%s)" % render_lit(cb, dict())
        elif action != "warn":
            inner += ", %s" % action
        return "%sconstraint{%s}." % (sign, inner)
    raise ValueError("cannot render %r" % (st.kind,))
