import pytest

from wfs_ergo.kb import CURRENT
from wfs_ergo.reader import (
    SyntaxIssue, parse_program, render_statement, statement_signature,
)
from wfs_ergo.terms import APPLY, RFY, TRUEVAL, Var


def parse1(text):
    sts = parse_program(text)
    assert len(sts) == 1
    return sts[0]


def test_rule_with_four_body_literals():
    st = parse1("p(?X):- q(?X), \\naf s(?Y), r(?X), t(?Z,?Y).")
    assert st.kind == "rule"
    assert len(st.heads) == 1
    lits = []
    node = st.body

    def walk(n):
        if n[0] == "and":
            walk(n[1])
            walk(n[2])
        else:
            lits.append(n)
    walk(node)
    assert len(lits) == 4
    assert lits[1][0] == "naf"


def test_tagged_fact_descriptor():
    st = parse1("@{tag1} A.")
    assert st.descriptor.tag == "tag1"
    assert st.descriptor.defeasible
    assert st.body is None


def test_empty_program():
    assert parse_program("") == []


def test_long_form_descriptor():
    st = parse1("@!{pr1[author->Swift,isa->PotencyRule]} "
                "@{Potency(High,?Per,?V)} h(?Per,?V) :- b(?Per,?V).")
    d = st.descriptor
    assert d.rid == "pr1"
    assert d.tag[0] is APPLY and d.tag[1] == "Potency"
    assert ("author", "Swift") in d.meta
    assert d.defeasible


def test_untagged_rule_not_defeasible():
    st = parse1("h :- b.")
    assert not st.descriptor.defeasible
    assert st.descriptor.rid is None


def test_frame_desugar_set_values_and_membership():
    st = parse1("Mary:employee[age->29, kids->{Tim,Leo}].")
    kinds = [(l.wrapper, l.args) for l in st.heads]
    assert kinds[0] == ("isa", ("Mary", "employee"))
    assert ("mvd", ("Mary", "age", 29)) in kinds
    assert ("mvd", ("Mary", "kids", "Tim")) in kinds
    assert ("mvd", ("Mary", "kids", "Leo")) in kinds
    assert len(kinds) == 4


def test_nested_frame_lifting():
    st = parse1("?Per[residesIn->zip(20016)[city->Washington]].")
    ws = [(l.wrapper, l.args[1]) for l in st.heads]
    assert ws == [("mvd", "residesIn"), ("mvd", "city")]
    inner = st.heads[1].args[0]
    assert inner == (APPLY, "zip", 20016)


def test_atomic_frame_already_flat():
    st = parse1("o[a->v].")
    assert [l.wrapper for l in st.heads] == ["mvd"]


def test_no_nested_frames_or_sets_after_desugar():
    st = parse1("a:C[x->{1,2}, y->w[z->2, q->{3,4}]].")
    for l in st.heads:
        assert l.wrapper in ("isa", "mvd")
        assert len(l.args) in (2, 3)


def test_inheritable_and_cardinality():
    st = parse1("Claim[|dateTime{1..1}=>\\dateTime, medium->X|].")
    assert [l.wrapper for l in st.heads] == ["itype", "imvd"]
    assert st.cards == (("Claim", "dateTime", (1, 1)),)


def test_boolean_method():
    st = parse1("Type[check].")
    assert st.heads[0].args[2] is TRUEVAL


def test_reified_statement_value():
    st = parse1("c[statement->${zip(1)[a->B[c->d(?V)]]}].")
    v = st.heads[0].args[2]
    assert v[0] is RFY
    assert len(v[1]) == 2  # two atomic frames inside the reified body


def test_module_suffix_and_variable_module():
    st = parse1("?- p(?X)@bar, q(?X)@?M.")
    a = st.body
    assert a[0] == "and"
    assert a[1][1].mod == "bar"
    assert type(a[2][1].mod) is Var


def test_hilog_application_chain():
    st = parse1("closure(?P)(?F,?T) :- ?P(?F,?T).")
    h = st.heads[0]
    assert h.wrapper == "apply"
    assert h.args[0][0] is APPLY
    b = st.body
    assert b[1].wrapper == "apply"
    assert type(b[1].args[0]) is Var


def test_strong_negation_head_and_body():
    st = parse1("\\neg p(a) :- \\neg q(b).")
    assert st.heads[0].wrapper == "neg_apply"
    assert st.body[1].wrapper == "neg_apply"


def test_updates_and_cut():
    st = parse1("colorNode :- uncoloredNode(?N), color(?C), "
                "\\naf (adjacent(?N,?N2),colored(?N2,?C)), "
                "t_insert{colored(?N,?C)}.")
    nodes = []

    def walk(n):
        if n[0] == "and":
            walk(n[1])
            walk(n[2])
        else:
            nodes.append(n)
    walk(st.body)
    assert nodes[-1][0] == "update"
    assert nodes[-2][0] == "naf"
    assert nodes[-2][1][0] == "and"


def test_syntax_error_has_position_and_expectation():
    with pytest.raises(SyntaxIssue) as e:
        parse_program("p(?X :- q.")
    assert e.value.span is not None
    assert e.value.expected


def test_directives():
    sts = parse_program(
        ":- use_argumentation_theory.\n"
        ":- use_argumentation_theory{refuteclp}.\n"
        ":- setsemantics{inheritance=monotonic}.\n"
        "?- setruntime{goalsize(4,abstract)}.\n"
        ":- prolog{makelist/2, iter/1}.\n"
        "?- [myProgram >> mainRules].\n"
        "?- [+myAddlStuff].\n"
        "?- disablefeature{subgoal_delay}.\n"
        ":- compiler_options{production=on}.\n"
        "+constraint{occupationConstr(?), rollback}.\n")
    names = [st.name for st in sts]
    assert names == ["use_argumentation_theory", "use_argumentation_theory",
                     "setsemantics", "setruntime", "prolog", "load", "add",
                     "disablefeature", "compiler_options", "add"]
    assert sts[1].args == ("refuteclp",)
    assert sts[4].args == (("makelist", 2), ("iter", 1))
    assert sts[5].args == (("myProgram",), "mainRules")
    assert sts[9].kind == "constraint"
    assert sts[9].args[1] == "rollback"


CORPUS_SNIPPETS = [
    "p(?X):- q(?X), \\naf s(?Y), r(?X), t(?Z,?Y).",
    "q(?X) :- \\naf q2(?X).",
    "@{tag1} A. @{tag2} \\neg A.",
    "Mary:employee[age->29, salary(1998)->100000, kids->{Tim,Leo}].",
    "person('Bunky Muntner')[age->63, residesIn->zip(20016)"
    "[city->Washington,state->DC], occupation->journalist,"
    " spouse->'Ginger Muntner', language->Spanish].",
    'claim(13355)[dateTime->"2021-12-23T12:33:55"^^\\dt,'
    " sourceDocument->'Jalapeno Springs Daily', medium->NewsSite].",
    "Person :: Agent. Organization :: Agent. person(?) : Person."
    " claim(?) : Claim. claim(13355) : NewsReport.",
    "Claim[|dateTime{1..1}=>\\dateTime, sourceDocument=>Document,"
    " medium->X|]. Claim[author->'Ingrid B. Baird'].",
    "NewsReport[|documentType->WebNewsArticle|]."
    " ?Agt[claimed->?Claim]:- ?Agt:Agent,?Claim[claimer->?Agt]."
    " WebNewsArticle::PublicWebDocument.",
    "@!{pr1[author->Swift,isa->PotencyRule]} @{Potency(High,?Per,?V)}"
    " ?Per[believes->hasPotency(?V,High)] :- ?V:Virus,"
    " ?Per[residesIn->?Loc], ?_Claim:Claim[claimer->?Per,"
    " statement->${?Loc[shouldRequire->SchoolClosure[purpose->reduceXmit(?V)]]}].",
    "\\opposes(Potency(?L1,?Per,?V),?_AnyGoal1,Potency(?L2,?Per,?V),"
    "?_AnyGoal2) :- ?L1 != ?L2, ?V:Virus, ?Per:Person.",
    "\\overrides(Potency(High,?_Per,?_V), Potency(Low,?_Per,?_V)).",
    "\\cancel(Potency(?,?,?)):- \\neg Pandemic.",
    "?Per[residesIn->?GPE]:- ?Per[residesIn->?Loc], ?Loc[city->?GPE].",
    "reachable(?X,?Y):- reachable(?X,?Z),edge(?Z,?Y)."
    " reachable(?X,?Y):- edge(?X,?Y). edge(1,2). edge(2,3). edge(3,1).",
    "s:- \\naf p,\\naf q,\\naf r. p:- q,\\naf r. q:- r,\\naf p. r:- p,\\naf q.",
    "occupationConstr(?Per):- ?Per:Person,?Per[occupation->journalist],"
    "?Per[occupation->politician].",
    "?- t_insert{'Bunky Muntner'[occupation->politician]}.",
    "colorGraph :- \\naf uncoloredNode(?).",
    "makelist(0,[]):- !. makelist(?N,[?N|?T]):- ?N1 \\is ?N - 1,"
    " makelist(?N1,?T).",
    "type_error(?Obj,?Attr,?R,?D) :- ?Obj[?Attr->?R], ?Obj[?Attr=>?D],"
    " \\naf ?R:?D ; ?Obj[?Attr->?R], \\naf ?Obj[?Attr=>?_D].",
    "a :- must(ground(?X) or nonvar(?Y))^?X[foo->?Y].",
    "tc_cycle(?Limit,?From,?To):- edge_cycle(?Limit,?From,?To).",
    "?- [file >> m]. ?- p(?X)@m.",
    ":- export{?[abc -> ?], pqr(?)} >> module1,module2.",
]


@pytest.mark.parametrize("idx", range(len(CORPUS_SNIPPETS)))
def test_unparse_round_trip(idx):
    text = CORPUS_SNIPPETS[idx]
    first = parse_program(text)
    rendered = "\n".join(render_statement(st) for st in first)
    second = parse_program(rendered)
    assert len(first) == len(second), rendered
    for a, b in zip(first, second):
        assert statement_signature(a) == statement_signature(b), \
            (render_statement(a), render_statement(b))
