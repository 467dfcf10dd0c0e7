import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uncertlab.lang import (
    And,
    Atom,
    Not,
    Or,
    ParseError,
    Polar,
    Term,
    VariableNotInBody,
    Wh,
    atom,
    complement,
    match_instance,
    parse_formula,
    parse_question,
    parse_rule,
    substitute,
    unparse,
    variables,
    wrapped,
)

from .strategies import formulas, questions, terms


def test_parse_conjunction_of_atoms():
    assert parse_formula("fever(x) & coughs(x)") == And(atom("fever", "x"), atom("coughs", "x"))


def test_smallest_formula_is_a_zero_ary_atom():
    assert parse_formula("p") == Atom("p", ())


def test_negation_binds_to_the_parenthesized_disjunction():
    assert parse_formula("~(p | q)") == Not(Or(atom("p"), atom("q")))


@pytest.mark.parametrize(
    "src, expected",
    [
        ("~p & q", And(Not(atom("p")), atom("q"))),
        ("p | q & r", Or(atom("p"), And(atom("q"), atom("r")))),
        ("p & q & r", And(And(atom("p"), atom("q")), atom("r"))),
        ("p | q | r", Or(Or(atom("p"), atom("q")), atom("r"))),
        ("~~p", Not(Not(atom("p")))),
    ],
)
def test_precedence_and_associativity(src, expected):
    assert parse_formula(src) == expected


def test_polar_question():
    assert parse_question("? flu(a)") == Polar(atom("flu", "a"))


def test_open_wh_question():
    q = parse_question("?x open: largest_planet(x)")
    assert q == Wh(Term("x"), atom("largest_planet", "x"), "open")


def test_closed_wh_question():
    assert parse_question("?x: mammal(x)") == Wh(Term("x"), atom("mammal", "x"), "closed")


def test_wh_variable_must_occur_in_body():
    with pytest.raises(VariableNotInBody):
        parse_question("?y: mammal(x)")


def test_printing():
    assert unparse(And(atom("p"), atom("q"))) == "p & q"
    assert unparse(Not(atom("p"))) == "~p"
    assert unparse(Wh(Term("x"), atom("bear", "x"), "open")) == "?x open: bear(x)"
    assert unparse(Polar(atom("flu", "a"))) == "? flu(a)"
    assert unparse(atom("likes", "a", "b")) == "likes(a,b)"


def test_printing_uses_minimal_parentheses():
    assert unparse(parse_formula("(p & q) | r")) == "p & q | r"
    assert unparse(parse_formula("p & (q | r)")) == "p & (q | r)"
    assert unparse(parse_formula("p & (q & r)")) == "p & (q & r)"
    assert unparse(parse_formula("~(p & q)")) == "~(p & q)"
    assert wrapped(parse_formula("p & q")) == "(p & q)"
    assert wrapped(parse_formula("~p")) == "~p"


def test_substitute_examples():
    x, a = Term("x"), Term("a")
    assert substitute(atom("flu", "x"), x, a) == atom("flu", "a")
    assert substitute(atom("p"), x, a) == atom("p")
    f = parse_formula("bear(x) & mammal(x)")
    assert substitute(f, x, Term("b7")) == parse_formula("bear(b7) & mammal(b7)")


def test_term_kinds():
    assert Term("x").kind == "variable"
    assert Term("xy").kind == "constant"
    with pytest.raises(ValueError):
        Term("X")


def test_rule_parsing():
    body, head = parse_rule("fever(x) & coughs(x) -> flu(x)")
    assert body == (atom("fever", "x"), atom("coughs", "x"))
    assert head == atom("flu", "x")
    with pytest.raises(ParseError):
        parse_rule("p | q -> r")


@pytest.mark.parametrize("src, offset", [("p &", 4), ("p)", 2), ("p $ q", 3), ("", 1), ("f(x,)", 5)])
def test_parse_errors_carry_offsets(src, offset):
    with pytest.raises(ParseError) as info:
        parse_formula(src)
    assert info.value.offset == offset
    assert isinstance(info.value, SyntaxError)


def test_complement_cancels_one_negation():
    p = atom("p")
    assert complement(p) == Not(p)
    assert complement(Not(p)) == p


def test_match_instance():
    x = Term("x")
    assert match_instance(atom("mammal", "x"), atom("mammal", "b1"), x) == Term("b1")
    assert match_instance(atom("mammal", "x"), atom("bear", "b1"), x) is None
    assert match_instance(parse_formula("f(x) & g(x)"), parse_formula("f(a) & g(b)"), x) is None


@given(formulas)
def test_round_trip_formulas(f):
    assert parse_formula(unparse(f)) == f


@given(questions())
def test_round_trip_questions(q):
    assert parse_question(unparse(q)) == q


@given(formulas, terms.filter(lambda t: t.is_variable), terms.filter(lambda t: not t.is_variable))
def test_substitution_removes_the_variable(f, v, c):
    assert v not in variables(substitute(f, v, c))


@settings(max_examples=300)
@given(st.binary(max_size=40))
def test_every_byte_string_parses_or_raises_parse_error(data):
    src = data.decode("latin-1")
    for parse in (parse_formula, parse_question):
        try:
            parse(src)
        except ParseError as exc:
            assert 1 <= exc.offset <= len(src) + 1
        except VariableNotInBody:
            pass


@settings(max_examples=300)
@given(st.text(alphabet="pqx()~&|?:, ab", max_size=25))
def test_grammar_shaped_text_parses_or_raises_parse_error(src):
    try:
        q = parse_question(src)
    except (ParseError, VariableNotInBody):
        return
    assert parse_question(unparse(q)) == q
