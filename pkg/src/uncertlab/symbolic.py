"""Symbolic knowledge base with categorical, credal, comparative and
interrogative entries.

Categorical reasoning is goal-directed (backward chaining over
function-free Horn literals, tabled) with a genuine third outcome: a query
neither of whose answers derives is ``"open"``.  Failure to derive is never
read as falsity.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Union

from .lang import (
    And,
    Atom,
    Formula,
    Not,
    Or,
    Polar,
    Question,
    Term,
    Wh,
    atoms,
    bind,
    complement,
    constants,
    evaluate,
    is_ground,
    is_literal,
    parse_rule,
    substitute,
    unparse,
    variables,
)

MAX_ENUMERATION_ATOMS = 20
EXTREME_EPS = 1e-9


class InconsistencyError(ValueError):
    pass


class NoCredalEntry(LookupError):
    pass


class TooManyAtoms(ValueError):
    pass


class DepthLimitExceeded(RuntimeError):
    pass


def nonextreme(r: float, eps: float = EXTREME_EPS) -> bool:
    return eps < r < 1.0 - eps


@dataclass(frozen=True)
class CredalEntry:
    body: Formula
    credence: float

    def __post_init__(self):
        if not 0.0 <= self.credence <= 1.0:
            raise ValueError(f"credence {self.credence} outside [0, 1]")
        if not is_ground(self.body):
            raise ValueError(f"credal body {unparse(self.body)} is not ground")


@dataclass(frozen=True)
class ComparativeEntry:
    left: Formula
    relation: str  # "greater" | "equal"
    right: Formula

    def __post_init__(self):
        if self.relation not in ("greater", "equal"):
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.relation == "greater" and self.left == self.right:
            raise ValueError("Pr(f) > Pr(f) is not a comparative")


@dataclass(frozen=True)
class Rule:
    body: tuple[Formula, ...]
    head: Formula

    def __post_init__(self):
        if not self.body:
            raise ValueError("rule body must be nonempty")
        for lit in (*self.body, self.head):
            if not is_literal(lit):
                raise ValueError(f"{unparse(lit)} is not a literal")
        body_vars = set().union(*(variables(b) for b in self.body))
        if not variables(self.head) <= body_vars:
            raise ValueError(f"head variables of {self} do not occur in the body")

    @classmethod
    def parse(cls, src: str) -> "Rule":
        body, head = parse_rule(src)
        return cls(body, head)

    def __str__(self):
        return " & ".join(unparse(b) for b in self.body) + " -> " + unparse(self.head)


@dataclass(frozen=True)
class AssertionPolicy:
    assert_threshold: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.assert_threshold <= 1.0:
            raise ValueError("assert_threshold must lie in (0, 1]")


# -- utterances -----------------------------------------------------------------

@dataclass(frozen=True)
class FlatAssert:
    formula: Formula

    def wire(self) -> str:
        return f"ASSERT {unparse(self.formula)}"


@dataclass(frozen=True)
class HedgedAssert:
    formula: Formula
    credence: float

    def __post_init__(self):
        if not 0.0 < self.credence < 1.0:
            raise ValueError("hedged credence must lie in (0, 1)")

    def wire(self) -> str:
        return f"ASSERT {unparse(self.formula)} @ {self.credence:.4f}"


@dataclass(frozen=True)
class Ask:
    question: Question

    def wire(self) -> str:
        return f"ASK {unparse(self.question)}"


@dataclass(frozen=True)
class Abstain:
    question: Question

    def wire(self) -> str:
        return f"ABSTAIN {unparse(self.question)}"


Utterance = Union[FlatAssert, HedgedAssert, Ask, Abstain]


def parse_utterance(text: str) -> Utterance:
    from .lang import parse_formula, parse_question

    verb, _, rest = text.partition(" ")
    if verb == "ASSERT":
        if " @ " in rest:
            f, _, r = rest.rpartition(" @ ")
            return HedgedAssert(parse_formula(f), float(r))
        return FlatAssert(parse_formula(rest))
    if verb == "ASK":
        return Ask(parse_question(rest))
    if verb == "ABSTAIN":
        return Abstain(parse_question(rest))
    raise ValueError(f"not an utterance: {text!r}")


def utter_credence(f: Formula, r: float, threshold: float) -> Utterance:
    """Flat assertion strictly above ``threshold`` (or below its mirror), else hedge."""
    if r > threshold or r >= 1.0:
        return FlatAssert(f)
    if r < 1.0 - threshold or r <= 0.0:
        return FlatAssert(complement(f))
    return HedgedAssert(f, r)


@dataclass(frozen=True)
class ModeReport:
    mode: str  # explicit | implicit | none
    kind: str  # probabilistic | categorical | none
    in_position_to_answer: bool = False
    credence: float | None = None


# -- categorical prover ------------------------------------------------------------

def _head_key(lit: Formula) -> tuple[bool, str, int]:
    a = lit.body if isinstance(lit, Not) else lit
    return isinstance(lit, Not), a.predicate, len(a.args)


def _unify_head(head: Formula, goal: Formula) -> dict[Term, Term] | None:
    h = head.body if isinstance(head, Not) else head
    g = goal.body if isinstance(goal, Not) else goal
    binding: dict[Term, Term] = {}
    for a, b in zip(h.args, g.args):
        if a.is_variable:
            if binding.setdefault(a, b) != b:
                return None
        elif a != b:
            return None
    return binding


class _Prover:
    """Tabled, goal-directed resolution for ground literal goals.

    A query first unfolds the subgoals relevant to it (backward from the
    goal, grounding each rule body's free variables over the signature),
    then propagates successes through those ground clauses to a fixpoint.
    Successes are tabled permanently; a goal whose relevant subgraph has
    been fully evaluated without success is tabled as failed.
    """

    def __init__(self, facts, rules, signature, depth_limit):
        self.rules = defaultdict(list)
        for r in rules:
            self.rules[_head_key(r.head)].append(r)
        self.signature = sorted(signature, key=lambda t: t.name)
        self.depth_limit = depth_limit
        self.proven: set[Formula] = set(facts)
        self.refuted: set[Formula] = set()

    def _clauses(self, goal):
        for rule in self.rules.get(_head_key(goal), ()):
            binding = _unify_head(rule.head, goal)
            if binding is None:
                continue
            body = [bind(b, binding) for b in rule.body]
            free = sorted(set().union(*(variables(b) for b in body)), key=lambda t: t.name)
            for values in itertools.product(self.signature, repeat=len(free)):
                env = dict(zip(free, values))
                yield tuple(bind(b, env) for b in body)

    def derives(self, goal: Formula) -> bool:
        if goal in self.proven:
            return True
        if goal in self.refuted:
            return False
        # unfold the relevant ground program breadth-first
        depth = {goal: 0}
        frontier = [goal]
        clauses: list[tuple[Formula, tuple[Formula, ...]]] = []
        while frontier:
            nxt = []
            for g in frontier:
                for body in self._clauses(g):
                    clauses.append((g, body))
                    for lit in body:
                        if lit in depth or lit in self.proven or lit in self.refuted:
                            continue
                        if depth[g] + 1 > self.depth_limit:
                            raise DepthLimitExceeded(
                                f"proof search for {unparse(goal)} exceeds depth {self.depth_limit}")
                        depth[lit] = depth[g] + 1
                        nxt.append(lit)
            frontier = nxt
        # counting fixpoint over the unfolded clauses
        waiting = defaultdict(list)
        missing = []
        queue = []
        for i, (head, body) in enumerate(clauses):
            pending = {lit for lit in body if lit not in self.proven}
            missing.append(len(pending))
            for lit in pending:
                waiting[lit].append(i)
            if not pending and head not in self.proven:
                self.proven.add(head)
                queue.append(head)
        while queue:
            lit = queue.pop()
            for i in waiting.pop(lit, ()):
                missing[i] -= 1
                head = clauses[i][0]
                if missing[i] == 0 and head not in self.proven:
                    self.proven.add(head)
                    queue.append(head)
        for g in depth:
            if g not in self.proven:
                self.refuted.add(g)
        return goal in self.proven


def _kleene_not(v: str) -> str:
    return {"yes": "no", "no": "yes"}.get(v, "open")


# -- knowledge base ------------------------------------------------------------------

@dataclass
class KnowledgeBase:
    """A symbolic system's internal model.

    Mutating methods update the instance in place (single writer); use
    :meth:`copy` for hypothetical reasoning.
    """

    facts: set = field(default_factory=set)
    rules: list = field(default_factory=list)
    credals: dict = field(default_factory=dict)
    comparatives: list = field(default_factory=list)
    independents: list = field(default_factory=list)
    open_questions: list = field(default_factory=list)
    constants: set = field(default_factory=set)
    depth_limit: int = 64

    def __post_init__(self):
        facts, self.facts = self.facts, set()
        for f in facts:
            self.add_fact(f)
        self.rules = list(self.rules)
        self.credals = dict(self.credals)
        self.comparatives = list(self.comparatives)
        self.independents = [frozenset(s) for s in self.independents]
        self.open_questions = list(self.open_questions)
        self.constants = set(self.constants)
        self._prover = None

    def copy(self) -> "KnowledgeBase":
        return KnowledgeBase(
            facts=set(self.facts),
            rules=list(self.rules),
            credals=dict(self.credals),
            comparatives=list(self.comparatives),
            independents=list(self.independents),
            open_questions=list(self.open_questions),
            constants=set(self.constants),
            depth_limit=self.depth_limit,
        )

    def categorical_base(self) -> "KnowledgeBase":
        """Facts and rules only, without credal or comparative overlay."""
        return KnowledgeBase(
            facts=set(self.facts), rules=list(self.rules),
            constants=set(self.constants), depth_limit=self.depth_limit,
        )

    # -- building

    def add_fact(self, lit: Formula) -> "KnowledgeBase":
        if not is_literal(lit) or not is_ground(lit):
            raise ValueError(f"fact {unparse(lit)} must be a ground literal")
        if complement(lit) in self.facts:
            raise InconsistencyError(f"{unparse(lit)} contradicts stored fact {unparse(complement(lit))}")
        stored = self.credals.get(lit)
        if stored is not None and stored != 1.0:
            raise InconsistencyError(f"fact {unparse(lit)} contradicts credence {stored}")
        self.facts.add(lit)
        self._prover = None
        return self

    def add_rule(self, rule: Rule | str) -> "KnowledgeBase":
        if isinstance(rule, str):
            rule = Rule.parse(rule)
        self.rules.append(rule)
        self._prover = None
        return self

    def add_comparative(self, entry: ComparativeEntry) -> "KnowledgeBase":
        self.comparatives.append(entry)
        return self

    def declare_independent(self, group: Iterable[Atom]) -> "KnowledgeBase":
        self.independents.append(frozenset(group))
        return self

    def store_question(self, q: Question) -> "KnowledgeBase":
        if q not in self.open_questions:
            self.open_questions.append(q)
        return self

    def signature(self) -> set[Term]:
        sig = set(self.constants)
        for f in self.facts:
            sig |= constants(f)
        for r in self.rules:
            for lit in (*r.body, r.head):
                sig |= constants(lit)
        for f in self.credals:
            sig |= constants(f)
        return sig

    # -- credal operations

    def integrate_credal(self, e: CredalEntry) -> "KnowledgeBase":
        for lit, required in ((e.body, 1.0), (complement(e.body), 0.0)):
            if lit in self.facts and e.credence != required:
                raise InconsistencyError(
                    f"credence {e.credence} in {unparse(e.body)} contradicts fact {unparse(lit)}"
                )
        self.credals[e.body] = e.credence
        neg = complement(e.body)
        if neg in self.credals:
            self.credals[neg] = 1.0 - e.credence
        return self

    def _marginal(self, a: Atom) -> float | None:
        if a in self.credals:
            return self.credals[a]
        if Not(a) in self.credals:
            return 1.0 - self.credals[Not(a)]
        return None

    def compound_probability(self, f: Formula) -> float | None:
        """Exact probability of ``f`` by world enumeration, without storing it.

        Returns None when some atom lacks a credence or the atoms are not
        declared mutually independent.
        """
        if not is_ground(f):
            raise ValueError(f"{unparse(f)} is not ground")
        ats = atoms(f)
        if len(ats) > MAX_ENUMERATION_ATOMS:
            raise TooManyAtoms(f"{len(ats)} atoms exceeds the enumeration cap of {MAX_ENUMERATION_ATOMS}")
        marginals = [self._marginal(a) for a in ats]
        if any(m is None for m in marginals):
            return None
        if len(ats) > 1 and not any(set(ats) <= group for group in self.independents):
            return None
        total = 0.0
        for values in itertools.product((True, False), repeat=len(ats)):
            world = dict(zip(ats, values))
            if evaluate(f, world):
                w = 1.0
                for m, v in zip(marginals, values):
                    w *= m if v else 1.0 - m
                total += w
        # rounding can push a near-certain sum just past 1
        return min(1.0, max(0.0, total))

    def decide_compound(self, f: Formula) -> CredalEntry | None:
        """Compute and integrate the credence of ``f``; None means undetermined."""
        r = self.compound_probability(f)
        if r is None:
            return None
        entry = CredalEntry(f, r)
        self.integrate_credal(entry)
        return entry

    def decide_negation(self, f: Formula) -> CredalEntry:
        if f in self.credals:
            r = self.credals[f]
        else:
            decided = self.decide_compound(f)
            if decided is None:
                raise NoCredalEntry(f"no credence stored or decidable for {unparse(f)}")
            r = decided.credence
        neg = complement(f)
        for lit, required in ((neg, 1.0), (f, 0.0)):
            if lit in self.facts and 1.0 - r != required:
                raise InconsistencyError(f"negation of {unparse(f)} contradicts fact {unparse(lit)}")
        entry = CredalEntry(neg, 1.0 - r)
        self.credals[neg] = entry.credence
        return entry

    def credence_of(self, f: Formula) -> float | None:
        """Stored, complement-derived or decidable credence; never mutates."""
        if f in self.credals:
            return self.credals[f]
        neg = complement(f)
        if neg in self.credals:
            return 1.0 - self.credals[neg]
        return self.compound_probability(f)

    def comparative_uncertain(self, f: Formula) -> bool:
        above = any(c.relation == "greater" and c.left == f for c in self.comparatives)
        below = any(c.relation == "greater" and c.right == f for c in self.comparatives)
        return above and below

    # -- categorical operations

    def _prover_for(self, extra: Iterable[Term] = ()) -> _Prover:
        extra = set(extra)
        if self._prover is None or not extra <= set(self._prover.signature):
            self._prover = _Prover(self.facts, self.rules, self.signature() | extra, self.depth_limit)
        return self._prover

    def _literal_status(self, lit: Formula) -> str:
        prover = self._prover_for(constants(lit))
        pos = prover.derives(lit)
        neg = prover.derives(complement(lit))
        if pos and neg:
            raise InconsistencyError(f"both {unparse(lit)} and its negation derive")
        return "yes" if pos else "no" if neg else "open"

    def settles(self, f: Formula) -> str:
        """yes / no / open for a ground formula; compounds combine literal
        outcomes with strong-Kleene tables."""
        if not is_ground(f):
            raise ValueError(f"{unparse(f)} is not ground")
        if is_literal(f):
            return self._literal_status(f)
        if isinstance(f, Not):
            return _kleene_not(self.settles(f.body))
        left, right = self.settles(f.left), self.settles(f.right)
        if isinstance(f, And):
            if "no" in (left, right):
                return "no"
            return "yes" if left == right == "yes" else "open"
        if "yes" in (left, right):
            return "yes"
        return "no" if left == right == "no" else "open"

    def resolve_query(self, q: Question | Formula) -> str:
        body = q.body if isinstance(q, Polar) else q
        if isinstance(q, Wh):
            raise ValueError("resolve_query takes polar questions; use answer_wh")
        return self.settles(body)

    def answer_wh(self, q: Wh) -> tuple[str, tuple[Term, ...]]:
        """Try every constant of the signature; returns (verdict, witnesses)."""
        if q.domain == "open":
            return "open", ()
        results = {}
        for c in sorted(self.signature(), key=lambda t: t.name):
            results[c] = self.settles(substitute(q.body, q.variable, c))
        witnesses = tuple(c for c, v in results.items() if v == "yes")
        if witnesses:
            return "yes", witnesses
        if results and all(v == "no" for v in results.values()):
            return "no", ()
        return "open", ()

    def pose_query(self, q: Question) -> str:
        if isinstance(q, Wh):
            verdict, _ = self.answer_wh(q)
        else:
            verdict = self.resolve_query(q)
        if verdict == "open":
            self.store_question(q)
        return verdict

    def settled_question(self, q: Question) -> bool:
        if isinstance(q, Wh):
            return q.domain == "closed" and self.answer_wh(q)[0] != "open"
        return self.resolve_query(q) != "open"

    def classify_mode(self, q: Question) -> ModeReport:
        if isinstance(q, Polar):
            f = q.body
            for lit in (f, complement(f)):
                r = self.credals.get(lit)
                if r is not None and not nonextreme(r):
                    return ModeReport("none", "none")
            r = self.credals.get(f)
            if r is None and complement(f) in self.credals:
                r = 1.0 - self.credals[complement(f)]
            if r is not None:
                return ModeReport("explicit", "probabilistic", credence=r)
            if self.comparative_uncertain(f):
                return ModeReport("explicit", "probabilistic")
        if q in self.open_questions:
            if self.settled_question(q):
                return ModeReport("none", "none", in_position_to_answer=True)
            return ModeReport("explicit", "categorical")
        if isinstance(q, Polar):
            r = self.compound_probability(q.body)
            if r is not None:
                if nonextreme(r):
                    return ModeReport("implicit", "probabilistic", credence=r)
                return ModeReport("none", "none")
            if self.resolve_query(q) == "open":
                return ModeReport("implicit", "categorical")
            return ModeReport("none", "none")
        if not self.settled_question(q):
            return ModeReport("implicit", "categorical")
        return ModeReport("none", "none")


def assertion_policy(kb: KnowledgeBase, pol: AssertionPolicy, f: Formula) -> Utterance:
    """What the system says when prompted about ``f``.

    A stored or decidable credence drives the utterance; only when no
    credence is available does categorical derivation decide.
    """
    r = kb.credence_of(f)
    if r is not None:
        return utter_credence(f, r, pol.assert_threshold)
    verdict = kb.settles(f)
    if verdict == "yes":
        return FlatAssert(f)
    if verdict == "no":
        return FlatAssert(complement(f))
    return Abstain(Polar(f))
