"""Seeded oracle cross-checks, runnable without the test suite (``lab check``)."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

from .lang import Atom, Not, Polar, atoms
from .oracles import forward_closure, random_formula, random_program, world_probability
from .symbolic import CredalEntry, KnowledgeBase


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    mismatches: int
    seconds: float

    @property
    def ok(self) -> bool:
        return self.mismatches == 0

    def line(self) -> str:
        status = "ok" if self.ok else "FAILED"
        return f"{self.name}: {status} ({self.cases} cases, {self.mismatches} mismatches, {self.seconds:.2f}s)"


def probabilistic_oracle_check(cases: int = 1000, seed: int = 0, max_atoms: int = 8) -> CheckResult:
    rng = random.Random(seed)
    start = time.perf_counter()
    bad = 0
    for _ in range(cases):
        pool = [Atom(f"p{i}") for i in range(rng.randint(1, max_atoms))]
        kb = KnowledgeBase()
        marginals = {}
        for a in pool:
            r = rng.random()
            marginals[a] = r
            kb.integrate_credal(CredalEntry(a, r))
        kb.declare_independent(pool)
        f = random_formula(rng, pool, rng.randint(1, 12))
        used = {a: marginals[a] for a in atoms(f)}
        entry = kb.decide_compound(f)
        if entry is None or abs(entry.credence - world_probability(f, used)) > 1e-12:
            bad += 1
    return CheckResult("probabilistic oracle", cases, bad, time.perf_counter() - start)


def categorical_yes_set(kb: KnowledgeBase, ground_atoms) -> set:
    yes = set()
    for a in ground_atoms:
        verdict = kb.resolve_query(Polar(a))
        if verdict == "yes":
            yes.add(a)
        elif verdict == "no":
            yes.add(Not(a))
    return yes


def categorical_oracle_check(cases: int = 100, seed: int = 0) -> CheckResult:
    rng = random.Random(seed)
    start = time.perf_counter()
    bad = 0
    for _ in range(cases):
        prog = random_program(rng)
        kb = KnowledgeBase(facts=set(prog.facts), rules=list(prog.rules), constants=set(prog.constants))
        closure = forward_closure(prog.facts, prog.rules, kb.signature())
        expected = {lit for lit in closure if (lit.body if isinstance(lit, Not) else lit) in set(prog.atoms)}
        if categorical_yes_set(kb, prog.atoms) != expected:
            bad += 1
    return CheckResult("categorical oracle", cases, bad, time.perf_counter() - start)


def run_checks(seed: int = 0) -> list[CheckResult]:
    return [probabilistic_oracle_check(seed=seed), categorical_oracle_check(seed=seed)]
