"""Independent reference implementations used to cross-check the engines.

Neither oracle shares code paths with :mod:`uncertlab.symbolic`: worlds are
enumerated as a numpy truth table, and categorical consequence is computed
bottom-up by grounding every rule over the signature.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np

from .lang import And, Atom, Formula, Not, Or, Term, VARIABLES, variables
from .symbolic import Rule


def world_probability(f: Formula, marginals: dict[Atom, float]) -> float:
    """Probability of ``f`` when the given atoms are mutually independent."""
    order = sorted(marginals, key=repr)
    n = len(order)
    # row i of the table is world i; column j is the truth value of atom j
    table = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    p = np.array([marginals[a] for a in order])
    weights = np.prod(np.where(table, p, 1.0 - p), axis=1)
    column = {a: table[:, j] for j, a in enumerate(order)}

    def truth(g: Formula) -> np.ndarray:
        if isinstance(g, Atom):
            return column[g]
        if isinstance(g, Not):
            return ~truth(g.body)
        if isinstance(g, And):
            return truth(g.left) & truth(g.right)
        return truth(g.left) | truth(g.right)

    return float(weights[truth(f)].sum())


def forward_closure(facts, rules, signature) -> set[Formula]:
    """Naive bottom-up fixpoint over all ground instances of the rules."""
    consts = sorted(signature, key=lambda t: t.name)
    ground: list[tuple[tuple[Formula, ...], Formula]] = []
    for r in rules:
        vs = sorted(set().union(*(variables(b) for b in r.body)), key=lambda t: t.name)
        for values in itertools.product(consts, repeat=len(vs)):
            env = dict(zip(vs, values))
            ground.append((tuple(_ground(b, env) for b in r.body), _ground(r.head, env)))
    known = set(facts)
    changed = True
    while changed:
        changed = False
        for body, head in ground:
            if head not in known and all(b in known for b in body):
                known.add(head)
                changed = True
    return known


def _ground(lit: Formula, env) -> Formula:
    if isinstance(lit, Not):
        return Not(_ground(lit.body, env))
    return Atom(lit.predicate, tuple(env.get(t, t) for t in lit.args))


# -- random instances ---------------------------------------------------------------

def random_formula(rng: random.Random, pool: list[Atom], size: int) -> Formula:
    if size <= 1:
        return rng.choice(pool)
    kind = rng.random()
    if kind < 0.2:
        return Not(random_formula(rng, pool, size - 1))
    split = rng.randint(1, size - 1)
    cls = And if kind < 0.6 else Or
    return cls(random_formula(rng, pool, split), random_formula(rng, pool, size - split))


@dataclass
class RandomProgram:
    facts: set
    rules: list
    constants: list
    atoms: list  # every ground atom of the signature


def random_program(rng: random.Random, max_rules: int = 30, max_constants: int = 10) -> RandomProgram:
    """A consistent function-free program.

    Base predicates appear only in facts (positive or negative); derived
    predicates appear only in positive rule heads, so no literal and its
    complement can both hold.
    """
    consts = [Term(f"c{i}") for i in range(rng.randint(1, max_constants))]
    base = {f"b{i}": rng.randint(1, 2) for i in range(rng.randint(1, 3))}
    derived = {f"d{i}": rng.randint(0, 2) for i in range(rng.randint(1, 4))}

    def ground_atom(pred, arity):
        return Atom(pred, tuple(rng.choice(consts) for _ in range(arity)))

    facts = set()
    for _ in range(rng.randint(0, 2 * len(consts) + 2)):
        pred = rng.choice(sorted(base))
        facts.add(ground_atom(pred, base[pred]))
    for _ in range(rng.randint(0, len(consts))):
        pred = rng.choice(sorted(base))
        a = ground_atom(pred, base[pred])
        if a not in facts:
            facts.add(Not(a))

    preds = {**base, **derived}
    var_pool = sorted(VARIABLES)[:3]
    rules = []
    for _ in range(rng.randint(0, max_rules)):
        body = []
        for _ in range(rng.randint(1, 3)):
            pred = rng.choice(sorted(preds))
            args = tuple(Term(rng.choice(var_pool)) if rng.random() < 0.7 else rng.choice(consts)
                         for _ in range(preds[pred]))
            lit = Atom(pred, args)
            if pred in base and rng.random() < 0.2:
                lit = Not(lit)
            body.append(lit)
        body_vars = sorted(set().union(*(variables(b) for b in body)), key=lambda t: t.name)
        head_pred = rng.choice(sorted(derived))
        head_args = tuple(rng.choice(body_vars) if body_vars and rng.random() < 0.8 else rng.choice(consts)
                          for _ in range(derived[head_pred]))
        rules.append(Rule(tuple(body), Atom(head_pred, head_args)))
    all_atoms = [Atom(p, args) for p, k in sorted(preds.items())
                 for args in itertools.product(consts, repeat=k)]
    return RandomProgram(facts, rules, consts, all_atoms)
