"""Line-oriented scenario files.

A scenario declares systems in ``system <name> kind=<kind>`` ... ``end``
blocks and then lists directives, one per line.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..ascription import Arbiter, LearningLoop, Passthrough, ThresholdConsumer
from ..connectionist import (
    ConfidenceSuffix,
    DimensionMismatch,
    PairConvention,
    PerClass,
    QuestionCode,
    SingleConvention,
)
from ..lang import ParseError, Term, atoms, is_ground, parse_formula, parse_question
from ..symbolic import ComparativeEntry, Rule

KINDS = ("symbolic", "network", "composition")
VERBS = ("query", "observe", "probe", "train", "ascribe", "expect")
_NAME = re.compile(r"[a-z][a-z0-9_]*")
_HEADER = re.compile(r"system\s+(?P<name>\S+)\s+kind=(?P<kind>\S+)\s*$")


class ScenarioSyntaxError(SyntaxError):
    def __init__(self, message: str, path: str, lineno: int):
        super().__init__(f"{path}:{lineno}: {message}")
        self.msg = message
        self.filename = path
        self.lineno = lineno


class UnknownSystem(LookupError):
    pass


@dataclass
class Entry:
    op: str
    args: tuple
    line: int


@dataclass
class SystemBlock:
    name: str
    kind: str
    line: int
    entries: list = field(default_factory=list)
    children: list = field(default_factory=list)

    def find(self, op: str) -> list:
        return [e for e in self.entries if e.op == op]


@dataclass
class Directive:
    verb: str
    system: str | None
    args: tuple
    line: int
    text: str


@dataclass
class Scenario:
    name: str
    path: str
    systems: list
    directives: list

    def system(self, name: str) -> SystemBlock:
        for s in self.systems:
            if s.name == name:
                return s
        raise UnknownSystem(name)


def parse_real(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    return v


def _unit(r: float, what: str) -> float:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"{what} {r} outside [0, 1]")
    return r


def parse_reals(text: str) -> tuple[float, ...]:
    return tuple(parse_real(t) for t in text.replace(",", " ").split())


def _is_reals(text: str) -> bool:
    try:
        return bool(parse_reals(text))
    except ValueError:
        return False


def _split_list(text: str) -> list[str]:
    if ";" in text:
        return [t.strip() for t in text.split(";") if t.strip()]
    return text.split()


def _policy(rest: str):
    words = rest.split()
    if not words:
        raise ValueError("empty policy")
    head = words[0]
    if head == "assert_threshold":
        m = re.fullmatch(r"assert_threshold\s*=\s*(\S+)", rest.strip())
        if not m:
            raise ValueError("expected 'policy assert_threshold = <r>'")
        return ("assert_threshold", parse_real(m.group(1)))
    if head == "passthrough" and len(words) == 1:
        return ("policy", Passthrough())
    if head == "threshold_consumer" and len(words) == 2:
        return ("policy", ThresholdConsumer(parse_real(words[1])))
    if head == "learning_loop" and len(words) == 2:
        return ("policy", LearningLoop(parse_real(words[1])))
    if head == "arbiter" and len(words) >= 3:
        return ("policy", Arbiter(tuple(words[1:])))
    raise ValueError(f"unknown policy {rest!r}")


def _formula_eq(rest: str):
    lhs, sep, rhs = rest.rpartition("=")
    if not sep:
        raise ValueError("expected '<formula> = <r>'")
    f = parse_formula(lhs.strip())
    if not is_ground(f):
        raise ValueError(f"{lhs.strip()} is not ground")
    return f, parse_real(rhs.strip())


def _coding(rest: str, value_parser):
    coding = {}
    for part in rest.split(";"):
        if not part.strip():
            continue
        bits, arrow, content = part.partition("=>")
        if not arrow:
            raise ValueError("expected '<bits> => <content>'")
        key = tuple(int(b) for b in bits.split())
        if any(b not in (0, 1) for b in key):
            raise ValueError(f"pattern {bits.strip()!r} must be 0/1 values")
        coding[key] = value_parser(content.strip())
    if not coding:
        raise ValueError("empty coding")
    return coding


def _convention(rest: str):
    kind, _, spec = rest.strip().partition(" ")
    spec = spec.strip()
    if kind == "pair":
        return PairConvention(parse_formula(spec))
    if kind == "single":
        m = re.fullmatch(r"(?P<f>.+?)(?:\s+third=(?P<t>\S+))?", spec)
        third = parse_real(m.group("t")) if m.group("t") else None
        return SingleConvention(parse_formula(m.group("f")), third)
    if kind == "per_class":
        return PerClass(tuple(parse_formula(t) for t in _split_list(spec)))
    if kind == "confidence_suffix":
        return ConfidenceSuffix(_coding(spec, parse_formula))
    if kind == "question_code":
        return QuestionCode(_coding(spec, parse_question))
    raise ValueError(f"unknown convention {kind!r}")


def _symbolic_entry(op: str, rest: str):
    if op == "fact":
        return (parse_formula(rest),)
    if op == "rule":
        return (Rule.parse(rest),)
    if op in ("cred", "evidence"):
        f, r = _formula_eq(rest)
        return f, _unit(r, op)
    if op == "cmp":
        m = re.fullmatch(r"(?P<l>[^>=]+)(?P<rel>[>=])(?P<r>[^>=]+)", rest)
        if not m:
            raise ValueError("expected 'cmp <formula> > <formula>' or 'cmp <formula> = <formula>'")
        rel = "greater" if m.group("rel") == ">" else "equal"
        return (ComparativeEntry(parse_formula(m.group("l").strip()), rel, parse_formula(m.group("r").strip())),)
    if op == "indep":
        group = [parse_formula(t) for t in rest.split()]
        for a in group:
            if atoms(a) != [a]:
                raise ValueError(f"indep takes atoms, got {rest!r}")
        return (tuple(group),)
    if op == "ask":
        return (parse_question(rest),)
    if op == "const":
        return (tuple(Term(t) for t in rest.split()),)
    raise ValueError(f"unknown symbolic line {op!r}")


def _network_entry(op: str, rest: str):
    if op == "layers":
        return (tuple(int(t) for t in rest.split()),)
    if op == "activation":
        if rest.strip() not in ("step", "logistic"):
            raise ValueError("activation must be step or logistic")
        return (rest.strip(),)
    if op in ("weights", "thresholds"):
        layer, _, values = rest.strip().partition(" ")
        return (int(layer), parse_reals(values))
    if op == "convention":
        return (_convention(rest),)
    if op == "scope":
        return (parse_question(rest),)
    if op == "generalization":
        m = re.fullmatch(r"\s*([a-z][a-z0-9_]*)\s*->\s*([a-z][a-z0-9_]*)\s*", rest)
        if not m:
            raise ValueError("expected 'generalization <F> -> <G>'")
        return (m.group(1), m.group(2))
    if op == "instance":
        name, eq, values = rest.partition("=")
        if not eq or not _NAME.fullmatch(name.strip()):
            raise ValueError("expected 'instance <name> = <reals>'")
        return (Term(name.strip()), parse_reals(values))
    if op == "item":
        words = rest.split()
        if len(words) < 2:
            raise ValueError("expected 'item <name> <label>=<count> ...'")
        votes = Counter()
        for w in words[1:]:
            label, eq, count = w.partition("=")
            if not eq:
                raise ValueError(f"bad vote {w!r}")
            votes[label] += int(count)
        return (Term(words[0]), votes)
    if op == "evidence":
        f, r = _formula_eq(rest)
        return f, _unit(r, op)
    raise ValueError(f"unknown network line {op!r}")


def _check_network(block: SystemBlock, path: str) -> None:
    from ..connectionist import Network, check_arity

    layers = block.find("layers")
    if not layers:
        raise ScenarioSyntaxError(f"network {block.name} declares no layers", path, block.line)
    sizes = layers[0].args[0]
    try:
        weights = {e.args[0]: e.args[1] for e in block.find("weights")}
        thresholds = {e.args[0]: e.args[1] for e in block.find("thresholds")}
        act = block.find("activation")
        net = Network.from_flat(
            sizes,
            [weights.get(k, ()) for k in range(1, len(sizes))],
            [thresholds.get(k, ()) for k in range(1, len(sizes))],
            act[0].args[0] if act else "step",
        )
        for e in block.find("convention"):
            check_arity(net, e.args[0])
        for e in block.find("instance"):
            if len(e.args[1]) != net.n_inputs:
                raise DimensionMismatch(f"instance {e.args[0]} has {len(e.args[1])} inputs, network takes {net.n_inputs}")
    except DimensionMismatch as exc:
        raise ScenarioSyntaxError(f"DimensionMismatch: {exc}", path, block.line) from exc
    if not block.find("convention"):
        raise ScenarioSyntaxError(f"network {block.name} declares no convention", path, block.line)


def _parse_block_line(block: SystemBlock, op: str, rest: str, lineno: int) -> Entry:
    if op == "policy":
        kind, value = _policy(rest)
        if kind == "assert_threshold" and block.kind != "symbolic":
            raise ValueError("assert_threshold applies to symbolic systems")
        if block.kind == "composition" and not isinstance(value, Arbiter):
            raise ValueError("a composition's own policy must be an arbiter")
        return Entry(kind, (value,), lineno)
    if block.kind == "symbolic":
        return Entry(op, _symbolic_entry(op, rest), lineno)
    if block.kind == "network":
        return Entry(op, _network_entry(op, rest), lineno)
    raise ValueError(f"composition blocks take nested systems and a policy, not {op!r}")


def _directive(verb: str, rest: str, lineno: int, text: str) -> Directive:
    if verb == "expect":
        return Directive(verb, None, (rest,), lineno, text)
    system, _, tail = rest.partition(" ")
    tail = tail.strip()
    if not system:
        raise ValueError(f"{verb} needs a system name")
    if verb in ("query", "ascribe"):
        return Directive(verb, system, (parse_question(tail),), lineno, text)
    if verb == "observe":
        mode, _, arg = tail.partition(" ")
        arg = arg.strip()
        if mode == "assert":
            return Directive(verb, system, ("assert", parse_formula(arg)), lineno, text)
        if mode == "ask":
            return Directive(verb, system, ("ask", parse_question(arg)), lineno, text)
        if mode == "input":
            m = re.fullmatch(
                r"(?P<stim>.+?)(?:\s+evidence\s+(?P<ev>\S+))?(?:\s+desired\s+(?P<des>.+))?", arg)
            if not m:
                raise ValueError("expected 'observe <system> input <vector|instance> [evidence r] [desired v]'")
            ev = _unit(parse_real(m.group("ev")), "evidence") if m.group("ev") else None
            des = parse_reals(m.group("des")) if m.group("des") else None
            return Directive(verb, system, ("input", _stimulus(m.group("stim")), ev, des), lineno, text)
        raise ValueError(f"unknown observe form {mode!r}")
    if verb == "probe":
        role, _, stim = tail.partition(" ")
        stim = stim.strip()
        if role not in ("R1", "R2", "R3"):
            raise ValueError(f"unknown probe {role!r}")
        if role == "R3":
            pair = parse_reals(stim)
            if len(pair) != 2:
                raise ValueError("R3 stimulus is '<nonextreme credence> <extreme credence>'")
            return Directive(verb, system, (role, pair), lineno, text)
        if _is_reals(stim) or _NAME.fullmatch(stim):
            # a bare name is an instance if the system declares one, else a 0-ary atom
            return Directive(verb, system, (role, _stimulus(stim)), lineno, text)
        prompt = parse_question(stim) if stim.startswith("?") else parse_formula(stim)
        return Directive(verb, system, (role, ("prompt", prompt)), lineno, text)
    if verb == "train":
        m = re.fullmatch(r"(?P<steps>\d+)(?:\s+rate=(?P<rate>\S+))?", tail)
        if not m:
            raise ValueError("expected 'train <system> <steps> [rate=<r>]'")
        rate = parse_real(m.group("rate")) if m.group("rate") else None
        return Directive(verb, system, (int(m.group("steps")), rate), lineno, text)
    raise ValueError(f"unknown directive {verb!r}")


def _stimulus(text: str):
    text = text.strip()
    if _is_reals(text):
        return ("vector", parse_reals(text))
    if _NAME.fullmatch(text):
        return ("instance", Term(text))
    raise ValueError(f"stimulus {text!r} is neither a vector nor an instance name")


def parse_scenario(text: str, path: str = "<string>", name: str | None = None) -> Scenario:
    systems: list[SystemBlock] = []
    directives: list[Directive] = []
    stack: list[SystemBlock] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("system ") or line == "system":
                m = _HEADER.fullmatch(line)
                if not m or not _NAME.fullmatch(m.group("name")):
                    raise ValueError("expected 'system <name> kind=<symbolic|network|composition>'")
                kind = m.group("kind")
                if kind not in KINDS:
                    raise ValueError(f"unknown system kind {kind!r}")
                block = SystemBlock(m.group("name"), kind, lineno)
                if stack:
                    if stack[-1].kind != "composition" or kind == "composition":
                        raise ValueError("only composition blocks nest, and only symbolic or network systems")
                    stack[-1].children.append(block)
                else:
                    if any(s.name == block.name for s in systems):
                        raise ValueError(f"system {block.name} declared twice")
                    systems.append(block)
                stack.append(block)
                continue
            if line == "end":
                if not stack:
                    raise ValueError("'end' outside a system block")
                stack.pop()
                continue
            op, _, rest = line.partition(" ")
            if stack:
                stack[-1].entries.append(_parse_block_line(stack[-1], op, rest.strip(), lineno))
                continue
            if op not in VERBS:
                raise ValueError(f"unknown directive {op!r}")
            directives.append(_directive(op, rest.strip(), lineno, line))
        except ScenarioSyntaxError:
            raise
        except (ValueError, ParseError) as exc:
            raise ScenarioSyntaxError(str(exc), path, lineno) from exc
    if stack:
        raise ScenarioSyntaxError(f"system {stack[-1].name} is missing 'end'", path, stack[-1].line)
    if not systems:
        raise ScenarioSyntaxError("no systems declared", path, 1)
    names = {s.name for s in systems}
    for d in directives:
        if d.system is not None and d.system not in names:
            raise UnknownSystem(f"{path}:{d.line}: unknown system {d.system!r}")
    for block in systems:
        for b in [block, *block.children]:
            if b.kind == "network":
                _check_network(b, path)
        if block.kind == "composition" and not block.children:
            raise ScenarioSyntaxError(f"composition {block.name} has no subsystems", path, block.line)
    return Scenario(name or Path(path).stem, path, systems, directives)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path), path.stem)
