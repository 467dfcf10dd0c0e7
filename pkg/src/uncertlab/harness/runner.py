"""Execute scenarios and render their reports."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..ascription import (
    LearningLoop,
    NetworkSubsystem,
    Passthrough,
    Probes,
    SymbolicAssertion,
    SymbolicSubsystem,
    SystemComposition,
    Trace,
    first_solution_verdict,
)
from ..connectionist import (
    CredenceContent,
    Generalization,
    LabeledDataset,
    LabeledItem,
    Network,
    PairConvention,
    QuestionContent,
    QuestionScope,
    SingleConvention,
    TruthContent,
    data_uncertainty_measure,
    delta_update,
    desired_true,
    forward,
    overconfidence_audit,
)
from ..lang import Atom, Polar, Term, Wh, complement, constants, unparse, wrapped
from ..symbolic import AssertionPolicy, CredalEntry, KnowledgeBase
from .dsl import Directive, Scenario, SystemBlock

MACHINE_KINDS = ("utter", "verdict", "flag", "expect")


class ScenarioRuntimeError(RuntimeError):
    def __init__(self, path: str, lineno: int, exc: BaseException):
        super().__init__(f"{path}:{lineno}: {type(exc).__name__}: {exc}")
        self.lineno = lineno
        self.cause = exc


class ExpectationFailed(AssertionError):
    def __init__(self, expected: str, actual: list[str], lineno: int):
        shown = "\n  ".join(actual) if actual else "(no output)"
        super().__init__(f"line {lineno}: expected\n  {expected}\nactual\n  {shown}")
        self.expected = expected
        self.actual = actual
        self.lineno = lineno


@dataclass(frozen=True)
class RunFlags:
    assert_threshold: float = 0.95
    depth_limit: int = 64
    overconfidence_window: tuple[float, float] = (0.05, 0.95)


@dataclass
class Report:
    scenario: str
    entries: list = field(default_factory=list)  # (kind, text)
    failures: list = field(default_factory=list)  # ExpectationFailed
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self, kind: str | None = None) -> list[str]:
        return [t for k, t in self.entries if kind is None or k == kind]

    @property
    def expectation_counts(self) -> tuple[int, int]:
        total = len(self.lines("expect"))
        return total - len(self.failures), len(self.failures)


# -- building systems ------------------------------------------------------------

def _fmt(r: float) -> str:
    return f"{r:.4f}"


def _symbolic(block: SystemBlock, flags: RunFlags):
    kb = KnowledgeBase(depth_limit=flags.depth_limit)
    evidence = {}
    policy = SymbolicAssertion(AssertionPolicy(flags.assert_threshold))
    for e in block.entries:
        if e.op == "fact":
            kb.add_fact(e.args[0])
        elif e.op == "rule":
            kb.add_rule(e.args[0])
        elif e.op == "cred":
            kb.integrate_credal(CredalEntry(*e.args))
        elif e.op == "cmp":
            kb.add_comparative(e.args[0])
        elif e.op == "indep":
            kb.declare_independent(e.args[0])
        elif e.op == "ask":
            kb.store_question(e.args[0])
        elif e.op == "const":
            kb.constants.update(e.args[0])
        elif e.op == "evidence":
            evidence[e.args[0]] = e.args[1]
        elif e.op == "assert_threshold":
            policy = SymbolicAssertion(AssertionPolicy(e.args[0]))
        elif e.op == "policy":
            policy = e.args[0]
    return SymbolicSubsystem(block.name, kb, evidence), policy


def _network(block: SystemBlock):
    sizes = block.find("layers")[0].args[0]
    weights = {e.args[0]: e.args[1] for e in block.find("weights")}
    thresholds = {e.args[0]: e.args[1] for e in block.find("thresholds")}
    act = block.find("activation")
    net = Network.from_flat(
        sizes,
        [weights.get(k, ()) for k in range(1, len(sizes))],
        [thresholds.get(k, ()) for k in range(1, len(sizes))],
        act[0].args[0] if act else "step",
    )
    conv = block.find("convention")[0].args[0]
    instances = tuple((e.args[0], e.args[1]) for e in block.find("instance"))
    gen = None
    extra = [e.args[0] for e in block.find("scope")]
    if block.find("generalization"):
        f, g = block.find("generalization")[0].args
        gen = Generalization(f, g, instances)
        extra.append(gen.question)
    items = tuple(LabeledItem(e.args[0], e.args[1]) for e in block.find("item"))
    sub = NetworkSubsystem(
        block.name, net, conv, QuestionScope.for_convention(conv, extra), gen,
        LabeledDataset(items) if items else None,
        {e.args[0]: e.args[1] for e in block.find("evidence")},
    )
    policies = block.find("policy")
    return sub, (policies[-1].args[0] if policies else Passthrough()), dict(instances)


@dataclass
class _Live:
    comp: SystemComposition
    instances: dict  # Term -> input vector, across network subsystems
    trace: Trace = field(default_factory=Trace)
    probes: dict = field(default_factory=lambda: {"R1": [], "R2": [], "R3": []})


def _build(block: SystemBlock, flags: RunFlags) -> _Live:
    children = block.children if block.kind == "composition" else [block]
    subs, policies, instances = [], {}, {}
    for child in children:
        if child.kind == "symbolic":
            sub, pol = _symbolic(child, flags)
        else:
            sub, pol, inst = _network(child)
            instances.update(inst)
        subs.append(sub)
        policies[sub.name] = pol
    own = block.find("policy") if block.kind == "composition" else []
    if own:
        comp = SystemComposition(block.name, subs, own[-1].args[0], policies)
    else:
        comp = SystemComposition(block.name, subs, policies[subs[0].name])
    return _Live(comp, instances)


# -- directives ------------------------------------------------------------------

class _Run:
    def __init__(self, scenario: Scenario, flags: RunFlags):
        self.scenario = scenario
        self.flags = flags
        self.systems = {}
        for b in scenario.systems:
            try:
                self.systems[b.name] = _build(b, flags)
            except Exception as exc:
                raise ScenarioRuntimeError(scenario.path, b.line, exc) from exc
        self.report = Report(scenario.name)
        self.last: list[str] = []

    def emit(self, kind: str, text: str) -> None:
        self.report.entries.append((kind, text))
        self.last.append(text)

    def label(self, live: _Live, sub) -> str:
        if len(live.comp.subsystems) == 1:
            return live.comp.name
        return f"{live.comp.name}.{sub.name}"

    def resolve(self, live: _Live, stim):
        tag, value = stim
        if tag == "vector":
            return (value, None)
        if tag == "instance":
            if value in live.instances:
                return (live.instances[value], value)
            return None
        raise ValueError(f"bad stimulus {stim!r}")

    def network_for(self, live: _Live, vec) -> NetworkSubsystem:
        for sub in live.comp.ordered():
            if isinstance(sub, NetworkSubsystem) and sub.net.n_inputs == len(vec):
                return sub
        raise ValueError(f"{live.comp.name} has no network taking {len(vec)} inputs")

    def run(self) -> Report:
        for d in self.scenario.directives:
            if d.verb != "expect":
                self.last = []
            try:
                getattr(self, f"do_{d.verb}")(d)
            except ExpectationFailed:
                raise
            except Exception as exc:
                raise ScenarioRuntimeError(self.scenario.path, d.line, exc) from exc
        return self.report

    # query

    def do_query(self, d: Directive) -> None:
        live = self.systems[d.system]
        q = d.args[0]
        said = False
        for sub in live.comp.ordered():
            tag = self.label(live, sub)
            if isinstance(sub, SymbolicSubsystem):
                self.emit("info", f"{tag}: {self.query_symbolic(sub.kb, q)}")
                said = True
            elif sub.covers(q) or self.data_rows(sub, q):
                for line in self.query_network(sub, q):
                    self.emit("info", f"{tag}: {line}")
                said = True
        if not said:
            self.emit("info", f"{live.comp.name}: out of scope {unparse(q)}")

    def query_symbolic(self, kb: KnowledgeBase, q) -> str:
        if isinstance(q, Polar):
            f = q.body
            if f in kb.credals:
                return f"cred {wrapped(f)} = {_fmt(kb.credals[f])}"
            if complement(f) in kb.credals:
                entry = kb.decide_negation(complement(f))
                return f"cred {wrapped(entry.body)} = {_fmt(entry.credence)}"
            entry = kb.decide_compound(f) if not isinstance(f, Atom) else None
            if entry is not None:
                return f"cred {wrapped(entry.body)} = {_fmt(entry.credence)}"
        verdict = kb.pose_query(q)
        line = f"answer {unparse(q)} = {verdict}"
        if isinstance(q, Wh) and verdict == "yes":
            _, witnesses = kb.answer_wh(q)
            line += " witnesses=" + ",".join(t.name for t in witnesses)
        if verdict == "open":
            line += " (stored)"
        return line

    def data_rows(self, sub: NetworkSubsystem, q) -> list:
        if sub.dataset is None:
            return []
        relevant = constants(q.body)
        return [r for r in data_uncertainty_measure(sub.dataset).items if r.subject in relevant]

    def query_network(self, sub: NetworkSubsystem, q) -> list[str]:
        lines = []
        for row in self.data_rows(sub, q):
            lines.append(f"data {row.subject.name} label={row.modal_label} "
                         f"agreement={_fmt(row.agreement)} flagged={'yes' if row.flagged else 'no'}")
        if sub.is_generalization(q):
            scan = sub.scan()
            line = f"scan {unparse(q)} = {scan.verdict}"
            if scan.witnesses:
                line += " witness=" + ",".join(t.name for t in scan.witnesses)
            if scan.falsifiers:
                line += " falsifier=" + ",".join(t.name for t in scan.falsifiers)
            lines.append(line)
        elif sub.covers(q):
            s = sub.stance(q)
            if s is None:
                lines.append(f"no stimulus bears on {unparse(q)}")
            elif s.credence is not None:
                lines.append(f"decode {unparse(q)} = credence {_fmt(s.credence)}")
            else:
                lines.append(f"decode {unparse(q)} = {s.answer}")
        return lines

    # observe

    def do_observe(self, d: Directive) -> None:
        live = self.systems[d.system]
        mode = d.args[0]
        if mode in ("assert", "ask"):
            q = Polar(d.args[1]) if mode == "assert" else d.args[1]
            self.respond(live, q, None, d.text)
            return
        _, stim, evidence, desired = d.args
        resolved = self.resolve(live, stim)
        if resolved is None:
            raise ValueError(f"unknown instance {stim[1]}")
        vec, subject = resolved
        sub = self.network_for(live, vec)
        sub.stimuli.append(resolved)
        out = forward(sub.net, vec)
        content = sub.decode(resolved)
        shown = " ".join(_fmt(v) for v in out)
        self.emit("info", f"{self.label(live, sub)}: output {shown} decodes {_describe(content)}")
        for q in _questions(content):
            self.respond(live, q, resolved, d.text)
        policy = live.comp.policy_for(sub.name)
        if desired is not None:
            if not isinstance(policy, LearningLoop):
                raise ValueError("'desired' applies only under a learning_loop policy")
            sub.net = delta_update(sub.net, vec, desired, policy.rate)
            after = forward(sub.net, vec)
            self.emit("info", f"{self.label(live, sub)}: delta update output {shown} -> "
                              + " ".join(_fmt(v) for v in after))
        if isinstance(sub.convention, (PairConvention, SingleConvention)):
            r = evidence if evidence is not None else sub.evidence.get(content.formula)
            if r is not None:
                for flag in overconfidence_audit(sub.net, sub.convention, [(vec, r)],
                                                 self.flags.overconfidence_window, subject):
                    self.emit("flag", f"FLAG {live.comp.name} overconfident "
                                      f"evidence={_fmt(flag.evidence)} verdict={flag.verdict}")

    def respond(self, live: _Live, q, stimulus, text: str) -> None:
        utt = live.comp.respond(q, stimulus)
        if utt is None:
            self.emit("info", f"{live.comp.name}: no utterance for {unparse(q)}")
            return
        live.trace.append(text, utt)
        self.emit("utter", f"UTTER {live.comp.name} {utt.wire()}")

    # probe, train, ascribe, expect

    def do_probe(self, d: Directive) -> None:
        live = self.systems[d.system]
        role, stim = d.args
        if role == "R3":
            live.probes["R3"].append(stim)
            return
        if stim[0] == "prompt":
            live.probes[role].append(stim[1])
            return
        resolved = self.resolve(live, stim)
        if resolved is None:
            # a bare name that is not an instance reads as a 0-ary atom
            live.probes[role].append(Atom(stim[1].name))
            return
        self.network_for(live, resolved[0])
        live.probes[role].append(resolved)

    def do_train(self, d: Directive) -> None:
        live = self.systems[d.system]
        steps, rate = d.args
        subs = [s for s in live.comp.ordered() if isinstance(s, NetworkSubsystem) and s.generalization]
        if not subs:
            raise ValueError(f"{live.comp.name} has no network with a generalization to train on")
        sub = subs[0]
        if rate is None:
            policy = live.comp.policy_for(sub.name)
            rate = policy.rate if isinstance(policy, LearningLoop) else 1.0
        target = desired_true(sub.convention)
        instances = sub.generalization.instances
        if not instances:
            raise ValueError("no instances to train on")
        for i in range(steps):
            sub.net = delta_update(sub.net, instances[i % len(instances)][1], target, rate)
        self.emit("info", f"{self.label(live, sub)}: trained {steps} steps rate={_fmt(rate)}")

    def do_ascribe(self, d: Directive) -> None:
        live = self.systems[d.system]
        q = d.args[0]
        p = live.probes
        verdict = first_solution_verdict(live.comp, q, live.trace,
                                         Probes(tuple(p["R1"]), tuple(p["R2"]), tuple(p["R3"])))
        self.emit("verdict", verdict.line(live.comp.name))
        for note in verdict.notes:
            self.report.notes.append(f"{live.comp.name} {unparse(q)}: {note}")
        if verdict.second_solution_note:
            self.report.notes.append(f"{live.comp.name} {unparse(q)}: {verdict.second_solution_note}")

    def do_expect(self, d: Directive) -> None:
        expected = d.args[0]
        actual = list(self.last)
        ok = expected in actual
        self.report.entries.append(("expect", f"EXPECT {'pass' if ok else 'fail'} {expected}"))
        if not ok:
            self.report.failures.append(ExpectationFailed(expected, actual, d.line))


def _describe(content) -> str:
    if isinstance(content, TruthContent):
        return f"{unparse(content.formula)} {content.verdict}"
    if isinstance(content, QuestionContent):
        return unparse(content.question)
    return ", ".join(f"{unparse(f)}={_fmt(r)}" for f, r in content.assignments)


def _questions(content) -> list:
    if isinstance(content, TruthContent):
        return [Polar(content.formula)]
    if isinstance(content, QuestionContent):
        return [content.question]
    assert isinstance(content, CredenceContent)
    return [Polar(f) for f, _ in content.assignments]


def run_scenario(s: Scenario, flags: RunFlags | None = None) -> Report:
    return _Run(s, flags or RunFlags()).run()


def run_many(scenarios: list[Scenario], flags: RunFlags | None = None, workers: int | None = None) -> list[Report]:
    """Run independent scenarios concurrently; results keep input order."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_scenario(s, flags), scenarios))


def emit_report(r: Report, format: str = "text") -> str:
    if format == "lines":
        body = [t for k, t in r.entries if k in MACHINE_KINDS]
        return "".join(line + "\n" for line in body)
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    out = [f"scenario {r.scenario}", "", "transcript:"]
    out += [f"  {t}" for k, t in r.entries if k in ("info", "utter")] or ["  (none)"]
    out += ["", "verdicts:"]
    out += [f"  {t}" for t in r.lines("verdict")] or ["  (none)"]
    out += [f"    note: {n}" for n in r.notes]
    out += ["", "flags:"]
    out += [f"  {t}" for t in r.lines("flag")] or ["  (none)"]
    passed, failed = r.expectation_counts
    out += ["", f"expectations: {passed} passed, {failed} failed"]
    for f in r.failures:
        out += ["  " + line for line in str(f).splitlines()]
    return "\n".join(out) + "\n"
