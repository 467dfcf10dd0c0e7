"""Ascribing epistemic and subjective uncertainty to composed systems.

A system is a list of subsystems (knowledge bases or networks) under one
overarching policy that turns the subsystems' stances into behavior.
Subjective uncertainty is ascribed only when a cognitive-level candidate
state also plays the role of uncertainty in the whole system: it makes the
system hedge, it propagates coherently to the negation, and the policy
treats it differently from certainty.  A candidate that fails those probes
is not a realization of uncertainty at any level, so a level split always
yields ``subjective = "no"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .connectionist import (
    CredenceContent,
    Generalization,
    LabeledDataset,
    Network,
    OutOfScope,
    OutputConvention,
    QuestionContent,
    QuestionScope,
    TruthContent,
    data_uncertainty_measure,
    decode_output,
    forward,
    model_uncertainty_scan,
    pointwise_states,
)
from .lang import (
    Formula,
    Polar,
    Question,
    Term,
    Wh,
    complement,
    constants,
    match_instance,
    substitute,
    unparse,
)
from .symbolic import (
    Abstain,
    AssertionPolicy,
    Ask,
    FlatAssert,
    HedgedAssert,
    KnowledgeBase,
    Utterance,
    nonextreme,
    utter_credence,
)

ROLES = ("R1", "R2", "R3")
PROBE_CODES = {"pass": "p", "fail": "f", "not_applicable": "na"}
KIND_CODES = {"probabilistic": "prob", "categorical": "cat", "none": "none"}
HYPOTHETICAL = Term("hypothetical")


class MissingProbeInputs(LookupError):
    pass


Stimulus = tuple[tuple[float, ...], Union[Term, None]]


@dataclass(frozen=True)
class Stance:
    """A subsystem's current take on a question."""

    question: Question
    credence: float | None = None
    answer: str | None = None  # yes | no | open
    witnesses: tuple[Term, ...] = ()
    coded_question: bool = False


# -- subsystems -----------------------------------------------------------------

@dataclass
class SymbolicSubsystem:
    name: str
    kb: KnowledgeBase
    evidence: dict = field(default_factory=dict)

    def covers(self, q: Question) -> bool:
        return True

    def stance(self, q: Question, stimulus: Stimulus | None = None) -> Stance:
        if isinstance(q, Wh):
            verdict, witnesses = self.kb.answer_wh(q)
            return Stance(q, answer=verdict, witnesses=witnesses)
        r = self.kb.credence_of(q.body)
        if r is not None:
            return Stance(q, credence=r)
        return Stance(q, answer=self.kb.settles(q.body))


@dataclass
class NetworkSubsystem:
    name: str
    net: Network
    convention: OutputConvention
    scope: QuestionScope
    generalization: Generalization | None = None
    dataset: LabeledDataset | None = None
    evidence: dict = field(default_factory=dict)
    stimuli: list = field(default_factory=list)

    def covers(self, q: Question) -> bool:
        return self.scope.covers(q)

    def is_generalization(self, q: Question) -> bool:
        return self.generalization is not None and q == self.generalization.question

    def scan(self):
        return model_uncertainty_scan(self.net, self.convention, self.generalization, self.scope)

    def decode(self, stimulus: Stimulus):
        vec, subject = stimulus
        return decode_output(self.convention, forward(self.net, vec), subject)

    def stance(self, q: Question, stimulus: Stimulus | None = None) -> Stance | None:
        if not self.covers(q):
            return None
        if self.is_generalization(q):
            verdict = self.scan().verdict
            answer = {"encodes_all": "yes", "encodes_not_all": "no"}.get(verdict, "open")
            return Stance(q, answer=answer)
        candidates = [stimulus] if stimulus is not None else list(reversed(self.stimuli))
        for stim in candidates:
            s = content_stance(q, self.decode(stim))
            if s is not None:
                return s
        return None


Subsystem = Union[SymbolicSubsystem, NetworkSubsystem]


def content_stance(q: Question, content) -> Stance | None:
    """Stance on ``q`` carried by decoded network content, if any."""
    if isinstance(content, QuestionContent):
        if content.question == q:
            return Stance(q, answer="open", coded_question=True)
        return None
    if not isinstance(q, Polar):
        return None
    body = q.body
    if isinstance(content, TruthContent):
        answer = {"true": "yes", "false": "no", "neither": "open"}[content.verdict]
        if content.formula == body:
            return Stance(q, answer=answer)
        if complement(content.formula) == body:
            return Stance(q, answer={"yes": "no", "no": "yes"}.get(answer, "open"))
        return None
    for f, r in content.assignments:
        if f == body:
            return Stance(q, credence=r)
        if complement(f) == body:
            return Stance(q, credence=1.0 - r)
    return None


# -- policies -------------------------------------------------------------------

def _render_settled(stance: Stance) -> Utterance:
    q = stance.question
    if stance.answer == "yes":
        if isinstance(q, Wh):
            witness = stance.witnesses[0] if stance.witnesses else HYPOTHETICAL
            return FlatAssert(substitute(q.body, q.variable, witness))
        return FlatAssert(q.body)
    if stance.answer == "no":
        return FlatAssert(complement(q.body))
    if stance.coded_question or isinstance(q, Wh):
        return Ask(q)
    return Abstain(q)


@dataclass(frozen=True)
class Passthrough:
    """Report every stance as it is: nonextreme credences come out hedged."""

    def render(self, stance: Stance) -> Utterance | None:
        if stance.credence is not None:
            return utter_credence(stance.question.body, stance.credence, 1.0)
        return _render_settled(stance)


@dataclass(frozen=True)
class SymbolicAssertion:
    assertion: AssertionPolicy = AssertionPolicy()

    def render(self, stance: Stance) -> Utterance | None:
        if stance.credence is not None:
            return utter_credence(stance.question.body, stance.credence, self.assertion.assert_threshold)
        return _render_settled(stance)


@dataclass(frozen=True)
class ThresholdConsumer:
    """If the subsystem is more than ``cut`` confident that p, then p."""

    cut: float

    def __post_init__(self):
        if not 0.0 < self.cut < 1.0:
            raise ValueError("threshold_consumer cut must lie in (0, 1)")

    def render(self, stance: Stance) -> Utterance | None:
        if stance.credence is not None:
            body = stance.question.body
            if stance.credence > self.cut:
                return FlatAssert(body)
            if stance.credence < 1.0 - self.cut:
                return FlatAssert(complement(body))
            return Abstain(stance.question)
        return _render_settled(stance)


@dataclass(frozen=True)
class LearningLoop:
    """The network's outputs feed a delta-rule trainer and nothing else."""

    rate: float

    def render(self, stance: Stance) -> Utterance | None:
        return None


@dataclass(frozen=True)
class Arbiter:
    """Highest-priority subsystem with a stance speaks for the system."""

    priority: tuple[str, ...]

    def render(self, stance: Stance) -> Utterance | None:
        return Passthrough().render(stance)


Policy = Union[Passthrough, SymbolicAssertion, ThresholdConsumer, LearningLoop, Arbiter]


def behavior_descriptor(policy: Policy, utt: Utterance | None) -> str:
    """Coarse observable behavior, used to test whether a policy treats
    uncertain and certain stances differently."""
    if isinstance(policy, LearningLoop):
        # every output goes through the same weight update, whatever it decodes to
        return "delta_update"
    if utt is None:
        return "silent"
    if isinstance(utt, FlatAssert):
        return f"assert {unparse(utt.formula)}"
    return type(utt).__name__.lower()


@dataclass
class SystemComposition:
    """Subsystems under one overarching policy.

    Under an :class:`Arbiter` each subsystem keeps its own rendering policy
    (``sub_policies``, default passthrough) and the first subsystem in
    priority order holding a stance speaks.
    """

    name: str
    subsystems: list
    policy: Policy = field(default_factory=Passthrough)
    sub_policies: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [s.name for s in self.subsystems]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate subsystem names in {self.name}")
        if isinstance(self.policy, Arbiter):
            if sorted(self.policy.priority) != sorted(names):
                raise ValueError("arbiter priority must list every subsystem exactly once")
        elif len(self.subsystems) != 1:
            raise ValueError(f"{type(self.policy).__name__} composes exactly one subsystem")

    def sub(self, name: str) -> Subsystem:
        for s in self.subsystems:
            if s.name == name:
                return s
        raise KeyError(name)

    def ordered(self) -> list:
        if isinstance(self.policy, Arbiter):
            return [self.sub(n) for n in self.policy.priority]
        return list(self.subsystems)

    def policy_for(self, name: str) -> Policy:
        if isinstance(self.policy, Arbiter):
            return self.sub_policies.get(name, Passthrough())
        return self.policy

    def speaker(self, q: Question, stimulus: Stimulus | None = None,
                overrides: Mapping[str, Stance] | None = None) -> tuple[Subsystem, Stance] | None:
        overrides = overrides or {}
        for sub in self.ordered():
            s = overrides.get(sub.name)
            if s is None:
                s = sub.stance(q, stimulus)
            if s is not None:
                return sub, s
        return None

    def stance(self, q: Question, stimulus: Stimulus | None = None,
               overrides: Mapping[str, Stance] | None = None) -> Stance | None:
        found = self.speaker(q, stimulus, overrides)
        return None if found is None else found[1]

    def respond(self, q: Question, stimulus: Stimulus | None = None,
                overrides: Mapping[str, Stance] | None = None) -> Utterance | None:
        found = self.speaker(q, stimulus, overrides)
        if found is None:
            return None
        sub, s = found
        return self.policy_for(sub.name).render(s)

    def behavior(self, q: Question, stimulus: Stimulus | None = None,
                 overrides: Mapping[str, Stance] | None = None) -> str:
        found = self.speaker(q, stimulus, overrides)
        if found is None:
            return "silent"
        policy = self.policy_for(found[0].name)
        return behavior_descriptor(policy, policy.render(found[1]))


# -- traces and verdicts ------------------------------------------------------------

@dataclass
class Trace:
    events: list = field(default_factory=list)

    def append(self, stimulus: str, utterance: Utterance) -> None:
        self.events.append((stimulus, utterance))


@dataclass(frozen=True)
class SubReport:
    subsystem: str
    present: bool
    kind: str = "none"
    mode: str = "none"
    locus: str = "none"
    credence: float | None = None
    detail: str = ""
    in_position_to_answer: bool = False


@dataclass(frozen=True)
class CandidateReport:
    question: Question
    subreports: tuple[SubReport, ...]

    @property
    def present(self) -> bool:
        return any(s.present for s in self.subreports)

    @property
    def primary(self) -> SubReport | None:
        return next((s for s in self.subreports if s.present), None)


@dataclass(frozen=True)
class Probes:
    """Scenario-supplied role-probe stimuli.

    R1/R2 entries are either prompts (formulas or questions, for symbolic
    subsystems) or network stimuli ``(input vector, subject)``; R3 entries
    are ``(nonextreme credence, extreme credence)`` pairs.
    """

    r1: tuple = ()
    r2: tuple = ()
    r3: tuple = ()


@dataclass(frozen=True)
class AscriptionVerdict:
    question: Question
    epistemic: str
    subjective: str
    kind: str
    mode: str
    cognitive_candidate: str
    behavioral_reading: str
    level_split: str
    role_probes: Mapping[str, str]
    notes: tuple[str, ...] = ()
    second_solution_note: str = ""

    def line(self, system: str) -> str:
        probes = ",".join(f"{r}:{PROBE_CODES[self.role_probes[r]]}" for r in ROLES)
        return (
            f"VERDICT {system} {unparse(self.question)} epistemic={self.epistemic} "
            f"subjective={self.subjective} kind={KIND_CODES[self.kind]} mode={self.mode} "
            f"split={self.level_split} probes={probes}"
        )


def _concerns(pattern: Formula, f: Formula, var: Term | None = None) -> bool:
    if f == pattern or f == complement(pattern):
        return True
    if var is not None:
        return (match_instance(pattern, f, var) is not None
                or match_instance(pattern, complement(f), var) is not None)
    return False


def _network_candidates(sub: NetworkSubsystem, q: Question, stimuli) -> list:
    found = []
    for vec, subject in stimuli:
        for c in pointwise_states(sub.net, sub.convention, vec, subject):
            if c.kind == "categorical" and c.content == q:
                found.append(c)
            elif c.kind == "probabilistic" and isinstance(q, Polar):
                if c.content == q.body:
                    found.append(c)
                elif complement(c.content) == q.body:
                    found.append(type(c)(c.kind, q.body, 1.0 - c.credence, c.locus))
    return found


def cognitive_ascribe(sys: SystemComposition, q: Question) -> CandidateReport:
    reports = []
    covered = False
    for sub in sys.ordered():
        if isinstance(sub, SymbolicSubsystem):
            covered = True
            m = sub.kb.classify_mode(q)
            credence = m.credence
            if m.kind == "probabilistic" and credence is None and isinstance(q, Polar):
                credence = sub.kb.credence_of(q.body)
            detail = "stored interrogative" if q in sub.kb.open_questions else ""
            reports.append(SubReport(sub.name, m.mode != "none", m.kind, m.mode, "symbolic",
                                     credence, detail, m.in_position_to_answer))
            continue
        if not sub.covers(q):
            continue
        covered = True
        if sub.is_generalization(q):
            scan = sub.scan()
            present = scan.verdict == "distributively_uncertain"
            detail = f"scan={scan.verdict}"
            if scan.witnesses:
                detail += " witness=" + ",".join(t.name for t in scan.witnesses)
            reports.append(SubReport(sub.name, present, "categorical" if present else "none",
                                     "explicit" if present else "none", "distributive", None, detail))
            continue
        if not sub.stimuli:
            raise MissingProbeInputs(f"network {sub.name} has no probe inputs for {unparse(q)}")
        cands = _network_candidates(sub, q, sub.stimuli)
        if cands:
            c = cands[0]
            reports.append(SubReport(sub.name, True, c.kind, "explicit", "pointwise", c.credence))
        else:
            reports.append(SubReport(sub.name, False, locus="pointwise"))
    if not covered:
        raise OutOfScope(f"no subsystem of {sys.name} covers {unparse(q)}")
    return CandidateReport(q, tuple(reports))


def behavioral_ascribe(trace: Trace, q: Question) -> str:
    reading = "silent"
    var = q.variable if isinstance(q, Wh) else None
    for _, utt in trace.events:
        if isinstance(utt, (FlatAssert, HedgedAssert)):
            if not _concerns(q.body, utt.formula, var):
                continue
            reading = "not_uncertain" if isinstance(utt, FlatAssert) else "uncertain"
        elif utt.question == q or (isinstance(utt.question, Polar) and isinstance(q, Polar)
                                   and _concerns(q.body, utt.question.body)):
            reading = "uncertain"
    return reading


def detect_level_split(cog: CandidateReport, beh: str) -> str:
    return "yes" if cog.present and beh == "not_uncertain" else "no"


def _split_stimuli(entries) -> tuple[list, list]:
    prompts, vectors = [], []
    for e in entries:
        (vectors if isinstance(e, tuple) else prompts).append(e)
    return prompts, vectors


def _as_question(p) -> Question:
    return p if isinstance(p, (Polar, Wh)) else Polar(p)


def _net_stimuli(sys: SystemComposition, q: Question, explicit: list) -> list:
    """Network stimuli for a probe; None stands for 'no stimulus needed'."""
    nets = [s for s in sys.ordered() if isinstance(s, NetworkSubsystem) and s.covers(q)
            and not s.is_generalization(q)]
    if not nets:
        return [None]
    if explicit:
        return explicit
    pooled = [st for s in nets for st in s.stimuli]
    if not pooled:
        raise MissingProbeInputs(f"no network stimuli available to probe {unparse(q)}")
    return pooled


def _probe_r1(sys, q, report, probes) -> str:
    prompts, vectors = _split_stimuli(probes.r1)
    questions = [_as_question(p) for p in prompts] or [q]
    results = []
    for pq in questions:
        for stim in _net_stimuli(sys, pq, vectors):
            utt = sys.respond(pq, stim)
            if utt is None:
                continue
            results.append(isinstance(utt, (HedgedAssert, Ask, Abstain)))
    if not results:
        return "not_applicable"
    return "pass" if all(results) else "fail"


def _probe_r2(sys, q, report, probes) -> str:
    if isinstance(q, Wh):
        return "not_applicable"
    prompts, vectors = _split_stimuli(probes.r2)
    bodies = [(_as_question(p).body) for p in prompts if not isinstance(_as_question(p), Wh)] or [q.body]
    checks = []
    for body in bodies:
        pq = Polar(body)
        for sub in sys.ordered():
            rep = next((r for r in report.subreports if r.subsystem == sub.name and r.present), None)
            if rep is None:
                continue
            if isinstance(sub, SymbolicSubsystem):
                scratch = sub.kb.copy()
                if rep.kind == "probabilistic" and scratch.credence_of(body) is not None:
                    r = scratch.credence_of(body)
                    entry = scratch.decide_negation(body)
                    checks.append(abs(entry.credence - (1.0 - r)) <= 1e-12)
                else:
                    checks.append(scratch.settles(complement(body)) == "open")
            elif sub.is_generalization(pq):
                decoded = sub.scan().decoded
                checks.append(all(v in ("true", "false", "neither") for _, v in decoded))
            else:
                for stim in (vectors or sub.stimuli):
                    s_pos = sub.stance(pq, stim)
                    s_neg = sub.stance(Polar(complement(body)), stim)
                    if s_pos is None or s_neg is None or s_pos.coded_question:
                        continue
                    if s_pos.credence is not None:
                        checks.append(s_neg.credence is not None
                                      and abs(s_neg.credence - (1.0 - s_pos.credence)) <= 1e-12)
                    else:
                        flipped = {"yes": "no", "no": "yes"}.get(s_pos.answer, "open")
                        checks.append(s_neg.answer == flipped)
        # the whole system must not flatly assert both p and ~p
        for stim in _net_stimuli(sys, pq, vectors):
            u_pos = sys.respond(pq, stim)
            u_neg = sys.respond(Polar(complement(body)), stim)
            if isinstance(u_pos, FlatAssert) and isinstance(u_neg, FlatAssert):
                checks.append(u_pos.formula != complement(u_neg.formula))
            elif isinstance(u_pos, HedgedAssert) and isinstance(u_neg, HedgedAssert):
                checks.append(abs(u_pos.credence + u_neg.credence - 1.0) <= 1e-12)
    if not checks:
        return "not_applicable"
    return "pass" if all(checks) else "fail"


def _probe_r3(sys, q, report, probes) -> str:
    outcomes = []
    for rep in report.subreports:
        if not rep.present:
            continue
        if rep.kind == "probabilistic" and rep.credence is not None:
            pairs = list(probes.r3) or [(rep.credence, 1.0 if rep.credence >= 0.5 else 0.0)]
            for soft, hard in pairs:
                if not nonextreme(soft) or nonextreme(hard) or (soft - 0.5) * (hard - 0.5) < 0:
                    raise ValueError(f"R3 needs a nonextreme and a same-direction extreme credence, got {soft}, {hard}")
                a = sys.behavior(q, overrides={rep.subsystem: Stance(q, credence=soft)})
                b = sys.behavior(q, overrides={rep.subsystem: Stance(q, credence=hard)})
                outcomes.append(a != b)
        else:
            coded = rep.locus == "pointwise"
            open_ = Stance(q, answer="open", coded_question=coded)
            settled = Stance(q, answer="yes", witnesses=(HYPOTHETICAL,) if isinstance(q, Wh) else ())
            a = sys.behavior(q, overrides={rep.subsystem: open_})
            b = sys.behavior(q, overrides={rep.subsystem: settled})
            outcomes.append(a != b)
    if not outcomes:
        return "not_applicable"
    return "pass" if any(outcomes) else "fail"


def role_check(sys: SystemComposition, q: Question, probes: Probes | None = None,
               report: CandidateReport | None = None) -> dict[str, str]:
    """Run the hedging (R1), propagation (R2) and specificity (R3) probes."""
    probes = probes or Probes()
    report = report or cognitive_ascribe(sys, q)
    if not report.present:
        return {r: "not_applicable" for r in ROLES}
    return {
        "R1": _probe_r1(sys, q, report, probes),
        "R2": _probe_r2(sys, q, report, probes),
        "R3": _probe_r3(sys, q, report, probes),
    }


def _sub_epistemic(sub: Subsystem, q: Question, evidence: Mapping) -> bool:
    body = q.body
    r = evidence.get(body, sub.evidence.get(body))
    if r is not None and nonextreme(r):
        return True
    if isinstance(sub, SymbolicSubsystem):
        base = sub.kb.categorical_base()
        if isinstance(q, Wh):
            return base.answer_wh(q)[0] == "open"
        return base.resolve_query(q) == "open"
    if sub.dataset is not None:
        relevant = constants(body)
        for item in data_uncertainty_measure(sub.dataset).items:
            if item.subject in relevant and item.flagged:
                return True
    if sub.is_generalization(q):
        return sub.scan().verdict == "distributively_uncertain"
    return False


def epistemic_ascribe(sys: SystemComposition, q: Question, evidence: Mapping | None = None) -> str:
    """Whether the information the system holds leaves q unsettled.

    Computed from facts, rules, training data, weights and declared evidence
    only; never from credal entries, policies or traces.
    """
    evidence = evidence or {}
    covering = [s for s in sys.ordered() if s.covers(q)]
    if not covering:
        return "no"
    return "yes" if all(_sub_epistemic(s, q, evidence) for s in covering) else "no"


def first_solution_verdict(sys: SystemComposition, q: Question, trace: Trace | None = None,
                           probes: Probes | None = None, evidence: Mapping | None = None) -> AscriptionVerdict:
    trace = trace or Trace()
    report = cognitive_ascribe(sys, q)
    results = role_check(sys, q, probes, report)
    beh = behavioral_ascribe(trace, q)
    split = detect_level_split(report, beh)
    subjective = report.present and "fail" not in results.values() and split == "no"
    primary = report.primary
    notes = []
    second = ""
    if primary is not None:
        if primary.credence is not None:
            notes.append(f"candidate credence {primary.credence:.4f} in {primary.subsystem}")
        if primary.detail:
            notes.append(f"{primary.subsystem}: {primary.detail}")
    for rep in report.subreports:
        if rep.in_position_to_answer:
            notes.append(f"{rep.subsystem}: stored question is answerable now (implicit answer)")
    if report.present and not subjective:
        failed = [r for r, v in results.items() if v == "fail"]
        if split == "yes":
            notes.append("candidate state plays no uncertainty role in the whole system, so none is ascribed at any level")
        if failed:
            notes.append("role probes failed: " + ",".join(failed))
        second = ("a lenient reading would count the candidate as uncertainty "
                  "that the surrounding system ignores")
    epistemic = epistemic_ascribe(sys, q, evidence)
    return AscriptionVerdict(
        question=q,
        epistemic=epistemic,
        subjective="yes" if subjective else "no",
        kind=primary.kind if subjective else "none",
        mode=primary.mode if subjective else "none",
        cognitive_candidate="present" if report.present else "absent",
        behavioral_reading=beh,
        level_split=split,
        role_probes=results,
        notes=tuple(notes),
        second_solution_note=second,
    )


def composite_arbiter_eval(sys: SystemComposition, q: Question, trace: Trace | None = None,
                           probes: Probes | None = None) -> tuple[Utterance | None, AscriptionVerdict]:
    if not isinstance(sys.policy, Arbiter):
        raise ValueError(f"{sys.name} is not arbitrated")
    if len(sys.subsystems) < 2:
        raise ValueError("an arbiter needs at least two subsystems")
    return sys.respond(q), first_solution_verdict(sys, q, trace, probes)
