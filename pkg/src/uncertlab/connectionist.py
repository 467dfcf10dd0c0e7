"""Minimal feedforward networks and the conventions that give their output
vectors content.

Networks are immutable values.  Unit ``j`` of a non-input layer takes the
weighted sum of the previous layer's activations; a step unit fires iff
that sum reaches its threshold, a logistic unit outputs
``1 / (1 + exp(-(sum - threshold)))``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .lang import (
    Atom,
    Formula,
    Not,
    Or,
    Polar,
    Question,
    Term,
    Wh,
    complement,
    match_instance,
    substitute,
    unparse,
)
from .symbolic import nonextreme

HIGH = 0.75
LOW = 0.25
_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


class DimensionMismatch(ValueError):
    pass


class UndecodableVector(ValueError):
    pass


class OutOfScope(LookupError):
    pass


class UnsupportedTopology(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Network:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    thresholds: tuple[np.ndarray, ...]
    activation: str = "step"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise DimensionMismatch(f"need at least two positive layer sizes, got {sizes}")
        if self.activation not in ("step", "logistic"):
            raise ValueError(f"unknown activation {self.activation!r}")
        weights = tuple(_frozen(w) for w in self.weights)
        thresholds = tuple(_frozen(t) for t in self.thresholds)
        if len(weights) != len(sizes) - 1 or len(thresholds) != len(sizes) - 1:
            raise DimensionMismatch("one weight matrix and threshold vector per non-input layer")
        for k, (w, t) in enumerate(zip(weights, thresholds), start=1):
            if w.shape != (sizes[k], sizes[k - 1]):
                raise DimensionMismatch(
                    f"layer {k} weights have shape {w.shape}, expected {(sizes[k], sizes[k - 1])}"
                )
            if t.shape != (sizes[k],):
                raise DimensionMismatch(f"layer {k} thresholds have shape {t.shape}, expected {(sizes[k],)}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "thresholds", thresholds)

    @classmethod
    def from_flat(cls, layer_sizes, flat_weights, thresholds, activation="step") -> "Network":
        """Build from row-major weight lists, one per non-input layer."""
        sizes = list(layer_sizes)
        mats = []
        for k, flat in enumerate(flat_weights, start=1):
            if k >= len(sizes) or len(flat) != sizes[k] * sizes[k - 1]:
                raise DimensionMismatch(f"layer {k}: {len(flat)} weights do not fit layer sizes {sizes}")
            mats.append(np.reshape(np.array(flat, dtype=float), (sizes[k], sizes[k - 1])))
        return cls(tuple(sizes), tuple(mats), tuple(thresholds), activation)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and self.activation == other.activation
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.thresholds, other.thresholds))
        )

    __hash__ = None


def _activate(total: np.ndarray, thresholds: np.ndarray, activation: str) -> np.ndarray:
    if activation == "step":
        return (total >= thresholds).astype(float)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-(total - thresholds)))
    # keep logistic outputs strictly inside (0, 1)
    return np.clip(out, _TINY, _BELOW_ONE)


def forward(net: Network, x: Sequence[float]) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (net.n_inputs,):
        raise DimensionMismatch(f"input has shape {a.shape}, network expects {net.n_inputs} inputs")
    for w, t in zip(net.weights, net.thresholds):
        a = _activate(w @ a, t, net.activation)
    return a


# -- output conventions -----------------------------------------------------------

@dataclass(frozen=True)
class PairConvention:
    """Two outputs: <1,1> topic true, <1,0> topic false, <0,1>/<0,0> neither."""

    topic: Formula
    arity = 2


@dataclass(frozen=True)
class SingleConvention:
    topic: Formula
    third_value: float | None = None
    arity = 1


@dataclass(frozen=True)
class ConfidenceSuffix:
    """Binary prefix selects a formula; the last element is the credence in it."""

    coding: Mapping[tuple[int, ...], Formula]

    def __post_init__(self):
        lengths = {len(k) for k in self.coding}
        if len(lengths) != 1:
            raise DimensionMismatch("confidence_suffix prefixes must share one length")

    @property
    def arity(self) -> int:
        return len(next(iter(self.coding))) + 1


@dataclass(frozen=True)
class PerClass:
    labels: tuple[Formula, ...]

    @property
    def arity(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class QuestionCode:
    coding: Mapping[tuple[int, ...], Question]

    def __post_init__(self):
        if len({len(k) for k in self.coding}) != 1:
            raise DimensionMismatch("question_code vectors must share one length")

    @property
    def arity(self) -> int:
        return len(next(iter(self.coding)))


OutputConvention = Union[PairConvention, SingleConvention, ConfidenceSuffix, PerClass, QuestionCode]


def check_arity(net: Network, conv: OutputConvention) -> None:
    if conv.arity != net.n_outputs:
        raise DimensionMismatch(
            f"{type(conv).__name__} needs {conv.arity} outputs, network has {net.n_outputs}"
        )


@dataclass(frozen=True)
class TruthContent:
    formula: Formula
    verdict: str  # true | false | neither


@dataclass(frozen=True)
class CredenceContent:
    assignments: tuple[tuple[Formula, float], ...]


@dataclass(frozen=True)
class QuestionContent:
    question: Question


Content = Union[TruthContent, CredenceContent, QuestionContent]


def _bit(v: float) -> int | None:
    if not 0.0 <= v <= 1.0:
        raise UndecodableVector(f"component {v} outside [0, 1]")
    if v >= HIGH:
        return 1
    if v <= LOW:
        return 0
    return None


def _bits(values: Sequence[float]) -> tuple[int, ...] | None:
    bits = tuple(_bit(float(v)) for v in values)
    return None if None in bits else bits


def _subject(f: Formula, subject: Term | None) -> Formula:
    if subject is None:
        return f
    return substitute(f, Term("x"), subject)


def decode_output(conv: OutputConvention, out: Sequence[float], subject: Term | None = None) -> Content:
    """Content of an output vector under a convention.

    ``subject`` names the individual the input presented; it replaces the
    variable x in schematic topics such as ``mammal(x)``.
    """
    out = [float(v) for v in out]
    if len(out) != conv.arity:
        raise DimensionMismatch(f"vector of length {len(out)} for a convention of arity {conv.arity}")
    if isinstance(conv, PairConvention):
        topic = _subject(conv.topic, subject)
        bits = _bits(out)
        if bits == (1, 1):
            return TruthContent(topic, "true")
        if bits == (1, 0):
            return TruthContent(topic, "false")
        return TruthContent(topic, "neither")
    if isinstance(conv, SingleConvention):
        topic = _subject(conv.topic, subject)
        v = out[0]
        if conv.third_value is not None and v == conv.third_value:
            return TruthContent(topic, "neither")
        b = _bit(v)
        if b is None:
            if conv.third_value is None:
                raise UndecodableVector(f"<{v}> is neither 1 nor 0 and no third value is declared")
            return TruthContent(topic, "neither")
        return TruthContent(topic, "true" if b else "false")
    if isinstance(conv, ConfidenceSuffix):
        prefix = _bits(out[:-1])
        if prefix is None or prefix not in conv.coding:
            raise UndecodableVector(f"prefix {out[:-1]} has no coded proposition")
        if not 0.0 <= out[-1] <= 1.0:
            raise UndecodableVector(f"credence {out[-1]} outside [0, 1]")
        return CredenceContent(((_subject(conv.coding[prefix], subject), out[-1]),))
    if isinstance(conv, PerClass):
        if any(not 0.0 <= v <= 1.0 for v in out):
            raise UndecodableVector(f"per-class activations {out} outside [0, 1]")
        return CredenceContent(tuple((_subject(f, subject), v) for f, v in zip(conv.labels, out)))
    if isinstance(conv, QuestionCode):
        bits = _bits(out)
        if bits is None or bits not in conv.coding:
            raise UndecodableVector(f"{out} codes no question")
        return QuestionContent(conv.coding[bits])
    raise TypeError(f"unknown convention {conv!r}")


def decodable_contents(conv: OutputConvention) -> list[Formula | Question]:
    if isinstance(conv, (PairConvention, SingleConvention)):
        return [conv.topic]
    if isinstance(conv, ConfidenceSuffix):
        return list(conv.coding.values())
    if isinstance(conv, PerClass):
        return list(conv.labels)
    return list(conv.coding.values())


# -- scope, data, generalizations ----------------------------------------------------

@dataclass(frozen=True)
class QuestionScope:
    """Questions a network is designed to decide.  A polar question mentioning
    the variable x stands for all of its instances."""

    questions: frozenset = frozenset()

    @classmethod
    def for_convention(cls, conv: OutputConvention, extra: Iterable[Question] = ()) -> "QuestionScope":
        qs = set(extra)
        for c in decodable_contents(conv):
            qs.add(c if isinstance(c, (Polar, Wh)) else Polar(c))
        return cls(frozenset(qs))

    def covers(self, q: Question) -> bool:
        if q in self.questions:
            return True
        if not isinstance(q, Polar):
            return False
        x = Term("x")
        for s in self.questions:
            if not isinstance(s, Polar):
                continue
            for body in (q.body, complement(q.body)):
                if body == s.body or match_instance(s.body, body, x) is not None:
                    return True
        return False


@dataclass(frozen=True)
class LabeledItem:
    subject: Term
    votes: Counter
    input: tuple[float, ...] = ()

    def __post_init__(self):
        if sum(self.votes.values()) < 1:
            raise ValueError(f"item {self.subject} has no votes")


@dataclass(frozen=True)
class LabeledDataset:
    items: tuple[LabeledItem, ...]


@dataclass(frozen=True)
class ItemAgreement:
    subject: Term
    modal_label: str
    agreement: float
    flagged: bool


@dataclass(frozen=True)
class DataReport:
    items: tuple[ItemAgreement, ...]
    aggregate: float

    def for_subject(self, subject: Term) -> list[ItemAgreement]:
        return [i for i in self.items if i.subject == subject]


def data_uncertainty_measure(ds: LabeledDataset) -> DataReport:
    rows = []
    for item in ds.items:
        label, count = max(sorted(item.votes.items()), key=lambda kv: kv[1])
        agreement = count / sum(item.votes.values())
        rows.append(ItemAgreement(item.subject, label, agreement, agreement < 1.0))
    aggregate = sum(r.flagged for r in rows) / len(rows) if rows else 0.0
    return DataReport(tuple(rows), aggregate)


@dataclass(frozen=True)
class Generalization:
    """All F are G, presented through named F-instances."""

    antecedent: str
    consequent: str
    instances: tuple[tuple[Term, tuple[float, ...]], ...] = ()

    @property
    def question(self) -> Polar:
        x = (Term("x"),)
        return Polar(Or(Not(Atom(self.antecedent, x)), Atom(self.consequent, x)))


@dataclass(frozen=True)
class ScanResult:
    verdict: str  # encodes_all | encodes_not_all | distributively_uncertain
    witnesses: tuple[Term, ...] = ()  # instances decoding neither
    falsifiers: tuple[Term, ...] = ()  # instances decoding false
    decoded: tuple[tuple[Term, str], ...] = ()


def _verdict_convention(conv: OutputConvention) -> None:
    if not isinstance(conv, (PairConvention, SingleConvention)):
        raise ValueError(f"{type(conv).__name__} does not yield true/false/neither verdicts")


def model_uncertainty_scan(
    net: Network, conv: OutputConvention, g: Generalization, scope: QuestionScope
) -> ScanResult:
    _verdict_convention(conv)
    if not scope.covers(g.question):
        raise OutOfScope(f"{unparse(g.question)} is not among the questions the network decides")
    if not g.instances:
        raise ValueError("generalization has no instances to scan")
    memo: dict[tuple[float, ...], np.ndarray] = {}
    decoded = []
    for subject, vec in g.instances:
        key = tuple(vec)
        if key not in memo:
            memo[key] = forward(net, vec)
        content = decode_output(conv, memo[key], subject)
        decoded.append((subject, content.verdict))
    falsifiers = tuple(s for s, v in decoded if v == "false")
    witnesses = tuple(s for s, v in decoded if v == "neither")
    if falsifiers:
        verdict = "encodes_not_all"
    elif witnesses:
        verdict = "distributively_uncertain"
    else:
        verdict = "encodes_all"
    return ScanResult(verdict, witnesses, falsifiers, tuple(decoded))


@dataclass(frozen=True)
class Candidate:
    """A candidate uncertainty state; not yet an ascription."""

    kind: str  # probabilistic | categorical
    content: Formula | Question
    credence: float | None = None
    locus: str = "pointwise"


def pointwise_states(
    net: Network, conv: OutputConvention, x: Sequence[float], subject: Term | None = None
) -> list[Candidate]:
    content = decode_output(conv, forward(net, x), subject)
    if isinstance(content, CredenceContent):
        return [Candidate("probabilistic", f, r) for f, r in content.assignments if nonextreme(r)]
    if isinstance(content, QuestionContent):
        return [Candidate("categorical", content.question)]
    return []


def delta_update(net: Network, x: Sequence[float], desired: Sequence[float], rate: float) -> Network:
    """One delta-rule step on a single-layer logistic network.

    The update depends only on the numbers (input, actual, desired), never
    on what the output vector decodes to.
    """
    if len(net.layer_sizes) != 2:
        raise UnsupportedTopology("delta rule needs exactly one non-input layer")
    if net.activation != "logistic":
        raise UnsupportedTopology("delta rule needs logistic units")
    a_in = np.asarray(x, dtype=float)
    d = np.asarray(desired, dtype=float)
    if d.shape != (net.n_outputs,):
        raise DimensionMismatch(f"desired vector has shape {d.shape}, expected {(net.n_outputs,)}")
    actual = forward(net, a_in)
    delta = (d - actual) * actual * (1.0 - actual)
    w = net.weights[0] + rate * np.outer(delta, a_in)
    t = net.thresholds[0] - rate * delta
    return Network(net.layer_sizes, (w,), (t,), net.activation)


def desired_true(conv: OutputConvention) -> tuple[float, ...]:
    _verdict_convention(conv)
    return (1.0, 1.0) if isinstance(conv, PairConvention) else (1.0,)


@dataclass(frozen=True)
class OverconfidenceFlag:
    input: tuple[float, ...]
    formula: Formula
    evidence: float
    verdict: str
    message: str = "epistemic uncertainty without subjective uncertainty"


def overconfidence_audit(
    net: Network,
    conv: OutputConvention,
    probe_set: Iterable[tuple[Sequence[float], float]],
    window: tuple[float, float] = (0.05, 0.95),
    subject: Term | None = None,
) -> list[OverconfidenceFlag]:
    _verdict_convention(conv)
    lo, hi = window
    flags = []
    for x, evidence in probe_set:
        content = decode_output(conv, forward(net, x), subject)
        if content.verdict in ("true", "false") and lo < evidence < hi:
            flags.append(OverconfidenceFlag(tuple(float(v) for v in x), content.formula, evidence, content.verdict))
    return flags
