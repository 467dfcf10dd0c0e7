from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uncertlab.connectionist import (
    Candidate,
    ConfidenceSuffix,
    CredenceContent,
    DimensionMismatch,
    Generalization,
    LabeledDataset,
    LabeledItem,
    Network,
    OutOfScope,
    PairConvention,
    PerClass,
    QuestionCode,
    QuestionContent,
    QuestionScope,
    SingleConvention,
    TruthContent,
    UndecodableVector,
    UnsupportedTopology,
    check_arity,
    data_uncertainty_measure,
    decode_output,
    delta_update,
    forward,
    model_uncertainty_scan,
    overconfidence_audit,
    pointwise_states,
)
from uncertlab.lang import Term, atom, parse_formula, parse_question

RAIN = atom("rain_tomorrow")
MAMMAL = parse_formula("mammal(x)")
BEAR_INPUTS = [(1, 1, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 0, 0)]


def rain_net() -> Network:
    return Network.from_flat((1, 1), [[1.0]], [[0.6]], "step")


def bears_net() -> Network:
    return Network.from_flat((3, 2), [[3, 3, 3, 1, 2, 2]], [[1, 1]], "logistic")


def bears_generalization() -> Generalization:
    return Generalization("bear", "mammal", tuple((Term(f"b{i + 1}"), v) for i, v in enumerate(BEAR_INPUTS)))


def scope_for(conv, g):
    return QuestionScope.for_convention(conv, [g.question])


# -- forward


def test_rain_unit_fires_at_and_above_threshold():
    assert forward(rain_net(), [0.7]).tolist() == [1.0]
    assert forward(rain_net(), [0.6]).tolist() == [1.0]
    assert forward(rain_net(), [0.5]).tolist() == [0.0]


def test_zero_logistic_net_outputs_one_half():
    net = Network.from_flat((3, 2), [[0] * 6], [[0, 0]], "logistic")
    assert forward(net, [5, -2, 9]).tolist() == [0.5, 0.5]


def test_shape_checks():
    with pytest.raises(DimensionMismatch):
        Network.from_flat((2, 1), [[1, 2, 3]], [[0]])
    with pytest.raises(DimensionMismatch):
        forward(rain_net(), [1, 2])
    with pytest.raises(DimensionMismatch):
        check_arity(rain_net(), PairConvention(MAMMAL))


def test_networks_are_immutable():
    net = bears_net()
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 9.0


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_forward_is_deterministic_and_bounded(x, w):
    logistic = Network.from_flat((3, 2), [w], [[0.3, -0.3]], "logistic")
    a, b = forward(logistic, x), forward(logistic, x)
    assert a.tobytes() == b.tobytes()
    assert np.all((a > 0) & (a < 1))
    step = Network.from_flat((3, 2), [w], [[0.3, -0.3]], "step")
    assert set(forward(step, x).tolist()) <= {0.0, 1.0}


# -- decoding


def test_pair_convention_readings():
    conv = PairConvention(atom("mammal", "b1"))
    assert decode_output(conv, [1, 1]).verdict == "true"
    assert decode_output(conv, [1, 0]).verdict == "false"
    assert decode_output(conv, [0, 1]).verdict == "neither"
    assert decode_output(conv, [0, 0]).verdict == "neither"
    assert decode_output(conv, [0.9, 0.5]).verdict == "neither"


def test_schematic_topic_takes_the_subject():
    content = decode_output(PairConvention(MAMMAL), [1, 1], Term("b3"))
    assert content == TruthContent(atom("mammal", "b3"), "true")


def test_confidence_suffix_reads_credence():
    conv = ConfidenceSuffix({(1, 0): atom("p"), (0, 1): atom("q")})
    assert decode_output(conv, [1, 0, 0.6]) == CredenceContent(((atom("p"), 0.6),))
    with pytest.raises(UndecodableVector):
        decode_output(conv, [1, 1, 0.6])


def test_per_class_credences_are_raw():
    labels = tuple(parse_formula(f) for f in ("bear(x0)", "zebra(x0)", "lion(x0)"))
    content = decode_output(PerClass(labels), [0.2, 0.1, 0.4])
    assert dict(content.assignments) == {labels[0]: 0.2, labels[1]: 0.1, labels[2]: 0.4}


def test_single_convention_needs_a_third_value_for_neither():
    assert decode_output(SingleConvention(RAIN), [1]).verdict == "true"
    with pytest.raises(UndecodableVector):
        decode_output(SingleConvention(RAIN), [0.5])
    assert decode_output(SingleConvention(RAIN, 0.5), [0.5]).verdict == "neither"


def test_question_code():
    q = parse_question("?x open: largest_planet(x)")
    conv = QuestionCode({(1, 0): q})
    assert decode_output(conv, [1, 0]) == QuestionContent(q)
    with pytest.raises(UndecodableVector):
        decode_output(conv, [0, 1])


@given(st.floats(0, 1), st.floats(0, 1))
def test_pair_outputs_never_decode_both_ways(a, b):
    assert decode_output(PairConvention(MAMMAL), [a, b]).verdict in {"true", "false", "neither"}


# -- scans


def test_bears_net_is_distributively_uncertain():
    g = bears_generalization()
    conv = PairConvention(MAMMAL)
    result = model_uncertainty_scan(bears_net(), conv, g, scope_for(conv, g))
    assert result.verdict == "distributively_uncertain"
    assert result.witnesses == (Term("b5"),)
    assert result.falsifiers == ()


def test_all_true_encodes_the_generalization():
    g = bears_generalization()
    conv = PairConvention(MAMMAL)
    net = Network.from_flat((3, 2), [[5] * 6], [[0, 0]], "logistic")
    assert model_uncertainty_scan(net, conv, g, scope_for(conv, g)).verdict == "encodes_all"


def test_one_false_instance_encodes_not_all():
    g = bears_generalization()
    conv = PairConvention(MAMMAL)
    # b5 = <1,0,0> reaches the first unit but not the second
    net = Network.from_flat((3, 2), [[5, 5, 5, 0, 5, 5]], [[1, 2]], "logistic")
    result = model_uncertainty_scan(net, conv, g, scope_for(conv, g))
    assert result.verdict == "encodes_not_all"
    assert Term("b5") in result.falsifiers


def test_scan_outside_scope():
    g = bears_generalization()
    with pytest.raises(OutOfScope):
        model_uncertainty_scan(bears_net(), PairConvention(MAMMAL), g, QuestionScope())


def _brute_force_scan(net, conv, g):
    verdicts = []
    for subject, vec in g.instances:
        out = [1 / (1 + np.exp(-(sum(w * v for w, v in zip(row, vec)) - t)))
               for row, t in zip(net.weights[0].tolist(), net.thresholds[0].tolist())]
        verdicts.append(decode_output(conv, out, subject).verdict)
    if "false" in verdicts:
        return "encodes_not_all"
    return "distributively_uncertain" if "neither" in verdicts else "encodes_all"


@settings(max_examples=100)
@given(st.lists(st.floats(-4, 4), min_size=6, max_size=6), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_scan_trichotomy_matches_brute_force(w, t):
    net = Network.from_flat((3, 2), [w], [t], "logistic")
    g = bears_generalization()
    conv = PairConvention(MAMMAL)
    result = model_uncertainty_scan(net, conv, g, scope_for(conv, g))
    assert result.verdict == _brute_force_scan(net, conv, g)
    if result.verdict == "distributively_uncertain":
        assert result.witnesses
        assert all(dict(result.decoded)[s] == "neither" for s in result.witnesses)


# -- data uncertainty


def test_labeler_agreement():
    ds = LabeledDataset((
        LabeledItem(Term("great_movie"), Counter(sincere=5)),
        LabeledItem(Term("thanks_a_lot"), Counter(sincere=3, sarcastic=2)),
        LabeledItem(Term("meh"), Counter(sarcastic=1)),
    ))
    report = data_uncertainty_measure(ds)
    rows = {r.subject.name: r for r in report.items}
    assert (rows["great_movie"].agreement, rows["great_movie"].flagged) == (1.0, False)
    assert (rows["thanks_a_lot"].agreement, rows["thanks_a_lot"].flagged) == (0.6, True)
    assert rows["thanks_a_lot"].modal_label == "sincere"
    assert rows["meh"].agreement == 1.0
    assert report.aggregate == pytest.approx(1 / 3)


# -- pointwise candidates


def test_pointwise_candidates():
    p = atom("p")
    suffix = Network.from_flat((1, 2), [[10, np.log(17 / 3)]], [[0, 0]], "logistic")
    [c] = pointwise_states(suffix, ConfidenceSuffix({(1,): p}), [1])
    assert (c.kind, c.content) == ("probabilistic", p)
    assert c.credence == pytest.approx(0.85, abs=1e-12)
    q = parse_question("? flu(a)")
    coder = Network.from_flat((1, 2), [[1, 0]], [[0.5, 0.5]], "step")
    assert pointwise_states(coder, QuestionCode({(1, 0): q}), [1]) == [Candidate("categorical", q)]
    pair = Network.from_flat((1, 2), [[1, 1]], [[0.5, 0.5]], "step")
    assert pointwise_states(pair, PairConvention(MAMMAL), [1]) == []


# -- learning


def test_delta_update_fixed_points():
    net = bears_net()
    x = BEAR_INPUTS[4]
    assert delta_update(net, x, forward(net, x), 0.7) == net
    assert delta_update(net, x, (1, 1), 0.0) == net


def test_delta_update_reduces_error():
    net = bears_net()
    x, d = BEAR_INPUTS[4], np.array([1.0, 1.0])
    before = np.sum((d - forward(net, x)) ** 2)
    after = np.sum((d - forward(delta_update(net, x, d, 1.0), x)) ** 2)
    assert after < before


def test_delta_update_topology():
    with pytest.raises(UnsupportedTopology):
        delta_update(rain_net(), [0.7], [1], 0.1)
    deep = Network.from_flat((1, 1, 1), [[1], [1]], [[0], [0]], "logistic")
    with pytest.raises(UnsupportedTopology):
        delta_update(deep, [1], [1], 0.1)


@given(
    st.lists(st.floats(-3, 3), min_size=6, max_size=6),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
    st.lists(st.floats(0, 1), min_size=2, max_size=2),
    st.floats(0, 2),
)
def test_delta_rule_depends_only_on_the_numbers(w, x, d, rate):
    net = Network.from_flat((3, 2), [w], [[0.2, -0.1]], "logistic")
    updated = delta_update(net, x, d, rate)
    a = forward(net, x)
    delta = (np.array(d) - a) * a * (1 - a)
    np.testing.assert_allclose(updated.weights[0] - net.weights[0], rate * np.outer(delta, x), atol=1e-12)
    np.testing.assert_allclose(net.thresholds[0] - updated.thresholds[0], rate * delta, atol=1e-12)
    # same numbers, different reading of the outputs: same change
    twin = delta_update(Network.from_flat((3, 2), [w], [[0.2, -0.1]], "logistic"), x, d, rate)
    assert twin == updated


# -- audit


def test_overconfidence_audit():
    flags = overconfidence_audit(rain_net(), SingleConvention(RAIN), [([0.7], 0.7), ([0.99], 0.99), ([0.5], 0.5)])
    assert [(f.input, f.verdict) for f in flags] == [((0.7,), "true"), ((0.5,), "false")]
    assert flags[0].evidence == 0.7


def test_audit_window_is_configurable():
    flags = overconfidence_audit(rain_net(), SingleConvention(RAIN), [([0.7], 0.7)], window=(0.0, 0.6))
    assert flags == []
