import pytest

from uncertlab.harness import (
    RunFlags,
    ScenarioRuntimeError,
    ScenarioSyntaxError,
    UnknownSystem,
    corpus_paths,
    emit_report,
    load_corpus,
    load_scenario,
    parse_scenario,
    run_many,
    run_scenario,
)
from uncertlab.harness.cli import main

CORPUS = {p.stem: p for p in corpus_paths()}
REQUIRED = {
    "mycin_flu", "conjunction_implicit", "categorical_query", "quentin_split", "maria_planets",
    "sarcasm_reviews", "bears_mammals", "per_class_confidence", "threshold_consumer",
    "learning_loop", "composite_priority", "rain_overconfidence",
}


def run_named(name: str, flags: RunFlags | None = None):
    return run_scenario(load_scenario(CORPUS[name]), flags)


def parse(text: str):
    return parse_scenario(text, "t.scn", "t")


# -- loading


def test_load_mycin():
    s = load_scenario(CORPUS["mycin_flu"])
    assert [b.kind for b in s.systems] == ["symbolic"]
    assert [d.verb for d in s.directives].count("query") == 2


def test_load_quentin():
    s = load_scenario(CORPUS["quentin_split"])
    verbs = [d.verb for d in s.directives]
    assert [b.kind for b in s.systems] == ["composition"]
    assert (verbs.count("observe"), verbs.count("ascribe")) == (1, 1)


def test_empty_file_has_no_systems(tmp_path):
    path = tmp_path / "empty.scn"
    path.write_text("")
    with pytest.raises(SyntaxError, match="no systems declared"):
        load_scenario(path)


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("system s kind=symbolic\n  cred p = 1.5\nend\n", 2),
        ("system s kind=symbolic\n  fact p\n", 1),
        ("system s kind=weird\nend\n", 1),
        ("system s kind=symbolic\nend\nquery s ? p &\n", 3),
        ("system s kind=symbolic\nend\nfrobnicate s\n", 3),
        ("system s kind=composition\nend\n", 1),
    ],
)
def test_syntax_errors_carry_the_line(text, lineno):
    with pytest.raises(ScenarioSyntaxError) as info:
        parse(text)
    assert info.value.lineno == lineno
    assert info.value.filename == "t.scn"


def test_directive_on_undeclared_system():
    with pytest.raises(UnknownSystem, match="t.scn:3"):
        parse("system s kind=symbolic\nend\nquery nobody ? p\n")


def test_dimension_mismatch_surfaces_at_load():
    text = "system n kind=network\n  layers 2 1\n  weights 1 2 3\n  thresholds 0\n  convention single p\nend\n"
    with pytest.raises(ScenarioSyntaxError, match="DimensionMismatch|weights"):
        parse(text)


# -- running


def test_systems_only_scenario_passes_silently():
    report = run_scenario(parse("system s kind=symbolic\n  cred p = 0.5\nend\n"))
    assert report.passed
    assert report.lines("utter") == []
    assert emit_report(report, "lines") == ""


def test_conjunction_report():
    assert "conj: cred (p & q) = 0.7200" in run_named("conjunction_implicit").lines()


def test_composite_priority_verdict():
    verdicts = run_named("composite_priority").lines("verdict")
    assert any(v.startswith("VERDICT robot ") and "subjective=no" in v for v in verdicts)


def test_rain_lines_report_has_the_flag():
    out = emit_report(run_named("rain_overconfidence"), "lines")
    assert "FLAG rain_net overconfident evidence=0.7000 verdict=true\n" in out


def test_maria_verdict():
    out = emit_report(run_named("maria_planets"), "lines")
    line = next(l for l in out.splitlines() if l.startswith("VERDICT maria ?x open: largest_planet(x) "))
    assert "subjective=yes kind=cat mode=explicit" in line


def test_lines_format_keeps_only_machine_lines():
    out = emit_report(run_named("mycin_flu"), "lines")
    assert out
    assert all(l.split(" ", 1)[0] in {"UTTER", "VERDICT", "FLAG", "EXPECT"} for l in out.splitlines())


def test_text_format_sections():
    text = emit_report(run_named("quentin_split"), "text")
    for heading in ("transcript:", "verdicts:", "flags:", "expectations: 2 passed, 0 failed"):
        assert heading in text


def test_failed_expectation_is_reported():
    report = run_scenario(parse("system s kind=symbolic\n  cred p = 0.5\nend\nquery s ? p\nexpect s: cred p = 0.9000\n"))
    assert not report.passed
    [failure] = report.failures
    assert failure.expected == "s: cred p = 0.9000"
    assert "s: cred p = 0.5000" in failure.actual
    assert report.lines("expect") == ["EXPECT fail s: cred p = 0.9000"]


def test_runtime_errors_carry_the_directive_line():
    text = "system s kind=symbolic\n  rule p(x) -> q(x)\nend\nascribe s ? p(a) & q(b) & r(c)\nobserve s input 1\n"
    with pytest.raises(ScenarioRuntimeError) as info:
        run_scenario(parse(text))
    assert info.value.lineno == 5


def test_depth_limit_flag():
    chain = "".join(f"  rule s{i}(x) -> s{i + 1}(x)\n" for i in range(80))
    text = f"system s kind=symbolic\n  fact s0(a)\n{chain}end\nquery s ? s80(a)\nexpect s: answer ? s80(a) = yes\n"
    with pytest.raises(ScenarioRuntimeError, match="DepthLimitExceeded"):
        run_scenario(parse(text))
    assert run_scenario(parse(text), RunFlags(depth_limit=100)).passed


def test_assert_threshold_flag_sets_the_default_policy():
    text = "system s kind=symbolic\n  cred p = 0.9\nend\nobserve s assert p\n"
    assert run_scenario(parse(text)).lines("utter") == ["UTTER s ASSERT p @ 0.9000"]
    assert run_scenario(parse(text), RunFlags(assert_threshold=0.8)).lines("utter") == ["UTTER s ASSERT p"]


def test_overconfidence_window_flag():
    flags = RunFlags(overconfidence_window=(0.0, 0.6))
    assert run_named("rain_overconfidence", flags).lines("flag") == []


# -- corpus properties


def test_corpus_is_complete_and_passes():
    assert REQUIRED <= set(CORPUS)
    for report in run_many(load_corpus()):
        assert report.passed, (report.scenario, [str(f) for f in report.failures])
        assert report.expectation_counts[0] > 0


def test_runs_are_deterministic():
    for path in corpus_paths():
        s = load_scenario(path)
        assert emit_report(run_scenario(s), "lines") == emit_report(run_scenario(s), "lines")


def test_parallel_runs_match_sequential_runs():
    scenarios = load_corpus()
    sequential = [emit_report(run_scenario(s), "text") for s in scenarios]
    parallel = [emit_report(r, "text") for r in run_many(scenarios, workers=8)]
    assert parallel == sequential


# -- command line


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(CORPUS["mycin_flu"]), "--format", "lines"]) == 0
    assert "EXPECT pass mycin: answer ? flu(a) = yes" in capsys.readouterr().out
    bad = tmp_path / "bad.scn"
    bad.write_text("system s kind=symbolic\n  cred p = 0.5\nend\nquery s ? p\nexpect s: cred p = 0.1000\n")
    assert main(["run", str(bad)]) == 1
    empty = tmp_path / "empty.scn"
    empty.write_text("")
    assert main(["run", str(empty)]) == 2
    assert "no systems declared" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.scn")]) == 2


def test_cli_corpus(capsys):
    assert main(["corpus", "--format", "lines"]) == 0
    out = capsys.readouterr().out
    assert "UTTER quentin ASSERT quentin_movie" in out
    assert "EXPECT fail" not in out


def test_cli_rejects_bad_flags():
    with pytest.raises(SystemExit):
        main(["run", "x.scn", "--overconfidence-window", "0.9,0.1"])
    with pytest.raises(SystemExit):
        main(["run", "x.scn", "--assert-threshold", "0"])
