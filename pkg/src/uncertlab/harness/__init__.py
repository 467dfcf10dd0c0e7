"""Scenario files, the bundled corpus and the ``lab`` command."""

from importlib import resources
from pathlib import Path

from .dsl import Scenario, ScenarioSyntaxError, UnknownSystem, load_scenario, parse_scenario
from .runner import (
    ExpectationFailed,
    Report,
    RunFlags,
    ScenarioRuntimeError,
    emit_report,
    run_many,
    run_scenario,
)


def corpus_paths() -> list[Path]:
    root = resources.files("uncertlab") / "corpus"
    return sorted((Path(str(p)) for p in root.iterdir() if p.name.endswith(".scn")), key=lambda p: p.name)


def load_corpus() -> list[Scenario]:
    return [load_scenario(p) for p in corpus_paths()]


__all__ = [
    "ExpectationFailed",
    "Report",
    "RunFlags",
    "Scenario",
    "ScenarioRuntimeError",
    "ScenarioSyntaxError",
    "UnknownSystem",
    "corpus_paths",
    "emit_report",
    "load_corpus",
    "load_scenario",
    "parse_scenario",
    "run_many",
    "run_scenario",
]
