"""The bundled productivity product line and its probabilistic controller."""

from __future__ import annotations

from importlib import resources

from ..analysis import DEFAULT, Options, check
from ..vardsl.elaborate import System, load_system

MODEL_FILE = "productivity.fdsl"

# The initial combination the money query is read at.
START = frozenset({"s", "o", "r"})


def model_text() -> str:
    return resources.files("featcheck").joinpath("models").joinpath(MODEL_FILE).read_text(encoding="utf-8")


def load_productivity() -> System:
    return load_system(model_text())


def expected_money(options: Options = DEFAULT) -> float:
    """Minimal expected purchase cost from ``sor`` until billing is done."""
    system = load_productivity()
    mdp = system.build()
    result = check(mdp, system.query("money", mdp), options)
    for i in mdp.initial:
        if mdp.states[i][1] == START:
            return float(result.values[i])
    raise LookupError("the productivity model has no initial state with combination sor")
