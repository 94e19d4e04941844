"""Scenario loading for the harness, including the packaged example scenarios."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..scenario import ConfigError, Scenario, load_scenario

__all__ = ["ConfigError", "Scenario", "load_scenario", "packaged_scenarios", "resolve_scenario"]


def packaged_scenarios() -> list[str]:
    root = resources.files("rlosim") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario(path_or_name) -> Path:
    """A path on disk, else the packaged scenario of that file name."""
    p = Path(path_or_name)
    if p.exists():
        return p
    cand = resources.files("rlosim") / "scenarios" / p.name
    if cand.is_file():
        return Path(str(cand))
    return p


def load(path_or_name, seed: int | None = None) -> Scenario:
    scenario = load_scenario(resolve_scenario(path_or_name))
    if seed is not None:
        scenario = scenario.replace(seed=seed)
    return scenario
