"""Bundled example configurations and deterministic-implication fixtures."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .disorder import DEFAULT_DISTRIBUTION, sample
from .geometry import Box
from .operator import FiniteVolumeHamiltonian, assemble, spectrum

__all__ = ["config_path", "config_names", "ns_fixtures", "build_ns_fixture"]


def _dir() -> Path:
    return Path(str(resources.files("msa_forge") / "configs"))


def config_names() -> list[str]:
    return sorted(p.stem for p in _dir().glob("*.json") if p.stem != "ns_fixtures")


def config_path(name: str) -> Path:
    path = _dir() / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no bundled config {name!r}; have {config_names()}")
    return path


def ns_fixtures() -> list[dict]:
    return json.loads((_dir() / "ns_fixtures.json").read_text())


def build_ns_fixture(fx: dict) -> tuple[FiniteVolumeHamiltonian, float]:
    """``(H, E)`` for one fixture; ``seed: null`` means ``V = 0``.

    A fixture may give ``eigen_index``/``eigen_offset`` instead of ``E``
    to place the energy next to an eigenvalue.
    """
    box = Box((0,) * fx["d"], fx["L"])
    pot = None if fx["seed"] is None else sample(DEFAULT_DISTRIBUTION, fx["seed"], box.support())
    H = assemble(box, fx["g"], pot)
    E = fx.get("E")
    if E is None:
        E = float(spectrum(H)[fx["eigen_index"]]) + fx["eigen_offset"]
    return H, E
