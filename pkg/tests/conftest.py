"""Shared fixtures: configs, engines, and the packaged scenario scripts."""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import pytest

from gardenbot.accounts import default_accounts
from gardenbot.clock import DEFAULT_EPOCH, SimClock
from gardenbot.config import GardenConfig, default_config
from gardenbot.engine import GardenEngine


@pytest.fixture
def cfg() -> GardenConfig:
    return default_config()


@pytest.fixture
def clock() -> SimClock:
    return SimClock(DEFAULT_EPOCH)


@pytest.fixture
def make_engine():
    """Engine factory that closes every engine it handed out."""
    engines: list[GardenEngine] = []

    def build(**kwargs) -> GardenEngine:
        kwargs.setdefault("accounts", default_accounts(iterations=1000))
        eng = GardenEngine(**kwargs)
        engines.append(eng)
        return eng

    yield build
    for eng in engines:
        eng.close()


@pytest.fixture
def engine(make_engine) -> GardenEngine:
    return make_engine()


def _data_path(name: str) -> Path:
    return Path(str(importlib.resources.files("gardenbot").joinpath("data", name)))


@pytest.fixture(scope="session")
def canonical_script() -> Path:
    return _data_path("canonical_21day.yaml")


@pytest.fixture(scope="session")
def canonical_noisy_script() -> Path:
    return _data_path("canonical_21day_noisy.yaml")
