from pathlib import Path

import pytest

from app.core.config import Settings
from app.planner.estimate import load_override
from app.services.session import Session

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def settings():
    return Settings(_env_file=None)


@pytest.fixture
def session(settings):
    return Session(settings)


@pytest.fixture
def social_session(settings):
    session = Session(settings)
    session.load_graph("g", str(FIXTURES / "social_vertices.csv"), str(FIXTURES / "social_edges.csv"))
    session.load_table("D", str(FIXTURES / "social_d.csv"))
    return session


@pytest.fixture
def golden_override():
    return load_override(FIXTURES / "golden_stats.toml")
