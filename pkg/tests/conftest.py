import random
from pathlib import Path

import pytest

from src.config import REPO_ROOT, Settings
from src.surface import Env, load_library
from src.syntax import Ctx, Ty

LIBRARY = REPO_ROOT / "library"
SCHEMAS = REPO_ROOT / "schemas"


@pytest.fixture(scope="session")
def library_dir() -> Path:
    return LIBRARY


@pytest.fixture
def settings(library_dir) -> Settings:
    return Settings(library_dir=library_dir, instances=5, workers=2)


@pytest.fixture(scope="session")
def prelude_env() -> Env:
    module = load_library(LIBRARY / "prelude.lmr", LIBRARY)
    assert not module.errors, module.errors
    return module.env


@pytest.fixture(scope="session")
def case_env() -> Env:
    """Environment after elaborating the linked-list case study."""
    module = load_library(LIBRARY / "append.lmr", LIBRARY)
    assert not module.errors, module.errors
    return module.env


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0)


@pytest.fixture
def ref_ctx() -> Ctx:
    """``l : ref nat``"""
    return Ctx((), (("l", Ty.ref(Ty.nat())),))


@pytest.fixture
def prop_ctx() -> Ctx:
    """``p q r : prop``"""
    return Ctx((), (("p", Ty.prop()), ("q", Ty.prop()), ("r", Ty.prop())))


@pytest.fixture(scope="session")
def property_instances() -> int:
    """Cases per generated property; ``LMR_PROPERTY_INSTANCES`` scales it."""
    return Settings.from_env().property_instances
