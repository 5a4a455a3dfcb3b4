import pytest

from lucas.knowledge import load_instance, load_kb

KB_DIR = "kb"
INSTANCES = "instances"


@pytest.fixture(scope="session")
def kb():
    return load_kb(KB_DIR)


@pytest.fixture(scope="session")
def biegelinie(kb):
    return load_instance(f"{INSTANCES}/biegelinie.json", kb)


@pytest.fixture(scope="session")
def diff_instance(kb):
    return load_instance(f"{INSTANCES}/diff.json", kb)
