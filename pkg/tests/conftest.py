import pytest

from rydpol.trap_model import paper_trap


@pytest.fixture(scope="session")
def trap():
    return paper_trap()
