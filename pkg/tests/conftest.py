import pathlib

import pytest

import solverpick as sp

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
FIXTURE_FILES = ["alpha.lang", "beta.lang", "gamma.lang", "delta.lang"]


@pytest.fixture(scope="session")
def fixture_docs():
    docs = {}
    for name in FIXTURE_FILES:
        docs[name] = sp.parse_document((FIXTURES / name).read_text(),
                                       path=name)
    return docs


@pytest.fixture(scope="session")
def results_table():
    return sp.load_results(FIXTURES / "results.csv", recording_timeout=10.0)


@pytest.fixture(scope="session")
def fixture_model():
    return sp.load_model(FIXTURES / "model.json")


@pytest.fixture(scope="session")
def cost_cfg():
    return sp.CostConfig(timeout=10.0)


@pytest.fixture(scope="session")
def fixture_tasks(fixture_docs):
    tasks = []
    for name in FIXTURE_FILES:
        tasks.extend(sp.document_tasks(fixture_docs[name]))
    return tasks
