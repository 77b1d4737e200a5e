from __future__ import annotations

import shutil
from collections import OrderedDict
from dataclasses import replace
from pathlib import Path

import pytest

from dfa_mt import experiment as exp
from dfa_mt.llm_client import BackendConfig, LLMClient

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


# acceptance bookkeeping: one PASS/FAIL/SKIP line per criterion at the end

_AC_RESULTS: "OrderedDict[str, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(code, title): acceptance criterion this test covers")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            code, title = m.args
            _AC_RESULTS.setdefault(code, {"title": title, "outcomes": []})
            item.user_properties.append(("acceptance", code))


def pytest_runtest_logreport(report):
    code = dict(report.user_properties).get("acceptance")
    if code is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _AC_RESULTS[code]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for code in sorted(_AC_RESULTS):
        entry = _AC_RESULTS[code]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
            if "skipped" in outcomes:
                status = "PASS (partly skipped)"
        terminalreporter.write_line(f"{code} {status}: {entry['title']}")


# fixtures

def _copy_fixture(name: str, dest: Path) -> Path:
    target = dest / name
    shutil.copytree(FIXTURES / name, target)
    return target


def _config(dirpath: Path):
    cfg = exp.load_config(dirpath / "config.yaml")
    return replace(cfg, output_dir=str(dirpath / "runs"))


@pytest.fixture
def replay20(tmp_path):
    """Config for the 20-sentence replay fixture, in a private copy."""
    return _config(_copy_fixture("replay20", tmp_path))


@pytest.fixture
def replay100(tmp_path):
    return _config(_copy_fixture("replay100", tmp_path))


@pytest.fixture
def fake_sentences():
    from fake_model import make_sentences

    return make_sentences(20, seed=7)


@pytest.fixture
def recording_client(tmp_path, fake_sentences):
    """http client backed by the fake model, recording into a fresh cache."""
    from fake_model import FakeModel

    model = FakeModel(fake_sentences)
    cfg = BackendConfig(kind="http", endpoint="http://fake-model.invalid/v1/completions",
                        model_id="fake", cache_path=str(tmp_path / "rec.jsonl"))
    client = LLMClient(cfg, transport=model.transport(), sleep=lambda s: None)
    client.fake_model = model
    yield client
    client.close()
