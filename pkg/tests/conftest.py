import logging
from pathlib import Path

import pytest

from autocomply.apk import open_apk
from autocomply.fixture import load_fixture_file
from autocomply.model import build_from_apk

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
APPS = FIXTURES / "apps"
CORPUS = FIXTURES / "corpus"
GOLDEN = FIXTURES / "golden"
SARIF_SCHEMA = TESTS / "data" / "sarif-2.1.0-rtm.5.json"

ALL_YAML = sorted(APPS.glob("*.yaml")) + sorted(CORPUS.glob("*.yaml"))
ALL_APK = sorted(APPS.glob("*.apk")) + sorted(CORPUS.glob("*.apk"))

try:
    from loguru import logger as _loguru

    _loguru.remove()
except ImportError:  # androguard not installed
    pass


def text_model(name: str, group: Path = APPS):
    return load_fixture_file(group / f"{name}.yaml")


def apk_model(name: str, group: Path = APPS):
    path = group / f"{name}.apk"
    return build_from_apk(open_apk(path), str(path))


def both_models(name: str, group: Path = APPS):
    return [text_model(name, group), apk_model(name, group)]


def brief(findings):
    """Findings without evidence, for comparing the text and binary frontends."""
    return sorted((f.category, f.rule_id, f.component, f.callback or "", f.severity, f.message) for f in findings)


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.ERROR, logger="autocomply")
