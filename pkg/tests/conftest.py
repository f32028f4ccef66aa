"""Shared fixtures: phantom datasets and classifiers trained on them.

The small dataset keeps unit tests fast; the default-size dataset backs the
desk-scale threshold checks and the acceptance suite. A terminal-summary hook
prints one pass/fail line per acceptance criterion.
"""

import numpy as np
import pytest

from kdiag.classifiers import ClassifierConfig, finetune_severity, train_disease
from kdiag.phantom import GeneratorConfig, generate_subject


SMALL_CFG = GeneratorConfig(n_train=80, n_val=30, n_test=30, rng_seed=11)


def make_subjects(cfg, start, count):
    return [generate_subject(cfg, start + i) for i in range(count)]


def split_dataset(cfg):
    train = make_subjects(cfg, 0, cfg.n_train)
    val = make_subjects(cfg, cfg.n_train, cfg.n_val)
    test = make_subjects(cfg, cfg.n_train + cfg.n_val, cfg.n_test)
    return train, val, test


@pytest.fixture(scope="session")
def small_dataset():
    return split_dataset(SMALL_CFG)


@pytest.fixture(scope="session")
def small_classifiers(small_dataset):
    train, val, _ = small_dataset
    cfg = ClassifierConfig(epochs=12, seed=3)
    f_d = train_disease(train, val, cfg).params
    diseased_train = [s for s in train if s.g_d == 1]
    diseased_val = [s for s in val if s.g_d == 1]
    f_s = finetune_severity(f_d, diseased_train, diseased_val, cfg).params
    return f_d, f_s


@pytest.fixture(scope="session")
def default_dataset():
    """The 500/100/100 dataset every desk-scale experiment runs on."""
    return split_dataset(GeneratorConfig())


@pytest.fixture(scope="session")
def default_training(default_dataset):
    """Classifiers trained with default config on the default dataset."""
    train, val, _ = default_dataset
    cfg = ClassifierConfig(seed=1)
    disease = train_disease(train, val, cfg)
    diseased_train = [s for s in train if s.g_d == 1]
    diseased_val = [s for s in val if s.g_d == 1]
    severity = finetune_severity(disease.params, diseased_train, diseased_val, cfg)
    return disease, severity


@pytest.fixture(scope="session")
def default_classifiers(default_training):
    disease, severity = default_training
    return disease.params, severity.params


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_RESULTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.name
    if name.startswith("test_criterion_"):
        _ACCEPTANCE_RESULTS.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS):
        label = name.replace("test_", "").replace("_", " ")
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label}: {status}")
