import os
from pathlib import Path

import numpy as np
import pytest

from mbauc.data import LabeledDataset


def random_dataset(rng, n_pos, n_neg, d, density=1.0, name="rand"):
    """Dense Gaussian features with a random sparsity mask."""
    def block(n):
        X = rng.standard_normal((n, d))
        if density < 1.0:
            X *= rng.random((n, d)) < density
        return X
    return LabeledDataset.from_dense(block(n_pos), block(n_neg), name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def data_dir():
    """Directory holding user-downloaded LIBSVM benchmark files, if any."""
    root = os.environ.get("MBAUC_DATA_DIR")
    return Path(root) if root else None


def find_data_file(*names):
    root = data_dir()
    if root is None:
        return None
    for n in names:
        p = root / n
        if p.exists():
            return p
    return None


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line; the caller still asserts."""
    def record(number, ok, text, skipped=False):
        status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {number}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
