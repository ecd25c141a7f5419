import numpy as np
import pytest

from fireray.cloud import PointCloud, normalize_cloud
from fireray.scenes import preset, synth_room

ACCEPTANCE_RESULTS = []


def record_acceptance(number, name, ok, detail=""):
    ACCEPTANCE_RESULTS.append((number, name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}  {detail}")


@pytest.fixture(scope="session")
def two_wall():
    return normalize_cloud(synth_room(preset("two-wall")))


def make_cloud(positions, colors=None, labels=None, normalized=True):
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if colors is None:
        colors = np.full_like(positions, 0.5)
    return PointCloud(positions, colors, labels, normalized=normalized)
