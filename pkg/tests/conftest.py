import numpy as np
import pytest

from sigid.config import RunConfig
from sigid.synth import synth_dataset


def stroke_image(width=300, height=150, seed=0):
    """A dark three-stroke scribble on light paper."""
    rng = np.random.default_rng(seed)
    img = np.full((height, width), 235, dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width]
    for k in range(3):
        cx = width * (0.25 + 0.25 * k) + rng.uniform(-5, 5)
        cy = height / 2 + rng.uniform(-10, 10)
        rx, ry = width * 0.1, height * 0.3
        d = np.abs(np.hypot((xx - cx) / rx, (yy - cy) / ry) - 1.0)
        ink = d < 0.08
        img[ink] = np.clip(40 + 30 * k + rng.normal(0, 5, ink.sum()), 0, 255).astype(np.uint8)
    return img


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    return synth_dataset(root, n_subjects=6, genuine_per_subject=5, forgers_per_subject=1,
                         seed=7, n_enroll=3)


@pytest.fixture(scope="session")
def small_config():
    return RunConfig().merged({"evaluation": {"n_enroll": 3}})


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number, title, ok, detail):
        line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
