import numpy as np
import pytest
from hypothesis import settings

from landscape_lab.problems import TabulatedLandscape, generate_nk
from landscape_lab.sampling import Sample, enumerate_space

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def three_point():
    """Sample {000: 0.1, 011: 0.2, 111: 0.3} over a 3-bit table landscape."""
    table = np.zeros(8)
    table[0b000], table[0b011], table[0b111] = 0.1, 0.2, 0.3
    inst = TabulatedLandscape(3, table)
    return inst, Sample.from_points(inst, [0b000, 0b011, 0b111])


@pytest.fixture(scope="session")
def nk10():
    inst = generate_nk(10, 3, 11)
    return inst, enumerate_space(inst)


@pytest.fixture(scope="session")
def nk16_8():
    inst = generate_nk(16, 8, 5)
    return inst, enumerate_space(inst)


def brute_nearest_fitter(sample, i):
    """All strictly fitter sample points at minimal Hamming distance, by direct scan."""
    best, out = None, set()
    for j in range(len(sample)):
        if sample.fitness[j] > sample.fitness[i]:
            d = int(sample.points[i] ^ sample.points[j]).bit_count()
            if best is None or d < best:
                best, out = d, {j}
            elif d == best:
                out.add(j)
    return best or 0, out


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdicts():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
