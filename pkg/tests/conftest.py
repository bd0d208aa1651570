import numpy as np
import pytest

from metalangevin import landscape as L


def shipped_landscapes():
    """One instance of every family, small enough for derivative checks."""
    return {
        "quadratic": L.build_quadratic(np.array([[2.0, 0.3], [0.3, 1.0]]), center=[0.2, -0.1]),
        "quadratic_1d": L.build_quadratic([[1.0]]),
        "double_well_1d": L.build_double_well(1),
        "double_well_2d": L.build_double_well(2, barrier_scale=1.5),
        "gaussian_location": L.build_family("gaussian_location",
                                            {"dimension": 2, "n": 50, "mean": [0.3, -0.2], "truncation": 1.0,
                                             "seed": 4, "ridge": 0.1}),
        "perturbed_quadratic": L.build_family("perturbed_quadratic", {"dimension": 2, "n": 40, "seed": 2}),
    }


@pytest.fixture(params=sorted(shipped_landscapes()))
def any_landscape(request):
    return shipped_landscapes()[request.param]


@pytest.fixture
def unit_quadratic():
    return L.build_quadratic(np.eye(2), b=1.0, hessian_lipschitz=1.0)


def ball_points(rng, d, radius, count):
    x = rng.standard_normal((count, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * radius * rng.uniform(0, 1, (count, 1)) ** (1.0 / d)


ACCEPTANCE_LINES = {}


@pytest.fixture
def record_acceptance():
    """Store one summary line per acceptance criterion; printed at the end of the session."""
    def record(number, title, passed, detail=""):
        ACCEPTANCE_LINES[number] = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip()
        print(ACCEPTANCE_LINES[number])
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
