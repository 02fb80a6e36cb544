import numpy as np
import pytest

from entire_sublinear.barrier import build_barrier
from entire_sublinear.entire import Schedule, solve_entire, verify_uniqueness
from entire_sublinear.problem import NonlinearitySpec, PotentialSpec, ProblemSpec

ACCEPTANCE_LINES: list[str] = []

# cutoff diagnostic needs support up to 2 * 8 plus two nodes
CUTOFF_RADIUS = 16.2


def u_star(r):
    return 1.0 + (1.0 + np.asarray(r, dtype=float) ** 2) ** -0.5


def rho_manufactured(r):
    r = np.asarray(r, dtype=float)
    return 3.0 * (1.0 + r**2) ** -2.5 / np.sqrt(u_star(r))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def manufactured_problem():
    return ProblemSpec(PotentialSpec(3, radial=rho_manufactured, label="manufactured"),
                       NonlinearitySpec.power(0.5), 1.0)


@pytest.fixture(scope="session")
def power_problem():
    return ProblemSpec(PotentialSpec.rational(3, 5.0), NonlinearitySpec.power(0.5), 0.0)


@pytest.fixture(scope="session")
def quartic_problem():
    return ProblemSpec(PotentialSpec.rational(3, 4.0), NonlinearitySpec.power(0.5), 0.0)


@pytest.fixture(scope="session")
def manufactured_schedule():
    return Schedule(5.0, 8.0, 1.5, 64.0)


@pytest.fixture(scope="session")
def power_barrier(power_problem):
    return build_barrier(power_problem)


@pytest.fixture(scope="session")
def manufactured_barrier(manufactured_problem):
    return build_barrier(manufactured_problem)


@pytest.fixture(scope="session")
def power_solution(power_problem, power_barrier):
    return solve_entire(power_problem, Schedule(5.0), 1e-3, M0=256, barrier=power_barrier,
                        min_radius=CUTOFF_RADIUS)


@pytest.fixture(scope="session")
def power_uniqueness(power_problem, power_barrier, power_solution):
    return verify_uniqueness(power_problem, Schedule(5.0), 1e-3, primary=power_solution, barrier=power_barrier,
                             min_radius=CUTOFF_RADIUS)


@pytest.fixture(scope="session")
def manufactured_solution(manufactured_problem, manufactured_schedule, manufactured_barrier):
    return solve_entire(manufactured_problem, manufactured_schedule, 1e-3, M0=256, barrier=manufactured_barrier,
                        boundary=u_star, min_radius=CUTOFF_RADIUS)


@pytest.fixture(scope="session")
def manufactured_uniqueness(manufactured_problem, manufactured_schedule, manufactured_barrier,
                            manufactured_solution):
    return verify_uniqueness(manufactured_problem, manufactured_schedule, 1e-3, primary=manufactured_solution,
                             barrier=manufactured_barrier, boundary=u_star, min_radius=CUTOFF_RADIUS)
