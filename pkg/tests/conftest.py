import numpy as np
import pytest

from polyfrac.generators import generate_cartesian, generate_perturbed_hexa, generate_tet

CUBE = [(-1.0, 1.0)] * 3
X0 = [{"polygon": [[0, -1, -1], [0, 1, -1], [0, 1, 1], [0, -1, 1]]}]
X1_SLAB = [{"polygon": [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]]}]


def linear_interpolant(dofs, A, c):
    """Nodal values of x -> A x + c on every side class, zero bubbles."""
    V = np.zeros((dofs.n_entities, dofs.dim))
    V[: dofs.n_classes] = dofs.class_points() @ np.asarray(A).T + c
    return V.ravel()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def slab():
    """2x1x1 grid with a fracture on the middle face x = 1."""
    return generate_cartesian((2, 1, 1), box=[(0, 2), (0, 1), (0, 1)], fractures=X1_SLAB)


@pytest.fixture(scope="session")
def cube4():
    return generate_cartesian(4, box=CUBE, fractures=X0)


@pytest.fixture(scope="session", params=["cartesian", "tet", "hexa_cut", "hexa_bary"])
def family_mesh(request):
    kind = request.param
    if kind == "cartesian":
        return generate_cartesian(4, box=CUBE, fractures=X0)
    if kind == "tet":
        return generate_tet(4, box=CUBE, fractures=X0)
    return generate_perturbed_hexa(4, box=CUBE, repair=kind.split("_")[1], seed=3, fractures=X0)


# ---------------------------------------------------------------- acceptance summary

def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Append one 'PASS|FAIL  name: detail' line per acceptance criterion."""
    lines = request.config.acceptance_lines

    def record(name, passed, detail):
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
