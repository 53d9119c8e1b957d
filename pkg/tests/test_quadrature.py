import math

import numpy as np
import pytest

from polyfrac.generators import generate_perturbed_hexa
from polyfrac.quadrature import CellQuadrature, FaceQuadrature, grundmann_moeller, simplex_rule

from conftest import CUBE


def _monomial_integral(alpha):
    """∫ x^α over the unit reference simplex (normalised to volume 1)."""
    d = len(alpha)
    return math.factorial(d) * np.prod([math.factorial(a) for a in alpha]) / math.factorial(d + sum(alpha))


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_simplex_rules_exact(dim, degree):
    pts, w = simplex_rule(dim, degree)
    assert w.sum() == pytest.approx(1.0)
    rng = np.random.default_rng(degree)
    for _ in range(5):
        alpha = rng.multinomial(degree, np.ones(dim + 1) / (dim + 1))[:dim]
        val = np.sum(w * np.prod(pts[:, 1:] ** alpha, axis=1))  # barycentrics 1..d are reference coords
        assert val == pytest.approx(_monomial_integral(alpha), rel=1e-12)


def test_grundmann_moeller_weights():
    pts, w = grundmann_moeller(3, 2)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(pts >= -1e-15)


def test_cell_quadrature_volume_and_moments():
    m = generate_perturbed_hexa(3, box=CUBE, repair="bary", seed=2)
    q = CellQuadrature(m, 2)
    np.testing.assert_allclose(q.integrate(np.ones(len(q.weights))), m.cell_volume, rtol=1e-12)
    first = q.integrate(q.points) / m.cell_volume[:, None]
    np.testing.assert_allclose(first, m.cell_centroid, atol=1e-12)
    total = q.integrate(q.points[:, 0] ** 2).sum()
    assert total == pytest.approx(8.0 / 3.0, rel=1e-12)


def test_face_quadrature_area(cube4):
    f = cube4.fracture_faces
    q = FaceQuadrature(cube4, f, 2)
    np.testing.assert_allclose(q.integrate(np.ones(len(q.weights))), cube4.face_area[f])
    total = q.integrate(q.points[:, 2] ** 2).sum()
    assert total == pytest.approx(4.0 / 3.0)
