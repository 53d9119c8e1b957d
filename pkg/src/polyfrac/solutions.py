"""Closed-form reference solutions used by the studies and tests.

Every solution accepts evaluation points ``x`` of shape (n, d) and optional
``hint`` points of the same shape lying strictly inside the cell the value is
requested for; the hint selects the branch of a field that jumps across the
fracture.
"""

from __future__ import annotations

import numpy as np


class AnalyticalSolution:
    """Interface: displacement, gradient, stress, load and fracture data."""

    dim: int = 3
    mu: float = 1.0
    lam_lame: float = 1.0
    g: float = 0.0

    def u(self, x, hint=None):  # pragma: no cover - interface
        raise NotImplementedError

    def grad(self, x, hint=None):  # pragma: no cover - interface
        raise NotImplementedError

    def f(self, x, hint=None):  # pragma: no cover - interface
        raise NotImplementedError

    def stress(self, x, hint=None) -> np.ndarray:
        G = self.grad(x, hint)
        eps = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        tr = np.trace(eps, axis1=1, axis2=2)
        return 2 * self.mu * eps + self.lam_lame * tr[:, None, None] * np.eye(self.dim)

    def multiplier(self, x, normals, plus_hint) -> np.ndarray:
        """λ = -σ(u⁺) n⁺ on fracture points."""
        return -np.einsum("qab,qb->qa", self.stress(x, plus_hint), normals)

    def jump(self, x, plus_hint, minus_hint) -> np.ndarray:
        return self.u(x, plus_hint) - self.u(x, minus_hint)


class LinearField(AnalyticalSolution):
    """u(x) = A x + b with constant stress; f = 0."""

    def __init__(self, A, b=None, mu=1.0, lam=1.0, g=0.0):
        self.A = np.asarray(A, dtype=float)
        self.dim = self.A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        self.mu, self.lam_lame, self.g = mu, lam, g

    def u(self, x, hint=None):
        return np.atleast_2d(x) @ self.A.T + self.b

    def grad(self, x, hint=None):
        return np.broadcast_to(self.A, (len(np.atleast_2d(x)), self.dim, self.dim)).copy()

    def f(self, x, hint=None):
        return np.zeros((len(np.atleast_2d(x)), self.dim))


class Manufactured3D(AnalyticalSolution):
    """Tresca manufactured solution on (-1,1)^3 with fracture {x = 0}.

    u = (h R - g y, s R, x² R) with h = -sin(x) cos(y), R = z² for z >= 0 and
    R = z²/4 for z < 0, and s = 2 on the side x < 0 of the lower half, s = 1
    elsewhere. The plus side of the fracture is x < 0 (n⁺ = +e_x), so the
    tangential jump is (0, R, 0) for z < 0 and zero above.
    """

    dim = 3

    def __init__(self, mu=1.0, lam=1.0, g=1.0):
        self.mu, self.lam_lame, self.g = float(mu), float(lam), float(g)

    @staticmethod
    def _branch(x, hint):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        hint = x if hint is None else np.atleast_2d(np.asarray(hint, dtype=float))
        upper = x[:, 2] >= 0
        z = x[:, 2]
        R = np.where(upper, z ** 2, z ** 2 / 4)
        dR = np.where(upper, 2 * z, z / 2)
        d2R = np.where(upper, 2.0, 0.5)
        s = np.where(~upper & (hint[:, 0] < 0), 2.0, 1.0)
        return x, R, dR, d2R, s

    def u(self, x, hint=None):
        x, R, _, _, s = self._branch(x, hint)
        X, Y = x[:, 0], x[:, 1]
        h = -np.sin(X) * np.cos(Y)
        return np.column_stack([h * R - self.g * Y, s * R, X ** 2 * R])

    def grad(self, x, hint=None):
        x, R, dR, _, s = self._branch(x, hint)
        X, Y = x[:, 0], x[:, 1]
        h = -np.sin(X) * np.cos(Y)
        hx = -np.cos(X) * np.cos(Y)
        hy = np.sin(X) * np.sin(Y)
        G = np.zeros((len(x), 3, 3))
        G[:, 0] = np.column_stack([hx * R, hy * R - self.g, h * dR])
        G[:, 1, 2] = s * dR
        G[:, 2, 0] = 2 * X * R
        G[:, 2, 2] = X ** 2 * dR
        return G

    def f(self, x, hint=None):
        """-div σ(u) = -(μ Δu + (μ+λ) ∇ div u)."""
        x, R, dR, d2R, s = self._branch(x, hint)
        X, Y = x[:, 0], x[:, 1]
        h = -np.sin(X) * np.cos(Y)
        hx = -np.cos(X) * np.cos(Y)
        hxy = np.cos(X) * np.sin(Y)
        lap = np.column_stack([-2 * h * R + h * d2R, s * d2R, 2 * R + X ** 2 * d2R])
        graddiv = np.column_stack([-h * R + 2 * X * dR, hxy * R, hx * dR + X ** 2 * d2R])
        return -(self.mu * lap + (self.mu + self.lam_lame) * graddiv)

    def exact_jump(self, x):
        """[[u]] on the fracture without side hints."""
        x = np.atleast_2d(x)
        z = x[:, 2]
        out = np.zeros((len(x), 3))
        out[:, 1] = np.where(z < 0, z ** 2 / 4, 0.0)
        return out

    def exact_multiplier(self, x):
        """λ on {x = 0}: ((2μ+λ) cos(y) R(z), μ g, 0)."""
        x = np.atleast_2d(x)
        z = x[:, 2]
        R = np.where(z >= 0, z ** 2, z ** 2 / 4)
        return np.column_stack([(2 * self.mu + self.lam_lame) * np.cos(x[:, 1]) * R,
                                np.full(len(x), self.mu * self.g), np.zeros(len(x))])


class Compression2D:
    """Reference values of the inclined crack under uniaxial compression.

    Units: MPa and m. ``prefactor`` selects the slip amplitude: ``"printed"``
    uses 4(1-ν)/E, ``"plane_strain"`` uses the plane-strain crack compliance
    4(1-ν²)/E. ``profile`` selects ``"elliptic"`` sqrt(ℓ² - (ℓ-τ)²) or the
    ``"printed"`` form sqrt(ℓ² - (ℓ² - τ²)) = τ.
    """

    def __init__(self, sigma=100.0, psi=np.pi / 9, half_length=1.0, friction=1 / np.sqrt(3),
                 E=25000.0, nu=0.25, prefactor="plane_strain", profile="elliptic"):
        self.sigma, self.psi, self.ell = sigma, psi, half_length
        self.friction, self.E, self.nu = friction, E, nu
        if prefactor not in ("printed", "plane_strain"):
            raise ValueError(f"unknown prefactor {prefactor!r}")
        if profile not in ("printed", "elliptic"):
            raise ValueError(f"unknown profile {profile!r}")
        self.prefactor, self.profile = prefactor, profile

    @property
    def lambda_n(self) -> float:
        return self.sigma * np.sin(self.psi) ** 2

    @property
    def g(self) -> float:
        return self.friction * self.lambda_n

    @property
    def compliance(self) -> float:
        if self.prefactor == "printed":
            return 4 * (1 - self.nu) / self.E
        return 4 * (1 - self.nu ** 2) / self.E

    def slip_amplitude(self) -> float:
        s, p = self.sigma, self.psi
        return self.compliance * s * np.sin(p) * (np.cos(p) - self.g / self.lambda_n * np.sin(p))

    def slip(self, tau) -> np.ndarray:
        """|[[u]]_τ| at curvilinear abscissa 0 <= τ <= 2ℓ."""
        tau = np.asarray(tau, dtype=float)
        ell = self.ell
        if self.profile == "elliptic":
            shape = np.sqrt(np.maximum(ell ** 2 - (ell - tau) ** 2, 0.0))
        else:
            shape = np.sqrt(np.maximum(ell ** 2 - (ell ** 2 - tau ** 2), 0.0))
        return self.slip_amplitude() * shape

    def stress_tensor(self) -> np.ndarray:
        """Remote stress: uniaxial compression along x (tension positive)."""
        return np.array([[-self.sigma, 0.0], [0.0, 0.0]])
