"""Target geometries: round spheres of any radius, with the compatible
rotation J and fundamental 2-form on 2-sphere targets.

The 2-sphere of radius 1/2 doubles as the complex projective line with its
Fubini-Study normalization; that is the codomain of the Hopf map here and
the reference surface for the symplectic Dirichlet energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TargetGeometry", "unit_sphere", "kahler_surface"]


@dataclass(frozen=True)
class TargetGeometry:
    """A round sphere S^n(r) in R^{n+1}, almost Kahler when n = 2.

    On a surface, J rotates each tangent plane by +90 degrees about the
    outward normal (Jv = n x v) and the fundamental 2-form is
    Omega(a, b) = <a, J b>, which has unit pointwise norm for any radius.
    The curvature operator is that of constant sectional curvature 1/r^2.
    """

    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("target sphere dimension must be >= 2")
        if self.radius <= 0:
            raise ValueError("target radius must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def is_surface(self) -> bool:
        return self.dim == 2

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius**2

    def normal(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) / self.radius

    def project(self, y, w) -> np.ndarray:
        """Orthogonal projection of ambient vectors onto tangent planes at y."""
        n = self.normal(y)
        return w - np.sum(w * n, axis=-1, keepdims=True) * n

    def exp(self, y, w) -> np.ndarray:
        """Geodesic exponential: tangent vectors w at points y (batched)."""
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        speed = np.linalg.norm(w, axis=-1)
        ang = speed / self.radius
        unit = np.divide(w, speed[..., None], out=np.zeros_like(w), where=speed[..., None] > 0)
        out = np.cos(ang)[..., None] * y + self.radius * np.sin(ang)[..., None] * unit
        out *= self.radius / np.linalg.norm(out, axis=-1)[..., None]
        return out

    def j_apply(self, y, w) -> np.ndarray:
        """J w = n x w on a surface target."""
        if not self.is_surface:
            raise ValueError("J is only defined on 2-sphere targets")
        return np.cross(self.normal(y), w)

    def omega(self, y, a, b) -> np.ndarray:
        """Fundamental 2-form Omega(a, b) = <a, J b> at points y."""
        jb = self.j_apply(y, b)
        return np.sum(np.asarray(a, dtype=float) * jb, axis=-1)

    def contains(self, y, tol: float = 1e-8) -> bool:
        r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return bool(np.all(np.abs(r - self.radius) <= tol))


def unit_sphere(n: int) -> TargetGeometry:
    return TargetGeometry(dim=n, radius=1.0)


def kahler_surface() -> TargetGeometry:
    """S^2(1/2), the reference almost Kahler surface."""
    return TargetGeometry(dim=2, radius=0.5)
