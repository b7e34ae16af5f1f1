"""Round-sphere geometry: stereographic charts, quadrature grids, geodesics,
and the gradient conformal vector fields used by the averaging sums.

Everything here works on the unit sphere S^m embedded in R^{m+1}.  Points are
unit vectors; tangent vectors are ambient vectors orthogonal to their base
point.  Batched entry points take arrays of shape (N, m+1) and are pure
functions of their inputs, so they are safe to call concurrently.

Sign and normalization conventions:
    * metric = restriction of the Euclidean inner product (radius 1),
    * chart metric g_ij(u) = 4 delta_ij / (1+|u|^2)^2,
    * Laplacian on functions = trace of the Hessian (so Delta f_a = -m f_a
      for the linear coordinate functions f_a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpherePoint",
    "TangentVector",
    "Chart",
    "QuadratureGrid",
    "ConformalGradientField",
    "sphere_volume",
    "build_grid",
    "integrate",
    "conformal_field",
    "coordinate_values",
    "conformal_gradients",
    "covariant_derivative",
    "sphere_exp",
    "tangent_frames",
    "select_chart",
]

UNIT_TOL = 1e-12
TANGENT_TOL = 1e-10

# Finite-difference steps (first / second derivatives), one Richardson level.
FD_STEP_1 = 1e-4
FD_STEP_2 = 1e-3


def sphere_volume(m: int) -> float:
    """Volume of the unit m-sphere, 2 pi^((m+1)/2) / Gamma((m+1)/2)."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return x


@dataclass(frozen=True)
class SpherePoint:
    """A point on S^m as a unit vector in R^{m+1}."""

    coords: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size < 3:
            raise ValueError("coords must be a vector in R^{m+1} with m >= 2")
        norm = np.linalg.norm(coords)
        if abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"point is off the sphere: |coords| - 1 = {norm - 1.0:.3e}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "dim", coords.size - 1)


@dataclass(frozen=True)
class TangentVector:
    """An ambient vector attached to, and orthogonal to, a sphere point."""

    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=float)
        if vec.shape != self.base.coords.shape:
            raise ValueError("tangent vector dimension mismatch")
        if abs(float(vec @ self.base.coords)) > TANGENT_TOL * max(1.0, np.linalg.norm(vec)):
            raise ValueError("vector is not tangent to the sphere at its base point")
        object.__setattr__(self, "vec", vec)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


class Chart:
    """Stereographic chart covering one closed hemisphere (and beyond).

    ``pole`` names the cap the chart is centered on; the projection point is
    the opposite pole.  ``axis`` selects which ambient coordinate plays the
    vertical role (the default is the last one; the conformal suspension uses
    axis 0).  The chart metric is g_ij(u) = mu(u) delta_ij with
    mu = 4/(1+|u|^2)^2, so Christoffel symbols are those of a conformally
    flat metric and are available in closed form.
    """

    def __init__(self, pole: str, dim: int, axis: int | None = None):
        if pole not in ("north", "south"):
            raise ValueError("pole must be 'north' or 'south'")
        if dim < 2:
            raise ValueError("chart dimension must be >= 2")
        self.pole = pole
        self.dim = dim
        self.axis = dim if axis is None else axis
        self.sign = 1.0 if pole == "north" else -1.0

    def _split(self, x: np.ndarray):
        xa = x[:, self.axis]
        rest = np.delete(x, self.axis, axis=1)
        return xa, rest

    def _join(self, xa: np.ndarray, rest: np.ndarray) -> np.ndarray:
        out = np.empty((rest.shape[0], rest.shape[1] + 1))
        cols = [i for i in range(rest.shape[1] + 1) if i != self.axis]
        out[:, cols] = rest
        out[:, self.axis] = xa
        return out

    def to_chart(self, x) -> np.ndarray:
        x = _as_points(x)
        xa, rest = self._split(x)
        denom = 1.0 + self.sign * xa
        if np.any(denom <= 1e-13):
            raise ValueError("point at or beyond the excluded pole of this chart")
        return rest / denom[:, None]

    def to_sphere(self, u) -> np.ndarray:
        u = _as_points(u)
        d = 1.0 + np.sum(u * u, axis=1)
        rest = 2.0 * u / d[:, None]
        xa = self.sign * (2.0 - d) / d
        return self._join(xa, rest)

    def mu(self, u) -> np.ndarray:
        """Conformal factor of the chart metric."""
        u = _as_points(u)
        d = 1.0 + np.sum(u * u, axis=1)
        return 4.0 / d**2

    def jacobian(self, u) -> np.ndarray:
        """d(to_sphere)/du with shape (N, m+1, m)."""
        u = _as_points(u)
        n, m = u.shape
        d = 1.0 + np.sum(u * u, axis=1)
        eye = np.eye(m)
        # rows for the m non-axis coordinates, then the axis row
        rest = 2.0 * eye[None] / d[:, None, None] - 4.0 * u[:, :, None] * u[:, None, :] / (d**2)[:, None, None]
        axis_row = -self.sign * 4.0 * u / (d**2)[:, None]
        out = np.empty((n, m + 1, m))
        cols = [i for i in range(m + 1) if i != self.axis]
        out[:, cols, :] = rest
        out[:, self.axis, :] = axis_row
        return out

    def hessian(self, u) -> np.ndarray:
        """d^2(to_sphere)/du^2 with shape (N, m+1, m, m)."""
        u = _as_points(u)
        n, m = u.shape
        d = 1.0 + np.sum(u * u, axis=1)
        d2 = (d**2)[:, None, None, None]
        d3 = (d**3)[:, None, None, None]
        eye = np.eye(m)
        # non-axis components k: -4(d_kj u_i + d_ki u_j + d_ij u_k)/D^2 + 16 u_i u_j u_k / D^3
        t1 = eye[None, :, None, :] * u[:, None, :, None]   # d_kj u_i
        t2 = eye[None, :, :, None] * u[:, None, None, :]   # d_ki u_j
        t3 = eye[None, None, :, :] * u[:, :, None, None]   # d_ij u_k
        rest = -4.0 * (t1 + t2 + t3) / d2 + 16.0 * u[:, :, None, None] * u[:, None, :, None] * u[:, None, None, :] / d3
        axis_part = self.sign * (-4.0 * eye[None] / (d**2)[:, None, None] + 16.0 * u[:, :, None] * u[:, None, :] / (d**3)[:, None, None])
        out = np.empty((n, m + 1, m, m))
        cols = [i for i in range(m + 1) if i != self.axis]
        out[:, cols, :, :] = rest
        out[:, self.axis, :, :] = axis_part
        return out

    def christoffel(self, u) -> np.ndarray:
        """Christoffel symbols Gamma^k_ij of the chart metric, shape (N, m, m, m).

        Indexed [n, k, i, j]; the metric is conformally flat, so
        Gamma^k_ij = d_ik b_j + d_jk b_i - d_ij b_k with b = grad log(conformal factor)/... ,
        concretely b_i = -2 u_i / (1+|u|^2).
        """
        u = _as_points(u)
        m = u.shape[1]
        d = 1.0 + np.sum(u * u, axis=1)
        b = -2.0 * u / d[:, None]
        eye = np.eye(m)
        g = (
            eye[None, :, :, None] * b[:, None, None, :]
            + eye[None, :, None, :] * b[:, None, :, None]
            - eye[None, None, :, :] * b[:, :, None, None]
        )
        return g

    def frame(self, u) -> np.ndarray:
        """Orthonormal tangent frame aligned with the chart axes, (N, m, m+1)."""
        u = _as_points(u)
        d = 1.0 + np.sum(u * u, axis=1)
        jac = self.jacobian(u)  # (N, m+1, m)
        return np.swapaxes(jac, 1, 2) * (d / 2.0)[:, None, None]

    def vector_to_chart(self, u, w) -> np.ndarray:
        """Chart components of ambient tangent vectors w at to_sphere(u)."""
        u = _as_points(u)
        w = _as_points(w)
        d = 1.0 + np.sum(u * u, axis=1)
        jac = self.jacobian(u)
        return np.einsum("nak,na->nk", jac, w) * (d**2 / 4.0)[:, None]

    def vector_to_ambient(self, u, c) -> np.ndarray:
        """Ambient vector with chart components c at to_sphere(u)."""
        u = _as_points(u)
        c = _as_points(c)
        jac = self.jacobian(u)
        return np.einsum("nak,nk->na", jac, c)

    def covers(self, x, margin: float = 0.0) -> np.ndarray:
        x = _as_points(x)
        return self.sign * x[:, self.axis] >= -margin


def select_chart(points, dim: int | None = None, axis: int | None = None) -> tuple[Chart, Chart, np.ndarray]:
    """Partition points between the two charts of the standard atlas.

    Returns (north, south, mask) where mask is True for points handled by the
    north chart, i.e. those whose chart coordinate norm is <= 1 there (ties go
    north).
    """
    points = _as_points(points)
    m = points.shape[1] - 1 if dim is None else dim
    north = Chart("north", m, axis=axis)
    south = Chart("south", m, axis=axis)
    a = north.axis
    mask = points[:, a] >= 0.0
    return north, south, mask


def tangent_frames(points) -> np.ndarray:
    """Deterministic orthonormal frames of the tangent spaces, (N, m, m+1).

    Uses the chart-aligned frame of whichever stereographic chart owns each
    point, so frames vary smoothly away from the equator and are reproducible.
    """
    points = _as_points(points)
    n, mp1 = points.shape
    north, south, mask = select_chart(points)
    out = np.empty((n, mp1 - 1, mp1))
    if np.any(mask):
        u = north.to_chart(points[mask])
        out[mask] = north.frame(u)
    if np.any(~mask):
        u = south.to_chart(points[~mask])
        out[~mask] = south.frame(u)
    return out


# ---------------------------------------------------------------------------
# conformal gradient fields


def coordinate_values(alpha: int, points) -> np.ndarray:
    """f_alpha(x) = <a_alpha, x> for the standard basis direction alpha (1-based)."""
    points = _as_points(points)
    if not 1 <= alpha <= points.shape[1]:
        raise ValueError(f"alpha must be in 1..{points.shape[1]}")
    return points[:, alpha - 1].copy()


def conformal_gradients(alpha: int, points) -> np.ndarray:
    """grad f_alpha at each point: a_alpha - f_alpha(x) x."""
    points = _as_points(points)
    f = coordinate_values(alpha, points)
    grad = -f[:, None] * points
    grad[:, alpha - 1] += 1.0
    return grad


@dataclass(frozen=True)
class ConformalGradientField:
    """The gradient vector field of a linear coordinate function.

    Satisfies grad f = a - f(x) x, |grad f|^2 = 1 - f^2, and the family over
    all m+1 axes resolves every tangent vector.
    """

    alpha: int
    dim: int

    def __post_init__(self):
        if not 1 <= self.alpha <= self.dim + 1:
            raise ValueError(f"alpha must be in 1..{self.dim + 1}")

    @property
    def axis(self) -> np.ndarray:
        a = np.zeros(self.dim + 1)
        a[self.alpha - 1] = 1.0
        return a

    def __call__(self, points) -> np.ndarray:
        return conformal_gradients(self.alpha, points)

    def values(self, points) -> np.ndarray:
        return coordinate_values(self.alpha, points)


def conformal_field(alpha: int, x: SpherePoint) -> tuple[float, TangentVector]:
    """Value and gradient of the coordinate function f_alpha at a point."""
    pts = x.coords[None, :]
    f = float(coordinate_values(alpha, pts)[0])
    grad = conformal_gradients(alpha, pts)[0]
    return f, TangentVector(x, grad)


# ---------------------------------------------------------------------------
# geodesics


def sphere_exp_batch(points, vectors, t: float = 1.0) -> np.ndarray:
    """Geodesic exponential on the unit sphere, batched.

    Rows with zero velocity map to themselves; the result is renormalized to
    machine precision.
    """
    points = _as_points(points)
    vectors = _as_points(vectors)
    speed = np.linalg.norm(vectors, axis=1)
    ang = t * speed
    unit = np.divide(vectors, speed[:, None], out=np.zeros_like(vectors), where=speed[:, None] > 0)
    out = np.cos(ang)[:, None] * points + np.sin(ang)[:, None] * unit
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out


def sphere_exp(x: SpherePoint, v: TangentVector, t: float = 1.0) -> SpherePoint:
    """Geodesic through x with initial velocity v, evaluated at parameter t."""
    if v.base is not x and not np.array_equal(v.base.coords, x.coords):
        raise ValueError("velocity is not based at the given point")
    out = sphere_exp_batch(x.coords[None, :], v.vec[None, :], t)[0]
    return SpherePoint(out)


# ---------------------------------------------------------------------------
# covariant differentiation of tangent vector fields


def _richardson_first(samples: dict, h: float) -> np.ndarray:
    """Combine central differences at steps h and h/2 (one Richardson level).

    ``samples[s]`` holds field values at offsets s in (+-h, +-h/2); shape
    (N, ..., ) per offset.  Returns the improved first derivative.
    """
    d_h = (samples[h] - samples[-h]) / (2.0 * h)
    d_h2 = (samples[h / 2] - samples[-h / 2]) / h
    return (4.0 * d_h2 - d_h) / 3.0


def covariant_derivative_batch(field, points, directions, step: float = FD_STEP_1) -> np.ndarray:
    """Levi-Civita covariant derivative of a tangent vector field, batched.

    ``field`` is a callable mapping (K, m+1) sphere points to (K, m+1) ambient
    tangent vectors.  Works chart-wise with Christoffel corrections; offsets
    are taken in chart coordinates with one Richardson extrapolation level.
    """
    points = _as_points(points)
    directions = _as_points(directions)
    n, mp1 = points.shape
    m = mp1 - 1
    north, south, mask = select_chart(points)
    out = np.empty((n, mp1))
    for chart, sel in ((north, mask), (south, ~mask)):
        if not np.any(sel):
            continue
        pts = points[sel]
        u0 = chart.to_chart(pts)
        k = pts.shape[0]
        v0 = chart.vector_to_chart(u0, field(pts))
        offsets = [step, -step, step / 2, -step / 2]
        # batch the whole stencil through a single field call
        u_all = np.concatenate(
            [u0[:, None, :] + s * np.eye(m)[None, :, :] for s in offsets], axis=1
        ).reshape(-1, m)
        x_all = chart.to_sphere(u_all)
        vals = field(x_all)
        comps = chart.vector_to_chart(u_all, vals).reshape(k, len(offsets), m, m)
        # comps[:, o, j, :] = chart components of the field at u0 + s_o e_j
        samples = {s: comps[:, i] for i, s in enumerate(offsets)}
        dv = _richardson_first(samples, step)  # (k, j, i) = d_j V^i
        gamma = chart.christoffel(u0)  # (k, i, j, l): Gamma^i_jl
        nabla = dv.transpose(0, 2, 1) + np.einsum("kijl,kl->kij", gamma, v0)
        c_dir = chart.vector_to_chart(u0, directions[sel])
        res_chart = np.einsum("kij,kj->ki", nabla, c_dir)
        out[sel] = chart.vector_to_ambient(u0, res_chart)
    return out


def covariant_derivative(field, X: TangentVector, step: float = FD_STEP_1) -> TangentVector:
    """Covariant derivative nabla_X of a tangent vector field at X.base.

    ``field`` must be evaluable on a neighborhood of the base point (batched
    callable, as in :func:`covariant_derivative_batch`).
    """
    out = covariant_derivative_batch(field, X.base.coords[None, :], X.vec[None, :], step=step)[0]
    base = X.base.coords
    out = out - (out @ base) * base
    return TangentVector(X.base, out)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureGrid:
    """Product quadrature rule on S^m in iterated spherical coordinates.

    Gauss-Legendre nodes in each polar angle (the sin^k volume factors are
    folded into the weights) and a uniform periodic rule in the final azimuth.
    Node ordering is the C-order flattening of the angle grid and never
    changes for fixed resolution, so integrals are reproducible bit for bit.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes))
        object.__setattr__(self, "weights", np.ascontiguousarray(self.weights))

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @property
    def volume(self) -> float:
        return float(math.fsum(self.weights))

    def point(self, i: int) -> SpherePoint:
        return SpherePoint(self.nodes[i])

    def to_csv(self, path) -> None:
        header = ",".join([f"x_{i}" for i in range(self.dim + 1)] + ["weight"])
        data = np.column_stack([self.nodes, self.weights])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def build_grid(m: int, resolution) -> QuadratureGrid:
    """Build the product quadrature grid on S^m.

    ``resolution`` is a single per-angle node count or a sequence of m counts
    (polar angles first, azimuth last), each at least 4.
    """
    if m < 2:
        raise ValueError(f"sphere dimension must be >= 2, got {m}")
    if np.isscalar(resolution):
        res = (int(resolution),) * m
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != m:
        raise ValueError(f"need {m} per-angle node counts, got {len(res)}")
    if any(r < 4 for r in res):
        raise ValueError(f"resolution too small: {res} (minimum 4 per angle)")

    thetas, wts = [], []
    for k in range(m - 1):
        t, w = np.polynomial.legendre.leggauss(res[k])
        theta = 0.5 * math.pi * (t + 1.0)
        w = 0.5 * math.pi * w * np.sin(theta) ** (m - 1 - k)
        thetas.append(theta)
        wts.append(w)
    phi = 2.0 * math.pi * np.arange(res[-1]) / res[-1]
    thetas.append(phi)
    wts.append(np.full(res[-1], 2.0 * math.pi / res[-1]))

    mesh = np.meshgrid(*thetas, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    angles = np.stack([a.ravel() for a in mesh], axis=1)
    weights = np.ones(angles.shape[0])
    for w in wmesh:
        weights *= w.ravel()

    nodes = np.empty((angles.shape[0], m + 1))
    sin_prod = np.ones(angles.shape[0])
    for k in range(m):
        nodes[:, k] = sin_prod * np.cos(angles[:, k])
        sin_prod = sin_prod * np.sin(angles[:, k])
    nodes[:, m] = sin_prod
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    return QuadratureGrid(dim=m, nodes=nodes, weights=weights, resolution=res)


def integrate(grid: QuadratureGrid, density) -> float:
    """Integrate a scalar density over the grid.

    ``density`` is either an array of per-node values or a callable on the
    node array.  The reduction is exact compensated summation (math.fsum) in
    fixed node order, so the result does not depend on chunking or worker
    count and is bit-stable for a fixed grid.
    """
    vals = density(grid.nodes) if callable(density) else np.asarray(density, dtype=float)
    if vals.shape != (len(grid),):
        raise ValueError(f"density has shape {vals.shape}, expected ({len(grid)},)")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"non-finite density value {vals[idx]} at node index {idx}")
    return math.fsum(grid.weights * vals)
