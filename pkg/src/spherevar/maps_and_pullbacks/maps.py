"""Built-in smooth maps between spheres and their pointwise 2-jets.

Maps evaluate in batch on (N, m+1) arrays of sphere points.  Jets carry the
differential and second fundamental form in a deterministic orthonormal frame
per node.  The identity, Hopf, suspension, linear and constant maps have
closed-form jets; everything else falls back to stereographic-chart finite
differences (step 1e-4 for first derivatives, 1e-3 for second derivatives,
one Richardson level each).

The registry addresses maps by string id:

    identity:3            self-map of S^3
    hopf                  S^3 -> S^2(1/2)
    suspension:5:0.25     profile-rescaled degree-1 self-map of S^5
    poly:7:2:3:2          seeded degree-2 polynomial map S^3 -> S^2(1/2)
    constant:3:2          constant map S^3 -> S^2(1/2)
    rotate:3:11           seeded rotation of S^3
    reflect:3:0           reflection of S^3 in coordinate plane 0
    compose(hopf,rotate:3:11)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sphere_geometry import Chart, QuadratureGrid, build_grid, integrate, select_chart, sphere_volume
from .targets import TargetGeometry, kahler_surface, unit_sphere

__all__ = [
    "SphereMap",
    "MapJet",
    "JetBatch",
    "IdentityMap",
    "HopfMap",
    "SuspensionMap",
    "PolynomialMap",
    "LinearMap",
    "ConstantMap",
    "ComposedMap",
    "eval_jet",
    "parse_map",
    "topological_degree",
    "isotropy_check",
    "random_rotation",
]

FD_STEP_1 = 1e-4
FD_STEP_2 = 1e-3
POLE_MARGIN = 1e-3


@dataclass(frozen=True)
class JetBatch:
    """Jets of a map at a batch of points.

    ``frame`` is an orthonormal basis of each domain tangent space;
    ``dphi[n, i]`` is the differential applied to frame vector i and
    ``sff[n, i, j]`` the second fundamental form on frame vectors (i, j),
    both as ambient target vectors.
    """

    points: np.ndarray        # (N, m+1)
    values: np.ndarray        # (N, k+1)
    frame: np.ndarray         # (N, m, m+1)
    dphi: np.ndarray          # (N, m, k+1)
    sff: np.ndarray | None    # (N, m, m, k+1)

    def __len__(self) -> int:
        return self.points.shape[0]

    def apply_differential(self, vectors) -> np.ndarray:
        """dphi(w) for ambient tangent vectors w, shape (N, m+1) -> (N, k+1)."""
        comps = np.einsum("nia,na->ni", self.frame, vectors)
        return np.einsum("ni,nik->nk", comps, self.dphi)

    def ambient_jacobian(self) -> np.ndarray:
        """The differential as an ambient (k+1, m+1) matrix acting on tangents."""
        return np.einsum("nik,nia->nka", self.dphi, self.frame)

    def tension(self) -> np.ndarray:
        """Trace of the second fundamental form, (N, k+1)."""
        if self.sff is None:
            raise ValueError("jets were computed without second derivatives")
        return np.einsum("niik->nk", self.sff)

    def sff_bilinear(self, U, V) -> np.ndarray:
        """Second fundamental form on arbitrary tangent vectors U, V."""
        if self.sff is None:
            raise ValueError("jets were computed without second derivatives")
        cu = np.einsum("nia,na->ni", self.frame, U)
        cv = np.einsum("nia,na->ni", self.frame, V)
        return np.einsum("ni,nj,nijk->nk", cu, cv, self.sff)


@dataclass(frozen=True)
class MapJet:
    """Pointwise 2-jet in ambient coordinates (single point)."""

    point: np.ndarray          # (m+1,)
    value: np.ndarray          # (k+1,)
    dphi: np.ndarray           # (k+1, m+1), acts on tangent vectors at point
    sff: np.ndarray            # (m+1, m+1, k+1), symmetric bilinear on tangents

    @property
    def tension(self) -> np.ndarray:
        m = self.point.size - 1
        frame = _frame_single(self.point)
        return sum(self.sff_apply(frame[i], frame[i]) for i in range(m))

    def dphi_apply(self, w) -> np.ndarray:
        return self.dphi @ np.asarray(w, dtype=float)

    def sff_apply(self, u, v) -> np.ndarray:
        return np.einsum("a,b,abk->k", np.asarray(u, float), np.asarray(v, float), self.sff)


def _frame_single(point: np.ndarray) -> np.ndarray:
    from ..sphere_geometry import tangent_frames

    return tangent_frames(point[None, :])[0]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return x


class SphereMap:
    """Base class for smooth maps S^m -> S^n(r).

    Subclasses must provide :meth:`values`; analytic differentials and second
    fundamental forms are optional overrides.  ``jets`` assembles everything
    in the deterministic chart frames.
    """

    domain_dim: int
    target: TargetGeometry
    name: str

    @property
    def has_analytic_jacobian(self) -> bool:
        return type(self).ambient_jacobian is not SphereMap.ambient_jacobian

    @property
    def has_analytic_sff(self) -> bool:
        return type(self).sff_bilinear is not SphereMap.sff_bilinear

    def values(self, points) -> np.ndarray:
        raise NotImplementedError

    def ambient_jacobian(self, points) -> np.ndarray:
        """(N, k+1, m+1) matrix acting correctly on tangent vectors."""
        raise NotImplementedError

    def sff_bilinear(self, points, U, V) -> np.ndarray:
        """Second fundamental form on tangent pairs, (N, k+1)."""
        raise NotImplementedError

    def differential(self, points, vectors) -> np.ndarray:
        """dphi(w) for tangent vectors w at the given points."""
        points = _as_points(points)
        vectors = _as_points(vectors)
        if self.has_analytic_jacobian:
            return np.einsum("nka,na->nk", self.ambient_jacobian(points), vectors)
        jets = self.jets(points, order=1)
        return jets.apply_differential(vectors)

    def jets(self, points, order: int = 2, mode: str = "auto") -> JetBatch:
        """Jets at a batch of points.

        ``mode`` is "auto" (use analytic derivatives where the map has them),
        "fd" (chart finite differences of the differential when analytic, of
        the values otherwise) or "fd_values" (pure value-based differences,
        for cross-validation).
        """
        points = _as_points(points)
        if mode == "auto" and self.has_analytic_jacobian and (order < 2 or self.has_analytic_sff):
            return self._analytic_jets(points, order)
        return _fd_jets(self, points, order, mode=mode)

    def _analytic_jets(self, points, order: int) -> JetBatch:
        from ..sphere_geometry import tangent_frames

        frame = tangent_frames(points)
        m = self.domain_dim
        jac = self.ambient_jacobian(points)
        dphi = np.einsum("nka,nia->nik", jac, frame)
        sff = None
        if order >= 2:
            n, k1 = points.shape[0], self.target.ambient_dim
            sff = np.empty((n, m, m, k1))
            for i in range(m):
                for j in range(i, m):
                    val = self.sff_bilinear(points, frame[:, i], frame[:, j])
                    sff[:, i, j] = val
                    sff[:, j, i] = val
        return JetBatch(points=points, values=self.values(points), frame=frame, dphi=dphi, sff=sff)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}: S^{self.domain_dim} -> S^{self.target.dim}({self.target.radius})>"


def _fd_jets(mapping: SphereMap, points: np.ndarray, order: int, mode: str = "auto") -> JetBatch:
    """Chart finite-difference jets, vectorized over nodes.

    Points are routed to whichever stereographic chart owns them; the margin
    guard around the excluded pole can never fire for that routing but stays
    as a safety net for explicitly supplied charts.
    """
    n, mp1 = points.shape
    m = mp1 - 1
    k1 = mapping.target.ambient_dim
    values = mapping.values(points)
    frame = np.empty((n, m, mp1))
    dphi = np.empty((n, m, k1))
    sff = np.empty((n, m, m, k1)) if order >= 2 else None

    north, south, mask = select_chart(points)
    for chart, sel in ((north, mask), (south, ~mask)):
        if not np.any(sel):
            continue
        pts = points[sel]
        if np.any(~chart.covers(pts, margin=-POLE_MARGIN + 1.0)):
            raise ValueError("point too close to the excluded pole of both charts")
        u0 = chart.to_chart(pts)
        d0 = 1.0 + np.sum(u0 * u0, axis=1)
        frame[sel] = chart.frame(u0)
        vals0 = values[sel]

        use_analytic_jac = mode != "fd_values" and mapping.has_analytic_jacobian

        def diff_field(u):
            """dphi(chart basis vectors) at chart points u, (K, k+1, m)."""
            x = chart.to_sphere(u)
            jac_chart = chart.jacobian(u)
            amb = mapping.ambient_jacobian(x)
            return np.einsum("nka,nab->nkb", amb, jac_chart)

        if use_analytic_jac:
            g_chart = diff_field(u0)  # (K, k+1, m)
        else:
            g_chart = _fd_first(lambda u: mapping.values(chart.to_sphere(u)), u0, FD_STEP_1, k1)

        dphi[sel] = np.einsum("nkj,n->njk", g_chart, d0 / 2.0)

        if order >= 2:
            gamma = chart.christoffel(u0)  # (K, k, i, j)
            if use_analytic_jac:
                dT = _fd_first_tensor(diff_field, u0, FD_STEP_2, (k1, m))  # (K, i, k+1, j)
                second = dT.transpose(0, 1, 3, 2)  # (K, i, j, k+1): d_i T_j
            else:
                second = _fd_second(lambda u: mapping.values(chart.to_sphere(u)), u0, vals0, FD_STEP_2, k1)
            corr = np.einsum("nkij,nlk->nijl", gamma, g_chart)  # Gamma^k_ij dphi(d_k)
            nd = second - corr.reshape(second.shape)
            nd = mapping.target.project(vals0[:, None, None, :], nd)
            sff[sel] = nd * (d0 / 2.0)[:, None, None, None] ** 2

    return JetBatch(points=points, values=values, frame=frame, dphi=dphi, sff=sff)


def _fd_first(func, u0: np.ndarray, h: float, out_dim: int) -> np.ndarray:
    """Richardson-extrapolated central first derivatives of func at u0.

    Returns (K, out_dim, m) with entry [:, :, j] = d func / d u_j.
    """
    kk, m = u0.shape
    offsets = [h, -h, h / 2, -h / 2]
    u_all = np.concatenate(
        [u0[:, None, :] + s * np.eye(m)[None] for s in offsets], axis=1
    ).reshape(-1, m)
    vals = func(u_all).reshape(kk, len(offsets), m, out_dim)
    d_h = (vals[:, 0] - vals[:, 1]) / (2 * h)
    d_h2 = (vals[:, 2] - vals[:, 3]) / h
    out = (4.0 * d_h2 - d_h) / 3.0  # (K, j, out_dim)
    return out.transpose(0, 2, 1)


def _fd_first_tensor(func, u0: np.ndarray, h: float, out_shape: tuple) -> np.ndarray:
    """Like :func:`_fd_first` for tensor-valued func; returns (K, i, *out_shape)."""
    kk, m = u0.shape
    offsets = [h, -h, h / 2, -h / 2]
    u_all = np.concatenate(
        [u0[:, None, :] + s * np.eye(m)[None] for s in offsets], axis=1
    ).reshape(-1, m)
    vals = func(u_all).reshape(kk, len(offsets), m, *out_shape)
    d_h = (vals[:, 0] - vals[:, 1]) / (2 * h)
    d_h2 = (vals[:, 2] - vals[:, 3]) / h
    return (4.0 * d_h2 - d_h) / 3.0


def _fd_second(func, u0: np.ndarray, vals0: np.ndarray, h: float, out_dim: int) -> np.ndarray:
    """Richardson-extrapolated second derivatives d^2 func / du_i du_j.

    Returns (K, i, j, out_dim); the mixed stencil is symmetric in (i, j) by
    construction.
    """
    kk, m = u0.shape

    def raw(step: float) -> np.ndarray:
        eye = np.eye(m)
        out = np.empty((kk, m, m, out_dim))
        plus = func((u0[:, None, :] + step * eye[None]).reshape(-1, m)).reshape(kk, m, out_dim)
        minus = func((u0[:, None, :] - step * eye[None]).reshape(-1, m)).reshape(kk, m, out_dim)
        for i in range(m):
            out[:, i, i] = (plus[:, i] - 2.0 * vals0 + minus[:, i]) / step**2
        if m > 1:
            pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
            stencil = []
            for i, j in pairs:
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    stencil.append(u0 + step * (si * eye[i] + sj * eye[j]))
            vals = func(np.concatenate(stencil, axis=0)).reshape(len(pairs), 4, kk, out_dim)
            for p, (i, j) in enumerate(pairs):
                mixed = (vals[p, 0] - vals[p, 1] - vals[p, 2] + vals[p, 3]) / (4.0 * step**2)
                out[:, i, j] = mixed
                out[:, j, i] = mixed
        return out

    return (4.0 * raw(h / 2) - raw(h)) / 3.0


# ---------------------------------------------------------------------------
# built-in maps


class IdentityMap(SphereMap):
    """The identity self-map of S^m (totally geodesic)."""

    def __init__(self, m: int):
        if m < 2:
            raise ValueError("identity map needs m >= 2")
        self.domain_dim = m
        self.target = unit_sphere(m)
        self.name = f"identity:{m}"

    def values(self, points):
        return _as_points(points).copy()

    def ambient_jacobian(self, points):
        points = _as_points(points)
        eye = np.eye(points.shape[1])
        return eye[None] - points[:, :, None] * points[:, None, :]

    def sff_bilinear(self, points, U, V):
        return np.zeros((_as_points(points).shape[0], self.target.ambient_dim))


class LinearMap(SphereMap):
    """Restriction of an orthogonal transformation: an isometry of S^m."""

    def __init__(self, matrix: np.ndarray, name: str | None = None):
        q = np.asarray(matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(q @ q.T, np.eye(q.shape[0]), atol=1e-12):
            raise ValueError("matrix must be orthogonal")
        self.matrix = q
        self.domain_dim = q.shape[0] - 1
        self.target = unit_sphere(self.domain_dim)
        self.name = name or "linear"

    def values(self, points):
        return _as_points(points) @ self.matrix.T

    def ambient_jacobian(self, points):
        n = _as_points(points).shape[0]
        return np.broadcast_to(self.matrix, (n, *self.matrix.shape)).copy()

    def sff_bilinear(self, points, U, V):
        return np.zeros((_as_points(points).shape[0], self.target.ambient_dim))


class ConstantMap(SphereMap):
    """Map sending everything to one target point (the vacuum solution)."""

    def __init__(self, m: int, target: TargetGeometry, point: np.ndarray | None = None):
        self.domain_dim = m
        self.target = target
        if point is None:
            point = np.zeros(target.ambient_dim)
            point[0] = target.radius
        self.point = np.asarray(point, dtype=float)
        self.name = f"constant:{m}:{target.dim}"

    def values(self, points):
        n = _as_points(points).shape[0]
        return np.broadcast_to(self.point, (n, self.point.size)).copy()

    def ambient_jacobian(self, points):
        n = _as_points(points).shape[0]
        return np.zeros((n, self.target.ambient_dim, self.domain_dim + 1))

    def sff_bilinear(self, points, U, V):
        return np.zeros((_as_points(points).shape[0], self.target.ambient_dim))


class HopfMap(SphereMap):
    """The Riemannian submersion S^3 -> S^2(1/2) with great-circle fibers.

    Realized through the quadratic formula
    (z1, z2) |-> (Re(2 z1 conj(z2)), Im(2 z1 conj(z2)), |z1|^2 - |z2|^2) / 2
    on S^3 in C^2, so the differential is linear in x and the second
    fundamental form is the tangential projection of a constant bilinear map.
    """

    def __init__(self):
        self.domain_dim = 3
        self.target = kahler_surface()
        self.name = "hopf"

    def values(self, points):
        x = _as_points(points)
        x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
        out = np.empty((x.shape[0], 3))
        out[:, 0] = x1 * x3 + x2 * x4
        out[:, 1] = x2 * x3 - x1 * x4
        out[:, 2] = 0.5 * (x1**2 + x2**2 - x3**2 - x4**2)
        return out

    def ambient_jacobian(self, points):
        x = _as_points(points)
        x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
        jac = np.empty((x.shape[0], 3, 4))
        jac[:, 0, 0], jac[:, 0, 1], jac[:, 0, 2], jac[:, 0, 3] = x3, x4, x1, x2
        jac[:, 1, 0], jac[:, 1, 1], jac[:, 1, 2], jac[:, 1, 3] = -x4, x3, x2, -x1
        jac[:, 2, 0], jac[:, 2, 1], jac[:, 2, 2], jac[:, 2, 3] = x1, x2, -x3, -x4
        return jac

    def sff_bilinear(self, points, U, V):
        points = _as_points(points)
        u = _as_points(U)
        v = _as_points(V)
        b = np.empty((points.shape[0], 3))
        b[:, 0] = u[:, 0] * v[:, 2] + u[:, 2] * v[:, 0] + u[:, 1] * v[:, 3] + u[:, 3] * v[:, 1]
        b[:, 1] = u[:, 1] * v[:, 2] + u[:, 2] * v[:, 1] - u[:, 0] * v[:, 3] - u[:, 3] * v[:, 0]
        b[:, 2] = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] - u[:, 2] * v[:, 2] - u[:, 3] * v[:, 3]
        return self.target.project(self.values(points), b)


class SuspensionMap(SphereMap):
    """Degree-1 conformal self-map of S^m rescaling the polar profile.

    In the stereographic chart centered on the pole along the first axis the
    map is multiplication by c, so jets come from the closed-form chart
    derivatives.  At the two poles the smooth extension has dilation c^2
    (resp. 1/c^2); grid nodes never sit exactly there.
    """

    def __init__(self, m: int, c: float):
        if m < 2:
            raise ValueError("suspension needs m >= 2")
        if c <= 0:
            raise ValueError("suspension parameter c must be positive")
        self.domain_dim = m
        self.c = float(c)
        self.target = unit_sphere(m)
        self.name = f"suspension:{m}:{c:g}"
        self._north = Chart("north", m, axis=0)
        self._south = Chart("south", m, axis=0)

    def _route(self, points):
        points = _as_points(points)
        mask = points[:, 0] >= 0.0
        return points, mask

    def profile_dilation(self, s) -> np.ndarray:
        """Squared stretch of the pullback metric at polar angle s.

        All eigenvalues of the pullback metric equal this value; its square
        root c(1+tan^2(s/2))/(1+c^2 tan^2(s/2)) is the linear stretch.
        """
        s = np.asarray(s, dtype=float)
        t2 = np.tan(s / 2.0) ** 2
        lam = self.c * (1.0 + t2) / (1.0 + self.c**2 * t2)
        return lam**2

    def values(self, points):
        points, mask = self._route(points)
        out = np.empty_like(points)
        for chart, scale, sel in ((self._north, self.c, mask), (self._south, 1.0 / self.c, ~mask)):
            if not np.any(sel):
                continue
            u = chart.to_chart(points[sel])
            out[sel] = chart.to_sphere(scale * u)
        return out

    def jets(self, points, order: int = 2, mode: str = "auto") -> JetBatch:
        if mode == "fd_values":
            return _fd_jets(self, _as_points(points), order, mode=mode)
        points, mask = self._route(points)
        n, mp1 = points.shape
        m = mp1 - 1
        values = np.empty_like(points)
        frame = np.empty((n, m, mp1))
        dphi = np.empty((n, m, mp1))
        sff = np.empty((n, m, m, mp1)) if order >= 2 else None
        for chart, scale, sel in ((self._north, self.c, mask), (self._south, 1.0 / self.c, ~mask)):
            if not np.any(sel):
                continue
            u0 = chart.to_chart(points[sel])
            v0 = scale * u0
            d0 = 1.0 + np.sum(u0 * u0, axis=1)
            values[sel] = chart.to_sphere(v0)
            frame[sel] = chart.frame(u0)
            g_chart = scale * chart.jacobian(v0)  # (K, m+1, j)
            dphi[sel] = np.einsum("naj,n->nja", g_chart, d0 / 2.0)
            if order >= 2:
                hess = scale**2 * chart.hessian(v0)  # (K, m+1, i, j)
                gamma = chart.christoffel(u0)
                corr = np.einsum("nkij,nak->naij", gamma, g_chart)
                nd = (hess - corr).transpose(0, 2, 3, 1)  # (K, i, j, m+1)
                nd = self.target.project(values[sel][:, None, None, :], nd)
                sff[sel] = nd * (d0 / 2.0)[:, None, None, None] ** 2
        return JetBatch(points=points, values=values, frame=frame, dphi=dphi, sff=sff)


class PolynomialMap(SphereMap):
    """Seeded random polynomial map, radially normalized onto the target.

    Coefficients of a degree <= d polynomial R^{m+1} -> R^{n+1} are drawn
    from a seeded generator; the constant term is inflated until the image
    stays safely away from the origin, keeping the normalization smooth.
    Surface targets (n = 2) use the reference radius 1/2.
    """

    def __init__(self, seed: int, degree: int, m: int, n: int):
        if degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.domain_dim = m
        self.seed = int(seed)
        self.degree = int(degree)
        self.target = kahler_surface() if n == 2 else unit_sphere(n)
        self.name = f"poly:{seed}:{degree}:{m}:{n}"
        self._exps = _monomial_exponents(m + 1, degree)
        rng = np.random.default_rng(self.seed)
        scale = 1.0 / (1.0 + np.sum(self._exps, axis=1))
        self.coeffs = rng.normal(size=(self._exps.shape[0], n + 1)) * scale[:, None]
        self._ensure_nonvanishing()

    def _ensure_nonvanishing(self):
        probe = build_grid(self.domain_dim, 8).nodes
        const_idx = int(np.argmax(np.all(self._exps == 0, axis=1)))
        direction = self.coeffs[const_idx].copy()
        if np.linalg.norm(direction) < 1e-12:
            direction = np.ones(self.coeffs.shape[1])
        direction /= np.linalg.norm(direction)
        for _ in range(64):
            g = self._poly(probe)
            norms = np.linalg.norm(g, axis=1)
            rms = float(np.sqrt(np.mean(norms**2)))
            if norms.min() > 0.25 * rms:
                return
            self.coeffs[const_idx] += 0.25 * max(rms, 1.0) * direction
        raise RuntimeError("could not keep polynomial image away from the origin")

    def _poly(self, y: np.ndarray) -> np.ndarray:
        mono = np.prod(y[:, None, :] ** self._exps[None, :, :], axis=2)
        return mono @ self.coeffs

    def _poly_jac(self, y: np.ndarray) -> np.ndarray:
        n, mp1 = y.shape
        out = np.zeros((n, self.coeffs.shape[1], mp1))
        for b in range(mp1):
            e = self._exps[:, b]
            active = e > 0
            if not np.any(active):
                continue
            exps_b = self._exps[active].copy()
            exps_b[:, b] -= 1
            mono = np.prod(y[:, None, :] ** exps_b[None, :, :], axis=2)
            out[:, :, b] = (mono * e[active][None, :]) @ self.coeffs[active]
        return out

    def values(self, points):
        g = self._poly(_as_points(points))
        return self.target.radius * g / np.linalg.norm(g, axis=1)[:, None]

    def ambient_jacobian(self, points):
        points = _as_points(points)
        g = self._poly(points)
        norms = np.linalg.norm(g, axis=1)
        ghat = g / norms[:, None]
        dg = self._poly_jac(points)
        proj = dg - ghat[:, :, None] * np.einsum("nk,nkb->nb", ghat, dg)[:, None, :]
        return self.target.radius * proj / norms[:, None, None]


class ComposedMap(SphereMap):
    """Composition outer(inner(x)) with chain-rule jets when both factors
    have analytic derivatives."""

    def __init__(self, outer: SphereMap, inner: SphereMap):
        if inner.target.dim != outer.domain_dim:
            raise ValueError(
                f"cannot compose: inner target S^{inner.target.dim} != outer domain S^{outer.domain_dim}"
            )
        if abs(inner.target.radius - 1.0) > 1e-12:
            raise ValueError("composition requires a unit-sphere intermediate")
        self.outer = outer
        self.inner = inner
        self.domain_dim = inner.domain_dim
        self.target = outer.target
        self.name = f"compose({outer.name},{inner.name})"

    @property
    def has_analytic_jacobian(self) -> bool:
        return self.inner.has_analytic_jacobian and self.outer.has_analytic_jacobian

    @property
    def has_analytic_sff(self) -> bool:
        return (
            self.has_analytic_jacobian
            and self.inner.has_analytic_sff
            and self.outer.has_analytic_sff
        )

    def values(self, points):
        return self.outer.values(self.inner.values(points))

    def ambient_jacobian(self, points):
        points = _as_points(points)
        mid = self.inner.values(points)
        return np.einsum("nkb,nba->nka", self.outer.ambient_jacobian(mid), self.inner.ambient_jacobian(points))

    def sff_bilinear(self, points, U, V):
        points = _as_points(points)
        mid = self.inner.values(points)
        du = self.inner.differential(points, U)
        dv = self.inner.differential(points, V)
        outer_term = self.outer.sff_bilinear(mid, du, dv)
        inner_term = self.inner.sff_bilinear(points, U, V)
        push = np.einsum("nkb,nb->nk", self.outer.ambient_jacobian(mid), inner_term)
        return outer_term + push


# ---------------------------------------------------------------------------
# registry / derived quantities


def random_rotation(m: int, seed: int) -> LinearMap:
    """A seeded rotation of S^m (QR of a Gaussian matrix, det +1)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(m + 1, m + 1)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return LinearMap(q, name=f"rotate:{m}:{seed}")


def _monomial_exponents(nvars: int, degree: int) -> np.ndarray:
    def rec(nv, deg):
        if nv == 1:
            return [[d] for d in range(deg + 1)]
        out = []
        for d in range(deg + 1):
            for tail in rec(nv - 1, deg - d):
                out.append([d] + tail)
        return out

    return np.array(rec(nvars, degree), dtype=int)


def parse_map(spec: str) -> SphereMap:
    """Build a map from its registry id (see module docstring)."""
    spec = spec.strip()
    if spec.startswith("compose(") and spec.endswith(")"):
        inner_args = spec[len("compose(") : -1]
        depth = 0
        for i, ch in enumerate(inner_args):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                return ComposedMap(parse_map(inner_args[:i]), parse_map(inner_args[i + 1 :]))
        raise ValueError(f"malformed composition: {spec!r}")
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "identity" and len(parts) == 2:
            return IdentityMap(int(parts[1]))
        if kind == "hopf" and len(parts) == 1:
            return HopfMap()
        if kind == "suspension" and len(parts) == 3:
            return SuspensionMap(int(parts[1]), float(parts[2]))
        if kind == "poly" and len(parts) == 5:
            return PolynomialMap(int(parts[1]), int(parts[2]), int(parts[3]), int(parts[4]))
        if kind == "constant" and len(parts) == 3:
            m, n = int(parts[1]), int(parts[2])
            return ConstantMap(m, kahler_surface() if n == 2 else unit_sphere(n))
        if kind == "rotate" and len(parts) == 3:
            return random_rotation(int(parts[1]), int(parts[2]))
        if kind == "reflect" and len(parts) == 3:
            m, axis = int(parts[1]), int(parts[2])
            q = np.eye(m + 1)
            q[axis, axis] = -1.0
            return LinearMap(q, name=f"reflect:{m}:{axis}")
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad map id {spec!r}: {exc}") from exc
    raise ValueError(f"unknown map id {spec!r}")


def eval_jet(mapping: SphereMap, x, order: int = 2, mode: str = "auto") -> MapJet:
    """Pointwise 2-jet at a single point, in ambient coordinates."""
    point = np.asarray(getattr(x, "coords", x), dtype=float)
    jets = mapping.jets(point[None, :], order=order, mode=mode)
    dphi_amb = jets.ambient_jacobian()[0]
    if order >= 2:
        sff_amb = np.einsum("ijk,ia,jb->abk", jets.sff[0], jets.frame[0], jets.frame[0])
    else:
        sff_amb = np.zeros((point.size, point.size, mapping.target.ambient_dim))
    return MapJet(point=point, value=jets.values[0], dphi=dphi_amb, sff=sff_amb)


def topological_degree(mapping: SphereMap, grid: QuadratureGrid) -> tuple[int, float]:
    """Degree of an equidimensional map via the normalized Jacobian integral.

    Returns (degree, raw value); errors out if the raw value is farther than
    0.1 from every integer, which signals insufficient resolution.
    """
    if mapping.target.dim != mapping.domain_dim:
        raise ValueError("topological degree needs an equidimensional map")
    jets = mapping.jets(grid.nodes, order=1)
    m = mapping.domain_dim
    nhat = mapping.target.normal(jets.values)
    mat = np.concatenate([nhat[:, :, None], np.transpose(jets.dphi, (0, 2, 1))], axis=2)
    dom = np.concatenate([grid.nodes[:, :, None], np.transpose(jets.frame, (0, 2, 1))], axis=2)
    dets = np.linalg.det(mat) * np.sign(np.linalg.det(dom))
    raw = integrate(grid, dets) / (sphere_volume(m) * mapping.target.radius**m)
    nearest = round(raw)
    if abs(raw - nearest) > 0.1:
        raise ValueError(f"degree integral {raw:.4f} is not close to an integer; refine the grid")
    return int(nearest), float(raw)


def isotropy_check(mapping: SphereMap, grid: QuadratureGrid, tol: float = 1e-8) -> tuple[bool, float]:
    """Whether the pullback of the fundamental form vanishes on the grid.

    Returns (is_isotropic, max pointwise norm of the pulled-back 2-form).
    """
    from .pullbacks import pullback_batch

    if not mapping.target.is_surface:
        raise ValueError("isotropy is defined for surface targets only")
    data = pullback_batch(mapping.jets(grid.nodes, order=1), mapping.target)
    max_norm = float(np.sqrt(data.omega_sq.max()))
    return max_norm <= tol, max_norm
