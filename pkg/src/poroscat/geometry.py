"""Curvilinear surface patches, Chebyshev surface meshes and closest-point search.

Closed scatterer surfaces are covered by six logically rectangular patches
obtained by normalizing the cube faces onto the unit sphere and mapping the
sphere through a shape transform (ball, ellipsoid, or a smooth bean-like
deformation).  Each face may be split into ``fs x fs`` sub-patches.  All maps
have analytic first derivatives, so normals, Jacobians and metric data are
exact at any parameter point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Patch",
    "SurfaceMesh",
    "ClosestPoint",
    "build_mesh",
    "metric_frame",
    "closest_point",
]

# face -> (axis of the face, sign, axes filled by (u, v)); chosen so that
# a_u x a_v points outward on the cube
_FACES = (
    (0, +1.0, 1, 2),  # +x: c = (1, u, v)
    (0, -1.0, 2, 1),  # -x: c = (-1, v, u)
    (1, +1.0, 2, 0),  # +y: c = (v, 1, u)
    (1, -1.0, 0, 2),  # -y: c = (u, -1, v)
    (2, +1.0, 0, 1),  # +z: c = (u, v, 1)
    (2, -1.0, 1, 0),  # -z: c = (v, u, -1)
)


class _ShapeMap:
    """Transform of the unit sphere with analytic Jacobian."""

    def point(self, s):
        raise NotImplementedError

    def jacobian(self, s):
        raise NotImplementedError


class _Ellipsoid(_ShapeMap):
    def __init__(self, semi_axes):
        self.semi = np.asarray(semi_axes, dtype=float)
        if np.any(self.semi <= 0.0):
            raise ValueError(f"semi-axes must be positive, got {semi_axes}")

    def point(self, s):
        return s * self.semi

    def jacobian(self, s):
        J = np.zeros(s.shape[:-1] + (3, 3))
        for i in range(3):
            J[..., i, i] = self.semi[i]
        return J


class _Bean(_ShapeMap):
    """Kidney-like deformation of the sphere; parameters (a, b, c, d, e)."""

    def __init__(self, params):
        self.a, self.b, self.c, self.d, self.e = [float(p) for p in params]
        if min(self.a, self.b, self.d) <= 0.0 or abs(self.c) >= 1.0:
            raise ValueError(f"degenerate bean parameters {params}")

    def point(self, s):
        x = self.a * s[..., 0]
        y = self.b * s[..., 1] * (1.0 + self.c * s[..., 0])
        z = self.d * s[..., 2] + self.e * s[..., 0]
        return np.stack([x, y, z], axis=-1)

    def jacobian(self, s):
        J = np.zeros(s.shape[:-1] + (3, 3))
        J[..., 0, 0] = self.a
        J[..., 1, 0] = self.b * self.c * s[..., 1]
        J[..., 1, 1] = self.b * (1.0 + self.c * s[..., 0])
        J[..., 2, 0] = self.e
        J[..., 2, 2] = self.d
        return J


def _make_shape(shape: str, params) -> _ShapeMap:
    if shape == "ball":
        radius = float(params[0]) if params else 1.0
        return _Ellipsoid((radius, radius, radius))
    if shape == "ellipsoid":
        semi = tuple(params) if params else (1.0, 0.7, 0.6)
        return _Ellipsoid(semi)
    if shape == "bean":
        p = tuple(params) if params else (0.8, 0.8, 0.35, 0.8, 0.3)
        return _Bean(p)
    raise ValueError(f"unknown shape {shape!r}")


@dataclass
class Patch:
    """One logically-rectangular chart ``[-1,1]^2 -> R^3``."""

    face: int
    window: tuple  # (a0, a1, b0, b1) sub-square of the cube face
    shape: _ShapeMap

    def _cube(self, u, v):
        # equiangular face coordinates: tan(pi a/4) spreads the complex
        # singularities of the normalization, which buys several digits of
        # spectral accuracy at moderate N compared to the plain gnomonic map
        a0, a1, b0, b1 = self.window
        a = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * u
        b = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * v
        qa = 0.25 * np.pi * a
        qb = 0.25 * np.pi * b
        ta, tb = np.tan(qa), np.tan(qb)
        da = 0.25 * np.pi * 0.5 * (a1 - a0) / np.cos(qa) ** 2
        db = 0.25 * np.pi * 0.5 * (b1 - b0) / np.cos(qb) ** 2
        axis, sign, ia, ib = _FACES[self.face]
        c = np.zeros(np.shape(ta) + (3,))
        c[..., axis] = sign
        c[..., ia] = ta
        c[..., ib] = tb
        dc_du = np.zeros_like(c)
        dc_du[..., ia] = da
        dc_dv = np.zeros_like(c)
        dc_dv[..., ib] = db
        return c, dc_du, dc_dv

    def chart(self, u, v):
        """Surface point r(u,v); inputs broadcast, output (..., 3)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        c, _, _ = self._cube(u, v)
        norm = np.linalg.norm(c, axis=-1, keepdims=True)
        return self.shape.point(c / norm)

    def chart_derivs(self, u, v):
        """Return (r, a_u, a_v) with analytic tangents."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        c, dc_du, dc_dv = self._cube(u, v)
        norm = np.linalg.norm(c, axis=-1, keepdims=True)
        s = c / norm

        def proj(dc):
            # derivative of c/|c|
            return dc / norm - s * np.sum(s * dc, axis=-1, keepdims=True) / norm

        ds_du = proj(dc_du)
        ds_dv = proj(dc_dv)
        J = self.shape.jacobian(s)
        r = self.shape.point(s)
        a_u = np.einsum("...ij,...j->...i", J, ds_du)
        a_v = np.einsum("...ij,...j->...i", J, ds_dv)
        return r, a_u, a_v


def metric_frame(patch: Patch, u, v):
    """Full first-order geometric data at parameter points.

    Returns ``(r, a_u, a_v, normal, jacobian, ginv)`` where ``jacobian`` is
    the surface element ``sqrt(det G)`` and ``ginv`` the 2x2 inverse metric.
    """
    r, a_u, a_v = patch.chart_derivs(u, v)
    cross = np.cross(a_u, a_v)
    jac = np.linalg.norm(cross, axis=-1)
    if np.any(jac == 0.0):
        raise ValueError("degenerate parametrization: a_u x a_v = 0")
    normal = cross / jac[..., None]
    guu = np.sum(a_u * a_u, axis=-1)
    guv = np.sum(a_u * a_v, axis=-1)
    gvv = np.sum(a_v * a_v, axis=-1)
    det = guu * gvv - guv * guv
    ginv = np.empty(np.shape(guu) + (2, 2))
    ginv[..., 0, 0] = gvv / det
    ginv[..., 0, 1] = -guv / det
    ginv[..., 1, 0] = -guv / det
    ginv[..., 1, 1] = guu / det
    return r, a_u, a_v, normal, jac, ginv


@dataclass
class ClosestPoint:
    """Result of projecting a point onto one patch."""

    patch: int
    u: float
    v: float
    distance: float


class SurfaceMesh:
    """All patches of a closed surface with their Chebyshev node data."""

    def __init__(self, patches, N: int):
        from .surfops import ChebBasis

        if N < 4:
            raise ValueError(f"N must be >= 4, got {N}")
        self.patches = list(patches)
        self.N = int(N)
        self.basis = ChebBasis(N)
        u = self.basis.nodes
        U, V = np.meshgrid(u, u, indexing="ij")
        M = len(self.patches)
        self.nodes = np.empty((M, N, N, 3))
        self.normals = np.empty((M, N, N, 3))
        self.jacobians = np.empty((M, N, N))
        self.a_u = np.empty((M, N, N, 3))
        self.a_v = np.empty((M, N, N, 3))
        self.ginv = np.empty((M, N, N, 2, 2))
        for q, p in enumerate(self.patches):
            r, au, av, nrm, jac, ginv = metric_frame(p, U, V)
            self.nodes[q] = r
            self.a_u[q] = au
            self.a_v[q] = av
            self.normals[q] = nrm
            self.jacobians[q] = jac
            self.ginv[q] = ginv
        flat = self.nodes.reshape(M, -1, 3)
        self.centroids = flat.mean(axis=1)
        self.bound_radius = np.max(
            np.linalg.norm(flat - self.centroids[:, None, :], axis=-1), axis=1
        )
        # patch diameter from the node cloud; node hulls underestimate the
        # true patch only mildly at these orders
        self.diameters = np.empty(M)
        for q in range(M):
            d2 = np.sum(
                (flat[q][:, None, :] - flat[q][None, :, :]) ** 2, axis=-1
            )
            self.diameters[q] = np.sqrt(d2.max())

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    @property
    def n_nodes(self) -> int:
        return self.n_patches * self.N * self.N

    def nodes_flat(self):
        return self.nodes.reshape(-1, 3)

    def normals_flat(self):
        return self.normals.reshape(-1, 3)


def build_mesh(shape: str, N: int, faces_split: int = 1, params=()) -> SurfaceMesh:
    """Build the ``6*faces_split^2``-patch mesh of the requested shape.

    ``shape`` is one of ``ball`` (params: radius), ``ellipsoid`` (three
    semi-axes) or ``bean`` (five deformation constants).
    """
    if faces_split < 1:
        raise ValueError("faces_split must be >= 1")
    smap = _make_shape(shape, tuple(params))
    edges = np.linspace(-1.0, 1.0, faces_split + 1)
    patches = []
    for face in range(6):
        for i in range(faces_split):
            for j in range(faces_split):
                win = (edges[i], edges[i + 1], edges[j], edges[j + 1])
                patches.append(Patch(face=face, window=win, shape=smap))
    return SurfaceMesh(patches, N)


def _project_square(u):
    return np.clip(u, -1.0, 1.0)


def closest_point_on_patch(patch: Patch, x, seed, max_iter=30, tol=1e-12):
    """Damped Gauss-Newton projection of points ``x`` (n,3) onto one patch.

    ``seed`` is an (n,2) array of starting parameters.  Returns (uv, dist).
    Non-converged points keep their best iterate (the caller's coarse-grid
    seed bounds the error).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    uv = np.array(seed, dtype=float).reshape(-1, 2).copy()
    r, au, av = patch.chart_derivs(uv[:, 0], uv[:, 1])
    diff = x - r
    f = np.sum(diff * diff, axis=-1)
    active = np.ones(len(uv), dtype=bool)
    for _ in range(max_iter):
        if not np.any(active):
            break
        g1 = -2.0 * np.sum(diff * au, axis=-1)
        g2 = -2.0 * np.sum(diff * av, axis=-1)
        h11 = 2.0 * np.sum(au * au, axis=-1)
        h12 = 2.0 * np.sum(au * av, axis=-1)
        h22 = 2.0 * np.sum(av * av, axis=-1)
        det = h11 * h22 - h12 * h12
        det = np.where(np.abs(det) < 1e-300, 1.0, det)
        du = -(h22 * g1 - h12 * g2) / det
        dv = -(-h12 * g1 + h11 * g2) / det
        step = np.stack([du, dv], axis=-1)
        step[~active] = 0.0
        scale = np.ones(len(uv))
        improved = np.zeros(len(uv), dtype=bool)
        best_uv = uv.copy()
        best_f = f.copy()
        for _damp in range(8):
            trial = _project_square(uv + scale[:, None] * step)
            rt, aut, avt = patch.chart_derivs(trial[:, 0], trial[:, 1])
            dt = x - rt
            ft = np.sum(dt * dt, axis=-1)
            better = (ft < best_f) & active & ~improved
            best_uv[better] = trial[better]
            best_f[better] = ft[better]
            improved |= better
            if np.all(improved | ~active):
                break
            scale[~improved] *= 0.5
        moved = np.linalg.norm(best_uv - uv, axis=-1)
        uv = best_uv
        r, au, av = patch.chart_derivs(uv[:, 0], uv[:, 1])
        diff = x - r
        f = np.sum(diff * diff, axis=-1)
        active &= improved & (moved > tol)
    return uv, np.sqrt(f)


def closest_point(mesh: SurfaceMesh, x, hint: ClosestPoint | None = None) -> ClosestPoint:
    """Globally closest surface point to ``x`` over all patches."""
    x = np.asarray(x, dtype=float)
    best = None
    u = mesh.basis.nodes
    U, V = np.meshgrid(u, u, indexing="ij")
    grid_uv = np.stack([U.ravel(), V.ravel()], axis=-1)
    candidates = range(mesh.n_patches)
    if hint is not None:
        candidates = [hint.patch] + [q for q in range(mesh.n_patches) if q != hint.patch]
    for q in candidates:
        d_nodes = np.linalg.norm(mesh.nodes[q].reshape(-1, 3) - x, axis=-1)
        if best is not None:
            # patch cannot beat the current best
            lower = np.linalg.norm(x - mesh.centroids[q]) - mesh.bound_radius[q]
            if lower > best.distance:
                continue
        seed = grid_uv[np.argmin(d_nodes)]
        if hint is not None and q == hint.patch:
            seed = np.array([hint.u, hint.v])
        uv, dist = closest_point_on_patch(mesh.patches[q], x[None, :], seed[None, :])
        if best is None or dist[0] < best.distance:
            best = ClosestPoint(patch=q, u=float(uv[0, 0]), v=float(uv[0, 1]), distance=float(dist[0]))
    return best
