"""Chebyshev interpolation/differentiation on patch grids and tangential
surface operators (surface gradient, Gunter derivative, tangential curls).

Fields live on first-kind Chebyshev tensor grids per patch; differentiation
is spectral within each patch.  Tangential operators never require cross-patch
stitching: they are only ever applied to globally smooth surface fields.
"""

from __future__ import annotations

import numpy as np

from .geometry import SurfaceMesh

__all__ = [
    "ChebBasis",
    "SurfaceField",
    "fejer_weights",
    "patch_partials",
    "surface_gradient",
    "gunter_apply",
    "tau1_apply",
    "tau2_apply",
    "interpolate",
]


def fejer_weights(N: int) -> np.ndarray:
    """First Fejer rule weights on the first-kind Chebyshev nodes.

    Exact for polynomials up to degree ``N - 1``; all weights positive and
    summing to 2.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    j = np.arange(N)
    theta = (2.0 * j + 1.0) * np.pi / (2.0 * N)
    w = np.ones(N)
    for ell in range(1, N // 2 + 1):
        w -= 2.0 * np.cos(2.0 * ell * theta) / (4.0 * ell**2 - 1.0)
    return 2.0 * w / N


class ChebBasis:
    """Nodes, quadrature weights, differentiation and cardinal evaluation."""

    def __init__(self, N: int):
        self.N = int(N)
        j = np.arange(N)
        self.theta = (2.0 * j + 1.0) * np.pi / (2.0 * N)
        self.nodes = np.cos(self.theta)
        self.weights = fejer_weights(N)
        # values -> Chebyshev coefficients (discrete orthogonality)
        alpha = np.full(N, 2.0)
        alpha[0] = 1.0
        n = np.arange(N)
        self.coef_matrix = (alpha[:, None] / N) * np.cos(
            n[:, None] * self.theta[None, :]
        )
        # derivative values at nodes: T_n'(cos t) = n sin(n t)/sin(t)
        tn_prime = (
            n[None, :]
            * np.sin(n[None, :] * self.theta[:, None])
            / np.sin(self.theta[:, None])
        )
        self.diff_matrix = tn_prime @ self.coef_matrix

    def eval_matrix(self, pts) -> np.ndarray:
        """Cardinal-basis values a_j(pts): shape (len(pts), N); exact at nodes."""
        pts = np.clip(np.asarray(pts, dtype=float), -1.0, 1.0)
        npts = pts.shape[0]
        T = np.empty((npts, self.N))
        T[:, 0] = 1.0
        if self.N > 1:
            T[:, 1] = pts
        for m in range(2, self.N):
            T[:, m] = 2.0 * pts * T[:, m - 1] - T[:, m - 2]
        return T @ self.coef_matrix


class SurfaceField:
    """Complex nodal values of a 1-, 3- or 4-component field on a mesh.

    Data layout is ``(ncomp, M, N, N)``; the flattened view matches the
    degree-of-freedom ordering of the linear systems.
    """

    def __init__(self, mesh: SurfaceMesh, data):
        data = np.asarray(data, dtype=complex)
        if data.ndim == 3:
            data = data[None]
        if data.shape[1:] != (mesh.n_patches, mesh.N, mesh.N):
            raise ValueError(
                f"field shape {data.shape} does not match mesh "
                f"({mesh.n_patches} patches, N={mesh.N})"
            )
        if data.shape[0] not in (1, 3, 4):
            raise ValueError(f"component count must be 1, 3 or 4, got {data.shape[0]}")
        self.mesh = mesh
        self.data = data

    @classmethod
    def zeros(cls, mesh: SurfaceMesh, ncomp: int) -> "SurfaceField":
        return cls(mesh, np.zeros((ncomp, mesh.n_patches, mesh.N, mesh.N), complex))

    @classmethod
    def from_callable(cls, mesh: SurfaceMesh, fn, ncomp: int) -> "SurfaceField":
        """Sample ``fn(points) -> (..., ncomp)`` at all mesh nodes."""
        vals = np.asarray(fn(mesh.nodes_flat()))
        vals = vals.reshape(mesh.n_patches, mesh.N, mesh.N, ncomp)
        return cls(mesh, np.moveaxis(vals, -1, 0))

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    @classmethod
    def from_flat(cls, mesh: SurfaceMesh, vec, ncomp: int) -> "SurfaceField":
        return cls(mesh, np.asarray(vec, complex).reshape(ncomp, mesh.n_patches, mesh.N, mesh.N))

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.data)))


def patch_partials(mesh: SurfaceMesh, f):
    """Spectral parameter derivatives (f_u, f_v) of nodal data (..., M, N, N)."""
    D = mesh.basis.diff_matrix
    f = np.asarray(f)
    f_u = np.einsum("in,...qnj->...qij", D, f)
    f_v = np.einsum("jn,...qin->...qij", D, f)
    return f_u, f_v


def surface_gradient(mesh: SurfaceMesh, f):
    """Surface gradient of scalar nodal data; returns (3, ..., M, N, N).

    Uses the intrinsic metric form ``sum_ij g^{ij} d_i f a_j``; the result is
    tangential to the accuracy of the spectral derivatives.
    """
    f_u, f_v = patch_partials(mesh, f)
    g = mesh.ginv  # (M,N,N,2,2)
    cu = g[..., 0, 0] * f_u + g[..., 0, 1] * f_v
    cv = g[..., 1, 0] * f_u + g[..., 1, 1] * f_v
    au = np.moveaxis(mesh.a_u, -1, 0)  # (3,M,N,N)
    av = np.moveaxis(mesh.a_v, -1, 0)
    pad = (3,) + (1,) * (cu.ndim - 3) + au.shape[1:]
    return au.reshape(pad) * cu[None] + av.reshape(pad) * cv[None]


def gunter_apply(mesh: SurfaceMesh, u):
    """Gunter derivative of a 3-component field: (Mu)_i = sum_j (nu_j d_i - nu_i d_j) u_j."""
    u = np.asarray(u)
    if u.shape[0] != 3:
        raise ValueError("gunter_apply expects a 3-component field")
    nu = np.moveaxis(mesh.normals, -1, 0)  # (3,M,N,N)
    grads = np.stack([surface_gradient(mesh, u[j]) for j in range(3)])  # (j,i,...,M,N,N)
    nu_b = nu.reshape((3,) + (1,) * (grads.ndim - 5) + nu.shape[1:])
    out = np.einsum("j...,ji...->i...", nu_b, grads)
    trace = np.einsum("jj...->...", grads)
    return out - nu_b * trace[None]


def tau1_apply(mesh: SurfaceMesh, p):
    """Tangential curl of a scalar: nu x grad_S p; returns (3, ..., M, N, N)."""
    g = surface_gradient(mesh, p)
    nu = np.moveaxis(mesh.normals, -1, 0)
    nshape = (3,) + (1,) * (g.ndim - 4) + nu.shape[1:]
    nu_b = nu.reshape(nshape)
    return np.cross(nu_b, g, axisa=0, axisb=0, axisc=0)


def tau2_apply(mesh: SurfaceMesh, v):
    """Pairing (nu x grad_S) . v for a 3-component field; scalar output."""
    v = np.asarray(v)
    if v.shape[0] != 3:
        raise ValueError("tau2_apply expects a 3-component field")
    out = 0.0
    nu = np.moveaxis(mesh.normals, -1, 0)
    nshape = (3,) + (1,) * (v.ndim - 4) + nu.shape[1:]
    nu_b = nu.reshape(nshape)
    for k in range(3):
        g = surface_gradient(mesh, v[k])
        out = out + np.cross(nu_b, g, axisa=0, axisb=0, axisc=0)[k]
    return out


def interpolate(mesh: SurfaceMesh, field, patch: int, uv):
    """Cardinal interpolation of nodal data (..., M, N, N) at (n,2) parameters."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    Pu = mesh.basis.eval_matrix(uv[:, 0])
    Pv = mesh.basis.eval_matrix(uv[:, 1])
    f = np.asarray(field)[..., patch, :, :]
    return np.einsum("...ij,pi,pj->...p", f, Pu, Pv)
