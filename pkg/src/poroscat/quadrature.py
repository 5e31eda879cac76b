"""Rectangular-polar quadrature for weakly singular surface integrals.

Far from the singularity, patch integrals use the tensor Fejer rule on the
existing Chebyshev grid.  For targets on or near a patch, the integral is
pulled back through one-dimensional graded maps centered at the closest
parameter point, sampled with an oversampled Fejer rule, and contracted with
the cardinal interpolation of the density; those contractions are precomputed
once per (target, patch) pair as coefficient rows over a small basis of
radial kernels so solver iterations stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ClosestPoint, SurfaceMesh, closest_point_on_patch
from .kernels import FOUR_PI, RadialWorkspace
from .surfops import SurfaceField

__all__ = [
    "GradedMap",
    "graded_map",
    "AdjacencyDecision",
    "classify",
    "nonadjacent_apply",
    "adjacent_apply",
    "KernelSpec",
    "Request",
    "QuadratureEngine",
]


class GradedMap:
    """Monotone map of [-1,1] onto itself clustering nodes at ``center``.

    Polynomial grading of order ``p``: both endpoints are fixed and the first
    ``p-1`` derivatives vanish at the preimage of ``center`` (which is
    ``center`` itself).
    """

    def __init__(self, center: float, p: int):
        if not -1.0 <= center <= 1.0:
            raise ValueError(f"center must lie in [-1,1], got {center}")
        if p < 2:
            raise ValueError("grading order p must be >= 2")
        self.center = float(center)
        self.p = int(p)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        c, p = self.center, self.p
        out = np.empty_like(s)
        hi = s >= c
        span_hi = 1.0 - c
        span_lo = 1.0 + c
        if span_hi > 0.0:
            t = (s[hi] - c) / span_hi
            out[hi] = c + span_hi * t**p
        else:
            out[hi] = c
        if span_lo > 0.0:
            t = (c - s[~hi]) / span_lo
            out[~hi] = c - span_lo * t**p
        else:
            out[~hi] = c
        return out

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        c, p = self.center, self.p
        out = np.empty_like(s)
        hi = s >= c
        span_hi = 1.0 - c
        span_lo = 1.0 + c
        out[hi] = p * ((s[hi] - c) / span_hi) ** (p - 1) if span_hi > 0 else 0.0
        out[~hi] = p * ((c - s[~hi]) / span_lo) ** (p - 1) if span_lo > 0 else 0.0
        return out


def graded_map(center: float, p: int) -> GradedMap:
    return GradedMap(center, p)


@dataclass
class AdjacencyDecision:
    """Integration mode of one (target, patch) pair."""

    target: int
    patch: int
    mode: str  # 'self' | 'near' | 'far'
    closest: ClosestPoint | None = None


def classify(
    mesh: SurfaceMesh, x, patch: int, theta: float, self_patch: int | None = None
) -> AdjacencyDecision:
    """Classify one target point against one source patch.

    ``self`` if the target lies on the patch (``self_patch == patch``),
    ``near`` if its closest-point distance is at most ``theta`` times the
    patch diameter, otherwise ``far``.
    """
    x = np.asarray(x, dtype=float)
    if self_patch is not None and self_patch == patch:
        cp = closest_point_of_node(mesh, x, patch)
        return AdjacencyDecision(-1, patch, "self", cp)
    u = mesh.basis.nodes
    U, V = np.meshgrid(u, u, indexing="ij")
    grid = np.stack([U.ravel(), V.ravel()], -1)
    d_nodes = np.linalg.norm(mesh.nodes[patch].reshape(-1, 3) - x, axis=-1)
    seed = grid[np.argmin(d_nodes)]
    uv, dist = closest_point_on_patch(mesh.patches[patch], x[None], seed[None])
    cp = ClosestPoint(patch=patch, u=float(uv[0, 0]), v=float(uv[0, 1]), distance=float(dist[0]))
    mode = "near" if dist[0] <= theta * mesh.diameters[patch] else "far"
    return AdjacencyDecision(-1, patch, mode, cp if mode != "far" else None)


def closest_point_of_node(mesh: SurfaceMesh, x, patch: int) -> ClosestPoint:
    """Exact parameters when the target is one of the patch's own nodes."""
    d = np.linalg.norm(mesh.nodes[patch].reshape(-1, 3) - np.asarray(x), axis=-1)
    k = int(np.argmin(d))
    i, j = divmod(k, mesh.N)
    return ClosestPoint(
        patch=patch, u=float(mesh.basis.nodes[i]), v=float(mesh.basis.nodes[j]), distance=float(d[k])
    )


def nonadjacent_apply(mesh: SurfaceMesh, kernel, density, target) -> np.ndarray:
    """Plain Fejer-rule patch sums for a far target.

    ``kernel(x, y, nu_y) -> (...,)`` is evaluated at all source nodes;
    ``density`` has shape (..., M, N, N).
    """
    x = np.asarray(target, dtype=float)
    w = mesh.basis.weights
    W = mesh.jacobians * w[None, :, None] * w[None, None, :]
    vals = kernel(x, mesh.nodes, mesh.normals)
    dens = np.asarray(density, dtype=complex)
    return np.einsum("...qij,qij->...", vals * dens, W)


def adjacent_apply(
    mesh: SurfaceMesh,
    kernel,
    density,
    target,
    patch: int,
    nbeta: int,
    p: int = 3,
    closest: ClosestPoint | None = None,
) -> np.ndarray:
    """Graded-map rule for one (target, patch) pair.

    The density (..., M, N, N) is cardinal-interpolated onto the graded grid;
    ``nbeta`` must not undersample the underlying grid.
    """
    if nbeta < mesh.N:
        raise ValueError(f"nbeta={nbeta} must be >= N={mesh.N}")
    from .surfops import ChebBasis

    x = np.asarray(target, dtype=float)
    if closest is None:
        dec = classify(mesh, x, patch, theta=np.inf)
        closest = dec.closest
    bq = ChebBasis(nbeta)
    mu = GradedMap(closest.u, p)
    mv = GradedMap(closest.v, p)
    su = mu(bq.nodes)
    sv = mv(bq.nodes)
    wu = mu.deriv(bq.nodes) * bq.weights
    wv = mv.deriv(bq.nodes) * bq.weights
    from .geometry import metric_frame

    UU, VV = np.meshgrid(su, sv, indexing="ij")
    r, _, _, nrm, jac, _ = metric_frame(mesh.patches[patch], UU, VV)
    Pu = mesh.basis.eval_matrix(su)
    Pv = mesh.basis.eval_matrix(sv)
    dens = np.asarray(density, dtype=complex)[..., patch, :, :]
    dens_g = np.einsum("...nm,ln,km->...lk", dens, Pu, Pv)
    vals = kernel(x, r, nrm)
    wts = jac * wu[:, None] * wv[None, :]
    return np.einsum("...lk,lk->...", vals * dens_g, wts)


@dataclass(frozen=True)
class KernelSpec:
    """A radial-kernel component family entering the quadrature rows.

    ``kind`` selects the geometric structure; ``weights`` (per engine
    wavenumber) select the radial combination, ``None`` for static kinds.
    """

    kind: str
    weights: tuple | None = None

    @property
    def ncomp(self) -> int:
        return {
            "v": 1,
            "v0": 1,
            "ny": 1,
            "nx": 1,
            "gy": 3,
            "hess": 6,
            "rr0": 6,
            "rhat": 3,
            "d3": 10,
        }[self.kind]


_SYM6 = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
_SYM10 = (
    (0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 1), (0, 1, 2),
    (0, 2, 2), (1, 1, 1), (1, 1, 2), (1, 2, 2), (2, 2, 2),
)


@dataclass
class Request:
    """One integral contraction: kernel spec applied to a density stack."""

    kind: str
    weights: tuple | None
    density: np.ndarray  # (B,S) or (3,B,S) depending on kind

    def spec_key(self):
        return KernelSpec(self.kind, self.weights)


def _eval_components(spec: KernelSpec, ws, r, rhat, nu_y, nu_x, inv4pir):
    """Kernel component values (ncomp, npts) for one spec at given pair data."""
    kind = spec.kind
    if kind == "v0":
        return inv4pir[None]
    if kind == "rr0":
        return np.stack([rhat[:, i] * rhat[:, j] * inv4pir for i, j in _SYM6])
    if kind == "rhat":
        return rhat.T.copy()
    w = np.asarray(spec.weights, dtype=complex)
    if kind == "v":
        return ws.combo(w, ("f",))["f"][None]
    if kind == "ny":
        f1 = ws.combo(w, ("f1",))["f1"]
        return (-f1 * np.einsum("pd,pd->p", rhat, nu_y))[None]
    if kind == "nx":
        f1 = ws.combo(w, ("f1",))["f1"]
        return (f1 * np.einsum("pd,pd->p", rhat, nu_x))[None]
    if kind == "gy":
        f1 = ws.combo(w, ("f1",))["f1"]
        return -f1[None] * rhat.T
    if kind == "hess":
        c = ws.combo(w, ("f1r", "hb"))
        out = np.empty((6, r.size), dtype=complex)
        for m, (i, j) in enumerate(_SYM6):
            out[m] = c["hb"] * rhat[:, i] * rhat[:, j]
            if i == j:
                out[m] += c["f1r"]
        return out
    if kind == "d3":
        c = ws.combo(w, ("f1r", "hb", "f3"))
        a3 = c["hb"] / r
        c3 = c["f3"] - 3.0 * a3
        out = np.empty((10, r.size), dtype=complex)
        eye = np.eye(3)
        for m, (i, j, k) in enumerate(_SYM10):
            out[m] = c3 * rhat[:, i] * rhat[:, j] * rhat[:, k] + a3 * (
                eye[i, j] * rhat[:, k]
                + eye[i, k] * rhat[:, j]
                + eye[j, k] * rhat[:, i]
            )
        return out
    raise ValueError(f"unknown kernel kind {kind!r}")


class QuadratureEngine:
    """Discrete weakly singular integration against one mesh.

    Parameters
    ----------
    mesh : SurfaceMesh
    wavenumbers : tuple of complex
        The radial-kernel wavenumbers (shear, fast, slow); static kinds do not
        require them.
    targets : (T,3) array or None
        Evaluation points; default is all mesh nodes (the on-surface engine),
        for which self patches are known and near rows are cached.
    target_normals : (T,3) array or None
        Normals used by the ``nx`` kernels; defaults to mesh normals for the
        on-surface engine.
    nbeta, p, theta : graded-rule order, grading exponent, adjacency factor.
    near_dtype : storage dtype of the cached near rows.
    """

    def __init__(
        self,
        mesh: SurfaceMesh,
        wavenumbers=None,
        targets=None,
        target_normals=None,
        *,
        nbeta: int = 100,
        p: int = 3,
        theta: float = 0.5,
        near_dtype=np.complex128,
    ):
        if nbeta < mesh.N:
            raise ValueError(f"nbeta={nbeta} must be >= N={mesh.N}")
        self.mesh = mesh
        self.wavenumbers = None if wavenumbers is None else tuple(wavenumbers)
        self.nbeta = int(nbeta)
        self.p = int(p)
        self.theta = float(theta)
        self.near_dtype = near_dtype
        self.on_surface = targets is None
        if targets is None:
            self.targets = mesh.nodes_flat()
            self.target_normals = mesh.normals_flat()
        else:
            self.targets = np.atleast_2d(np.asarray(targets, dtype=float))
            self.target_normals = (
                None
                if target_normals is None
                else np.atleast_2d(np.asarray(target_normals, dtype=float))
            )
        self.n_targets = len(self.targets)
        self._rows: dict[KernelSpec, np.ndarray] = {}
        self._classify_all()
        self._beta_basis = None

    # ---------------- adjacency ----------------

    def _classify_all(self):
        mesh = self.mesh
        M, N = mesh.n_patches, mesh.N
        S = N * N
        tx = self.targets
        npq = mesh.n_patches
        self.far_targets = []
        near_pairs = []  # (target, patch, u, v, dist)
        u = mesh.basis.nodes
        U, V = np.meshgrid(u, u, indexing="ij")
        grid_uv = np.stack([U.ravel(), V.ravel()], -1)
        for q in range(npq):
            lower = (
                np.linalg.norm(tx - mesh.centroids[q], axis=-1) - mesh.bound_radius[q]
            )
            cut = self.theta * mesh.diameters[q]
            cand = np.flatnonzero(lower <= cut)
            near_mask = np.zeros(self.n_targets, dtype=bool)
            if self.on_surface:
                own = np.arange(q * S, (q + 1) * S)
                near_mask[own] = True
                for k in own:
                    i, j = divmod(k - q * S, N)
                    near_pairs.append((k, q, u[i], u[j], 0.0))
                cand = cand[(cand < q * S) | (cand >= (q + 1) * S)]
            if len(cand):
                d_nodes = np.linalg.norm(
                    tx[cand][:, None, :] - mesh.nodes[q].reshape(-1, 3)[None], axis=-1
                )
                seeds = grid_uv[np.argmin(d_nodes, axis=1)]
                uv, dist = closest_point_on_patch(mesh.patches[q], tx[cand], seeds)
                hit = dist <= cut
                for t, (uu, vv), dd in zip(
                    cand[hit], uv[hit], dist[hit], strict=True
                ):
                    near_pairs.append((int(t), q, float(uu), float(vv), float(dd)))
                near_mask[cand[hit]] = True
            self.far_targets.append(np.flatnonzero(~near_mask))
        self.near_pairs = near_pairs
        # group near pairs by source patch
        self.pairs_by_patch = [[] for _ in range(npq)]
        for idx, (t, q, uu, vv, dd) in enumerate(near_pairs):
            self.pairs_by_patch[q].append(idx)

    def adjacency(self, target: int, patch: int) -> AdjacencyDecision:
        """Mode of one (target index, patch) pair under this engine."""
        S = self.mesh.N**2
        for t, q, uu, vv, dd in self.near_pairs:
            if t == target and q == patch:
                mode = "self" if (self.on_surface and target // S == patch) else "near"
                return AdjacencyDecision(
                    target, patch, mode, ClosestPoint(patch, uu, vv, dd)
                )
        return AdjacencyDecision(target, patch, "far", None)

    # ---------------- near rows ----------------

    def _graded_1d(self, center):
        if self._beta_basis is None:
            from .surfops import ChebBasis

            self._beta_basis = ChebBasis(self.nbeta)
        bq = self._beta_basis
        m = GradedMap(center, self.p)
        pts = m(bq.nodes)
        wts = m.deriv(bq.nodes) * bq.weights
        return pts, wts

    def ensure_rows(self, specs):
        """Build and cache near-quadrature rows for the given kernel specs."""
        missing = [s for s in specs if s not in self._rows]
        if not missing:
            return
        for s in missing:
            if s.kind in ("v", "ny", "nx", "gy", "hess", "d3") and s.weights is None:
                raise ValueError(f"spec {s} requires weights")
            if s.kind == "nx" and self.target_normals is None:
                raise ValueError("nx rows require target normals")
        mesh = self.mesh
        N = mesh.N
        npairs = len(self.near_pairs)
        rows = {
            s: np.zeros((npairs, s.ncomp, N * N), dtype=self.near_dtype)
            for s in missing
        }
        ks = (
            np.asarray(self.wavenumbers, dtype=complex)
            if self.wavenumbers is not None
            else np.zeros(0, complex)
        )
        for idx, (t, q, uu, vv, dd) in enumerate(self.near_pairs):
            su, wu = self._graded_1d(uu)
            sv, wv = self._graded_1d(vv)
            from .geometry import metric_frame

            UU, VV = np.meshgrid(su, sv, indexing="ij")
            y, _, _, nu_y, jac, _ = metric_frame(mesh.patches[q], UU, VV)
            x = self.targets[t]
            dvec = x - y.reshape(-1, 3)
            r = np.linalg.norm(dvec, axis=-1)
            wq = (jac * wu[:, None] * wv[None, :]).reshape(-1)
            # quadrature points may coincide with the target; their graded
            # weight vanishes there, so zero those contributions explicitly
            ok = r > 1e-13 * max(1.0, float(mesh.diameters[q]))
            r_safe = np.where(ok, r, 1.0)
            rhat = dvec / r_safe[:, None]
            wq = np.where(ok, wq, 0.0)
            ws = RadialWorkspace(r_safe, ks) if len(ks) else None
            inv4pir = 1.0 / (FOUR_PI * r_safe)
            nu_x = (
                np.broadcast_to(self.target_normals[t], (r.size, 3))
                if self.target_normals is not None
                else None
            )
            Pu = mesh.basis.eval_matrix(su)
            Pv = mesh.basis.eval_matrix(sv)
            for s in missing:
                comps = _eval_components(
                    s, ws, r_safe, rhat, nu_y.reshape(-1, 3), nu_x, inv4pir
                )
                comps = np.where(ok[None], comps, 0.0)
                kw = (comps * wq[None]).reshape(-1, self.nbeta, self.nbeta)
                block = np.einsum("cln,lk,nm->ckm", kw, Pu, Pv)
                rows[s][idx] = block.reshape(-1, N * N)
        self._rows.update(rows)

    # ---------------- application ----------------

    def run(self, requests):
        """Evaluate all requested contractions; returns list of arrays.

        Densities are complex arrays over flat source nodes: shape (B, S_tot)
        for scalar-kernel kinds, (3, B, S_tot) for vector-contracted kinds.
        """
        mesh = self.mesh
        M, N = mesh.n_patches, mesh.N
        S = N * N
        T = self.n_targets
        wfe = mesh.basis.weights
        Wq = mesh.jacobians * wfe[None, :, None] * wfe[None, None, :]  # (M,N,N)
        outs = []
        for req in requests:
            B = req.density.shape[-2]
            shape = {
                "v": (B, T),
                "v0": (B, T),
                "ny": (B, T),
                "nx": (B, T),
                "gy": (3, B, T),
                "gy_dot": (B, T),
                "gy_cross": (3, B, T),
                "outer": (3, 3, B, T),
                "hess": (6, B, T),
                "hess_vec": (3, B, T),
                "rr0_vec": (3, B, T),
                "rhat": (3, B, T),
                "d3": (10, B, T),
            }[req.kind]
            outs.append(np.zeros(shape, dtype=complex))

        ks = (
            np.asarray(self.wavenumbers, dtype=complex)
            if self.wavenumbers is not None
            else np.zeros(0, complex)
        )
        needs_dynamic = any(r.weights is not None for r in requests)
        if needs_dynamic and not len(ks):
            raise ValueError("dynamic kernels need engine wavenumbers")

        # far part, patch by patch
        for q in range(M):
            tidx = self.far_targets[q]
            if len(tidx) == 0:
                continue
            y = mesh.nodes[q].reshape(-1, 3)
            nu_y = mesh.normals[q].reshape(-1, 3)
            wq = Wq[q].reshape(-1)
            dvec = self.targets[tidx][:, None, :] - y[None, :, :]
            r = np.linalg.norm(dvec, axis=-1)
            rhat = dvec / r[..., None]
            ws = RadialWorkspace(r.reshape(-1), ks) if len(ks) else None
            inv4pir = 1.0 / (FOUR_PI * r)
            nu_x = (
                self.target_normals[tidx]
                if self.target_normals is not None
                else None
            )
            for req, out in zip(requests, outs):
                self._far_accumulate(
                    req, out, q, tidx, r, rhat, nu_y, nu_x, wq, ws, inv4pir
                )

        # near part from cached rows
        self._near_accumulate(requests, outs)
        return outs

    # -- far ------------------------------------------------------------

    def _far_accumulate(self, req, out, q, tidx, r, rhat, nu_y, nu_x, wq, ws, inv4pir):
        S = self.mesh.N**2
        dens = req.density[..., q * S : (q + 1) * S]
        kind = req.kind
        nt = len(tidx)

        def combo(needs):
            return {
                k: v.reshape(nt, S) for k, v in ws.combo(np.asarray(req.weights, complex), needs).items()
            }

        if kind in ("v", "v0"):
            vals = combo(("f",))["f"] if kind == "v" else inv4pir
            out[:, tidx] += np.einsum("ts,bs->bt", vals * wq, dens)
        elif kind == "ny":
            f1 = combo(("f1",))["f1"]
            vals = -f1 * np.einsum("tsd,sd->ts", rhat, nu_y)
            out[:, tidx] += np.einsum("ts,bs->bt", vals * wq, dens)
        elif kind == "nx":
            f1 = combo(("f1",))["f1"]
            vals = f1 * np.einsum("tsd,td->ts", rhat, nu_x)
            out[:, tidx] += np.einsum("ts,bs->bt", vals * wq, dens)
        elif kind == "gy":
            f1 = combo(("f1",))["f1"] * wq
            for d in range(3):
                out[d][:, tidx] += np.einsum("ts,bs->bt", -f1 * rhat[..., d], dens)
        elif kind == "gy_dot":
            f1 = combo(("f1",))["f1"] * wq
            for d in range(3):
                out[:, tidx] += np.einsum("ts,bs->bt", -f1 * rhat[..., d], dens[d])
        elif kind == "gy_cross":
            f1 = combo(("f1",))["f1"] * wq
            g = [-f1 * rhat[..., d] for d in range(3)]
            for i, j, k, sgn in ((0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1)):
                out[i][:, tidx] += sgn * np.einsum("ts,bs->bt", g[j], dens[k])
                out[i][:, tidx] -= sgn * np.einsum("ts,bs->bt", g[k], dens[j])
        elif kind == "outer":
            f1 = combo(("f1",))["f1"] * wq
            for i in range(3):
                for j in range(3):
                    out[i, j][:, tidx] += np.einsum(
                        "ts,bs->bt", f1 * rhat[..., j], dens[i]
                    )
        elif kind == "hess":
            c = combo(("f1r", "hb"))
            for m, (i, j) in enumerate(_SYM6):
                vals = c["hb"] * rhat[..., i] * rhat[..., j]
                if i == j:
                    vals = vals + c["f1r"]
                out[m][:, tidx] += np.einsum("ts,bs->bt", vals * wq, dens)
        elif kind == "hess_vec":
            c = combo(("f1r", "hb"))
            rd = np.einsum("tsd,dbs->tbs", rhat, dens)
            for i in range(3):
                out[i][:, tidx] += np.einsum("ts,bs->bt", c["f1r"] * wq, dens[i])
                out[i][:, tidx] += np.einsum(
                    "tbs,ts->bt", rd, c["hb"] * wq * rhat[..., i]
                )
        elif kind == "rr0_vec":
            rd = np.einsum("tsd,dbs->tbs", rhat, dens)
            for i in range(3):
                out[i][:, tidx] += np.einsum(
                    "tbs,ts->bt", rd, inv4pir * wq * rhat[..., i]
                )
        elif kind == "rhat":
            for d in range(3):
                out[d][:, tidx] += np.einsum("ts,bs->bt", rhat[..., d] * wq, dens)
        elif kind == "d3":
            c = combo(("f1r", "hb", "f3"))
            a3 = c["hb"] / r
            c3 = c["f3"] - 3.0 * a3
            eye = np.eye(3)
            for m, (i, j, k) in enumerate(_SYM10):
                vals = c3 * rhat[..., i] * rhat[..., j] * rhat[..., k] + a3 * (
                    eye[i, j] * rhat[..., k]
                    + eye[i, k] * rhat[..., j]
                    + eye[j, k] * rhat[..., i]
                )
                out[m][:, tidx] += np.einsum("ts,bs->bt", vals * wq, dens)
        else:
            raise ValueError(f"unknown request kind {kind!r}")

    # -- near -------------------------------------------------------------

    def _zero_sum_decomp(self, w):
        w = np.asarray(w, dtype=complex)
        if abs(np.sum(w)) > 1e-12 * np.sum(np.abs(w)):
            raise ValueError(
                "near rows for gradient/Hessian kernels on the surface need "
                "zero-sum weights"
            )
        # w = a*(1,-1,0) + b*(0,1,-1)
        return w[0], -w[2]

    def _surface_basis_specs(self, kind):
        if kind in ("v", "ny", "nx"):
            eye = np.eye(3)
            return [KernelSpec(kind, tuple(eye[t])) for t in range(3)]
        if kind in ("gy", "hess"):
            return [KernelSpec(kind, (1.0, -1.0, 0.0)), KernelSpec(kind, (0.0, 1.0, -1.0))]
        raise AssertionError(kind)

    def _near_rows_for(self, kind, weights):
        """Rows (npairs, ncomp, N^2) of the requested radial combination."""
        base_kind = {
            "gy_dot": "gy",
            "gy_cross": "gy",
            "outer": "gy",
            "hess_vec": "hess",
            "rr0_vec": "rr0",
            "kelvin": None,
        }.get(kind, kind)
        if base_kind in ("v0", "rr0", "rhat"):
            spec = KernelSpec(base_kind, None)
            self.ensure_rows([spec])
            return self._rows[spec]
        if self.on_surface and base_kind in ("v", "ny", "nx"):
            specs = self._surface_basis_specs(base_kind)
            self.ensure_rows(specs)
            w = np.asarray(weights, complex)
            return sum(w[t] * self._rows[s] for t, s in enumerate(specs) if w[t] != 0.0)
        if self.on_surface and base_kind in ("gy", "hess"):
            specs = self._surface_basis_specs(base_kind)
            self.ensure_rows(specs)
            a, b = self._zero_sum_decomp(weights)
            return a * self._rows[specs[0]] + b * self._rows[specs[1]]
        spec = KernelSpec(base_kind, tuple(np.asarray(weights, complex)))
        self.ensure_rows([spec])
        return self._rows[spec]

    def _near_accumulate(self, requests, outs):
        if not self.near_pairs:
            return
        mesh = self.mesh
        S = mesh.N**2
        pair_t = np.array([p[0] for p in self.near_pairs])
        pair_q = np.array([p[1] for p in self.near_pairs])
        for req, out in zip(requests, outs):
            rows = self._near_rows_for(req.kind, req.weights)
            dens_pairs = np.asarray(req.density)[..., :].reshape(
                req.density.shape[:-1] + (mesh.n_patches, S)
            )[..., pair_q, :]
            kind = req.kind
            if kind in ("v", "v0", "ny", "nx"):
                contrib = np.einsum("pn,bpn->bp", rows[:, 0], dens_pairs)
                np.add.at(out.T, pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "gy":
                contrib = np.einsum("pcn,bpn->cbp", rows, dens_pairs)
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "gy_dot":
                contrib = np.einsum("pcn,cbpn->bp", rows, dens_pairs)
                np.add.at(out.T, pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "gy_cross":
                contrib = np.empty((3,) + dens_pairs.shape[1:-1], dtype=complex)
                for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                    contrib[i] = np.einsum(
                        "pn,bpn->bp", rows[:, j], dens_pairs[k]
                    ) - np.einsum("pn,bpn->bp", rows[:, k], dens_pairs[j])
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "outer":
                # outer is a gradient in x: flip the sign of the gy rows
                contrib = np.einsum("pjn,ibpn->ijbp", -rows, dens_pairs)
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "hess":
                contrib = np.einsum("pcn,bpn->cbp", rows, dens_pairs)
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind in ("hess_vec", "rr0_vec"):
                contrib = np.empty((3,) + dens_pairs.shape[1:-1], dtype=complex)
                sym = _sym6_index()
                for i in range(3):
                    acc = 0.0
                    for j in range(3):
                        acc = acc + np.einsum(
                            "pn,bpn->bp", rows[:, sym[i, j]], dens_pairs[j]
                        )
                    contrib[i] = acc
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "rhat":
                contrib = np.einsum("pcn,bpn->cbp", rows, dens_pairs)
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            elif kind == "d3":
                contrib = np.einsum("pcn,bpn->cbp", rows, dens_pairs)
                np.add.at(np.moveaxis(out, -1, 0), pair_t, np.moveaxis(contrib, -1, 0))
            else:
                raise ValueError(f"unknown request kind {kind!r}")


def _sym6_index():
    idx = np.zeros((3, 3), dtype=int)
    for m, (i, j) in enumerate(_SYM6):
        idx[i, j] = m
        idx[j, i] = m
    return idx
