"""Point kernels: Helmholtz radial functions, stable weighted combinations,
and the 4x4 dynamic/static fundamental-solution blocks.

Every kernel in the solver reduces to weighted combinations of the outgoing
Helmholtz kernel ``gamma_k(r) = exp(i*k*r)/(4*pi*r)`` over the three
wavenumbers ``k_s, k1, k2`` (the static problem uses ``k = 0``).  Combinations
whose weights sum to zero are bounded at ``r -> 0`` but suffer catastrophic
cancellation when evaluated termwise, so below a switch radius all quantities
come from a truncated power series of the combined kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .material import DerivedParams, MaterialParams, WaveNumbers

__all__ = [
    "helmholtz",
    "RadialWorkspace",
    "radial_combo",
    "KernelConstants",
    "kernel_constants",
    "KernelBlock",
    "fundamental_solution",
    "static_fundamental_solution",
]

FOUR_PI = 4.0 * np.pi
# series is used where max_t |k_t|*r < SERIES_SWITCH; truncation of the
# N_TERMS-term series is far below 1e-13 there ((x^n)/n! bound).  The switch
# sits well above the cancellation zone even for third radial derivatives,
# whose termwise evaluation loses ~eps/x^4 relative accuracy.
SERIES_SWITCH = 0.35
N_TERMS = 20

_ALL_NEEDS = ("f", "f1", "f2", "f3", "f1r", "hb")


def helmholtz(k: complex, r):
    """Outgoing Helmholtz kernel ``exp(ikr)/(4 pi r)`` and two radial derivatives.

    ``r`` may be a scalar or array, strictly positive.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("helmholtz kernel requires r > 0")
    ikr = 1j * k * r
    e = np.exp(ikr)
    val = e / (FOUR_PI * r)
    d1 = e * (ikr - 1.0) / (FOUR_PI * r**2)
    d2 = e * (ikr**2 - 2.0 * ikr + 2.0) / (FOUR_PI * r**3)
    if np.ndim(r) == 0:
        return complex(val), complex(d1), complex(d2)
    return val, d1, d2


class RadialWorkspace:
    """Shared evaluation state for many kernel combinations over one r-array.

    Precomputes ``exp(i*k*r)`` per wavenumber and the series mask, so that each
    weighted combination costs only a few elementwise operations.
    """

    def __init__(self, r, wavenumbers):
        self.r = np.asarray(r, dtype=float)
        self.ks = np.asarray(wavenumbers, dtype=complex)
        kmax = np.max(np.abs(self.ks)) if self.ks.size else 0.0
        self.small = (kmax * self.r) < SERIES_SWITCH
        self.any_small = bool(np.any(self.small))
        self.all_small = bool(np.all(self.small))
        if not self.all_small:
            rl = np.where(self.small, 1.0, self.r)
            self._inv_r = 1.0 / rl
            self._exps = [np.exp(1j * k * rl) for k in self.ks]
            self._ikr = [1j * k * rl for k in self.ks]
        if self.any_small:
            # (i k)^n / n! table, one column per wavenumber
            n = np.arange(N_TERMS + 1)
            fact = np.array([factorial(int(m)) for m in n], dtype=float)
            self._pow_table = (1j * self.ks[None, :]) ** n[:, None] / fact[:, None]
            self._r_small = self.r[self.small]

    def combo(self, weights, need=("f",)):
        """Evaluate a weighted combination; returns a dict keyed by ``need``.

        Supported keys: ``f`` (value), ``f1``..``f3`` (radial derivatives),
        ``f1r`` (= f'/r) and ``hb`` (= f'' - f'/r, the two Hessian scalars).
        """
        w = np.asarray(weights, dtype=complex)
        out = {}
        if not self.all_small:
            direct = self._combo_direct(w, need)
        if self.any_small:
            series = self._combo_series(w, need)
        for key in need:
            if self.all_small:
                full = np.zeros(self.r.shape, dtype=complex)
            else:
                full = direct[key]
            if self.any_small:
                full = full.copy() if not self.all_small else full
                full[self.small] = series[key]
            out[key] = full
        return out

    def _combo_direct(self, w, need):
        inv_r = self._inv_r
        res = {k: 0.0 for k in need if k in ("f", "f1", "f2", "f3")}
        need_f2 = any(k in need for k in ("f2", "hb"))
        need_f1 = any(k in need for k in ("f1", "f1r", "hb"))
        acc = {"f": 0.0, "f1": 0.0, "f2": 0.0, "f3": 0.0}
        for t in range(len(self.ks)):
            if w[t] == 0.0:
                continue
            e = self._exps[t] * (w[t] / FOUR_PI)
            z = self._ikr[t]
            acc["f"] = acc["f"] + e * inv_r
            if need_f1:
                acc["f1"] = acc["f1"] + e * (z - 1.0) * inv_r**2
            if need_f2:
                acc["f2"] = acc["f2"] + e * (z * (z - 2.0) + 2.0) * inv_r**3
            if "f3" in need:
                acc["f3"] = acc["f3"] + e * (((z - 3.0) * z + 6.0) * z - 6.0) * inv_r**4
        out = {}
        for key in ("f", "f1", "f2", "f3"):
            if key in need:
                out[key] = np.asarray(acc[key], dtype=complex)
        if "f1r" in need or "hb" in need:
            f1r = np.asarray(acc["f1"], dtype=complex) * inv_r
            if "f1r" in need:
                out["f1r"] = f1r
            if "hb" in need:
                out["hb"] = np.asarray(acc["f2"], dtype=complex) - f1r
        return out

    def _combo_series(self, w, need):
        # b_n = sum_t w_t (i k_t)^n / n!
        b = self._pow_table @ w
        # roundoff in zero-sum weights would be amplified by 1/r^2..1/r^4
        if abs(b[0]) < 1e-13 * np.sum(np.abs(w)):
            b = b.copy()
            b[0] = 0.0
        r = self._r_small
        out = {}

        def poly(coeffs):
            acc = np.zeros(r.shape, dtype=complex)
            for c in coeffs[::-1]:
                acc = acc * r + c
            return acc

        n = np.arange(N_TERMS + 1)
        if "f" in need:
            out["f"] = (b[0] / r + poly(b[1:])) / FOUR_PI
        if "f1" in need:
            c = (n[2:] - 1) * b[2:]
            out["f1"] = (-b[0] / r**2 + poly(c)) / FOUR_PI
        if "f2" in need:
            c = (n[3:] - 1) * (n[3:] - 2) * b[3:]
            out["f2"] = (2.0 * b[0] / r**3 + poly(c)) / FOUR_PI
        if "f3" in need:
            c = (n[4:] - 1) * (n[4:] - 2) * (n[4:] - 3) * b[4:]
            out["f3"] = (-6.0 * b[0] / r**4 + poly(c)) / FOUR_PI
        if "f1r" in need:
            c = (n[3:] - 1) * b[3:]
            out["f1r"] = (-b[0] / r**3 + b[2] / r + poly(c)) / FOUR_PI
        if "hb" in need:
            c = (n[3:] - 1) * (n[3:] - 3) * b[3:]
            out["hb"] = (3.0 * b[0] / r**3 - b[2] / r + poly(c)) / FOUR_PI
        return out


def radial_combo(coeffs, r, order: int = 0):
    """Weighted Helmholtz-kernel combination ``sum_t w_t gamma_{k_t}(r)``.

    Parameters
    ----------
    coeffs : sequence of (weight, wavenumber) pairs
    r : scalar or array, ``r >= 0``; ``r = 0`` requires the weights to sum to
        zero (the combination is then bounded and evaluated by its limit)
    order : derivative order, 0..3
    """
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    w = np.array([c[0] for c in coeffs], dtype=complex)
    ks = np.array([c[1] for c in coeffs], dtype=complex)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0.0):
        raise ValueError("r must be nonnegative")
    if np.any(r_arr == 0.0):
        b0 = np.sum(w)
        if abs(b0) > 1e-13 * np.sum(np.abs(w)):
            raise ValueError("singular combination requested at r = 0")
        # bounded limit: evaluate the series with r=0 contributions explicit
        key = ("f", "f1", "f2", "f3")[order]
        out = np.empty(r_arr.shape, dtype=complex)
        pos = r_arr > 0.0
        if np.any(pos):
            ws = RadialWorkspace(r_arr[pos], ks)
            out[pos] = ws.combo(w, need=(key,))[key]
        n = np.arange(N_TERMS + 1)
        fact = np.array([factorial(int(m)) for m in n], dtype=float)
        b = ((1j * ks[None, :]) ** n[:, None] / fact[:, None]) @ w
        lim = {
            "f": b[1],
            "f1": b[2],
            "f2": 2.0 * b[3],
            "f3": 6.0 * b[4],
        }[key] / FOUR_PI
        out[~pos] = lim
        return out if np.ndim(r) else complex(out[0])
    ws = RadialWorkspace(r_arr, ks)
    key = ("f", "f1", "f2", "f3")[order]
    vals = ws.combo(w, need=(key,))[key]
    return vals if np.ndim(r) else complex(vals[0])


@dataclass(frozen=True)
class KernelConstants:
    """Constants entering the regularized hyper-singular kernels.

    ``c1``..``c4`` weight the strongly coupled part of the displacement
    hyper-singular block; ``d1``, ``d2`` are its purely elastic parts;
    ``e11_w1``/``e11_w2`` are the compressional weights inside the
    displacement block of the fundamental solution; ``c_e12``/``c_e21`` scale
    the coupling gradient columns.
    """

    c1: complex
    c2: complex
    c3: complex
    c4: complex
    d1: complex
    d2: complex
    e11_w1: complex
    e11_w2: complex
    c_e12: complex
    c_e21: complex


def kernel_constants(
    mp: MaterialParams, dp: DerivedParams, wn: WaveNumbers
) -> KernelConstants:
    """Evaluate all displayed kernel constants at the given physics."""
    dk = wn.dk12
    if dk == 0.0:
        raise ValueError("degenerate wavenumbers: k1^2 == k2^2")
    om = dp.omega
    lam2mu = mp.lam_2mu
    kp2 = wn.k_p**2
    beta, gamma, alpha = dp.beta, dp.gamma, mp.alpha

    def c_num(ki2):
        return (
            beta * ki2 * (ki2 - dp.q) * lam2mu
            - 1j * om * alpha * gamma * beta * ki2
            - mp.rho_f * om**2 * alpha * (alpha - beta) * ki2
            - mp.rho_f * om**2 * alpha**2 * (kp2 - ki2)
        )

    c1 = c_num(wn.k1_sq) / (beta * dk)
    c2 = c_num(wn.k2_sq) / (beta * dk)
    c3 = (2.0 * mp.mu / dk) * (
        wn.k2_sq - dp.q - mp.rho_f * om**2 * alpha * (alpha - beta) / (beta * lam2mu)
    )
    c4 = (2.0 * mp.mu / dk) * (wn.k2_sq - dp.q - 1j * om * gamma * alpha / lam2mu)
    d1 = wn.k1_sq * lam2mu * (wn.k1_sq - dp.q) / dk
    d2 = wn.k2_sq * lam2mu * (wn.k2_sq - dp.q) / dk
    return KernelConstants(
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        d1=d1,
        d2=d2,
        e11_w1=(kp2 - wn.k2_sq) / dk,
        e11_w2=(kp2 - wn.k1_sq) / dk,
        c_e12=1j * om * gamma / (lam2mu * dk),
        c_e21=-(alpha - beta) / (lam2mu * dk),
    )


@dataclass
class KernelBlock:
    """One evaluation of a 4x4 fundamental-solution block.

    ``e21`` is stored as a column vector; the assembled 4x4 matrix uses its
    transpose as the bottom-left row block.
    """

    e11: np.ndarray
    e12: np.ndarray
    e21: np.ndarray
    e22: complex

    def as_matrix(self) -> np.ndarray:
        out = np.zeros(self.e11.shape[:-2] + (4, 4), dtype=complex)
        out[..., :3, :3] = self.e11
        out[..., :3, 3] = self.e12
        out[..., 3, :3] = self.e21
        out[..., 3, 3] = self.e22
        return out


def _pair_geometry(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0.0):
        raise ValueError("fundamental solution requires x != y")
    rhat = d / r[..., None]
    return r, rhat


def fundamental_solution(
    x, y, wn: WaveNumbers, dp: DerivedParams, mp: MaterialParams
) -> KernelBlock:
    """Dynamic fundamental-solution blocks at (batches of) point pairs.

    ``x``, ``y`` are 3-vectors or broadcastable arrays of shape (..., 3).
    """
    kc = kernel_constants(mp, dp, wn)
    r, rhat = _pair_geometry(x, y)
    r_arr = np.atleast_1d(r)
    ws = RadialWorkspace(r_arr, (wn.k_s, wn.k1, wn.k2))

    mu_ks2 = mp.mu * wn.k_s**2  # = (rho - beta rho_f) omega^2
    g_ks = ws.combo((1.0, 0.0, 0.0), need=("f",))["f"]
    f_e11 = ws.combo((1.0, -kc.e11_w1, kc.e11_w2), need=("f1r", "hb"))
    a = g_ks / mp.mu + f_e11["f1r"] / mu_ks2
    b = f_e11["hb"] / mu_ks2

    r1_d1 = ws.combo((0.0, 1.0, -1.0), need=("f1",))["f1"]
    e22 = ws.combo(
        (0.0, -(wn.k_p**2 - wn.k1_sq) / wn.dk12, (wn.k_p**2 - wn.k2_sq) / wn.dk12),
        need=("f",),
    )["f"]

    shape = r_arr.shape
    rh = rhat.reshape(shape + (3,))
    eye = np.eye(3)
    e11 = a.reshape(shape + (1, 1)) * eye + b.reshape(shape + (1, 1)) * (
        rh[..., :, None] * rh[..., None, :]
    )
    grad_r1 = r1_d1.reshape(shape + (1,)) * rh  # gradient in x
    e12 = kc.c_e12 * grad_r1
    e21 = kc.c_e21 * grad_r1

    if np.ndim(r) == 0:
        return KernelBlock(
            e11=e11[0], e12=e12[0], e21=e21[0], e22=complex(e22[0])
        )
    return KernelBlock(e11=e11, e12=e12, e21=e21, e22=e22)


def static_fundamental_solution(x, y, mp: MaterialParams) -> KernelBlock:
    """Static (zero-frequency) fundamental-solution blocks.

    The displacement block is the Kelvin tensor, the coupling block from
    pressure to displacement is ``alpha*(x-y)/(8 pi (lam+2mu) r)`` and the
    pressure block is the Laplace kernel; the reverse coupling vanishes.
    """
    r, rhat = _pair_geometry(x, y)
    r = np.atleast_1d(r)
    shape = r.shape
    rh = rhat.reshape(shape + (3,))
    cK = (mp.lam + 3.0 * mp.mu) / (8.0 * np.pi * mp.mu * mp.lam_2mu)
    cK2 = (mp.lam + mp.mu) / (8.0 * np.pi * mp.mu * mp.lam_2mu)
    eye = np.eye(3)
    e11 = (cK / r).reshape(shape + (1, 1)) * eye + (cK2 / r).reshape(
        shape + (1, 1)
    ) * (rh[..., :, None] * rh[..., None, :])
    e21 = (mp.alpha / (8.0 * np.pi * mp.lam_2mu)) * rh
    e12 = np.zeros_like(e21)
    e22 = 1.0 / (FOUR_PI * r)
    if np.ndim(np.asarray(x)) == 1 and np.ndim(np.asarray(y)) == 1:
        return KernelBlock(e11=e11[0], e12=e12[0], e21=e21[0], e22=complex(e22[0]))
    return KernelBlock(e11=e11, e12=e12, e21=e21, e22=e22)
