"""Fractional Brownian motion synthesis and the Volterra-kernel objects.

Three path generators are provided: dense Cholesky factorization of the grid
covariance (exact, O(N^3), the reference), circulant embedding of the
increment process (exact, O(N log N), the workhorse), and the moving-average
construction against a Wiener path (approximate, but the only method that
exposes the driving increments needed by the conditional-mean process).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .constants import CRITICAL_TOL, c_h

__all__ = [
    "covariance", "volterra_kernel", "mu", "conditional_increment_variance",
    "FbmPath", "sample_paths", "conditional_mean_path", "path_rng",
    "CHOLESKY_MAX_N", "VOLTERRA_MAX_N",
]

CHOLESKY_MAX_N = 4096
VOLTERRA_MAX_N = 4096

_GL_X, _GL_W = np.polynomial.legendre.leggauss(128)


def covariance(H: float, s, t):
    """Covariance of fBm: (s^2H + t^2H - |t-s|^2H) / 2."""
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in (0,1), got {H!r}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("covariance requires nonnegative times")
    out = 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def _kernel_core(H: float, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """K_H(t,s) on flat arrays with 0 < s < t guaranteed by the caller.

    The endpoint singularity (u-s)^(H-3/2) (or (u-s)^(H-1/2) below 1/2) is
    removed by substituting w = (u-s)^kappa, after which a fixed
    Gauss-Legendre rule is accurate and fully vectorized.
    """
    C = c_h(H)
    if abs(H - 0.5) <= CRITICAL_TOL:
        return np.ones_like(t)
    if H > 0.5:
        kap = H - 0.5
        upper = (t - s) ** kap
        # nodes shape (q, n): w in (0, upper)
        w = 0.5 * upper[None, :] * (_GL_X[:, None] + 1.0)
        vals = (s[None, :] + w ** (1.0 / kap)) ** (H - 0.5)
        integral = 0.5 * upper / kap * np.einsum("q,qn->n", _GL_W, vals)
        return C * s ** (0.5 - H) * integral
    # H < 1/2: the inner integrand u^(H-3/2) (u-s)^(H-1/2) has its endpoint
    # singularity at u = s removed by w = (u-s)^kappa, but for s << t the
    # u^(H-3/2) factor concentrates near u ~ s; split at u = 3s and treat
    # the far piece on a log grid.
    kap = H + 0.5
    u_split = np.minimum(3.0 * s, t)
    upper = (u_split - s) ** kap
    w = 0.5 * upper[None, :] * (_GL_X[:, None] + 1.0)
    vals = (s[None, :] + w ** (1.0 / kap)) ** (H - 1.5)
    integral = 0.5 * upper / kap * np.einsum("q,qn->n", _GL_W, vals)
    far = u_split < t
    if np.any(far):
        y0 = np.log(u_split[far])
        y1 = np.log(t[far])
        y = 0.5 * ((y1 - y0)[None, :] * (_GL_X[:, None] + 1.0)) + y0[None, :]
        u = np.exp(y)
        vals_far = u ** (H - 0.5) * (u - s[None, far]) ** (H - 0.5)
        integral[far] += 0.5 * (y1 - y0) * np.einsum("q,qn->n", _GL_W, vals_far)
    return C * ((t / s) ** (H - 0.5) * (t - s) ** (H - 0.5)
                + (0.5 - H) * s ** (0.5 - H) * integral)


def volterra_kernel(H: float, t, s):
    """Moving-average kernel K_H(t,s); zero for s >= t by convention."""
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in (0,1), got {H!r}")
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, dtype=float),
                                       np.asarray(s, dtype=float))
    if np.any(t_arr <= 0) or np.any(s_arr <= 0):
        raise ValueError("volterra_kernel requires strictly positive times")
    out = np.zeros(t_arr.shape, dtype=float)
    mask = s_arr < t_arr
    if np.any(mask):
        out[mask] = _kernel_core(H, t_arr[mask].ravel(), s_arr[mask].ravel())
    return float(out) if out.ndim == 0 else out


def _kernel_scalar(H: float, t: float, s: float) -> float:
    if s <= 0.0 or s >= t:
        return 0.0
    return float(_kernel_core(H, np.array([t]), np.array([s]))[0])


def mu(H: float, r: float, s: float) -> float:
    """Conditional variance increment: int_r^s K_H(s, theta)^2 dtheta.

    The theta -> s endpoint behaves like (s-theta)^(2H-1); with r = 0 the
    left endpoint contributes another algebraic power.  Both are factored
    into the QAWS weight so the remaining integrand is smooth.
    """
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in (0,1), got {H!r}")
    if r < 0 or s < r:
        raise ValueError("mu requires 0 <= r <= s")
    if s == r:
        return 0.0
    if abs(H - 0.5) <= CRITICAL_TOL:
        return s - r
    b1 = c_h(H) / (H - 0.5) if H > 0.5 else c_h(H)
    mid = 0.5 * (r + s)

    def k2(theta):
        k = _kernel_scalar(H, s, theta)
        return k * k

    # left piece: smooth for r > 0; for r = 0 QAGS absorbs the algebraic
    # theta -> 0 endpoint (it never evaluates at the endpoints themselves)
    left, _ = integrate.quad(k2, r, mid, limit=200, epsabs=1e-13)

    def g(theta):
        # QAWS may evaluate at the singular endpoint: substitute the limit
        if theta >= s * (1.0 - 1e-14):
            return b1 * b1
        return k2(theta) * (s - theta) ** (1 - 2 * H)

    right, _ = integrate.quad(g, mid, s, weight="alg", wvar=(0, 2 * H - 1),
                              limit=200, epsabs=1e-13)
    return left + right


def conditional_increment_variance(H: float, r: float, t1: float, t2: float) -> float:
    """Var[B_{r,t1} - B_{r,t2}] = int_0^r (K_H(t1,th) - K_H(t2,th))^2 dth,
    computed by quadrature (no sampling).  Requires r <= min(t1, t2)."""
    if r < 0 or r > min(t1, t2):
        raise ValueError("requires 0 <= r <= min(t1, t2)")
    if t1 == t2 or r == 0:
        return 0.0

    def g(theta):
        if theta <= r * 1e-12:
            theta = r * 1e-9
        d = _kernel_scalar(H, t1, theta) - _kernel_scalar(H, t2, theta)
        return d * d * theta ** (2 * H - 1)

    if r < min(t1, t2) * (1.0 - 1e-12):
        val, _ = integrate.quad(g, 0.0, r, weight="alg", wvar=(1 - 2 * H, 0),
                                limit=200)
    else:
        def plain(theta):
            d = _kernel_scalar(H, t1, theta) - _kernel_scalar(H, t2, theta)
            return d * d

        val, _ = integrate.quad(plain, 0.0, r, limit=200)
    return val


@dataclass(frozen=True)
class FbmPath:
    """One trajectory on the uniform grid t_k = k*T/N, values[0] = 0."""

    H: float
    T: float
    N: int
    values: np.ndarray
    seed: int
    path_index: int
    method: str
    wiener_increments: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.values.shape != (self.N + 1,):
            raise ValueError("values must have length N+1")
        if self.values[0] != 0.0:
            raise ValueError("paths start at zero")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for one path: keyed by (seed, index), so the
    draw is identical no matter which worker or order produced it."""
    return np.random.default_rng([seed, index])


def _fgn_spectrum(H: float, N: int, dt: float) -> np.ndarray:
    k = np.arange(N + 1, dtype=float)
    gam = 0.5 * dt ** (2 * H) * ((k + 1) ** (2 * H) + np.abs(k - 1) ** (2 * H)
                                 - 2 * k ** (2 * H))
    c = np.concatenate([gam, gam[-2:0:-1]])          # length 2N
    lam = np.fft.fft(c).real
    if lam.min() < -1e-9 * lam.max():
        raise ValueError(
            "circulant embedding is not nonnegative definite at this size; "
            "retry with the embedding doubled (increase N or use cholesky)")
    return np.sqrt(np.maximum(lam, 0.0) / (2 * N))


def _circulant_batch(H, T, N, rngs) -> np.ndarray:
    dt = T / N
    scale = _fgn_spectrum(H, N, dt)
    draws = np.stack([rng.standard_normal(2 * N) for rng in rngs])
    Z = np.empty((len(rngs), 2 * N), dtype=complex)
    Z[:, 0] = draws[:, 0]
    Z[:, N] = draws[:, 1]
    a = draws[:, 2:N + 1]
    b = draws[:, N + 1:2 * N]
    Z[:, 1:N] = (a + 1j * b) / math.sqrt(2.0)
    Z[:, N + 1:] = np.conj(Z[:, 1:N])[:, ::-1]
    fgn = np.fft.fft(scale[None, :] * Z, axis=1).real[:, :N]
    paths = np.concatenate([np.zeros((len(rngs), 1)), np.cumsum(fgn, axis=1)],
                           axis=1)
    return paths


@functools.lru_cache(maxsize=8)
def _cholesky_factor(H: float, T: float, N: int) -> np.ndarray:
    t = np.linspace(0.0, T, N + 1)[1:]
    cov = covariance(H, t[:, None], t[None, :])
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "grid covariance is numerically degenerate; cholesky failed"
        ) from exc


@functools.lru_cache(maxsize=4)
def _volterra_matrix(H: float, T: float, N: int) -> np.ndarray:
    dt = T / N
    t = np.linspace(0.0, T, N + 1)
    theta = (np.arange(N) + 0.5) * dt
    tt, ss = np.meshgrid(t, theta, indexing="ij")
    mask = ss < tt
    K = np.zeros((N + 1, N), dtype=float)
    K[mask] = _kernel_core(H, tt[mask].ravel(), ss[mask].ravel())
    return K


def sample_paths(H: float, T: float, N: int, count: int, seed: int,
                 method: str = "circulant") -> list[FbmPath]:
    """Draw `count` independent paths; deterministic in (seed, path index)."""
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in (0,1), got {H!r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    if T <= 0:
        raise ValueError("T must be positive")
    if method == "cholesky" and N > CHOLESKY_MAX_N:
        raise ValueError(f"cholesky synthesis is limited to N <= {CHOLESKY_MAX_N}")
    if method == "volterra" and N > VOLTERRA_MAX_N:
        raise ValueError(f"volterra synthesis is limited to N <= {VOLTERRA_MAX_N}")

    rngs = [path_rng(seed, i) for i in range(count)]
    increments = None
    if method == "circulant":
        values = _circulant_batch(H, T, N, rngs)
    elif method == "cholesky":
        L = _cholesky_factor(H, T, N)
        z = np.stack([rng.standard_normal(N) for rng in rngs])
        values = np.concatenate([np.zeros((count, 1)), z @ L.T], axis=1)
    elif method == "volterra":
        K = _volterra_matrix(H, T, N)
        dt = T / N
        increments = np.stack([rng.standard_normal(N) for rng in rngs])
        increments *= math.sqrt(dt)
        values = increments @ K.T
        values[:, 0] = 0.0
    else:
        raise ValueError(f"unknown method {method!r}")

    return [
        FbmPath(H=H, T=T, N=N, values=values[i], seed=seed, path_index=i,
                method=method,
                wiener_increments=None if increments is None else increments[i])
        for i in range(count)
    ]


def conditional_mean_path(path: FbmPath, r: float, s: float) -> float:
    """Projection of the path value at time s onto the driving noise up to
    time r: sum of K_H(s, theta_j) * dW_j over midpoints theta_j < r."""
    if path.wiener_increments is None:
        raise ValueError("conditional_mean_path requires a volterra path "
                         "(wiener_increments missing)")
    if not (0.0 <= r <= s <= path.T + 1e-12):
        raise ValueError("requires 0 <= r <= s <= T")
    if r == 0.0:
        return 0.0
    row = _conditional_kernel_row(path.H, path.T, path.N, float(r), float(s))
    return float(row @ path.wiener_increments)


@functools.lru_cache(maxsize=64)
def _conditional_kernel_row(H: float, T: float, N: int, r: float,
                            s: float) -> np.ndarray:
    dt = T / N
    theta = (np.arange(N) + 0.5) * dt
    row = np.zeros(N)
    mask = (theta < r) & (theta < s)
    if np.any(mask):
        row[mask] = _kernel_core(H, np.full(mask.sum(), s), theta[mask])
    return row
