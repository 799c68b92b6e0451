"""Series solution for a plane wave hitting two concentric penetrable spheres.

Region 1 is the host (r > r_outer), region 2 the shell and region 3 the core.
With the polar axis along the propagation direction only m = 0 survives:

    u1 = sum_n [i^n (2n+1) j_n(k1 r) + a_n h_n(k1 r)] P_n(cos t)
    u2 = sum_n [b_n h_n(k2 r) + c_n j_n(k2 r)] P_n(cos t)
    u3 = sum_n d_n j_n(k3 r) P_n(cos t)

and u and (1/eps) du/dr are continuous at both radii.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre

DEFAULT_NMAX = 50


class OracleError(ValueError):
    pass


def spherical_jn(n_max: int, x):
    """j_0..j_{n_max} at ``x`` (array) by normalized downward recurrence.

    Returns shape (n_max + 1, *x.shape).  Normalization uses
    sum_n (2n+1) j_n(x)^2 = 1, which holds for all x.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise OracleError("spherical Bessel functions are evaluated for x > 0 only")
    start = int(max(n_max, np.max(x))) + 30 + int(math.sqrt(max(n_max, np.max(x))) * 4)
    out = np.zeros((n_max + 1,) + x.shape)
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for n in range(start, -1, -1):
        if n <= n_max:
            out[n] = cur
        norm += (2 * n + 1) * cur * cur
        if n == 0:
            break
        prev = (2 * n + 1) / x * cur - nxt
        nxt, cur = cur, prev
        big = np.abs(cur) > 1e100
        if np.any(big):
            f = np.where(big, 1e-100, 1.0)
            cur, nxt, norm = cur * f, nxt * f, norm * f * f
            out[min(n, n_max + 1):] *= f
    scale = np.sign(out[0] * np.sin(x)) / np.sqrt(norm)
    # j_0 = sin(x)/x carries the sign; at its zeros fall back on j_1
    zero = np.abs(np.sin(x)) < 1e-3
    if np.any(zero):
        j1 = np.sin(x) / x**2 - np.cos(x) / x
        scale = np.where(zero, np.sign(out[1] * j1) / np.sqrt(norm), scale)
    return out * scale


def spherical_yn(n_max: int, x):
    """y_0..y_{n_max} by upward recurrence (stable for the Neumann functions)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if n_max >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def bessel_pair(n_max: int, x):
    """j_n, j_n', h_n, h_n' for n = 0..n_max at ``x`` (h = j + i y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = spherical_jn(n_max + 1, x)
    y = spherical_yn(n_max + 1, x)
    h = j + 1j * y
    n = np.arange(n_max + 1).reshape((-1,) + (1,) * x.ndim)
    dj = np.empty((n_max + 1,) + x.shape)
    dh = np.empty((n_max + 1,) + x.shape, dtype=complex)
    # f_n' = n/x f_n - f_{n+1}
    dj[:] = n / x * j[:-1] - j[1:]
    dh[:] = n / x * h[:-1] - h[1:]
    return j[:-1], dj, h[:-1], dh


@dataclass
class SeriesSolution:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    r_inner: float
    r_outer: float
    wavenumbers: tuple
    epsilons: tuple
    direction: np.ndarray
    n_max: int

    def incident_coefficients(self) -> np.ndarray:
        n = np.arange(self.n_max + 1)
        return (1j**n) * (2 * n + 1)


def series_coefficients(omega: float, epsilons, r_inner: float = 0.5, r_outer: float = 1.0,
                        n_max: int = DEFAULT_NMAX, direction=(0.0, 1.0, 0.0)) -> SeriesSolution:
    eps = tuple(float(e) for e in epsilons)
    if len(eps) != 3 or min(eps) <= 0:
        raise OracleError("need three positive material constants")
    if not 0 < r_inner < r_outer:
        raise OracleError("need 0 < r_inner < r_outer")
    if n_max < 0:
        raise OracleError("n_max must be non-negative")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    k = tuple(omega * math.sqrt(e) for e in eps)
    j1R, dj1R, h1R, dh1R = (v[:, 0] for v in bessel_pair(n_max, k[0] * r_outer))
    j2R, dj2R, h2R, dh2R = (v[:, 0] for v in bessel_pair(n_max, k[1] * r_outer))
    j2r, dj2r, h2r, dh2r = (v[:, 0] for v in bessel_pair(n_max, k[1] * r_inner))
    j3r, dj3r, _, _ = (v[:, 0] for v in bessel_pair(n_max, k[2] * r_inner))
    f1, f2, f3 = k[0] / eps[0], k[1] / eps[1], k[2] / eps[2]
    inc = (1j ** np.arange(n_max + 1)) * (2 * np.arange(n_max + 1) + 1)
    coef = np.zeros((n_max + 1, 4), dtype=complex)
    for n in range(n_max + 1):
        M = np.array([
            [h1R[n], -h2R[n], -j2R[n], 0.0],
            [f1 * dh1R[n], -f2 * dh2R[n], -f2 * dj2R[n], 0.0],
            [0.0, h2r[n], j2r[n], -j3r[n]],
            [0.0, f2 * dh2r[n], f2 * dj2r[n], -f3 * dj3r[n]],
        ], dtype=complex)
        rhs = np.array([-inc[n] * j1R[n], -inc[n] * f1 * dj1R[n], 0.0, 0.0], dtype=complex)
        scale = np.max(np.abs(M), axis=0)
        try:
            sol = np.linalg.solve(M / scale, rhs)
        except np.linalg.LinAlgError as exc:
            raise OracleError(f"singular mode system at n = {n}") from exc
        coef[n] = sol / scale
    if not np.all(np.isfinite(coef)):
        raise OracleError("non-finite series coefficients")
    return SeriesSolution(coef[:, 0], coef[:, 1], coef[:, 2], coef[:, 3], float(r_inner), float(r_outer),
                          k, eps, d, int(n_max))


def region_of(solution: SeriesSolution, x) -> np.ndarray:
    r = np.linalg.norm(np.atleast_2d(x), axis=1)
    return np.where(r > solution.r_outer, 1, np.where(r > solution.r_inner, 2, 3))


def eval_analytic(solution: SeriesSolution, x, region=None) -> np.ndarray:
    """Total field at points ``x`` (shape (m, 3)).

    The expansion is chosen by |x| unless ``region`` (scalar or per point)
    forces one, which is used to test continuity across the interfaces.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    reg = region_of(solution, x) if region is None else np.broadcast_to(np.asarray(region), r.shape)
    s = solution
    n = np.arange(s.n_max + 1)[:, None]
    out = np.empty(len(x), dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(r > 0, x @ s.direction / np.where(r > 0, r, 1.0), 1.0)
    P = np.stack([eval_legendre(m, cos_t) for m in range(s.n_max + 1)])
    for which in (1, 2, 3):
        sel = reg == which
        if not np.any(sel):
            continue
        rr = r[sel]
        k = s.wavenumbers[which - 1]
        if which == 3:
            rr_safe = np.where(rr > 0, rr, 1.0)
            j = spherical_jn(s.n_max, k * rr_safe)
            j[:, rr == 0] = (n == 0).astype(float)
            terms = s.d[:, None] * j
        else:
            if np.any(rr == 0):
                raise OracleError("outgoing terms are singular at the origin")
            j = spherical_jn(s.n_max, k * rr)
            h = j + 1j * spherical_yn(s.n_max, k * rr)
            if which == 1:
                terms = s.incident_coefficients()[:, None] * j + s.a[:, None] * h
            else:
                terms = s.b[:, None] * h + s.c[:, None] * j
        out[sel] = np.sum(terms * P[:, sel], axis=0)
    return out


def eval_flux(solution: SeriesSolution, x, region) -> np.ndarray:
    """(1/eps) du/dr at points ``x`` using the expansion of ``region``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    s = solution
    k = s.wavenumbers[region - 1]
    cos_t = x @ s.direction / r
    P = np.stack([eval_legendre(m, cos_t) for m in range(s.n_max + 1)])
    j, dj, h, dh = bessel_pair(s.n_max, k * r)
    if region == 1:
        terms = s.incident_coefficients()[:, None] * dj + s.a[:, None] * dh
    elif region == 2:
        terms = s.b[:, None] * dh + s.c[:, None] * dj
    else:
        terms = s.d[:, None] * dj
    return k / s.epsilons[region - 1] * np.sum(terms * P, axis=0)


def l2_error(u_num, u_ana) -> float:
    """sqrt(sum |u_num - u_ana|^2 / sum |u_ana|^2)."""
    u_num = np.asarray(u_num)
    u_ana = np.asarray(u_ana)
    if u_num.shape != u_ana.shape:
        raise ValueError(f"length mismatch: {u_num.shape} vs {u_ana.shape}")
    den = float(np.sum(np.abs(u_ana) ** 2))
    if den == 0.0:
        raise ValueError("reference field is identically zero")
    return math.sqrt(float(np.sum(np.abs(u_num - u_ana) ** 2)) / den)
