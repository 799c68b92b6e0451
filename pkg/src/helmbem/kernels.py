"""Helmholtz layer-potential integrals over flat constant-density triangles.

For a source triangle E and a collocation point x with normal n_x the four
element integrals are

    S  = int_E G(x, y) dy             D  = int_E dG/dn_y dy
    D* = int_E dG/dn_x dy             N  = p.f. int_E d2G/dn_x dn_y dy

with G = exp(ik|x-y|) / (4 pi |x-y|).

Well-separated pairs use a 16-point Gauss-Legendre rule on the triangle
(4 x 4 tensor rule on the collapsed square).  Near and self pairs split off
the static kernel G0 = 1/(4 pi r), whose triangle integrals have closed
forms, and integrate the bounded remainder G - G0 with the same 16 points.
On the self element the remainder is integrated radially in closed form and
angularly edge by edge.  The hypersingular integral goes through the Stokes
identity

    N = k^2 (n_x . n_E) S + oint_{dE} (dG/dr / r) n_x . ((y - x) x t) ds,

whose static contour part is evaluated exactly and whose dynamic remainder
uses 10-point Gauss-Legendre on each edge.
"""
from __future__ import annotations

import enum
import math

import numba
import numpy as np

FOUR_PI = 4.0 * math.pi
TRIANGLE_ORDER = 4  # per direction; 16 points in total
LINE_ORDER = 10
NEAR_FACTOR = 3.0


class KernelKind(enum.Enum):
    S = "S"
    D = "D"
    Dstar = "Dstar"
    N = "N"


def gauss_legendre_01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_rule(order: int = TRIANGLE_ORDER):
    """Collapsed-square Gauss rule on the reference triangle.

    Returns barycentric-style coordinates ``(xi, eta)`` with the point at
    ``P0 + xi (P1 - P0) + eta (P2 - P0)``; the weights sum to 1/2.
    """
    u, wu = gauss_legendre_01(order)
    xi = np.repeat(u, order)
    eta = np.tile(u, order) * (1.0 - xi)
    w = np.repeat(wu, order) * np.tile(wu, order) * (1.0 - xi)
    return np.stack([xi, eta], axis=1), w


def green(k: float, x, y) -> complex:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise ValueError("Green's function is singular at coincident points")
    return complex(np.exp(1j * k * r) / (FOUR_PI * r))


def incident_plane_wave(k1: float, epsilon1: float, direction, x, n):
    """Plane wave exp(i k1 x.d) and its flux (1/eps1) dn u at points ``x``."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("propagation direction must be a unit vector")
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    u = np.exp(1j * k1 * (x @ d))
    w = (1j * k1 / epsilon1) * (n @ d) * u
    return u, w


# --- compiled kernels ------------------------------------------------------

@numba.njit(cache=True)
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@numba.njit(cache=True)
def _norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


@numba.njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@numba.njit(cache=True)
def _edge_log(s_minus, s_plus, r0):
    """int ds / R along an edge line at distance r0 from the observer."""
    if r0 > 1e-14 * (abs(s_minus) + abs(s_plus)):
        return math.asinh(s_plus / r0) - math.asinh(s_minus / r0)
    if s_minus > 0.0:
        return math.log(s_plus / s_minus)
    if s_plus < 0.0:
        return math.log(s_minus / s_plus)
    return 0.0


@numba.njit(cache=True)
def _static_triangle(x, tri, n, coplanar):
    """Closed-form Laplace integrals of a flat triangle.

    Returns ``(int 1/R, int grad_x 1/R, signed solid angle)``.  With
    ``coplanar`` set the observer lies inside the triangle's plane and the
    normal components are dropped (principal value).
    """
    w0 = 0.0 if coplanar else _dot(x - tri[0], n)
    s_int = 0.0
    grad = np.zeros(3)
    for i in range(3):
        p = tri[i]
        q = tri[(i + 1) % 3]
        e = q - p
        length = _norm(e)
        t = e / length
        m = _cross(t, n)
        s_minus = _dot(p - x, t)
        s_plus = _dot(q - x, t)
        t0 = _dot(p - x, m)
        r0 = math.sqrt(t0 * t0 + w0 * w0)
        f = _edge_log(s_minus, s_plus, r0)
        s_int += t0 * f
        grad -= m * f
    omega = 0.0
    if not coplanar:
        a = tri[0] - x
        b = tri[1] - x
        c = tri[2] - x
        la, lb, lc = _norm(a), _norm(b), _norm(c)
        num = _dot(a, _cross(b, c))
        den = la * lb * lc + _dot(a, b) * lc + _dot(a, c) * lb + _dot(b, c) * la
        omega = 2.0 * math.atan2(num, den)
        s_int -= abs(w0) * abs(omega)
        grad += omega * n
    return s_int, grad, omega


@numba.njit(cache=True)
def _contour_static(x, nx, tri):
    """Static part of the Stokes contour, -(1/4pi) oint n_x.((y-x) x t) / r^3 ds."""
    total = 0.0
    for i in range(3):
        a = tri[i]
        b = tri[(i + 1) % 3]
        e = b - a
        t = e / _norm(e)
        c = _cross(a - x, t)
        nc = _dot(nx, c)
        d2 = _dot(c, c)
        if nc == 0.0 or d2 == 0.0:
            continue
        sa = _dot(a - x, t)
        sb = _dot(b - x, t)
        ra = _norm(a - x)
        rb = _norm(b - x)
        if sa * sb > 0.0:
            j = (sb * sb - sa * sa) / (ra * rb * (sb * ra + sa * rb))
        else:
            j = (sb / rb - sa / ra) / d2
        total -= nc * j
    return total / FOUR_PI


@numba.njit(cache=True)
def _contour_dynamic(x, nx, tri, k, lnodes, lweights):
    """Dynamic remainder of the contour with Gauss-Legendre on each edge."""
    total = 0.0 + 0.0j
    for i in range(3):
        a = tri[i]
        b = tri[(i + 1) % 3]
        e = b - a
        length = _norm(e)
        t = e / length
        for q in range(lnodes.shape[0]):
            y = a + lnodes[q] * e
            d = y - x
            r = _norm(d)
            kr = k * r
            ekr = complex(math.cos(kr), math.sin(kr))
            dg = (ekr * complex(-1.0, kr) + 1.0) / (FOUR_PI * r * r)
            total += lweights[q] * length * dg / r * _dot(nx, _cross(d, t))
    return total


@numba.njit(cache=True)
def _self_remainder(x, tri, k, lnodes, lweights):
    """int_E (G - G0) dy for x inside E, radially exact in polar coordinates.

    The radial integral from x to the edge at distance R is
    ((exp(ikR) - 1)/(ik) - R) / (4 pi); the angle is swept edge by edge.
    """
    if k == 0.0:
        return 0.0 + 0.0j
    total = 0.0 + 0.0j
    for i in range(3):
        a = tri[i]
        e = tri[(i + 1) % 3] - a
        length = _norm(e)
        h = _norm(_cross(a - x, e / length))
        for q in range(lnodes.shape[0]):
            y = a + lnodes[q] * e
            big_r = _norm(y - x)
            kr = k * big_r
            radial = (complex(math.cos(kr) - 1.0, math.sin(kr)) / complex(0.0, k) - big_r) / FOUR_PI
            total += lweights[q] * h * length / (big_r * big_r) * radial
    return total


@numba.njit(cache=True)
def _pair(x, nx, tri, n, area, k, is_self, near, bm, qref, qw, lnodes, lweights, out):
    """Fill ``out[0..3]`` with S, D, D*, N for one (point, triangle) pair."""
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    s = 0.0 + 0.0j
    dl = 0.0 + 0.0j
    ds = 0.0 + 0.0j
    nn = 0.0 + 0.0j
    if not near:
        ndot = _dot(nx, n)
        for q in range(qw.shape[0]):
            y = tri[0] + qref[q, 0] * e1 + qref[q, 1] * e2
            d = x - y
            r = _norm(d)
            kr = k * r
            g = complex(math.cos(kr), math.sin(kr)) / (FOUR_PI * r)
            a = complex(-1.0 / r, k)
            g1 = g * a
            wq = 2.0 * area * qw[q]
            s += wq * g
            rn_y = _dot(d, n) / r
            dl -= wq * g1 * rn_y
            if bm:
                rn_x = _dot(d, nx) / r
                ds += wq * g1 * rn_x
                g2 = g * (a * a + 1.0 / (r * r))
                nn -= wq * (g2 * rn_x * rn_y + g1 / r * (ndot - rn_x * rn_y))
        out[0] = s
        out[1] = dl
        out[2] = ds
        out[3] = nn
        return
    s_int, grad, omega = _static_triangle(x, tri, n, is_self)
    s = s_int / FOUR_PI
    if not is_self:
        dl = -omega / FOUR_PI
        if bm:
            ds = _dot(nx, grad) / FOUR_PI
    if is_self:
        s += _self_remainder(x, tri, k, lnodes, lweights)
    else:
        for q in range(qw.shape[0]):
            y = tri[0] + qref[q, 0] * e1 + qref[q, 1] * e2
            d = x - y
            r = _norm(d)
            kr = k * r
            ekr = complex(math.cos(kr), math.sin(kr))
            wq = 2.0 * area * qw[q]
            s += wq * (ekr - 1.0) / (FOUR_PI * r)
            dg = (ekr * complex(-1.0, kr) + 1.0) / (FOUR_PI * r * r)
            dl -= wq * dg * _dot(d, n) / r
            if bm:
                ds += wq * dg * _dot(d, nx) / r
    if bm:
        nn = k * k * _dot(nx, n) * s + _contour_static(x, nx, tri) + _contour_dynamic(x, nx, tri, k, lnodes, lweights)
    out[0] = s
    out[1] = dl
    out[2] = ds
    out[3] = nn


@numba.njit(cache=True)
def _block(points, pnormals, self_index, tris, tnormals, areas, centroids, diams, k, bm,
           near_factor, qref, qw, lnodes, lweights, S, D, Ds, N):
    out = np.empty(4, dtype=np.complex128)
    for i in range(points.shape[0]):
        x = points[i]
        nx = pnormals[i]
        for j in range(tris.shape[0]):
            is_self = self_index[i] == j
            c = centroids[j]
            dist = math.sqrt((x[0] - c[0]) ** 2 + (x[1] - c[1]) ** 2 + (x[2] - c[2]) ** 2)
            near = is_self or dist < near_factor * diams[j]
            _pair(x, nx, tris[j], tnormals[j], areas[j], k, is_self, near, bm, qref, qw, lnodes, lweights, out)
            S[i, j] = out[0]
            D[i, j] = out[1]
            if bm:
                Ds[i, j] = out[2]
                N[i, j] = out[3]


_QREF, _QW = triangle_rule(TRIANGLE_ORDER)
_LNODES, _LWEIGHTS = gauss_legendre_01(LINE_ORDER)


def operator_blocks(points, point_normals, self_index, mesh, k, hypersingular=True,
                    near_factor=NEAR_FACTOR, order=TRIANGLE_ORDER, line_order=LINE_ORDER):
    """Element integrals for every (point, triangle) pair.

    ``self_index[i]`` names the triangle whose centroid is point ``i`` (or -1).
    Returns ``(S, D, Dstar, N)`` as complex arrays of shape (points, triangles);
    ``Dstar`` and ``N`` are ``None`` unless ``hypersingular`` is set.
    """
    points = np.ascontiguousarray(points, dtype=float)
    pn = np.ascontiguousarray(point_normals, dtype=float)
    self_index = np.ascontiguousarray(self_index, dtype=np.int64)
    m, n = len(points), len(mesh)
    if order == TRIANGLE_ORDER:
        qref, qw = _QREF, _QW
    else:
        qref, qw = triangle_rule(order)
    if line_order == LINE_ORDER:
        ln, lw = _LNODES, _LWEIGHTS
    else:
        ln, lw = gauss_legendre_01(line_order)
    S = np.empty((m, n), dtype=np.complex128)
    D = np.empty((m, n), dtype=np.complex128)
    Ds = np.empty((m, n) if hypersingular else (1, 1), dtype=np.complex128)
    N = np.empty((m, n) if hypersingular else (1, 1), dtype=np.complex128)
    _block(points, pn, self_index, np.ascontiguousarray(mesh.corners), np.ascontiguousarray(mesh.normals),
           mesh.areas, np.ascontiguousarray(mesh.centroids), mesh.diameters, float(k), bool(hypersingular),
           float(near_factor), qref, qw, ln, lw, S, D, Ds, N)
    if not hypersingular:
        return S, D, None, None
    return S, D, Ds, N


def element_integral(kind, k, element, collocation_point, collocation_normal=None,
                     near_factor=NEAR_FACTOR, order=TRIANGLE_ORDER):
    """One layer-potential integral of unit density over ``element``.

    ``element`` is a :class:`~helmbem.meshgen.Element` or a (3, 3) array of
    corners (counter-clockwise about the normal).  A collocation point at the
    element centroid triggers the singular scheme.
    """
    kind = KernelKind(kind) if not isinstance(kind, KernelKind) else kind
    corners = np.asarray(getattr(element, "vertices", element), dtype=float).reshape(3, 3)
    cr = np.cross(corners[1] - corners[0], corners[2] - corners[0])
    area = 0.5 * np.linalg.norm(cr)
    if not area > 0:
        raise ValueError("degenerate element")
    normal = cr / (2.0 * area)
    x = np.asarray(collocation_point, dtype=float)
    if kind in (KernelKind.Dstar, KernelKind.N):
        if collocation_normal is None:
            raise ValueError(f"{kind.value} needs the collocation normal")
        nx = np.asarray(collocation_normal, dtype=float)
    else:
        nx = normal if collocation_normal is None else np.asarray(collocation_normal, dtype=float)
    centroid = corners.mean(axis=0)
    diam = max(np.linalg.norm(corners[i] - corners[(i + 1) % 3]) for i in range(3))
    is_self = np.linalg.norm(x - centroid) <= 1e-12 * diam
    qref, qw = (_QREF, _QW) if order == TRIANGLE_ORDER else triangle_rule(order)
    near = is_self or np.linalg.norm(x - centroid) < near_factor * diam
    out = np.empty(4, dtype=np.complex128)
    _pair(x, nx, corners, normal, area, float(k), is_self, near, True, qref, qw, _LNODES, _LWEIGHTS, out)
    return complex(out[["S", "D", "Dstar", "N"].index(kind.value)])
