"""Finite-difference stencils on uniform (x, y) grids.

Arrays are indexed [ix, iy] (x outer, y inner). Interior nodes use second
order central differences; edge nodes use second order one-sided formulas,
or wrap around in x when ``periodic_x`` is set. A periodic grid stores the
seam twice: node nx-1 duplicates node 0.

A linear second-order operator on a two-component field is stored as a
coefficient array ``coef`` of shape (5, 2, 2, ncx, ny):

    (L a)_i = sum_l  coef[0,i,l] a_l + coef[1,i,l] d_x a_l + coef[2,i,l] d_y a_l
                   + coef[3,i,l] d_xx a_l + coef[4,i,l] d_yy a_l

with ncx = nx, or ncx = 1 for coefficients that do not depend on x.
"""

import os

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

N_DERIV = 5  # value, d_x, d_y, d_xx, d_yy


def d1(f, h, axis, periodic=False):
    """First derivative of a 2-D array along ``axis``."""
    f = np.asarray(f, dtype=float)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    if periodic:
        out[0] = (f[1] - f[-2]) / (2.0 * h)
        out[-1] = out[0]
    else:
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def d2(f, h, axis, periodic=False):
    """Second derivative of a 2-D array along ``axis``."""
    f = np.asarray(f, dtype=float)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    if periodic:
        out[0] = (f[1] - 2.0 * f[0] + f[-2]) / (h * h)
        out[-1] = out[0]
    else:
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


@numba.njit(cache=True)
def _edge_value(a, coef, c, i, j, hx, hy, periodic_x):
    """(L a)_c at one node, any position; slow path for grid edges."""
    nx = a.shape[1]
    ny = a.shape[2]
    ic = np.int64(i) if coef.shape[3] > 1 else np.int64(0)
    acc = 0.0
    for l in range(2):
        f = a[l]
        f0 = f[i, j]
        if periodic_x or (0 < i < nx - 1):
            im = i - 1 if i > 0 else nx - 2
            ip = i + 1 if i < nx - 1 else 1
            fx = (f[ip, j] - f[im, j]) / (2.0 * hx)
            fxx = (f[ip, j] - 2.0 * f0 + f[im, j]) / (hx * hx)
        else:
            s = 1 if i == 0 else -1
            e0 = f[i, j]
            e1 = f[i + s, j]
            e2 = f[i + 2 * s, j]
            e3 = f[i + 3 * s, j]
            fx = s * (-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * hx)
            fxx = (2.0 * e0 - 5.0 * e1 + 4.0 * e2 - e3) / (hx * hx)
        if 0 < j < ny - 1:
            fy = (f[i, j + 1] - f[i, j - 1]) / (2.0 * hy)
            fyy = (f[i, j + 1] - 2.0 * f0 + f[i, j - 1]) / (hy * hy)
        else:
            s = 1 if j == 0 else -1
            e0 = f[i, j]
            e1 = f[i, j + s]
            e2 = f[i, j + 2 * s]
            e3 = f[i, j + 3 * s]
            fy = s * (-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * hy)
            fyy = (2.0 * e0 - 5.0 * e1 + 4.0 * e2 - e3) / (hy * hy)
        acc += (
            coef[0, c, l, ic, j] * f0
            + coef[1, c, l, ic, j] * fx
            + coef[2, c, l, ic, j] * fy
            + coef[3, c, l, ic, j] * fxx
            + coef[4, c, l, ic, j] * fyy
        )
    return acc


@numba.njit(cache=True, parallel=True)
def _stage_interior(a, base, alpha, beta, dt, flat, hx, hy, periodic_x, out):
    """Nodes of ``stage`` off the y edges, on x rows 1..nx-2 or, when
    ``periodic_x``, on every row with the seam wrapped.

    ``flat`` is the (ncx, 20, ny) layout built by ``Operator``. Works on one
    x row at a time through 1-D views, which keeps the inner loop contiguous
    in y, and uses the same arithmetic on every row so that x-uniform data
    stays bit-for-bit x-uniform.
    """
    nx = a.shape[1]
    ny = a.shape[2]
    first = 0 if periodic_x else 1
    nrows = nx - 2 * first
    xdep = flat.shape[0] > 1
    r2x = 1.0 / (2.0 * hx)
    r2y = 1.0 / (2.0 * hy)
    rxx = 1.0 / (hx * hx)
    ryy = 1.0 / (hy * hy)
    for ii in numba.prange(nrows):
        i = np.int64(ii) + first
        im = i - 1 if i > 0 else nx - 2
        ip = i + 1 if i < nx - 1 else np.int64(1)
        ct = flat[i] if xdep else flat[0]
        m0 = a[0, im]
        c0 = a[0, i]
        q0 = a[0, ip]
        m1 = a[1, im]
        c1 = a[1, i]
        q1 = a[1, ip]
        b0 = base[0, i]
        b1 = base[1, i]
        o0 = out[0, i]
        o1 = out[1, i]
        for j in range(1, ny - 1):
            p0 = c0[j]
            p1 = c1[j]
            x0 = (q0[j] - m0[j]) * r2x
            x1 = (q1[j] - m1[j]) * r2x
            y0 = (c0[j + 1] - c0[j - 1]) * r2y
            y1 = (c1[j + 1] - c1[j - 1]) * r2y
            xx0 = (q0[j] - 2.0 * p0 + m0[j]) * rxx
            xx1 = (q1[j] - 2.0 * p1 + m1[j]) * rxx
            yy0 = (c0[j + 1] - 2.0 * p0 + c0[j - 1]) * ryy
            yy1 = (c1[j + 1] - 2.0 * p1 + c1[j - 1]) * ryy
            # flat index = 4 * derivative + 2 * component + source
            l0 = (
                ct[0, j] * p0 + ct[1, j] * p1 + ct[4, j] * x0 + ct[5, j] * x1
                + ct[8, j] * y0 + ct[9, j] * y1 + ct[12, j] * xx0 + ct[13, j] * xx1
                + ct[16, j] * yy0 + ct[17, j] * yy1
            )
            l1 = (
                ct[2, j] * p0 + ct[3, j] * p1 + ct[6, j] * x0 + ct[7, j] * x1
                + ct[10, j] * y0 + ct[11, j] * y1 + ct[14, j] * xx0 + ct[15, j] * xx1
                + ct[18, j] * yy0 + ct[19, j] * yy1
            )
            o0[j] = alpha * b0[j] + beta * (p0 + dt * l0)
            o1[j] = alpha * b1[j] + beta * (p1 + dt * l1)


@numba.njit(cache=True)
def _stage_edges(a, base, alpha, beta, dt, coef, hx, hy, periodic_x, out):
    """Nodes of ``stage`` not covered by ``_stage_interior``."""
    nx = a.shape[1]
    ny = a.shape[2]
    for i in range(nx):
        full = (i == 0 or i == nx - 1) and not periodic_x
        j = 0
        while j < ny:
            for c in range(2):
                lv = _edge_value(a, coef, c, i, j, hx, hy, periodic_x)
                out[c, i, j] = alpha * base[c, i, j] + beta * (a[c, i, j] + dt * lv)
            j = j + 1 if full or j == ny - 1 else ny - 1


class Operator:
    """Coefficient array plus the row-major copy used by the interior kernel."""

    def __init__(self, coef):
        self.coef = compact(coef)
        ncx, ny = self.coef.shape[3], self.coef.shape[4]
        flat = self.coef.reshape(4 * N_DERIV, ncx, ny)
        self.flat = np.ascontiguousarray(flat.transpose(1, 0, 2))

    @property
    def x_uniform(self):
        return self.coef.shape[3] == 1


def stage(a, base, alpha, beta, dt, op, hx, hy, periodic_x, out, pinned_edges=False):
    """out = alpha * base + beta * (a + dt * L a) for an ``Operator`` ``op``.

    With ``pinned_edges`` the nodes a Dirichlet boundary will overwrite
    anyway (y edges always, x edges unless ``periodic_x``) are skipped and
    keep whatever ``out`` held. Every node is computed independently from
    ``a``, so the result does not depend on how rows are split over threads.
    """
    _stage_interior(a, base, alpha, beta, dt, op.flat, hx, hy, periodic_x, out)
    if not pinned_edges:
        _stage_edges(a, base, alpha, beta, dt, op.coef, hx, hy, periodic_x, out)


@numba.njit(cache=True, parallel=True)
def apply_operator(a, coef, hx, hy, periodic_x, out):
    """out = L a."""
    nx = a.shape[1]
    ny = a.shape[2]
    for ii in numba.prange(nx):
        i = np.int64(ii)
        for j in range(ny):
            for c in range(2):
                out[c, i, j] = _edge_value(a, coef, c, i, j, hx, hy, periodic_x)


def compact(coef):
    """Drop the x axis of ``coef`` when it carries no x dependence."""
    coef = np.asarray(coef, dtype=float)
    if coef.shape[3] > 1 and np.all(coef == coef[:, :, :, :1, :]):
        coef = coef[:, :, :, :1, :]
    return np.ascontiguousarray(coef)


def apply(a, coef, hx, hy, periodic_x=False):
    a = np.ascontiguousarray(a, dtype=float)
    out = np.empty_like(a)
    apply_operator(a, compact(coef), hx, hy, periodic_x, out)
    return out
