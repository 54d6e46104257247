# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the tridiagonal and Crank-Nicolson kernels.

Mirrors _march_py exactly; the pure backend is the reference in the parity
tests.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double PIVOT_FLOOR = 1e-14


class SingularSystemError(ValueError):
    """Tridiagonal factorization hit a near-zero pivot."""


cdef int _thomas_core(double[::1] lower, double[::1] diag, double[::1] upper,
                      double[::1] rhs, double[::1] x, double[::1] c,
                      double[::1] d) except -1:
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double piv = diag[0]
    if piv < PIVOT_FLOOR and piv > -PIVOT_FLOOR:
        raise SingularSystemError("near-zero pivot at row 0")
    if n > 1:
        c[0] = upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if piv < PIVOT_FLOOR and piv > -PIVOT_FLOOR:
            raise SingularSystemError(f"near-zero pivot at row {i}")
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return 0


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system by the Thomas algorithm with pivot checks."""
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] di = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = di.shape[0]
    if lo.shape[0] != n - 1 or up.shape[0] != n - 1 or b.shape[0] != n:
        raise ValueError("inconsistent tridiagonal system sizes")
    out = np.empty(n)
    scratch_c = np.empty(max(n - 1, 1))
    scratch_d = np.empty(n)
    cdef double[::1] x = out
    cdef double[::1] c = scratch_c
    cdef double[::1] d = scratch_d
    _thomas_core(lo, di, up, b, x, c, d)
    return out


cdef void _backward_coeffs(double[:] b_row, double dx, double sigma,
                           double zeroth, double peclet_limit, bint neumann,
                           double[::1] lo, double[::1] di, double[::1] up):
    cdef Py_ssize_t m = lo.shape[0]
    cdef Py_ssize_t i
    cdef double D = 0.5 * sigma * sigma / (dx * dx)
    cdef double b, bl
    for i in range(m):
        b = b_row[i + 1]
        if (b if b >= 0 else -b) * dx / (sigma * sigma) > peclet_limit:
            if b >= 0:
                lo[i] = D
                di[i] = -2 * D - b / dx - zeroth
                up[i] = D + b / dx
            else:
                lo[i] = D - b / dx
                di[i] = -2 * D + b / dx - zeroth
                up[i] = D
        else:
            lo[i] = D - b / (2 * dx)
            di[i] = -2 * D - zeroth
            up[i] = D + b / (2 * dx)
    if neumann:
        bl = b_row[m]
        lo[m - 1] = -bl / dx
        di[m - 1] = bl / dx - zeroth
        up[m - 1] = 0.0


def backward_march(drift, source, terminal, left, int right_kind, right,
                   double dx, double dt, double sigma, double zeroth,
                   double peclet_limit):
    """Crank-Nicolson march of v_t + (s^2/2)v_xx + b v_x - zeroth v + source = 0."""
    cdef double[:, :] b = np.ascontiguousarray(drift, dtype=np.float64)
    cdef double[:, :] s = np.ascontiguousarray(source, dtype=np.float64)
    cdef double[::1] term = np.ascontiguousarray(terminal, dtype=np.float64)
    cdef double[::1] lbc = np.ascontiguousarray(left, dtype=np.float64)
    cdef double[::1] rbc = np.ascontiguousarray(right, dtype=np.float64)
    cdef Py_ssize_t Nt = b.shape[0] - 1
    cdef Py_ssize_t Nx = b.shape[1] - 1
    cdef Py_ssize_t m = Nx - 1
    cdef bint neumann = right_kind != 0
    out = np.empty((Nt + 1, Nx + 1))
    cdef double[:, ::1] v = out
    cdef Py_ssize_t n, i
    cdef double h = 0.5 * dt
    lo0_a = np.empty(m); di0_a = np.empty(m); up0_a = np.empty(m)
    lo1_a = np.empty(m); di1_a = np.empty(m); up1_a = np.empty(m)
    rhs_a = np.empty(m); al_a = np.empty(m - 1); ad_a = np.empty(m)
    au_a = np.empty(m - 1); x_a = np.empty(m)
    sc_a = np.empty(max(m - 1, 1)); sd_a = np.empty(m)
    cdef double[::1] lo0 = lo0_a, di0 = di0_a, up0 = up0_a
    cdef double[::1] lo1 = lo1_a, di1 = di1_a, up1 = up1_a
    cdef double[::1] rhs = rhs_a, al = al_a, ad = ad_a, au = au_a, x = x_a
    cdef double[::1] sc = sc_a, sd = sd_a

    for i in range(Nx + 1):
        v[Nt, i] = term[i]
    v[Nt, 0] = lbc[Nt]
    if not neumann:
        v[Nt, Nx] = rbc[Nt]
    for n in range(Nt - 1, -1, -1):
        _backward_coeffs(b[n + 1], dx, sigma, zeroth, peclet_limit, neumann,
                         lo0, di0, up0)
        _backward_coeffs(b[n], dx, sigma, zeroth, peclet_limit, neumann,
                         lo1, di1, up1)
        for i in range(m):
            rhs[i] = (v[n + 1, i + 1]
                      + h * (lo0[i] * v[n + 1, i] + di0[i] * v[n + 1, i + 1]
                             + up0[i] * v[n + 1, i + 2])
                      + h * (s[n, i + 1] + s[n + 1, i + 1]))
        rhs[0] += h * lo1[0] * lbc[n]
        if not neumann:
            rhs[m - 1] += h * up1[m - 1] * rbc[n]
        for i in range(m):
            ad[i] = 1.0 - h * di1[i]
        for i in range(m - 1):
            al[i] = -h * lo1[i + 1]
            au[i] = -h * up1[i]
        _thomas_core(al, ad, au, rhs, x, sc, sd)
        for i in range(m):
            v[n, i + 1] = x[i]
        v[n, 0] = lbc[n]
        if neumann:
            v[n, Nx] = 2 * x[m - 1] - x[m - 2]
        else:
            v[n, Nx] = rbc[n]
    return out


def forward_march(drift, source_flux, initial, double dx, double dt,
                  double sigma):
    """Crank-Nicolson march of mu_t = (s^2/2)mu_xx + (b mu)_x + (nu)_x."""
    cdef double[:, :] b = np.ascontiguousarray(drift, dtype=np.float64)
    cdef double[:, :] nu = np.ascontiguousarray(source_flux, dtype=np.float64)
    cdef double[::1] init = np.ascontiguousarray(initial, dtype=np.float64)
    cdef Py_ssize_t Nt = b.shape[0] - 1
    cdef Py_ssize_t Nx = b.shape[1] - 1
    cdef Py_ssize_t m = Nx - 1
    out = np.empty((Nt + 1, Nx + 1))
    cdef double[:, ::1] mu = out
    cdef Py_ssize_t n, i
    cdef double h = 0.5 * dt
    cdef double D = 0.5 * sigma * sigma / (dx * dx)
    cdef double lo0, di0, up0
    rhs_a = np.empty(m); al_a = np.empty(m - 1); ad_a = np.empty(m)
    au_a = np.empty(m - 1); x_a = np.empty(m)
    sc_a = np.empty(max(m - 1, 1)); sd_a = np.empty(m)
    cdef double[::1] rhs = rhs_a, al = al_a, ad = ad_a, au = au_a, x = x_a
    cdef double[::1] sc = sc_a, sd = sd_a

    for i in range(Nx + 1):
        mu[0, i] = init[i]
    mu[0, 0] = 0.0
    mu[0, Nx] = 0.0
    di0 = -2 * D
    for n in range(Nt):
        for i in range(m):
            lo0 = D - b[n, i] / (2 * dx)
            up0 = D + b[n, i + 2] / (2 * dx)
            rhs[i] = (mu[n, i + 1]
                      + h * (lo0 * mu[n, i] + di0 * mu[n, i + 1]
                             + up0 * mu[n, i + 2])
                      + h * ((nu[n, i + 2] - nu[n, i]) / (2 * dx)
                             + (nu[n + 1, i + 2] - nu[n + 1, i]) / (2 * dx)))
        for i in range(m):
            ad[i] = 1.0 + h * 2 * D
        for i in range(m - 1):
            al[i] = -h * (D - b[n + 1, i + 1] / (2 * dx))
            au[i] = -h * (D + b[n + 1, i + 2] / (2 * dx))
        _thomas_core(al, ad, au, rhs, x, sc, sd)
        for i in range(m):
            mu[n + 1, i + 1] = x[i]
        mu[n + 1, 0] = 0.0
        mu[n + 1, Nx] = 0.0
    return out
