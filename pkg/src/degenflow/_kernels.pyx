# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flux-form kernels; mirrors _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fmax, fmin, sqrt, fabs, INFINITY, isfinite

cnp.import_array()

cdef enum:
    ZERO_FLUX = 0
    DIRICHLET_ZERO = 1
    PERIODIC = 2
    HARMONIC = 1
    SUM = 0
    WEIGHTED_POWER = 1
    EUCLIDEAN = 2


cdef inline double _mean(double l, double r, int mean) noexcept nogil:
    cdef double s
    if mean == HARMONIC:
        s = l + r
        if s > 0:
            return 2.0 * l * r / s
        return 0.0
    return 0.5 * (l + r)


cdef inline double _coef(double Ubar, double m, double eps, int* singular) noexcept nogil:
    if m < 1.0:
        if eps > 0:
            Ubar = fmax(Ubar, eps)
        elif Ubar <= 0:
            singular[0] += 1
            Ubar = INFINITY
    if m == 2.0:
        return 2.0 * Ubar
    if m == 3.0:
        return 3.0 * Ubar * Ubar
    return m * pow(Ubar, m - 1.0)


cdef int _coef_1d(double[::1] U, double[::1] D, double m, int mean, double eps, int bc) noexcept nogil:
    cdef Py_ssize_t i, N = U.shape[0]
    cdef int singular = 0
    if m == 1.0:
        for i in range(N + 1):
            D[i] = 1.0
        return 0
    for i in range(1, N):
        D[i] = _coef(_mean(U[i - 1], U[i], mean), m, eps, &singular)
    if bc == PERIODIC:
        D[0] = _coef(_mean(U[N - 1], U[0], mean), m, eps, &singular)
        D[N] = D[0]
    elif bc == DIRICHLET_ZERO:
        D[0] = _coef(_mean(0.0, U[0], mean), m, eps, &singular)
        D[N] = _coef(_mean(U[N - 1], 0.0, mean), m, eps, &singular)
    else:
        D[0] = _coef(_mean(U[0], U[0], mean), m, eps, &singular)
        D[N] = _coef(_mean(U[N - 1], U[N - 1], mean), m, eps, &singular)
    return singular


cdef int _coef_2d(double[:, ::1] U, double[:, ::1] Dx, double[:, ::1] Dy,
                  double m, int mean, double eps, int bc) noexcept nogil:
    cdef Py_ssize_t i, j, nx = U.shape[0], ny = U.shape[1]
    cdef int singular = 0
    cdef double l, r
    if m == 1.0:
        Dx[:, :] = 1.0
        Dy[:, :] = 1.0
        return 0
    for i in range(nx + 1):
        for j in range(ny):
            if 0 < i < nx:
                l = U[i - 1, j]
                r = U[i, j]
            elif bc == PERIODIC:
                l = U[nx - 1, j]
                r = U[0, j]
            elif bc == DIRICHLET_ZERO:
                l = 0.0 if i == 0 else U[nx - 1, j]
                r = U[0, j] if i == 0 else 0.0
            else:
                l = U[0, j] if i == 0 else U[nx - 1, j]
                r = l
            Dx[i, j] = _coef(_mean(l, r, mean), m, eps, &singular)
    for i in range(nx):
        for j in range(ny + 1):
            if 0 < j < ny:
                l = U[i, j - 1]
                r = U[i, j]
            elif bc == PERIODIC:
                l = U[i, ny - 1]
                r = U[i, 0]
            elif bc == DIRICHLET_ZERO:
                l = 0.0 if j == 0 else U[i, ny - 1]
                r = U[i, 0] if j == 0 else 0.0
            else:
                l = U[i, 0] if j == 0 else U[i, ny - 1]
                r = l
            Dy[i, j] = _coef(_mean(l, r, mean), m, eps, &singular)
    return singular


def face_coef(U, double m, int mean, double eps, int bc):
    U = np.ascontiguousarray(U, dtype=np.float64)
    cdef int singular
    if U.ndim == 1:
        D = np.empty(U.shape[0] + 1)
        singular = _coef_1d(U, D, m, mean, eps, bc)
        return [D], singular
    Dx = np.empty((U.shape[0] + 1, U.shape[1]))
    Dy = np.empty((U.shape[0], U.shape[1] + 1))
    singular = _coef_2d(U, Dx, Dy, m, mean, eps, bc)
    return [Dx, Dy], singular


cdef inline double _ghost(double v, int bc) noexcept nogil:
    # ghost value for the non-periodic cases
    if bc == DIRICHLET_ZERO:
        return -v
    return v


cdef double _flux_1d(double[::1] u, double[::1] D, double[::1] F, double[::1] out,
                     double h, int bc, double a, double c5, double q, double e0) noexcept nogil:
    cdef Py_ssize_t i, N = u.shape[0]
    cdef double l, r, z
    cdef bint drift = c5 != 0.0 and e0 != 0.0
    for i in range(N + 1):
        if 0 < i < N:
            l = u[i - 1]
            r = u[i]
        elif bc == PERIODIC:
            l = u[N - 1]
            r = u[0]
        elif i == 0:
            r = u[0]
            l = _ghost(r, bc)
        else:
            l = u[N - 1]
            r = _ghost(l, bc)
        F[i] = D[i] * (a * (r - l) / h)
        if drift:
            z = fmax(0.5 * (l + r), 0.0)
            F[i] += c5 * pow(z, q) * e0
    if bc == ZERO_FLUX:
        F[0] = 0.0
        F[N] = 0.0
    for i in range(N):
        out[i] = (F[i + 1] - F[i]) / h
    return F[N] - F[0]


cdef inline double _cell(double[:, ::1] u, Py_ssize_t i, Py_ssize_t j,
                         Py_ssize_t nx, Py_ssize_t ny, int bc) noexcept nogil:
    # value at (i, j) with one ghost layer on each side
    cdef double sign = 1.0
    if i < 0 or i >= nx:
        if bc == PERIODIC:
            i = (i + nx) % nx
        else:
            i = 0 if i < 0 else nx - 1
            if bc == DIRICHLET_ZERO:
                sign = -sign
    if j < 0 or j >= ny:
        if bc == PERIODIC:
            j = (j + ny) % ny
        else:
            j = 0 if j < 0 else ny - 1
            if bc == DIRICHLET_ZERO:
                sign = -sign
    return sign * u[i, j]


cdef double _flux_2d(double[:, ::1] u, double[:, ::1] Dx, double[:, ::1] Dy,
                     double[:, ::1] Fx, double[:, ::1] Fy, double[:, ::1] cy, double[:, ::1] cx,
                     double[:, ::1] out, double hx, double hy, int bc,
                     double a, double b, double c5, double q, double ex, double ey) noexcept nogil:
    cdef Py_ssize_t i, j, nx = u.shape[0], ny = u.shape[1]
    cdef double l, r, z, t_l, t_r, inflow = 0.0
    cdef bint rot = b != 0.0
    if rot:
        # centered differences per cell, with ghosts along the difference axis
        for i in range(nx):
            for j in range(ny):
                cy[i, j] = (_cell(u, i, j + 1, nx, ny, bc) - _cell(u, i, j - 1, nx, ny, bc)) / (2.0 * hy)
                cx[i, j] = (_cell(u, i + 1, j, nx, ny, bc) - _cell(u, i - 1, j, nx, ny, bc)) / (2.0 * hx)
    for i in range(nx + 1):
        for j in range(ny):
            l = _cell(u, i - 1, j, nx, ny, bc)
            r = _cell(u, i, j, nx, ny, bc)
            Fx[i, j] = Dx[i, j] * (a * (r - l) / hx)
            if rot:
                t_l = _cell(cy, i - 1, j, nx, ny, bc)
                t_r = _cell(cy, i, j, nx, ny, bc)
                Fx[i, j] += Dx[i, j] * (b * (-(0.5 * (t_l + t_r))))
            if c5 != 0.0 and ex != 0.0:
                z = fmax(0.5 * (l + r), 0.0)
                Fx[i, j] += c5 * pow(z, q) * ex
    for i in range(nx):
        for j in range(ny + 1):
            l = _cell(u, i, j - 1, nx, ny, bc)
            r = _cell(u, i, j, nx, ny, bc)
            Fy[i, j] = Dy[i, j] * (a * (r - l) / hy)
            if rot:
                t_l = _cell(cx, i, j - 1, nx, ny, bc)
                t_r = _cell(cx, i, j, nx, ny, bc)
                Fy[i, j] += Dy[i, j] * (b * (0.5 * (t_l + t_r)))
            if c5 != 0.0 and ey != 0.0:
                z = fmax(0.5 * (l + r), 0.0)
                Fy[i, j] += c5 * pow(z, q) * ey
    if bc == ZERO_FLUX:
        for j in range(ny):
            Fx[0, j] = 0.0
            Fx[nx, j] = 0.0
        for i in range(nx):
            Fy[i, 0] = 0.0
            Fy[i, ny] = 0.0
    for i in range(nx):
        for j in range(ny):
            out[i, j] = (Fx[i + 1, j] - Fx[i, j]) / hx + (Fy[i, j + 1] - Fy[i, j]) / hy
    for j in range(ny):
        inflow += (Fx[nx, j] - Fx[0, j]) * hy
    for i in range(nx):
        inflow += (Fy[i, ny] - Fy[i, 0]) * hx
    return inflow


def rhs(u, D, h, int bc, double a, double b, double c5, double q, e):
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty_like(u)
    cdef double inflow
    if u.ndim == 1:
        F = np.empty(u.shape[0] + 1)
        inflow = _flux_1d(u, np.ascontiguousarray(D[0]), F, out, h[0], bc, a, c5, q, e[0])
        return out, inflow
    nx, ny = u.shape
    inflow = _flux_2d(u, np.ascontiguousarray(D[0]), np.ascontiguousarray(D[1]),
                      np.empty((nx + 1, ny)), np.empty((nx, ny + 1)),
                      np.empty((nx, ny)), np.empty((nx, ny)), out,
                      h[0], h[1], bc, a, b, c5, q, e[0], e[1])
    return out, inflow


cdef void _coupler(double[:, ::1] u, double[::1] U, int kind,
                   double[::1] lam, double[::1] beta) noexcept nogil:
    # U from max(u, 0) on flattened cells
    cdef Py_ssize_t i, c, k = u.shape[0], N = u.shape[1]
    cdef double s, v
    for c in range(N):
        s = 0.0
        for i in range(k):
            v = fmax(u[i, c], 0.0)
            if kind == SUM:
                s += v
            elif kind == WEIGHTED_POWER:
                s += lam[i] * pow(v, beta[i])
            else:
                s += v * v
        U[c] = sqrt(s) if kind == EUCLIDEAN else s


def advance(u_in, h, int bc, double m, int mean, double eps, int coupler, lam, beta,
            double a, double b, double C3, double c5, double q, e, double cfl,
            double t, double t_target, long max_steps, bint clip, double tol):
    """Forward-Euler steps with the stable step size until ``t_target`` or
    ``max_steps``. Returns (u, t, steps, last_dt, clipped, outflow, status,
    where) with status 0 ok, 1 singular coefficient, 2 non-finite value."""
    u = np.array(u_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t k = u.shape[0], dims = u.ndim - 1, i, c, N
    cdef double[:, ::1] uf = u.reshape(k, -1)
    N = uf.shape[1]
    cdef double[::1] lam_v = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] beta_v = np.ascontiguousarray(beta, dtype=np.float64)
    Uarr = np.empty(u.shape[1:])
    cdef double[::1] Uf = Uarr.reshape(-1)
    outarr = np.empty(u.shape[1:])
    cdef double[::1] of = outarr.reshape(-1)
    cdef double hx = h[0], hy = h[1] if dims == 2 else 1.0
    cdef double ex = e[0], ey = e[1] if dims == 2 else 0.0
    cdef double hmin = fmin(hx, hy) if dims == 2 else hx
    cdef double vol = hx * hy if dims == 2 else hx
    cdef double[::1] D1, F1
    cdef double[:, ::1] Dx, Dy, Fx, Fy, cy, cx, U2, o2
    cdef int nx = u.shape[1], ny = u.shape[2] if dims == 2 else 1
    if dims == 1:
        D1 = np.empty(nx + 1)
        F1 = np.empty(nx + 1)
    else:
        Dx = np.empty((nx + 1, ny))
        Dy = np.empty((nx, ny + 1))
        Fx = np.empty((nx + 1, ny))
        Fy = np.empty((nx, ny + 1))
        cy = np.empty((nx, ny))
        cx = np.empty((nx, ny))
        U2 = Uarr
        o2 = outarr
    clipped = np.zeros(k)
    outflow = np.zeros(k)
    cdef double[::1] clip_v = clipped, out_v = outflow
    cdef long steps = 0
    cdef int status = 0, where_i = -1
    cdef Py_ssize_t where_c = -1
    cdef double dt = 0.0, Dmax, umax, slope, inflow, neg, v, acc
    cdef double[:, ::1] ui1
    views = [u[i] for i in range(k)]
    while steps < max_steps and t < t_target - tol:
        _coupler(uf, Uf, coupler, lam_v, beta_v)
        Dmax = 0.0
        if dims == 1:
            if _coef_1d(Uf, D1, m, mean, eps, bc):
                status = 1
                break
            for c in range(nx + 1):
                Dmax = fmax(Dmax, D1[c])
        else:
            if _coef_2d(U2, Dx, Dy, m, mean, eps, bc):
                status = 1
                break
            for i in range(nx + 1):
                for c in range(ny):
                    Dmax = fmax(Dmax, Dx[i, c])
            for i in range(nx):
                for c in range(ny + 1):
                    Dmax = fmax(Dmax, Dy[i, c])
        dt = cfl * hmin * hmin / (2.0 * dims * fmax(Dmax * C3, 1e-300))
        if c5 > 0:
            umax = -INFINITY
            for i in range(k):
                for c in range(N):
                    umax = fmax(umax, uf[i, c])
            slope = c5 * q * pow(fmax(umax, 0.0), q - 1.0)
            if slope > 0:
                dt = fmin(dt, cfl * hmin / slope)
        if t + dt >= t_target - tol:
            dt = t_target - t
        for i in range(k):
            if dims == 1:
                inflow = _flux_1d(uf[i], D1, F1, of, hx, bc, a, c5, q, ex)
            else:
                inflow = _flux_2d(views[i], Dx, Dy, Fx, Fy, cy, cx, o2, hx, hy, bc, a, b, c5, q, ex, ey)
            # a non-finite value poisons the running sum, so test it once
            acc = 0.0
            for c in range(N):
                acc += dt * of[c]
            if not isfinite(acc):
                status = 2
                where_i = i
                for c in range(N):
                    if not isfinite(uf[i, c] + dt * of[c]):
                        where_c = c
                        break
                break
            neg = 0.0
            for c in range(N):
                v = uf[i, c] + dt * of[c]
                if clip and v < 0:
                    neg += v
                    v = 0.0
                uf[i, c] = v
            clip_v[i] += -neg * vol
            out_v[i] += -inflow * dt
        if status:
            break
        t += dt
        if fabs(t - t_target) <= tol:
            t = t_target
        steps += 1
    where = None
    if status == 2:
        where = (where_i, np.unravel_index(where_c, u.shape[1:]))
    return u, t, steps, dt, clipped, outflow, status, where
