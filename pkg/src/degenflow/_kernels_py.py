"""Pure-numpy flux-form kernels. Same signatures and arithmetic as the
compiled ``_kernels`` extension; used when it is not built or when
DEGENFLOW_PURE=1 is set."""
import numpy as np

ZERO_FLUX, DIRICHLET_ZERO, PERIODIC = 0, 1, 2
ARITHMETIC, HARMONIC = 0, 1


def _pad(f, axis, bc):
    widths = [(0, 0)] * f.ndim
    widths[axis] = (1, 1)
    if bc == PERIODIC:
        return np.pad(f, widths, mode="wrap")
    g = np.pad(f, widths, mode="edge")
    if bc == DIRICHLET_ZERO:
        idx = [slice(None)] * f.ndim
        idx[axis] = 0
        g[tuple(idx)] *= -1.0
        idx[axis] = -1
        g[tuple(idx)] *= -1.0
    return g


def _pairs(g, axis):
    a = [slice(None)] * g.ndim
    b = [slice(None)] * g.ndim
    a[axis] = slice(0, -1)
    b[axis] = slice(1, None)
    return g[tuple(a)], g[tuple(b)]


def _ends(arr, axis):
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = 0
    hi[axis] = -1
    return tuple(lo), tuple(hi)


def face_coef(U, m, mean, eps, bc):
    """D = m * Ubar^(m-1) on the faces of every axis. Returns (list of
    arrays, number of faces where Ubar = 0 with m < 1 and eps = 0)."""
    U = np.asarray(U, dtype=float)
    out = []
    singular = 0
    for axis in range(U.ndim):
        if m == 1.0:
            shape = list(U.shape)
            shape[axis] += 1
            out.append(np.ones(shape))
            continue
        if bc == PERIODIC:
            g = np.pad(U, [(1, 1) if d == axis else (0, 0) for d in range(U.ndim)], mode="wrap")
        else:
            g = np.pad(U, [(1, 1) if d == axis else (0, 0) for d in range(U.ndim)], mode="edge")
            if bc == DIRICHLET_ZERO:
                lo, hi = _ends(g, axis)
                g[lo] = 0.0
                g[hi] = 0.0
        left, right = _pairs(g, axis)
        if mean == HARMONIC:
            s = left + right
            Ubar = np.where(s > 0, 2.0 * left * right / np.where(s > 0, s, 1.0), 0.0)
        else:
            Ubar = 0.5 * (left + right)
        if m < 1.0:
            if eps > 0:
                Ubar = np.maximum(Ubar, eps)
            else:
                singular += int(np.count_nonzero(Ubar <= 0))
                Ubar = np.where(Ubar > 0, Ubar, np.inf)
        out.append(m * np.power(Ubar, m - 1.0))
    return out, singular


def face_flux(u, D, h, bc, a, b, c5, q, e):
    """Face fluxes D*(a p_n + b (p_perp)_n) + c5 z^q e_n for one component."""
    u = np.asarray(u, dtype=float)
    dims = u.ndim
    fluxes = []
    for axis in range(dims):
        g = _pad(u, axis, bc)
        left, right = _pairs(g, axis)
        F = D[axis] * (a * (right - left) / h[axis])
        if b != 0.0 and dims == 2:
            other = 1 - axis
            go = _pad(u, other, bc)
            hi = [slice(None)] * 2
            lo = [slice(None)] * 2
            hi[other] = slice(2, None)
            lo[other] = slice(0, -2)
            centered = (go[tuple(hi)] - go[tuple(lo)]) / (2.0 * h[other])
            cl, cr = _pairs(_pad(centered, axis, bc), axis)
            tangential = 0.5 * (cl + cr)
            # perp = (-p_y, p_x): x-faces see -p_y, y-faces see +p_x
            F = F + D[axis] * (b * (-tangential if axis == 0 else tangential))
        if c5 != 0.0 and e[axis] != 0.0:
            z = np.maximum(0.5 * (left + right), 0.0)
            F = F + c5 * np.power(z, q) * e[axis]
        if bc == ZERO_FLUX:
            lo, hi = _ends(F, axis)
            F[lo] = 0.0
            F[hi] = 0.0
        fluxes.append(F)
    return fluxes


def rhs(u, D, h, bc, a, b, c5, q, e):
    """Divergence of the face flux and the net mass inflow rate through the
    domain boundary."""
    F = face_flux(u, D, h, bc, a, b, c5, q, e)
    out = np.zeros(u.shape)
    inflow = 0.0
    area = [float(np.prod([h[d] for d in range(u.ndim) if d != axis])) for axis in range(u.ndim)]
    for axis, Fa in enumerate(F):
        out += np.diff(Fa, axis=axis) / h[axis]
        lo, hi = _ends(Fa, axis)
        inflow += float((Fa[hi].sum() - Fa[lo].sum()) * area[axis])
    return out, inflow


SUM, WEIGHTED_POWER, EUCLIDEAN = 0, 1, 2


def _coupler(u, kind, lam, beta):
    v = np.maximum(u, 0.0)
    if kind == SUM:
        return v.sum(axis=0)
    if kind == WEIGHTED_POWER:
        shape = (-1,) + (1,) * (u.ndim - 1)
        return (np.reshape(lam, shape) * np.power(v, np.reshape(beta, shape))).sum(axis=0)
    return np.sqrt((v * v).sum(axis=0))


def advance(u_in, h, bc, m, mean, eps, coupler, lam, beta, a, b, C3, c5, q, e, cfl,
            t, t_target, max_steps, clip, tol):
    """Forward-Euler steps with the stable step size until ``t_target`` or
    ``max_steps``. Returns (u, t, steps, last_dt, clipped, outflow, status,
    where) with status 0 ok, 1 singular coefficient, 2 non-finite value."""
    u = np.array(u_in, dtype=float, copy=True)
    k = u.shape[0]
    dims = u.ndim - 1
    hmin = min(h[:dims])
    vol = float(np.prod(h[:dims]))
    clipped = np.zeros(k)
    outflow = np.zeros(k)
    steps = 0
    dt = 0.0
    while steps < max_steps and t < t_target - tol:
        D, singular = face_coef(_coupler(u, coupler, lam, beta), m, mean, eps, bc)
        if singular:
            return u, t, steps, dt, clipped, outflow, 1, None
        Dmax = max(float(np.max(d)) for d in D)
        dt = cfl * hmin * hmin / (2.0 * dims * max(Dmax * C3, 1e-300))
        if c5 > 0:
            slope = c5 * q * max(float(np.max(u)), 0.0) ** (q - 1.0)
            if slope > 0:
                dt = min(dt, cfl * hmin / slope)
        if t + dt >= t_target - tol:
            dt = t_target - t
        for i in range(k):
            with np.errstate(invalid="ignore", over="ignore"):
                r, inflow = rhs(u[i], D, h, bc, a, b, c5, q, e)
                new = u[i] + dt * r
            bad = ~np.isfinite(new)
            if bad.any():
                return u, t, steps, dt, clipped, outflow, 2, (i, tuple(np.argwhere(bad)[0]))
            if clip:
                neg = np.minimum(new, 0.0)
                clipped[i] += -neg.sum() * vol
                np.maximum(new, 0.0, out=new)
            u[i] = new
            outflow[i] += -inflow * dt
        t += dt
        if abs(t - t_target) <= tol:
            t = t_target
        steps += 1
    return u, t, steps, dt, clipped, outflow, 0, None
