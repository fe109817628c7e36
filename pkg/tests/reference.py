"""Independent reference values for the tests.

Nothing here imports the package's numerics: the Barenblatt constant comes
from the Beta-function closed form (the package integrates the radial
profile numerically) and the explicit steps are plain loops.
"""
import math


def beta_fn(a, b):
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def barenblatt_alpha(m, n):
    return n / (n * (m - 1.0) + 2.0)


def barenblatt_kappa(m, n):
    return barenblatt_alpha(m, n) * abs(m - 1.0) / (2.0 * m * n)


def barenblatt_constant(m, n, M=1.0):
    """C such that the source-type profile carries mass M.

    The C = 1 profile integrates to |S^{n-1}| kappa^{-n/2} B(n/2, e+1)/2 for
    m > 1 (e = 1/(m-1)) and |S^{n-1}| kappa^{-n/2} B(n/2, e-n/2)/2 for m < 1
    (e = 1/(1-m)); the mass scales as C^p.
    """
    kap = barenblatt_kappa(m, n)
    sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    if m > 1:
        e = 1.0 / (m - 1.0)
        m1 = 0.5 * sphere * kap ** (-n / 2) * beta_fn(n / 2, e + 1.0)
        p = e + n / 2
    else:
        e = 1.0 / (1.0 - m)
        m1 = 0.5 * sphere * kap ** (-n / 2) * beta_fn(n / 2, e - n / 2)
        p = n / 2 - e
    return (M / m1) ** (1.0 / p)


def pme_step_1d(u, h, dt, m):
    """One explicit step of the Sum-coupled system in 1-D with zero-flux
    walls, written cell by cell. ``u`` is a list of component lists."""
    k, N = len(u), len(u[0])
    U = [sum(u[i][j] for i in range(k)) for j in range(N)]
    D = []
    for j in range(N - 1):
        ubar = 0.5 * (U[j] + U[j + 1])
        D.append(m * ubar ** (m - 1.0) if m != 1 else 1.0)
    out = []
    for i in range(k):
        F = [0.0] + [D[j] * (u[i][j + 1] - u[i][j]) / h for j in range(N - 1)] + [0.0]
        out.append([u[i][j] + dt * (F[j + 1] - F[j]) / h for j in range(N)])
    return out
