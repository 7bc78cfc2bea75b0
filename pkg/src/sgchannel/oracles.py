"""Independent verification oracles.

Every routine here deliberately avoids the production code path: elliptic
problems are re-solved with dense nodal collocation matrices (the
production solvers work on coefficients with tau closure), relaxation
trajectories come from a matrix exponential, and decay problems from
closed forms.  The `oracle-check` CLI subcommand and the test suite both
drive these.
"""

import numpy as np
from scipy.linalg import expm

from . import spectral


def cheb_nodal_diff(n):
    """Trefethen-style differentiation matrix on the n+1 Gauss-Lobatto points."""
    if n == 0:
        return np.zeros((1, 1)), np.ones(1)
    x = spectral._gauss_lobatto(n)
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** np.arange(n + 1)
    xm = np.tile(x, (n + 1, 1)).T
    dx = xm - xm.T + np.eye(n + 1)
    d = np.outer(c, 1.0 / c) / dx
    d -= np.diag(d.sum(axis=1))
    return d, x


def collocation_poisson(grid, k, rhs_nodal):
    """Nodal solve of (D^2 - k^2) phi = rhs with phi(+-1) = 0."""
    n = grid.ny
    d, _ = cheb_nodal_diff(n)
    kp = 2.0 * np.pi * k / grid.lx
    a = d @ d - kp * kp * np.eye(n + 1)
    a[0, :] = 0.0
    a[0, 0] = 1.0
    a[n, :] = 0.0
    a[n, n] = 1.0
    b = np.asarray(rhs_nodal, dtype=float).copy()
    b[0] = 0.0
    b[n] = 0.0
    return np.linalg.solve(a, b)


def collocation_clamped(grid, k, alpha, rhs_nodal):
    """Nodal solve of (I - a^2(D^2-k^2))(D^2-k^2) psi = rhs, clamped walls.

    Boundary rows: values at nodes 0 and n, slopes at nodes 1 and n-1.
    """
    n = grid.ny
    d, _ = cheb_nodal_diff(n)
    kp = 2.0 * np.pi * k / grid.lx
    lap = d @ d - kp * kp * np.eye(n + 1)
    a = (np.eye(n + 1) - alpha * alpha * lap) @ lap
    b = np.asarray(rhs_nodal, dtype=float).copy()
    a[0, :] = 0.0
    a[0, 0] = 1.0
    a[n, :] = 0.0
    a[n, n] = 1.0
    a[1, :] = d[0, :]
    a[n - 1, :] = d[n, :]
    b[[0, 1, n - 1, n]] = 0.0
    return np.linalg.solve(a, b)


def collocation_helmholtz(grid, k, lam, rhs_nodal, walls):
    n = grid.ny
    d, _ = cheb_nodal_diff(n)
    kp = 2.0 * np.pi * k / grid.lx
    a = d @ d - (kp * kp + lam) * np.eye(n + 1)
    a[0, :] = 0.0
    a[0, 0] = 1.0
    a[n, :] = 0.0
    a[n, n] = 1.0
    b = np.asarray(rhs_nodal, dtype=float).copy()
    b[0], b[n] = walls
    return np.linalg.solve(a, b)


def relaxation_generator(grid, alpha, nu):
    """Dense nodal generator of d(q)/dt = -(nu/a^2)(q - omega[q]) at k=0.

    omega[q] = D^2 psi with (I - a^2 D^2) D^2 psi = q, psi clamped; all
    operators are nodal collocation matrices.
    """
    n = grid.ny
    d, _ = cheb_nodal_diff(n)
    lap = d @ d
    a = (np.eye(n + 1) - alpha * alpha * lap) @ lap
    a[0, :] = 0.0
    a[0, 0] = 1.0
    a[n, :] = 0.0
    a[n, n] = 1.0
    a[1, :] = d[0, :]
    a[n - 1, :] = d[n, :]
    proj = np.eye(n + 1)
    proj[[0, 1, n - 1, n], :] = 0.0
    m = lap @ np.linalg.solve(a, proj)
    return -(nu / alpha**2) * (np.eye(n + 1) - m)


def relaxation_trajectory(grid, alpha, nu, q0_nodal, t):
    """exp(t L) q0 for the nodal relaxation generator (shear, k=0 data)."""
    gen = relaxation_generator(grid, alpha, nu)
    return expm(t * gen) @ np.asarray(q0_nodal, dtype=float)


def decaying_shear_velocity(grid, nu, t):
    """Exact no-slip Navier-Stokes solution u = (cos(pi y/2) e^{-nu pi^2 t/4}, 0)."""
    amp = np.exp(-nu * np.pi**2 * t / 4.0)
    return amp * np.cos(np.pi * grid.y_nodes / 2.0)


def smoothstep(s):
    """C^2 ramp: 1 at s<=0, 0 at s>=1, two continuous derivatives."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def smoothstep_d1(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, -30.0 * s**2 + 60.0 * s**3 - 30.0 * s**4, 0.0)


def smoothstep_d2(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, -60.0 * s + 180.0 * s**2 - 120.0 * s**3, 0.0)


def corrector_norms_1d(delta, slip=1.0, lx=2.0 * np.pi):
    """Closed-form L2 norms of the shear-flow wall corrector by quadrature.

    For the unit-slip shear stream psi = (1-y^2)/2 the corrector stream is
    z(y) psi(y) with z = smoothstep((1-|y|)/delta); returns
    (||u_b||, ||grad u_b||) from adaptive 1D quadrature over one collar.
    """
    from scipy.integrate import quad

    def psi(y):
        return 0.5 * (1.0 - y * y)

    def dpsi(y):
        return -y

    def d2psi(y):
        return -1.0

    def z(y):
        return smoothstep((1.0 - y) / delta)

    def dz(y):
        return smoothstep_d1((1.0 - y) / delta) * (-1.0 / delta)

    def d2z(y):
        return smoothstep_d2((1.0 - y) / delta) * (1.0 / delta**2)

    def u_sq(y):
        return (dz(y) * psi(y) + z(y) * dpsi(y)) ** 2

    def grad_sq(y):
        return (d2z(y) * psi(y) + 2.0 * dz(y) * dpsi(y) + z(y) * d2psi(y)) ** 2

    lo = 1.0 - delta
    iu, _ = quad(u_sq, lo, 1.0, limit=200)
    ig, _ = quad(grad_sq, lo, 1.0, limit=200)
    # two walls, x-average over the period
    return np.sqrt(2.0 * lx * iu), np.sqrt(2.0 * lx * ig)
