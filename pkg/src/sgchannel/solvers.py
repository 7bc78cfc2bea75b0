"""Per-Fourier-mode boundary-value solvers in Chebyshev coefficient space.

Each solver is a dense bordered tau system: the operator acts on
Chebyshev coefficients and the rows for the highest degrees are replaced
by boundary-condition rows.  Systems are row-equilibrated, inverted once
per (mode, parameter) and reused; the resulting dense solve operators can
be gathered into batched arrays applied to every Fourier mode at once.
"""

import numpy as np
from functools import lru_cache


def bc_rows(n):
    """Boundary rows on coefficients: value and d/dy at y=+1 and y=-1."""
    deg = np.arange(n + 1, dtype=float)
    sign = np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
    val_top = np.ones(n + 1)
    val_bot = sign.copy()
    der_top = deg * deg
    der_bot = -sign * deg * deg
    return val_top, val_bot, der_top, der_bot


def _solve_matrix(a):
    """Row-equilibrated inverse: x = S @ b solves a @ x = b."""
    r = np.max(np.abs(a), axis=1)
    r[r == 0] = 1.0
    try:
        inv = np.linalg.inv(a / r[:, None])
    except np.linalg.LinAlgError as exc:  # defensive; cannot occur for real k
        raise SingularModeSystem(str(exc)) from exc
    return inv / r[None, :]


class SingularModeSystem(RuntimeError):
    pass


def _zero_tail(n, nbc):
    z = np.eye(n + 1)
    z[-nbc:, -nbc:] = 0.0
    return z


class ModeSolvers:
    """Factory/cache of dense per-mode solve operators for one grid."""

    def __init__(self, grid):
        self.grid = grid
        n = grid.ny
        d = grid.cheb_deriv
        self.d2 = d @ d
        self.eye = np.eye(n + 1)
        self.rows = bc_rows(n)
        self._cache = {}

    def _lap(self, k):
        return self.d2 - (2.0 * np.pi * k / self.grid.lx) ** 2 * self.eye

    def poisson_dirichlet(self, k):
        """psi: (D^2 - k^2) psi = rhs, psi(+-1)=0, as a matrix on rhs coefficients."""
        key = ("poisson", float(k))
        if key not in self._cache:
            a = self._lap(k).copy()
            val_top, val_bot, _, _ = self.rows
            a[-2, :] = val_top
            a[-1, :] = val_bot
            s = _solve_matrix(a) @ _zero_tail(self.grid.ny, 2)
            self._cache[key] = s
        return self._cache[key]

    def helmholtz_dirichlet(self, k, lam):
        """phi: (D^2 - k^2 - lam) phi = rhs, phi(+-1) given.

        Returns (S, W): phi = S @ rhs + W @ [top, bottom].
        """
        if lam <= 0:
            raise ValueError("lambda must be positive")
        key = ("helmholtz", float(k), float(lam))
        if key not in self._cache:
            a = self._lap(k) - lam * self.eye
            val_top, val_bot, _, _ = self.rows
            a[-2, :] = val_top
            a[-1, :] = val_bot
            full = _solve_matrix(a)
            s = full @ _zero_tail(self.grid.ny, 2)
            self._cache[key] = (s, full[:, -2:].copy())
        return self._cache[key]

    def clamped_second_grade(self, k, alpha):
        """psi: (I - alpha^2 (D^2-k^2)) (D^2-k^2) psi = rhs, psi(+-1)=psi'(+-1)=0."""
        if alpha <= 0:
            raise ValueError("alpha must be positive; route alpha=0 to the Poisson path")
        key = ("clamped", float(k), float(alpha))
        if key not in self._cache:
            lap = self._lap(k)
            a = (self.eye - alpha * alpha * lap) @ lap
            val_top, val_bot, der_top, der_bot = self.rows
            a[-4, :] = val_top
            a[-3, :] = val_bot
            a[-2, :] = der_top
            a[-1, :] = der_bot
            s = _solve_matrix(a) @ _zero_tail(self.grid.ny, 4)
            self._cache[key] = s
        return self._cache[key]

    def omega_from_q(self, k, alpha):
        """Map from potential-vorticity to vorticity coefficients, per mode."""
        key = ("qmap", float(k), float(alpha))
        if key not in self._cache:
            self._cache[key] = self._lap(k) @ self.clamped_second_grade(k, alpha)
        return self._cache[key]

    def relaxation_resolvent(self, k, alpha, coeff):
        """Inverse of (I + coeff * (I - M_k)) with M_k the q->omega map."""
        key = ("resolvent", float(k), float(alpha), float(coeff))
        if key not in self._cache:
            m = self.omega_from_q(k, alpha)
            self._cache[key] = _solve_matrix(self.eye + coeff * (self.eye - m))
        return self._cache[key]

    def relaxation_propagator(self, k, alpha, rate, h):
        """exp(-h * rate * (I - M_k)): exact substep of the relaxation term.

        Unconditionally stable for any rate = nu/alpha^2 (the spectrum of
        I - M_k sits in [0, 1) up to tau closure), so stiff paths with
        nu >> alpha^2 cost nothing extra.
        """
        key = ("propagator", float(k), float(alpha), float(rate), float(h))
        if key not in self._cache:
            from scipy.linalg import expm

            m = self.omega_from_q(k, alpha)
            self._cache[key] = expm(-h * rate * (self.eye - m))
        return self._cache[key]

    def int_from_bottom(self):
        """Antiderivative on coefficients, normalized to vanish at y = -1.

        The top coefficient produced by integration is truncated back to
        degree ny (tau-style).
        """
        key = ("intbot",)
        if key not in self._cache:
            n = self.grid.ny
            a = np.zeros((n + 1, n + 1))
            for m in range(n + 1):
                e = np.zeros(n + 1)
                e[m] = 1.0
                prim = np.polynomial.chebyshev.chebint(e)
                a[:, m] = prim[: n + 1]
            _, val_bot, _, _ = self.rows
            a -= np.outer(np.eye(n + 1)[:, 0], val_bot @ a)
            self._cache[key] = a
        return self._cache[key]

    def mean_flow_recovery(self):
        """k=0 maps: vorticity -> mean velocity U and -> stream function.

        U = -int_{-1}^{y} omega (no-slip gauge U(-1)=0), psi = -int_{-1}^{y} U.
        """
        key = ("meanflow",)
        if key not in self._cache:
            ib = self.int_from_bottom()
            u_map = -ib
            psi_map = ib @ ib
            self._cache[key] = (u_map, psi_map)
        return self._cache[key]

    def ns_diffusion(self, k, nu, h):
        """Crank-Nicolson diffusion substep of length h with no-slip walls.

        k != 0: influence-matrix closure, two auxiliary solves pin the wall
        vorticity so that d(psi)/dy vanishes at both walls.  k = 0: the
        mean profile U is advanced directly with Dirichlet walls and the
        vorticity recomputed from it (the flux rides inside omega).
        Returns (G, B): omega_new = G @ (B @ omega_old).
        """
        key = ("nsdiff", float(k), float(nu), float(h))
        if key not in self._cache:
            c = 0.5 * nu * h
            lap = self._lap(k)
            val_top, val_bot, der_top, der_bot = self.rows
            if k == 0:
                u_map, _ = self.mean_flow_recovery()
                d2 = self.d2
                a = self.eye - c * d2
                a[-2, :] = val_top
                a[-1, :] = val_bot
                u_solve = _solve_matrix(a) @ _zero_tail(self.grid.ny, 2)
                d = self.grid.cheb_deriv
                g = -d @ u_solve
                b = (self.eye + c * d2) @ u_map
                self._cache[key] = (g, b)
            else:
                a = self.eye - c * lap
                b = self.eye + c * lap
                a[-2, :] = val_top
                a[-1, :] = val_bot
                full = _solve_matrix(a)
                t = full @ _zero_tail(self.grid.ny, 2)
                omega_cols = full[:, -2:]  # responses to unit wall vorticity
                psi_solve = self.poisson_dirichlet(k)
                slip = np.vstack([der_top, der_bot])
                m_inf = slip @ (psi_solve @ omega_cols)
                try:
                    m_inf_inv = np.linalg.inv(m_inf)
                except np.linalg.LinAlgError as exc:
                    raise SingularModeSystem(f"influence matrix singular at k={k}") from exc
                g = t - omega_cols @ (m_inf_inv @ (slip @ (psi_solve @ t)))
                self._cache[key] = (g, b)
        return self._cache[key]


@lru_cache(maxsize=32)
def mode_solvers(grid):
    """Shared ModeSolvers cache per grid (grids hash by nx, ny, lx)."""
    return ModeSolvers(grid)


def solve_poisson_dirichlet(grid, k, rhs):
    """Solve (D^2 - k^2) phi = rhs on (-1,1) with phi(+-1) = 0.

    rhs and the result are 1D Chebyshev coefficient vectors.
    """
    rhs = np.asarray(rhs)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs must be finite")
    return mode_solvers(grid).poisson_dirichlet(k) @ rhs


def solve_clamped_second_grade(grid, k, alpha, rhs):
    """Solve (I - alpha^2 (D^2 - k^2))(D^2 - k^2) psi = rhs, clamped walls."""
    rhs = np.asarray(rhs)
    return mode_solvers(grid).clamped_second_grade(k, alpha) @ rhs


def solve_helmholtz_influence(grid, k, lam, rhs, wall_values):
    """Solve (D^2 - k^2 - lam) phi = rhs with phi(+1), phi(-1) prescribed."""
    rhs = np.asarray(rhs)
    s, w = mode_solvers(grid).helmholtz_dirichlet(k, lam)
    return s @ rhs + w @ np.asarray(wall_values, dtype=rhs.dtype)


class BatchedModeOperator:
    """One dense matrix per |k|, applied to every Fourier row at once."""

    def __init__(self, grid, mats_by_absk):
        idx = np.abs(grid.k_int).astype(int)
        self._gathered = np.ascontiguousarray(mats_by_absk[idx])

    def apply(self, coeffs):
        stacked = np.stack([coeffs.real, coeffs.imag], axis=-1)
        out = self._gathered @ stacked
        return out[..., 0] + 1j * out[..., 1]


def batched(grid, builder):
    """Gather builder(|k|) over |k| = 0..nx/2 into a BatchedModeOperator."""
    mats = np.stack([builder(k) for k in range(grid.nx // 2 + 1)])
    return BatchedModeOperator(grid, mats)
