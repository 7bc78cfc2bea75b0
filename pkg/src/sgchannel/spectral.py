"""Fourier x Chebyshev function space on the periodic channel.

The domain is [0, lx) x [-1, 1]: periodic in x, walls at y = +-1.
Scalar fields are stored as complex coefficient arrays of shape
(nx, ny+1), axis 0 in numpy FFT mode order, axis 1 by Chebyshev degree.
Real fields carry Hermitian symmetry in the Fourier axis.
"""

import numpy as np
from dataclasses import dataclass, field
from functools import cached_property

from scipy.fft import dct, fft, ifft, next_fast_len


def _gauss_lobatto(n):
    # sin form keeps the grid exactly antisymmetric (cos(pi*j/n) does not)
    j = np.arange(n + 1)
    return np.sin(np.pi * (n - 2 * j) / (2 * n))


def clenshaw_curtis_weights(n):
    """Quadrature weights on the n+1 Gauss-Lobatto points for int_{-1}^{1}."""
    if n < 2:
        raise ValueError("need at least 3 quadrature nodes")
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    return w


def cheb_forward(values, axis=-1):
    """Nodal values on Gauss-Lobatto points -> Chebyshev coefficients."""
    n = values.shape[axis] - 1
    a = dct(values, type=1, axis=axis) / n
    sl = [slice(None)] * values.ndim
    for edge in (0, n):
        sl[axis] = edge
        a[tuple(sl)] *= 0.5
    return a


def cheb_inverse(coeffs, axis=-1):
    """Chebyshev coefficients -> nodal values on Gauss-Lobatto points."""
    n = coeffs.shape[axis] - 1
    g = coeffs.copy()
    sl = [slice(None)] * coeffs.ndim
    sl[axis] = slice(1, n)
    g[tuple(sl)] *= 0.5
    return dct(g, type=1, axis=axis)


def cheb_derivative_matrix(n):
    """(n+1)x(n+1) matrix acting on Chebyshev coefficients: a -> a'."""
    d = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        e = np.zeros(n + 1)
        e[m] = 1.0
        der = np.polynomial.chebyshev.chebder(e)
        d[: der.size, m] = der
    return d


class ChannelGrid:
    """Discretization of the periodic channel [0, lx) x [-1, 1].

    nx: number of Fourier modes in x (even, >= 4).
    ny: highest Chebyshev degree in y (>= 8); ny+1 collocation points.
    """

    def __init__(self, nx, ny, lx=2.0 * np.pi):
        if nx < 4 or nx % 2 != 0:
            raise ValueError("nx must be even and >= 4")
        if ny < 8:
            raise ValueError("ny must be >= 8")
        if lx <= 0:
            raise ValueError("lx must be positive")
        self.nx = int(nx)
        self.ny = int(ny)
        self.lx = float(lx)
        self.x_nodes = self.lx * np.arange(self.nx) / self.nx
        self.y_nodes = _gauss_lobatto(self.ny)
        self.quad_weights = clenshaw_curtis_weights(self.ny)
        # integer wavenumbers in FFT order; physical wavenumber is 2*pi*k/lx
        self.k_int = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        self.k_phys = 2.0 * np.pi * self.k_int / self.lx
        self.x_weight = self.lx / self.nx

    def __eq__(self, other):
        return (
            isinstance(other, ChannelGrid)
            and self.nx == other.nx
            and self.ny == other.ny
            and self.lx == other.lx
        )

    def __hash__(self):
        return hash((self.nx, self.ny, self.lx))

    def __repr__(self):
        return f"ChannelGrid(nx={self.nx}, ny={self.ny}, lx={self.lx})"

    @cached_property
    def cheb_deriv(self):
        return cheb_derivative_matrix(self.ny)

    @cached_property
    def cheb_deriv_t(self):
        # complex transpose copy so diff_y is a single BLAS call
        return np.ascontiguousarray(self.cheb_deriv.T).astype(np.complex128)

    @cached_property
    def wall_cells(self):
        """Edges of the quadrature cells attributed to each y node."""
        y = self.y_nodes
        upper = np.empty(self.ny + 1)
        lower = np.empty(self.ny + 1)
        upper[0] = 1.0
        upper[1:] = 0.5 * (y[:-1] + y[1:])
        lower[:-1] = upper[1:]
        lower[-1] = -1.0
        return lower, upper

    @cached_property
    def min_spacing_y(self):
        return float(np.min(np.abs(np.diff(self.y_nodes))))

    @cached_property
    def local_spacing_y(self):
        """Per-node spacing used in the CFL estimate (min of adjacent gaps)."""
        gaps = np.abs(np.diff(self.y_nodes))
        local = np.empty(self.ny + 1)
        local[0] = gaps[0]
        local[-1] = gaps[-1]
        local[1:-1] = np.minimum(gaps[:-1], gaps[1:])
        return local

    def dealias_shape(self):
        mx = next_fast_len(3 * self.nx // 2 + 2, real=True)
        if mx % 2 != 0:
            mx = next_fast_len(mx + 1, real=True)
        my = 3 * self.ny // 2 + 2
        return mx, my


@dataclass
class SpectralScalarField:
    """Scalar field as Fourier(x) x Chebyshev(y) coefficients."""

    grid: ChannelGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        expect = (self.grid.nx, self.grid.ny + 1)
        if self.coeffs.shape != expect:
            raise ValueError(f"coefficient shape {self.coeffs.shape} != {expect}")
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    def copy(self):
        return SpectralScalarField(self.grid, self.coeffs.copy())

    def hermitian_defect(self):
        """Max deviation from conj-symmetry in k (zero for real fields)."""
        c = self.coeffs
        mirrored = np.conj(np.roll(c[::-1], 1, axis=0))
        return float(np.max(np.abs(c - mirrored)))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.coeffs)))

    def wall_values(self):
        """Field values at y=+1 and y=-1 for each Fourier mode."""
        n = self.grid.ny
        signs = np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
        top = self.coeffs.sum(axis=1)
        bottom = self.coeffs @ signs
        return top, bottom

    def wall_derivatives(self):
        """d/dy at y=+1 and y=-1 for each Fourier mode."""
        n = self.grid.ny
        deg = np.arange(n + 1, dtype=float)
        dtop = deg * deg
        dbot = np.where(deg % 2 == 0, -1.0, 1.0) * deg * deg
        return self.coeffs @ dtop, self.coeffs @ dbot


def zero_field(grid):
    return SpectralScalarField(grid, np.zeros((grid.nx, grid.ny + 1), dtype=np.complex128))


def despike(f, rel=1e-14):
    """Zero coefficients below rel * max|c|.

    Sub-roundoff coefficients are numerically meaningless but get amplified
    by ~n^2 per differentiation; high-order norms must drop them first.
    """
    top = np.max(np.abs(f.coeffs))
    if top == 0.0:
        return f
    c = np.where(np.abs(f.coeffs) < rel * top, 0.0, f.coeffs)
    return SpectralScalarField(f.grid, c)


def transform_forward(grid, values):
    """Real nodal data (nx, ny+1) -> SpectralScalarField."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.nx, grid.ny + 1):
        raise ValueError(
            f"nodal data shape {values.shape} does not match grid ({grid.nx}, {grid.ny + 1})"
        )
    a = cheb_forward(values, axis=1)
    coeffs = fft(a, axis=0) / grid.nx
    return SpectralScalarField(grid, coeffs)


def transform_inverse(f):
    """SpectralScalarField -> real nodal data (nx, ny+1)."""
    per_mode = ifft(f.coeffs * f.grid.nx, axis=0)
    return np.real(cheb_inverse(per_mode, axis=1))


def field_from_function(grid, func):
    """Sample func(x, y) on the tensor grid and transform."""
    xv = grid.x_nodes[:, None]
    yv = grid.y_nodes[None, :]
    return transform_forward(grid, np.broadcast_to(func(xv, yv), (grid.nx, grid.ny + 1)).copy())


def diff_x(f):
    """Exact spectral d/dx (Nyquist derivative dropped)."""
    g = f.grid
    out = f.coeffs * (1j * g.k_phys)[:, None]
    out[g.nx // 2, :] = 0.0
    return SpectralScalarField(g, out)


def diff_y(f):
    """Exact spectral d/dy (Chebyshev recurrence, applied as a matrix)."""
    return SpectralScalarField(f.grid, f.coeffs @ f.grid.cheb_deriv_t)


def laplacian(f):
    return SpectralScalarField(
        f.grid, diff_x(diff_x(f)).coeffs + diff_y(diff_y(f)).coeffs
    )


def inner_product(f, g):
    """Quadrature of f*g over the channel (trapezoid in x, Clenshaw-Curtis in y)."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    fv = transform_inverse(f)
    gv = transform_inverse(g)
    return float(f.grid.x_weight * np.einsum("ij,ij,j->", fv, gv, f.grid.quad_weights))


def norm_l2(f):
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def pad_spectrum_x(coeffs, mx):
    """Zero-pad an FFT-ordered spectrum from nx to mx rows."""
    nx = coeffs.shape[0]
    out = np.zeros((mx,) + coeffs.shape[1:], dtype=np.complex128)
    half = nx // 2
    out[:half] = coeffs[:half]
    out[mx - half + 1:] = coeffs[half + 1:]
    # split the Nyquist row symmetrically so padded data stays real
    out[half] = 0.5 * coeffs[half]
    out[mx - half] = 0.5 * coeffs[half]
    return out


def values_oversampled(f, mx, my):
    """Nodal values of f on an (mx, my+1) refinement of the grid."""
    g = f.grid
    padded = np.zeros((mx, my + 1), dtype=np.complex128)
    padded[:, : g.ny + 1] = pad_spectrum_x(f.coeffs, mx)
    per_mode = ifft(padded * mx, axis=0)
    return np.real(cheb_inverse(per_mode, axis=1))


def truncate_nodal(grid, values):
    """Forward-transform fine nodal data and truncate to grid resolution."""
    mx, my_plus = values.shape
    a = cheb_forward(values, axis=1)[:, : grid.ny + 1]
    spec = fft(a, axis=0) / mx
    half = grid.nx // 2
    out = np.zeros((grid.nx, grid.ny + 1), dtype=np.complex128)
    out[:half] = spec[:half]
    out[half + 1:] = spec[mx - half + 1:]
    return SpectralScalarField(grid, out)


def dealiased_product(fs, gs):
    """Alias-free quadratic products via 3/2-rule zero padding.

    fs, gs: equal-length sequences of fields; returns sum_i fs[i]*gs[i]
    truncated back to the grid (x Nyquist dropped).
    """
    grid = fs[0].grid
    mx, my = grid.dealias_shape()
    acc = None
    for a, b in zip(fs, gs):
        av = values_oversampled(a, mx, my)
        bv = values_oversampled(b, mx, my)
        acc = av * bv if acc is None else acc + av * bv
    return truncate_nodal(grid, acc)
