import numpy as np
import pytest

from sgchannel.spectral import (
    ChannelGrid,
    SpectralScalarField,
    field_from_function,
    inner_product,
    laplacian,
    transform_inverse,
    zero_field,
)
from sgchannel.fields import (
    StripSpec,
    VelocityField,
    advection_term,
    curl_of,
    grad_sq_value,
    norms_of,
    norm_l4,
    q_from_u,
    strip_norm_sq,
    velocity_from_stream,
    velocity_gradient,
)
from sgchannel.solvers import solve_clamped_second_grade
from sgchannel.diagnostics import random_noslip_stream, random_scalar, random_tangent_stream


def quartic_stream_exact(grid, k0_only=True):
    """(1-y^2)^2 with exact Chebyshev coefficients 3/8, -1/2, 1/8."""
    c = np.zeros((grid.nx, grid.ny + 1), dtype=np.complex128)
    c[0, 0], c[0, 2], c[0, 4] = 0.375, -0.5, 0.125
    return SpectralScalarField(grid, c)


class TestVelocityFromStream:
    def test_zero(self):
        g = ChannelGrid(16, 24)
        u = velocity_from_stream(zero_field(g))
        assert np.max(np.abs(u.u1.coeffs)) == 0.0
        assert np.max(np.abs(u.u2.coeffs)) == 0.0

    def test_quadratic_shear(self):
        g = ChannelGrid(16, 24)
        u = velocity_from_stream(field_from_function(g, lambda x, y: 0 * x + y**2 / 2))
        got = transform_inverse(u.u1)
        assert np.max(np.abs(got + g.y_nodes[None, :])) <= 1e-12
        assert np.max(np.abs(u.u2.coeffs)) <= 1e-14

    def test_clamped_stream_is_noslip(self):
        g = ChannelGrid(16, 32)
        psi = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) * (1 - y**2) ** 2)
        u = velocity_from_stream(psi)
        assert u.no_slip
        assert u.wall_speed() <= 1e-10

    def test_divergence_free_by_construction(self, rng):
        g = ChannelGrid(16, 32)
        psi = random_tangent_stream(g, rng)
        u = velocity_from_stream(psi)
        assert u.divergence_norm() <= 1e-11 * max(norms_of(u).h1, 1.0)


class TestCurl:
    def test_zero(self):
        g = ChannelGrid(16, 24)
        u = velocity_from_stream(zero_field(g))
        assert np.max(np.abs(curl_of(u).coeffs)) == 0.0

    def test_constant_vorticity_shear(self):
        g = ChannelGrid(16, 24)
        u = velocity_from_stream(field_from_function(g, lambda x, y: 0 * x + y**2 / 2))
        got = transform_inverse(curl_of(u))
        assert np.max(np.abs(got - 1.0)) <= 1e-10

    def test_curl_of_grad_perp_is_laplacian(self, rng):
        g = ChannelGrid(16, 32)
        psi = random_tangent_stream(g, rng)
        u = velocity_from_stream(psi)
        diff = curl_of(u).coeffs - laplacian(psi).coeffs
        assert np.max(np.abs(diff)) <= 1e-11 * np.max(np.abs(laplacian(psi).coeffs))


class TestPotentialVorticity:
    def test_alpha_zero_identity(self, rng):
        g = ChannelGrid(16, 32)
        u = velocity_from_stream(random_tangent_stream(g, rng))
        assert np.array_equal(q_from_u(u, 0.0).coeffs, curl_of(u).coeffs)

    def test_quartic_closed_form(self):
        # psi = (1-y^2)^2, alpha = 1: q = 12y^2 - 28
        g = ChannelGrid(16, 24)
        u = velocity_from_stream(quartic_stream_exact(g))
        got = transform_inverse(q_from_u(u, 1.0))
        want = (12.0 * g.y_nodes**2 - 28.0)[None, :]
        assert np.max(np.abs(got - want)) <= 1e-10

    def test_solver_round_trip(self, rng):
        g = ChannelGrid(16, 48)
        q = random_tangent_stream(g, rng)  # any smooth band-limited field
        alpha = 0.3
        psi_cols = np.empty_like(q.coeffs)
        for row in range(g.nx):
            k = abs(int(g.k_int[row]))
            psi_cols[row] = solve_clamped_second_grade(g, k, alpha, q.coeffs[row])
        u = velocity_from_stream(SpectralScalarField(g, psi_cols), no_slip=True)
        back = q_from_u(u, alpha)
        assert np.max(np.abs(back.coeffs - q.coeffs)) <= 1e-9 * np.max(np.abs(q.coeffs))

    def test_negative_alpha_rejected(self):
        g = ChannelGrid(16, 24)
        with pytest.raises(ValueError):
            q_from_u(velocity_from_stream(zero_field(g)), -1.0)


class TestNorms:
    def test_zero_field(self):
        g = ChannelGrid(16, 24)
        r = norms_of(velocity_from_stream(zero_field(g)))
        assert r.l2 == r.h1 == r.h2 == r.h3 == 0.0

    def test_parabolic_profile_closed_forms(self):
        # u = (1-y^2, 0): ||u||^2 = 32 pi/15, ||grad u||^2 = 16 pi / 3
        g = ChannelGrid(16, 24)
        psi = field_from_function(g, lambda x, y: 0 * x + y - y**3 / 3.0)
        r = norms_of(velocity_from_stream(psi))
        assert r.l2**2 == pytest.approx(32.0 * np.pi / 15.0, rel=1e-12)
        assert r.h1_semi**2 == pytest.approx(16.0 * np.pi / 3.0, rel=1e-12)

    def test_curl_norm_equals_gradient_seminorm_noslip(self, rng):
        g = ChannelGrid(16, 32)
        for _ in range(5):
            u = velocity_from_stream(random_noslip_stream(g, rng), no_slip=True)
            curl_norm = np.sqrt(inner_product(curl_of(u), curl_of(u)))
            r = norms_of(u)
            assert abs(curl_norm - r.h1_semi) <= 1e-10 * r.h1_semi

    def test_monotone_ladder(self, rng):
        g = ChannelGrid(16, 32)
        for _ in range(5):
            r = norms_of(velocity_from_stream(random_tangent_stream(g, rng)))
            assert r.l2 <= r.h1 <= r.h2 <= r.h3


class TestStripNorm:
    def test_zero_field(self):
        g = ChannelGrid(16, 48)
        assert strip_norm_sq(zero_field(g), StripSpec(0.1)) == 0.0

    def test_unit_field_strip_area(self):
        g = ChannelGrid(16, 64)
        one = field_from_function(g, lambda x, y: np.ones_like(x + y))
        area = strip_norm_sq(one, StripSpec(0.1))
        assert area == pytest.approx(2 * 0.1 * g.lx, rel=2e-2)

    def test_linear_shear_gradient(self):
        # |2y| over the strips: 2 pi * 2 * int_{0.9}^{1} 4 y^2 dy
        g = ChannelGrid(16, 64)
        f = field_from_function(g, lambda x, y: 0 * x + 2.0 * y)
        want = 16.0 * np.pi * (1.0 - 0.729) / 3.0
        assert strip_norm_sq(f, StripSpec(0.1)) == pytest.approx(want, rel=2e-2)

    def test_full_width_equals_inner_product(self):
        g = ChannelGrid(16, 48)
        f = field_from_function(g, lambda x, y: np.cos(2 * np.pi * x / g.lx) * (1 + y))
        assert strip_norm_sq(f, StripSpec(1.0)) == pytest.approx(
            inner_product(f, f), rel=1e-12
        )

    def test_strip_plus_complement_is_total(self):
        g = ChannelGrid(16, 48)
        f = field_from_function(g, lambda x, y: 0 * x + np.exp(y))
        spec = StripSpec(0.3)
        total = strip_norm_sq(f, spec) + strip_norm_sq(f, spec, complement=True)
        assert total == pytest.approx(inner_product(f, f), rel=1e-12)

    def test_monotone_in_delta(self, rng):
        g = ChannelGrid(16, 48)
        u = velocity_from_stream(random_noslip_stream(g, rng))
        values = [strip_norm_sq(velocity_gradient(u), StripSpec(d)) for d in (0.05, 0.1, 0.2, 0.4)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            StripSpec(0.0)
        with pytest.raises(ValueError):
            StripSpec(1.5)


class TestAdvection:
    def test_constant_scalar(self, rng):
        g = ChannelGrid(16, 32)
        u = velocity_from_stream(random_tangent_stream(g, rng))
        qc = field_from_function(g, lambda x, y: np.ones_like(x + y) * 3.0)
        assert np.max(np.abs(advection_term(u, qc).coeffs)) == 0.0

    def test_shear_with_x_independent_scalar(self):
        g = ChannelGrid(16, 32)
        u = velocity_from_stream(field_from_function(g, lambda x, y: 0 * x + y**2 / 2))
        q = field_from_function(g, lambda x, y: 0 * x + np.cos(np.pi * y))
        assert np.max(np.abs(advection_term(u, q).coeffs)) <= 1e-15

    def test_skew_symmetry_identity(self, rng):
        g = ChannelGrid(32, 48)
        for _ in range(5):
            psi = random_tangent_stream(g, rng)
            u = velocity_from_stream(psi)
            phi = random_scalar(g, rng)
            value = inner_product(advection_term(u, phi), phi)
            scale = (
                norms_of(u).h1
                * np.sqrt(sum(np.array(list([inner_product(phi, phi)]))))
            )
            assert abs(value) <= 1e-10 * max(scale, 1e-30)


def test_l4_norm_closed_form():
    # ||sin x||_{L4}^4 = 2 * int_0^{2pi} sin^4 = 2 * 3 pi / 4
    g = ChannelGrid(32, 24)
    f = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) + 0 * y)
    assert norm_l4(f) == pytest.approx((2 * 3 * np.pi / 4) ** 0.25, rel=1e-12)
