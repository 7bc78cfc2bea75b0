import numpy as np
import pytest

from sgchannel.spectral import (
    ChannelGrid,
    SpectralScalarField,
    dealiased_product,
    diff_x,
    diff_y,
    field_from_function,
    inner_product,
    laplacian,
    transform_forward,
    transform_inverse,
)


def test_grid_nodes_and_weights():
    g = ChannelGrid(16, 24)
    assert g.y_nodes[0] == 1.0 and g.y_nodes[-1] == -1.0
    assert np.all(np.diff(g.y_nodes) < 0)
    assert np.all(g.quad_weights > 0)
    assert abs(g.quad_weights.sum() - 2.0) <= 1e-14


@pytest.mark.parametrize("nx,ny", [(3, 24), (2, 24), (5, 24), (16, 7)])
def test_grid_rejects_bad_sizes(nx, ny):
    with pytest.raises(ValueError):
        ChannelGrid(nx, ny)


def test_transform_constant():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.ones_like(x + y))
    assert abs(f.coeffs[0, 0] - 1.0) <= 1e-14
    rest = f.coeffs.copy()
    rest[0, 0] = 0.0
    assert np.max(np.abs(rest)) <= 1e-14


def test_transform_identity_in_y():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: 0 * x + y)
    assert abs(f.coeffs[0, 1] - 1.0) <= 1e-14
    rest = f.coeffs.copy()
    rest[0, 1] = 0.0
    assert np.max(np.abs(rest)) <= 1e-13


def test_transform_cos_x_y_squared():
    # y^2 = (T0 + T2)/2, cos kx splits over k = +-1
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.cos(2 * np.pi * x / g.lx) * y**2)
    for k in (1, -1):
        assert abs(f.coeffs[k, 0] - 0.25) <= 1e-13
        assert abs(f.coeffs[k, 2] - 0.25) <= 1e-13
    mask = np.ones(f.coeffs.shape, dtype=bool)
    mask[1, 0] = mask[1, 2] = mask[-1, 0] = mask[-1, 2] = False
    assert np.max(np.abs(f.coeffs[mask])) <= 1e-13


def test_transform_round_trip_random_smooth(rng):
    g = ChannelGrid(32, 48)
    for _ in range(5):
        a, b, c = rng.normal(size=3)
        vals = transform_inverse(
            field_from_function(
                g,
                lambda x, y: a * np.sin(2 * np.pi * x / g.lx) * np.exp(y)
                + b * np.cos(4 * np.pi * x / g.lx) * y**3
                + c,
            )
        )
        back = transform_inverse(transform_forward(g, vals))
        assert np.max(np.abs(back - vals)) <= 1e-12 * max(np.max(np.abs(vals)), 1.0)


def test_transform_dimension_mismatch():
    g = ChannelGrid(16, 24)
    with pytest.raises(ValueError, match="does not match grid"):
        transform_forward(g, np.zeros((16, 24)))


def test_hermitian_symmetry_of_real_data():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) * (1 + y))
    assert f.hermitian_defect() <= 1e-14
    assert f.is_finite()


def test_diff_x_constant_is_zero():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.ones_like(x + y) * 4.0)
    assert np.max(np.abs(diff_x(f).coeffs)) <= 1e-14


def test_diff_y_polynomial():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: 0 * x + y**2)
    got = transform_inverse(diff_y(f))
    assert np.max(np.abs(got - 2 * g.y_nodes[None, :])) <= 1e-12


def test_diff_x_sine():
    g = ChannelGrid(16, 24, lx=3.0)
    f = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) + 0 * y)
    got = transform_inverse(diff_x(f))
    want = (2 * np.pi / g.lx) * np.cos(2 * np.pi * g.x_nodes / g.lx)[:, None]
    assert np.max(np.abs(got - want)) <= 1e-12


def test_inner_product_cell_area():
    g = ChannelGrid(16, 24)
    one = field_from_function(g, lambda x, y: np.ones_like(x + y))
    assert inner_product(one, one) == pytest.approx(2.0 * g.lx, rel=1e-14)


def test_inner_product_y_squared():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: 0 * x + y)
    assert inner_product(f, f) == pytest.approx(2.0 * g.lx / 3.0, rel=1e-13)


def test_inner_product_orthogonality():
    g = ChannelGrid(16, 24)
    s = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) + 0 * y)
    c = field_from_function(g, lambda x, y: np.cos(2 * np.pi * x / g.lx) + 0 * y)
    assert abs(inner_product(s, c)) <= 1e-13


def test_quadrature_exact_poly_times_trig():
    # int cos^2(kx) y^4 = (lx/2) * (2/5)
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.cos(2 * np.pi * x / g.lx) * y**2)
    assert inner_product(f, f) == pytest.approx(g.lx / 2.0 * 2.0 / 5.0, rel=1e-13)


def test_grid_mismatch_rejected():
    f = field_from_function(ChannelGrid(16, 24), lambda x, y: x + y)
    h = field_from_function(ChannelGrid(16, 32), lambda x, y: x + y)
    with pytest.raises(ValueError, match="different grids"):
        inner_product(f, h)


def test_dealiased_product_exact_for_resolved():
    g = ChannelGrid(32, 48)
    a = field_from_function(g, lambda x, y: np.sin(2 * np.pi * x / g.lx) * y)
    p = dealiased_product([a], [a])
    want = (np.sin(2 * np.pi * g.x_nodes / g.lx)[:, None] * g.y_nodes[None, :]) ** 2
    assert np.max(np.abs(transform_inverse(p) - want)) <= 1e-13


def test_laplacian_matches_double_diff():
    g = ChannelGrid(16, 24)
    f = field_from_function(g, lambda x, y: np.cos(2 * np.pi * x / g.lx) * (1 - y**2) ** 2)
    direct = laplacian(f).coeffs
    manual = diff_x(diff_x(f)).coeffs + diff_y(diff_y(f)).coeffs
    assert np.max(np.abs(direct - manual)) == 0.0
