import numpy as np
import pytest

from glvortex.errors import ConfigurationError, ModelError
from glvortex.fields import Grid2D, ScalarField, gradient
from glvortex.pinning import (
    CriticalPoint,
    check_A4,
    epsilon0,
    estimate_theta,
    find_critical_points,
    from_density,
    make_generic,
    thin_film,
)
from glvortex.profiles import density_catalog, omega_catalog


def unit_grid(n=33):
    return Grid2D.square(n)


# --- construction from densities -------------------------------------------

@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_from_density_constant_one():
    p = from_density(lambda x, y: 1.0 + 0.0 * x, unit_grid())
    assert np.allclose(p.omega.values, 0.0)
    assert np.max(np.abs(p.A.values)) <= 1e-7
    assert np.allclose(p.B.values, 1.0)
    assert p.kind == "from_density"


def test_from_density_constant_e():
    e = float(np.e)
    p = from_density(lambda x, y: e + 0.0 * x, unit_grid())
    assert np.allclose(p.omega.values, 1.0, atol=1e-14)
    assert np.max(np.abs(p.A.values)) <= 1e-6
    assert np.allclose(p.B.values, e)


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_from_density_one_plus_x2_matches_analytic_A():
    # A = lap(sqrt(1+x^2))/sqrt(1+x^2) = 1/(1+x^2)^2, so A(0.5, .) = 0.64
    p = from_density(lambda x, y: 1.0 + x**2 + 0.0 * y, Grid2D.square(128))
    i = 64  # node closest to x = 0.5 on the 128-node unit grid
    x = p.grid.xs[i]
    assert abs(x - 0.5) < p.grid.h
    assert p.A.values[i, 64] == pytest.approx(1.0 / (1.0 + x**2) ** 2, abs=1e-3)


def test_from_density_rejects_nonpositive():
    with pytest.raises(ModelError, match="positive"):
        from_density(lambda x, y: x - 0.5, unit_grid())


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_from_density_stencil_route_constant_is_exact_zero_A():
    g = unit_grid()
    p = from_density(ScalarField.constant(g, 2.0), g)
    assert np.all(p.A.values == 0.0)


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_thin_film_transform():
    g = unit_grid()
    p = thin_film(lambda x, y: np.exp((x - 0.4) ** 2 + (y - 0.6) ** 2), g)
    X, Y = g.mesh
    assert np.allclose(p.omega.values, (X - 0.4) ** 2 + (Y - 0.6) ** 2, atol=1e-12)
    assert np.all(p.A.values == 0.0)
    assert np.all(p.B.values == 1.0)
    assert p.kind == "thin_film"


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_thin_film_log_sampling_accuracy():
    g = unit_grid()
    p = thin_film(lambda x, y: 2.0 + np.sin(2 * np.pi * x) + 0.0 * y, g)
    X, _ = g.mesh
    assert np.max(np.abs(p.omega.values - np.log(2.0 + np.sin(2 * np.pi * X)))) <= 1e-14


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_density_and_thin_film_share_omega():
    g = unit_grid()
    a_fn, _ = density_catalog("gaussian_bump", {})
    p1 = from_density(a_fn, g)
    p2 = thin_film(a_fn, g)
    assert np.array_equal(p1.omega.values, p2.omega.values)


def test_nonpositive_omega_warns_but_constructs():
    omega_fn, grad_fn = omega_catalog("quadratic", {"center_x": 0.5, "center_y": 0.5})
    g = unit_grid(21)  # (0.5, 0.5) is a node, so min omega = 0
    with pytest.warns(UserWarning, match="omega is not positive"):
        p = make_generic(g, omega_fn, grad_fn)
    assert p.omega.values.min() == 0.0


def test_grad_omega_consistent_with_discrete_gradient():
    g = unit_grid(64)
    a_fn, grad_a = density_catalog("gaussian_bump", {})
    p = from_density(a_fn, g, grad_a)
    gx, gy = gradient(p.omega)
    X, Y = g.mesh
    ax, ay = p.grad_omega_fn(X, Y)
    interior = ~g.boundary
    assert np.max(np.abs(gx.values[interior] - ax[interior])) <= 0.02
    assert np.max(np.abs(gy.values[interior] - ay[interior])) <= 0.02


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_density_law_gradient_identity():
    # -grad(a)/a from the density route equals -grad(ln a) analytically
    g = unit_grid()
    a_fn, grad_a = density_catalog("exp_quadratic", {"center_x": 0.3, "center_y": 0.7, "strength": 2.0})
    p = from_density(a_fn, g, grad_a)
    xs = np.array([0.11, 0.52, 0.83])
    ys = np.array([0.21, 0.48, 0.66])
    gx, gy = p.grad_omega_fn(xs, ys)
    assert np.max(np.abs(gx - 2.0 * 2.0 * (xs - 0.3))) <= 1e-12
    assert np.max(np.abs(gy - 2.0 * 2.0 * (ys - 0.7))) <= 1e-12


# --- epsilon0 ----------------------------------------------------------------

def test_epsilon0_values():
    g = unit_grid()
    one = lambda x, y: 1.0 + 0.0 * x
    p = make_generic(g, one)  # A=0, B=1
    assert epsilon0(p) == 1.0
    p4 = make_generic(g, one, B_fn=lambda x, y: 4.0 + 0.0 * x)
    assert epsilon0(p4) == 2.0
    pA = make_generic(g, one, A_fn=lambda x, y: -3.0 + 0.0 * x)
    assert epsilon0(pA) == 0.5


def test_epsilon0_ignores_omega_shift():
    g = unit_grid()
    a_fn, _ = density_catalog("gaussian_bump", {})
    p1 = make_generic(g, lambda x, y: a_fn(x, y))
    p2 = make_generic(g, lambda x, y: a_fn(x, y) + 5.0)
    assert epsilon0(p1) == epsilon0(p2)


# --- critical points ---------------------------------------------------------

def quadratic_profile(grid, cx=0.6, cy=0.4, strength=1.0, offset=1.0):
    omega_fn, grad_fn = omega_catalog(
        "quadratic", {"center_x": cx, "center_y": cy, "strength": strength, "offset": offset}
    )
    return make_generic(grid, omega_fn, grad_fn)


def double_well_profile(grid):
    omega_fn, grad_fn = omega_catalog("double_well", {"center_x": 0.0, "center_y": 0.0})
    return make_generic(grid, omega_fn, grad_fn)


def test_find_critical_points_quadratic():
    p = quadratic_profile(unit_grid())
    pts = find_critical_points(p, [(0.1, 0.9), (0.8, 0.2)])
    assert len(pts) == 1
    assert pts[0].classification == "min"
    assert np.hypot(pts[0].location[0] - 0.6, pts[0].location[1] - 0.4) < 1e-8
    assert pts[0].omega_value == pytest.approx(1.0, abs=1e-12)


def test_find_critical_points_constant_degenerate():
    omega_fn, grad_fn = omega_catalog("constant", {"value": 2.0})
    p = make_generic(unit_grid(), omega_fn, grad_fn)
    pts = find_critical_points(p, [(0.2, 0.3), (0.7, 0.8)])
    assert len(pts) == 2
    assert all(c.classification == "degenerate" for c in pts)


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_find_critical_points_double_well():
    g = Grid2D.square(41, length=2.0, origin=(-1.0, -1.0))
    p = double_well_profile(g)
    pts = find_critical_points(p, [(-0.4, 0.2), (0.4, 0.1), (0.06, 0.03), (0.45, -0.3)])
    locs = sorted((round(c.location[0], 6), round(c.location[1], 6)) for c in pts)
    assert locs == [(-0.5, 0.0), (0.0, 0.0), (0.5, 0.0)]
    by_loc = {round(c.location[0], 6): c.classification for c in pts}
    assert by_loc[-0.5] == "min" and by_loc[0.5] == "min" and by_loc[0.0] == "saddle"


def test_failed_seed_is_skipped_not_fatal():
    # omega = x has no critical point; Newton cannot converge
    p = make_generic(unit_grid(), lambda x, y: x + 2.0 + 0.0 * y, lambda x, y: (1.0 + 0.0 * x, 0.0 * x))
    assert find_critical_points(p, [(0.5, 0.5)]) == []


# --- theta estimation --------------------------------------------------------

@pytest.mark.filterwarnings("ignore:omega is not positive")
@pytest.mark.parametrize("lam", [0.1, 0.25, 1.0, 4.0, 10.0])
def test_estimate_theta_isotropic_quadratic(lam):
    g = unit_grid()
    p = quadratic_profile(g, cx=0.5, cy=0.5, strength=lam, offset=0.0)
    (b,) = find_critical_points(p, [(0.45, 0.55)])
    theta1, theta2 = estimate_theta(p, b, radius=0.1, samples=256, seed=7)
    assert theta2 == 0.1
    assert theta1 == pytest.approx(2.0 * np.sqrt(lam), rel=0.01)


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_estimate_theta_anisotropic_worst_direction():
    omega_fn, grad_fn = omega_catalog("anisotropic", {"center_x": 0.0, "center_y": 0.0, "ax": 1.0, "ay": 4.0})
    g = Grid2D.square(33, length=2.0, origin=(-1.0, -1.0))
    p = make_generic(g, omega_fn, grad_fn)
    (b,) = find_critical_points(p, [(0.2, 0.1)])
    theta1, _ = estimate_theta(p, b, radius=0.1, samples=512, seed=3)
    assert theta1 == pytest.approx(2.0, rel=0.05)
    assert theta1 >= 2.0 - 1e-9  # 2 is the true infimum of the ratio


def test_estimate_theta_refuses_degenerate():
    omega_fn, grad_fn = omega_catalog("constant", {})
    p = make_generic(unit_grid(), omega_fn, grad_fn)
    (b,) = find_critical_points(p, [(0.5, 0.5)])
    with pytest.raises(ModelError, match="degenerate"):
        estimate_theta(p, b, radius=0.1)


def test_estimate_theta_deterministic_for_seed():
    p = quadratic_profile(unit_grid())
    (b,) = find_critical_points(p, [(0.5, 0.5)])
    t1 = estimate_theta(p, b, radius=0.05, samples=128, seed=11)
    t2 = estimate_theta(p, b, radius=0.05, samples=128, seed=11)
    assert t1 == t2


# --- confinement assumption --------------------------------------------------

def square_around(cx, cy, r):
    return [(cx - r, cy - r), (cx + r, cy - r), (cx + r, cy + r), (cx - r, cy + r)]


def test_check_A4_quadratic_true():
    p = quadratic_profile(unit_grid(), cx=0.5, cy=0.5)
    assert check_A4(p, (0.5, 0.5), square_around(0.5, 0.5, 0.3)) is True


def test_check_A4_constant_false():
    omega_fn, grad_fn = omega_catalog("constant", {})
    p = make_generic(unit_grid(), omega_fn, grad_fn)
    assert check_A4(p, (0.5, 0.5), square_around(0.5, 0.5, 0.2)) is False


@pytest.mark.filterwarnings("ignore:omega is not positive")
def test_check_A4_double_well_single_well():
    g = Grid2D.square(41, length=2.0, origin=(-1.0, -1.0))
    p = double_well_profile(g)
    assert check_A4(p, (0.5, 0.0), square_around(0.5, 0.0, 0.3)) is True


def test_check_A4_outside_point_raises():
    p = quadratic_profile(unit_grid())
    with pytest.raises(ConfigurationError, match="inside"):
        check_A4(p, (0.9, 0.9), square_around(0.3, 0.3, 0.1))


def test_profile_rejects_nonpositive_B():
    with pytest.raises(ModelError, match="B > 0"):
        make_generic(unit_grid(), lambda x, y: 1.0 + 0.0 * x, B_fn=lambda x, y: 0.0 * x)
