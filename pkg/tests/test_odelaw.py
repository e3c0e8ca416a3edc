import numpy as np
import pytest

from glvortex.errors import ConfigurationError
from glvortex.fields import Grid2D
from glvortex.odelaw import (
    detect_pinning,
    integrate,
    integrate_density_law,
    pinning_status,
    read_ode_csv,
    separation_report,
    write_ode_csv,
)
from glvortex.pinning import make_generic, thin_film
from glvortex.profiles import density_catalog, omega_catalog

from oracle_defs import (
    DOUBLE_WELL_START,
    DOUBLE_WELL_T1_ENDPOINT,
    ONE_PLUS_R2_START,
    ONE_PLUS_R2_T2_ENDPOINT,
)

pytestmark = pytest.mark.filterwarnings("ignore:omega is not positive")


def big_grid():
    return Grid2D.square(33, length=4.0, origin=(-2.0, -2.0))


def quadratic_half():
    # omega = |x|^2 / 2 so that dy/dt = -y exactly
    omega_fn, grad_fn = omega_catalog(
        "quadratic", {"center_x": 0.0, "center_y": 0.0, "strength": 0.5}
    )
    return make_generic(big_grid(), omega_fn, grad_fn)


def double_well():
    omega_fn, grad_fn = omega_catalog("double_well", {"center_x": 0.0, "center_y": 0.0})
    return make_generic(big_grid(), omega_fn, grad_fn)


def test_stationary_at_critical_point():
    p = quadratic_half()
    (traj,) = integrate(p, [(0.0, 0.0)], t_end=2.0, dt=1e-2)
    assert np.all(traj.points == 0.0)
    assert not traj.exited


def test_linear_ode_endpoint():
    p = quadratic_half()
    (traj,) = integrate(p, [(1.0, 0.0)], t_end=1.0, dt=1e-3)
    assert traj.times[0] == 0.0
    assert np.hypot(traj.end[0] - np.exp(-1.0), traj.end[1]) <= 1e-9


def test_double_well_matches_reference_endpoint():
    p = double_well()
    (traj,) = integrate(p, [DOUBLE_WELL_START], t_end=1.0, dt=1e-3)
    err = np.hypot(
        traj.end[0] - DOUBLE_WELL_T1_ENDPOINT[0], traj.end[1] - DOUBLE_WELL_T1_ENDPOINT[1]
    )
    assert err <= 1e-12


def test_double_well_converges_to_right_minimum():
    p = double_well()
    (traj,) = integrate(p, [DOUBLE_WELL_START], t_end=30.0, dt=1e-3)
    assert np.hypot(traj.end[0] - 0.5, traj.end[1]) <= 1e-9


def test_rk4_order_against_reference():
    p = double_well()
    errs = []
    for dt in (4e-3, 2e-3):
        (traj,) = integrate(p, [DOUBLE_WELL_START], t_end=1.0, dt=dt)
        errs.append(
            np.hypot(
                traj.end[0] - DOUBLE_WELL_T1_ENDPOINT[0],
                traj.end[1] - DOUBLE_WELL_T1_ENDPOINT[1],
            )
        )
    assert errs[0] / errs[1] >= 8.0


def test_descent_along_trajectory():
    p = double_well()
    (traj,) = integrate(p, [(0.4, 0.3)], t_end=5.0, dt=1e-3)
    vals = np.asarray(p.omega_fn(traj.points[:, 0], traj.points[:, 1]))
    assert np.all(np.diff(vals) <= 1e-10)


def test_step_length_bounded_by_speed():
    p = double_well()
    dt = 2e-3
    (traj,) = integrate(p, [(0.4, 0.3)], t_end=2.0, dt=dt)
    d = np.hypot(np.diff(traj.points[:, 0]), np.diff(traj.points[:, 1]))
    assert np.max(d) <= dt * p.sup_grad_omega * 1.05


def test_translation_equivariance():
    g = big_grid()
    s = (0.25, -0.125)
    om0, gr0 = omega_catalog("quadratic", {"center_x": 0.1, "center_y": 0.2, "strength": 1.5})
    om1, gr1 = omega_catalog(
        "quadratic", {"center_x": 0.1 + s[0], "center_y": 0.2 + s[1], "strength": 1.5}
    )
    (t0,) = integrate(make_generic(g, om0, gr0), [(0.6, 0.5)], t_end=1.0, dt=1e-2)
    (t1,) = integrate(make_generic(g, om1, gr1), [(0.6 + s[0], 0.5 + s[1])], t_end=1.0, dt=1e-2)
    assert np.max(np.abs(t1.points[:, 0] - s[0] - t0.points[:, 0])) <= 1e-12
    assert np.max(np.abs(t1.points[:, 1] - s[1] - t0.points[:, 1])) <= 1e-12


def test_exit_truncates_with_flag():
    p = make_generic(
        Grid2D.square(17),
        lambda x, y: -((x - 0.5) ** 2 + (y - 0.5) ** 2),
        lambda x, y: (-2.0 * (x - 0.5), -2.0 * (y - 0.5)),
    )
    (traj,) = integrate(p, [(0.9, 0.5)], t_end=5.0, dt=1e-2)
    assert traj.exited
    assert traj.times[-1] < 5.0
    assert p.grid.contains(*traj.end)


# --- density form ------------------------------------------------------------

def test_density_constant_is_stationary():
    a_fn, grad_a = density_catalog("constant", {"value": 3.0})
    trajs = integrate_density_law(a_fn, [(0.3, 0.4), (0.7, 0.2)], 1.0, 1e-2, grid=Grid2D.square(17), grad_a=grad_a)
    for tr in trajs:
        assert np.all(tr.points[0] == tr.points[-1])


def test_density_exp_matches_direct_omega():
    g = big_grid()
    a_fn, grad_a = density_catalog("exp_quadratic", {"center_x": 0.0, "center_y": 0.0, "strength": 0.5})
    (tr_a,) = integrate_density_law(a_fn, [(1.0, 0.5)], 1.0, 1e-3, grid=g, grad_a=grad_a)
    (tr_w,) = integrate(quadratic_half(), [(1.0, 0.5)], 1.0, 1e-3)
    assert np.max(np.abs(tr_a.points - tr_w.points)) <= 1e-12


def test_density_law_is_bitwise_the_transformed_integrate():
    g = big_grid()
    a_fn, grad_a = density_catalog("one_plus_r2", {"center_x": 0.0, "center_y": 0.0})
    t1 = integrate_density_law(a_fn, [ONE_PLUS_R2_START], 2.0, 1e-3, grid=g, grad_a=grad_a)
    t2 = integrate(thin_film(a_fn, g, grad_a), [ONE_PLUS_R2_START], 2.0, 1e-3)
    assert np.array_equal(t1[0].points, t2[0].points)
    assert np.array_equal(t1[0].times, t2[0].times)


def test_density_law_matches_reference():
    g = big_grid()
    a_fn, grad_a = density_catalog("one_plus_r2", {"center_x": 0.0, "center_y": 0.0})
    (traj,) = integrate_density_law(a_fn, [ONE_PLUS_R2_START], 2.0, 1e-3, grid=g, grad_a=grad_a)
    err = np.hypot(
        traj.end[0] - ONE_PLUS_R2_T2_ENDPOINT[0], traj.end[1] - ONE_PLUS_R2_T2_ENDPOINT[1]
    )
    assert err <= 1e-8


# --- pinning detection -------------------------------------------------------

def test_detect_pinning_quadratic():
    omega_fn, grad_fn = omega_catalog("quadratic", {"center_x": 0.0, "center_y": 0.0})
    p = make_generic(big_grid(), omega_fn, grad_fn)
    (traj,) = integrate(p, [(1.5, -0.8)], t_end=20.0, dt=1e-3)
    cp = detect_pinning(traj, p)
    assert cp is not None
    assert cp.classification == "min"
    assert np.hypot(*cp.location) <= 1e-8
    assert pinning_status(traj, p) == "pinned"


def test_detect_pinning_constant_omega_pins_at_start():
    omega_fn, grad_fn = omega_catalog("constant", {"value": 1.0})
    p = make_generic(Grid2D.square(17), omega_fn, grad_fn)
    (traj,) = integrate(p, [(0.3, 0.6)], t_end=1.0, dt=1e-2)
    cp = detect_pinning(traj, p)
    assert cp is not None
    assert cp.location == (0.3, 0.6)
    assert cp.classification == "degenerate"


def test_no_pinning_while_still_moving():
    p = quadratic_half()
    (traj,) = integrate(p, [(1.0, 1.0)], t_end=0.5, dt=1e-3)
    assert detect_pinning(traj, p) is None
    assert pinning_status(traj, p) == "not_pinned"


def test_generic_starts_avoid_the_saddle():
    p = double_well()
    starts = [(0.3, 0.2), (-0.2, -0.4), (0.55, -0.1), (-0.7, 0.5)]
    for traj in integrate(p, starts, t_end=30.0, dt=1e-3):
        cp = detect_pinning(traj, p)
        assert cp is not None
        assert abs(abs(cp.location[0]) - 0.5) <= 1e-6
        assert cp.classification == "min"


# --- separation and confinement ----------------------------------------------

def test_separation_single_trajectory_infinite():
    p = quadratic_half()
    trajs = integrate(p, [(0.5, 0.5)], t_end=1.0, dt=1e-2)
    rep = separation_report(trajs)
    assert rep.min_separation == np.inf
    assert not rep.duplicate_starts


def test_separation_two_wells_bounded_below():
    p = double_well()
    trajs = integrate(p, [(-0.4, 0.2), (0.45, -0.15)], t_end=10.0, dt=1e-3)
    square = lambda cx, cy, r: [(cx - r, cy - r), (cx + r, cy - r), (cx + r, cy + r), (cx - r, cy + r)]
    rep = separation_report(trajs, polylines=[square(-0.5, 0.0, 0.35), square(0.5, 0.0, 0.35)])
    assert rep.min_separation >= 0.7
    assert rep.confined == [True, True]


def test_separation_duplicate_starts_flagged():
    p = quadratic_half()
    trajs = integrate(p, [(0.5, 0.5), (0.5, 0.5)], t_end=0.5, dt=1e-2)
    rep = separation_report(trajs)
    assert rep.duplicate_starts
    assert rep.min_separation == 0.0


def test_separation_mismatched_meshes_raise():
    p = quadratic_half()
    (t1,) = integrate(p, [(0.5, 0.5)], t_end=1.0, dt=1e-2)
    (t2,) = integrate(p, [(0.4, 0.4)], t_end=1.0, dt=2e-2)
    with pytest.raises(ConfigurationError, match="time mesh"):
        separation_report([t1, t2])


def test_ode_csv_roundtrip(tmp_path):
    p = double_well()
    trajs = integrate(p, [(0.4, 0.3), (-0.3, -0.2)], t_end=1.0, dt=1e-2)
    path = str(tmp_path / "ode.csv")
    write_ode_csv(trajs, path)
    assert open(path).readline().strip() == "traj_id,t,x,y"
    back = read_ode_csv(path)
    assert len(back) == 2
    for a, b in zip(trajs, back):
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.points, b.points)
