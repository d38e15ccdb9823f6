import numpy as np
import pytest

from windfront import RandersMetric, eval_metric, isotropic, zermelo
from windfront.errors import AmbiguousSide, DomainExit, NoSolution
from windfront.geodesics import (
    IntegratorParams,
    TrajectoryState,
    conservation_report,
    integrate_batch,
    integrate_finsler_geodesic,
    integrate_pregeodesic,
    lightlike_orthogonal_init,
    orthogonal_directions_rootfind,
    orthogonal_velocity,
    write_trajectories_csv,
)
from windfront.spacetime import LorentzFinslerSpacetime, SSTKSpacetime, spacetime_for
from windfront.wavefront import InitialFront

I2 = np.eye(2)
SHEAR = zermelo(I2, ["0.2*y", 0.0])
# endpoint at t = 1 from the origin, heading (1, 1), reference run at dt = 1e-5
SHEAR_REF_END = np.array([0.8116926788491065, 0.6679435744322819])


def _shear_init():
    d = np.array([1.0, 1.0])
    return TrajectoryState(0.0, np.zeros(2), d / eval_metric(SHEAR, np.zeros(2), 0.0, d))


def test_constant_wind_straight_line():
    F = zermelo(I2, [0.5, 0.0])
    tr = integrate_pregeodesic(F, TrajectoryState(0.0, [0.0, 0.0], [1.5, 0.0]), IntegratorParams(1e-3, 1.0))
    assert np.array_equal(tr.x[:, 1], np.zeros(len(tr.t)))
    assert np.allclose(tr.x[:, 0], 1.5 * tr.t, atol=1e-15, rtol=0)
    rep = conservation_report(tr, F)
    assert rep["max_abs_G"] < 1e-14


def test_isotropic_radial_rays():
    for F in (isotropic(2.0), isotropic("2 + 0*x")):
        ang = 0.7
        v0 = 2.0 * np.array([np.cos(ang), np.sin(ang)])
        tr = integrate_pregeodesic(F, TrajectoryState(0.0, [0.1, -0.2], v0), IntegratorParams(1e-3, 1.0))
        assert np.linalg.norm(tr.x[-1] - tr.x[0]) == pytest.approx(2.0, abs=1e-8)


def test_shear_endpoint_matches_reference():
    tr = integrate_pregeodesic(SHEAR, _shear_init(), IntegratorParams(1e-3, 1.0))
    assert np.abs(tr.x[-1] - SHEAR_REF_END).max() < 1e-6


@pytest.mark.parametrize("mode", ["sstk", "finsler"])
def test_fourth_order_convergence(mode):
    st = spacetime_for(SHEAR, mode)
    ends = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        tr = integrate_pregeodesic(st, _shear_init(), IntegratorParams(dt, 4.0, renormalize_null=False))
        ends.append(tr.x[-1])
    e = [np.linalg.norm(ends[i] - ends[i + 1]) for i in range(3)]
    assert e[0] / e[1] >= 12 and e[1] / e[2] >= 12


def test_null_drift_with_and_without_reprojection():
    off = integrate_pregeodesic(SHEAR, _shear_init(), IntegratorParams(1e-3, 1.0, renormalize_null=False))
    on = integrate_pregeodesic(SHEAR, _shear_init(), IntegratorParams(1e-3, 1.0, renormalize_null=True))
    r_off, r_on = conservation_report(off, SHEAR), conservation_report(on, SHEAR)
    assert r_off["max_rate"] <= 1e-6
    assert r_on["max_abs_G"] <= 1e-12
    assert len(r_on["drift"]) == len(on.t)
    # drift decreases like dt^4 under step halving
    d = [
        conservation_report(integrate_pregeodesic(SHEAR, _shear_init(), IntegratorParams(dt, 4.0, renormalize_null=False)), SHEAR)["max_abs_G"]
        for dt in (0.2, 0.1)
    ]
    assert d[0] / d[1] >= 12


def test_report_is_deterministic():
    tr = integrate_pregeodesic(SHEAR, _shear_init(), IntegratorParams(1e-2, 1.0, renormalize_null=False))
    a, b = conservation_report(tr, SHEAR), conservation_report(tr, SHEAR)
    assert a["max_abs_G"] == b["max_abs_G"] and np.array_equal(a["drift"], b["drift"], equal_nan=True)


def test_lorentz_finsler_and_sstk_trajectories_agree():
    a = integrate_pregeodesic(spacetime_for(SHEAR, "finsler"), _shear_init(), IntegratorParams(1e-2, 1.0))
    b = integrate_pregeodesic(spacetime_for(SHEAR, "sstk"), _shear_init(), IntegratorParams(1e-2, 1.0))
    assert np.abs(a.x - b.x).max() < 1e-12


def test_spacetime_projection_equals_finsler_geodesic():
    for F in (SHEAR, RandersMetric([[1.2, 0.1], [0.1, 0.9]], ["0.2*sin(y)", "0.1*x"])):
        x0 = np.array([0.1, 0.2])
        d = np.array([0.6, 0.8])
        v0 = d / eval_metric(F, x0, 0.0, d)
        params = IntegratorParams(1e-3, 1.0)
        space = integrate_pregeodesic(F, TrajectoryState(0.0, x0, v0), params)
        geo = integrate_finsler_geodesic(F, x0, v0, params)
        assert np.linalg.norm(space.x[-1] - geo.x[-1]) < 1e-6
        speeds = F.cost(geo.x, 0.0, geo.xdot)
        assert np.abs(speeds - 1).max() < 1e-8


def test_finsler_geodesic_simple_media():
    params = IntegratorParams(1e-2, 1.0)
    g = integrate_finsler_geodesic(isotropic(1.0), [0.0, 0.0], [0.6, 0.8], params)
    assert np.allclose(g.x[-1], [0.6, 0.8], atol=1e-14)
    F = zermelo(I2, [0.5, 0.0])
    g = integrate_finsler_geodesic(F, [0.0, 0.0], [1.5, 0.0], params)
    assert np.allclose(g.x[-1], [1.5, 0.0], atol=1e-14)


def test_reverse_metric_retraces_geodesic():
    x0 = np.array([0.1, 0.2])
    d = np.array([0.6, 0.8])
    v0 = d / eval_metric(SHEAR, x0, 0.0, d)
    params = IntegratorParams(1e-3, 1.0)
    fwd = integrate_finsler_geodesic(SHEAR, x0, v0, params)
    back = integrate_finsler_geodesic(SHEAR.reversed(), fwd.x[-1], -fwd.xdot[-1], params)
    assert np.linalg.norm(back.x[-1] - x0) < 1e-8


def test_domain_exit():
    F = zermelo(I2, ["0.2*y", 0.0])
    F.box = (np.array([-1.0, -1.0]), np.array([0.5, 1.0]))
    with pytest.raises(DomainExit) as err:
        integrate_pregeodesic(F, TrajectoryState(0.0, [0.0, 0.0], [1.0, 0.0]), IntegratorParams(1e-3, 1.0))
    tr = err.value.trajectory
    # the shear bends the ray upward, so the wall x = 0.5 is met slightly after t = 0.5
    assert 0.5 <= tr.exit_time < 0.51
    assert tr.x[tr.end, 0] <= 0.5 and tr.t[tr.end] + tr.t[1] == pytest.approx(tr.exit_time)
    assert np.all(np.isnan(tr.x[tr.end + 1 :]))


def test_batch_matches_single_trajectories():
    st = spacetime_for(SHEAR)
    ang = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    V = st.cone_point(0.0, np.zeros((7, 2)), ang)
    b = integrate_batch(st, 0.0, np.zeros((7, 2)), V, IntegratorParams(1e-2, 0.5))
    for i in (0, 3, 6):
        tr = integrate_pregeodesic(st, TrajectoryState(0.0, np.zeros(2), V[i]), IntegratorParams(1e-2, 0.5))
        assert np.array_equal(b.trajectory(i).x, tr.x)


def test_isotropic_circle_init_is_normal():
    front = InitialFront.circle([0.0, 0.0], 1.0, 16)
    F = isotropic(3.0)
    for s in (0.0, 0.3, 0.71):
        init = lightlike_orthogonal_init(F, front, s, "outward")
        n = front.normal(s)
        assert np.allclose(init.xdot, 3.0 * n / np.linalg.norm(n), atol=1e-12)
        inward = lightlike_orthogonal_init(F, front, s, "inward")
        assert np.allclose(inward.xdot, -init.xdot, atol=1e-12)


def _residuals(st, x, v, e):
    g = st.tensor(0.0, x, 1.0, v)
    u = np.concatenate([[1.0], v])
    return abs(st.G(0.0, x, 1.0, v)), abs(u @ g @ np.concatenate([[0.0], e]))


def test_randers_rootfind_on_flat_front():
    F = RandersMetric([[1.3, 0.2], [0.2, 0.9]], [0.25, -0.1])
    st = LorentzFinslerSpacetime(F)
    front = InitialFront.polyline([[0.0, -1.0], [0.0, 1.0]], 16, closed=False)
    init = lightlike_orthogonal_init(st, front, 0.5, "outward", method="rootfind")
    G, orth = _residuals(st, init.x, init.xdot, front.tangent(0.5))
    assert G < 1e-9 and orth < 1e-8
    assert init.xdot @ front.normal(0.5) > 0
    assert len(orthogonal_directions_rootfind(st, 0.0, init.x, front.tangent(0.5))) == 2


@pytest.mark.parametrize("W", [[0.5, 0.2], [2.0, 0.5]])
def test_sstk_closed_form_matches_rootfind(W):
    st = SSTKSpacetime(zermelo([[1.2, 0.3], [0.3, 0.8]], W))
    x = np.zeros(2)
    e = np.array([0.6, 0.8])
    closed = st.orthogonal_closed_form(0.0, x, e)
    numeric = orthogonal_directions_rootfind(st, 0.0, x, e)
    assert len(closed) == len(numeric) == 2
    for v in closed:
        assert min(np.linalg.norm(v - w) for w in numeric) < 1e-10
        G, orth = _residuals(st, x, v, e)
        assert G < 1e-12 and orth < 1e-12


def test_no_solution_under_strong_wind():
    # with the Lorentz-Finsler form only the Z branch is available, so the
    # inward orthogonal direction of a vertical front in strong wind is missing
    st = LorentzFinslerSpacetime(zermelo(I2, [2.0, 0.0]))
    v = orthogonal_velocity(st, 0.0, np.zeros(2), [0.0, 1.0], [1.0, 0.0], "outward")
    assert np.allclose(v, [3.0, 0.0], atol=1e-9)
    with pytest.raises(NoSolution):
        orthogonal_velocity(st, 0.0, np.zeros(2), [0.0, 1.0], [1.0, 0.0], "inward")


def test_ambiguous_side():
    st = SSTKSpacetime(isotropic(1.0))
    with pytest.raises(AmbiguousSide):
        orthogonal_velocity(st, 0.0, np.zeros(2), [1.0, 0.0], [1.0, 0.0], "outward")


def test_trajectory_csv(tmp_path):
    st = spacetime_for(zermelo(I2, [0.5, 0.0]))
    b = integrate_batch(st, 0.0, np.zeros((2, 2)), np.array([[1.5, 0.0], [0.5, 0.0]]), IntegratorParams(0.5, 1.0))
    p = tmp_path / "t.csv"
    write_trajectories_csv(p, b)
    lines = p.read_text().splitlines()
    assert lines[0] == "seed,t,x,y"
    assert lines[1:4] == ["0,0,0,0", "0,0.5,0.75,0", "0,1,1.5,0"]
    assert len(lines) == 7
