import warnings

import numpy as np
import pytest

from oracles import dense_polyline, hausdorff, hausdorff_to_curve
from windfront import isotropic, zermelo
from windfront.errors import OutOfHorizon, ResolutionWarning, ValidationError
from windfront.geodesics import IntegratorParams
from windfront.wavefront import (
    Grid2D,
    POINT_RADIUS,
    InitialFront,
    arrival_at_points,
    arrival_field,
    arrival_time_field,
    cut_array,
    detect_cuts,
    front_at,
    positions_at,
    propagate,
)

I2 = np.eye(2)
DT = 1e-3
SHEAR = zermelo(I2, ["0.2*y", 0.0])


def _run(metric, front, t_max, side="outward", threads=None):
    wm = propagate(metric, front, IntegratorParams(DT, t_max), side, threads=threads)
    return wm, detect_cuts(wm)


def _circle(c, r, n=200000):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.c_[c[0] + r * np.cos(th), c[1] + r * np.sin(th)]


@pytest.fixture(scope="module")
def collapse():
    return _run(isotropic(1.0), InitialFront.circle([0.0, 0.0], 1.0, 512), 1.2, "inward")


@pytest.fixture(scope="module")
def ellipse():
    return _run(isotropic(1.0), InitialFront.ellipse([0.0, 0.0], [2.0, 1.0], 512), 1.0, "inward")


@pytest.fixture(scope="module")
def shear_source():
    return _run(SHEAR, InitialFront.point_source([0.0, 0.0], 256), 1.0)


def test_front_validation():
    with pytest.raises(ValidationError):
        InitialFront.polyline([[0, 0], [1, 1], [1, 0], [0, 1]], 32)  # bow tie
    with pytest.raises(ValidationError):
        InitialFront.circle([0, 0], 1.0, 16, max_spacing=0.1)
    f = InitialFront.circle([0, 0], 1.0, 64, max_spacing=0.1)
    assert f.embedded() and f.n_seeds == 64


def test_polyline_orientation_is_counter_clockwise():
    f = InitialFront.polyline([[0, 0], [0, 1], [1, 1], [1, 0]], 40)  # given clockwise
    # outward normals point away from the centroid
    assert np.all(np.einsum("ij,ij->i", f.normals, f.points - 0.5) > 0)


def test_circle_collapse_cuts_at_one(collapse):
    wm, cuts = collapse
    t = cut_array(cuts)
    assert np.all(np.abs(t - 1.0) <= DT)
    assert {c.cause for c in cuts} <= {"focal", "both", "intersection"}


def test_circle_slice_just_before_collapse(collapse):
    wm, cuts = collapse
    s = front_at(wm, cuts, 0.999)
    assert s.closed and s.breaks == 0 and len(s.seeds) == 512
    assert np.allclose(np.linalg.norm(s.points, axis=1), 1e-3, atol=1e-12)
    after = front_at(wm, cuts, 1.1)
    assert len(after.seeds) == 0 and after.polylines() == []


def test_ellipse_first_cut_at_major_vertices(ellipse):
    wm, cuts = ellipse
    t = cut_array(cuts)
    # focal time at the vertex equals the radius of curvature b^2 / a
    assert t.min() == pytest.approx(0.5, abs=2 * DT)
    first = np.flatnonzero(t <= t.min() + DT)
    x0 = wm.x[0, first]
    assert np.all(np.abs(x0[:, 0]) > 1.99) and np.all(np.abs(x0[:, 1]) < 0.05)
    assert {0, 256} <= set(first.tolist())


def test_ellipse_slice_breaks_after_first_cut(ellipse):
    wm, cuts = ellipse
    s = front_at(wm, cuts, 0.6)
    assert not s.closed and s.breaks >= 1
    assert 0 not in s.seeds and 256 not in s.seeds
    before = front_at(wm, cuts, 0.4)
    assert before.closed and len(before.seeds) == 512


def test_survival_soundness(ellipse):
    wm, cuts = ellipse
    t_cut = cut_array(cuts)
    for t in np.linspace(0, 1, 21):
        s = front_at(wm, cuts, t)
        assert np.all(t <= t_cut[s.seeds] + 1e-12)
        P, ok = positions_at(wm, t)
        assert np.array_equal(s.points, P[s.seeds])


def test_epsilon_positivity(ellipse, collapse):
    for wm, cuts in (ellipse, collapse):
        assert cut_array(cuts).min() >= DT


def test_refinement_never_delays_cuts():
    cut = []
    for n in (256, 512):
        wm, cuts = _run(isotropic(1.0), InitialFront.ellipse([0.0, 0.0], [2.0, 1.0], n), 1.0, "inward")
        cut.append(cut_array(cuts))
    coarse, fine = cut[0], cut[1][::2]
    both = np.isfinite(coarse) & np.isfinite(fine)
    assert np.all(fine[both] <= coarse[both] + DT)
    assert np.all(np.isfinite(fine) | np.isinf(coarse))


def test_point_source_is_a_circle():
    wm, cuts = _run(isotropic(1.0), InitialFront.point_source([0.0, 0.0], 256), 1.0)
    assert {c.cause for c in cuts} == {"horizon"}
    s = front_at(wm, cuts, 1.0)
    assert s.closed
    assert hausdorff_to_curve(s.polylines()[0], _circle([0, 0], 1.0)) < 1e-4


def test_strong_wind_translated_circle():
    wm, cuts = _run(zermelo(I2, [2.0, 0.0]), InitialFront.point_source([0.0, 0.0], 256), 1.0)
    for t in (0.5, 1.0):
        s = front_at(wm, cuts, t)
        assert s.closed
        assert hausdorff_to_curve(s.polylines()[0], _circle([2 * t, 0], t)) < 1e-4
        # every slice point lies in the disk of radius t about t W (plus the proxy radius)
        assert np.all(np.linalg.norm(s.points - [2 * t, 0], axis=1) <= t + POINT_RADIUS + 1e-9)


def test_outward_convex_front_never_cuts():
    for metric in (isotropic(1.0), zermelo(I2, [0.5, 0.2])):
        _, cuts = _run(metric, InitialFront.ellipse([0.0, 0.0], [1.0, 0.6], 128), 1.0)
        assert {c.cause for c in cuts} == {"horizon"}
        assert np.all(np.isinf(cut_array(cuts)))


def test_concave_corner_produces_intersections():
    front = InitialFront.polyline([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], 64)
    wm, cuts = _run(isotropic(1.0), front, 0.5)
    hit = [c for c in cuts if c.cause == "intersection"]
    assert hit
    for c in hit:
        # cuts come from the rays leaving the re-entrant corner at (1, 1)
        assert np.linalg.norm(wm.x[0, c.seed] - [1.0, 1.0]) <= 0.5 + 1e-9


def test_out_of_horizon(shear_source):
    wm, cuts = shear_source
    with pytest.raises(OutOfHorizon):
        front_at(wm, cuts, 1.5)
    with pytest.raises(OutOfHorizon):
        front_at(wm, cuts, -0.1)


def test_resolution_warning():
    wm, _ = _run(isotropic(1.0), InitialFront.ellipse([0.0, 0.0], [2.0, 1.0], 128), 1.0, "inward")
    with warnings.catch_warnings():
        warnings.simplefilter("error", ResolutionWarning)
        detect_cuts(wm)
    with pytest.warns(ResolutionWarning):
        detect_cuts(wm, resolution_factor=1e-3)


def test_resolution_stability():
    lines = []
    for n in (128, 256):
        wm, cuts = _run(SHEAR, InitialFront.circle([0.0, 0.0], 0.5, n), 1.0)
        lines.append(dense_polyline(front_at(wm, cuts, 1.0).polylines()[0]))
    spacing = 2 * np.pi * 0.5 / 128
    assert hausdorff(*lines) < 2 * spacing


def test_minimality_on_surviving_samples(shear_source):
    wm, cuts = shear_source
    rng = np.random.default_rng(3)
    t = rng.uniform(0.05, 0.99, 100)
    s = rng.integers(0, wm.n_seeds, 100)
    P = np.array([positions_at(wm, ti)[0][si] for ti, si in zip(t, s)])
    assert np.abs(arrival_at_points(wm, cuts, P) - t).max() <= DT


def test_arrival_field_isotropic_point_source():
    grid = Grid2D(-1.0, 1.0, -1.0, 1.0, 20, 20)
    F = arrival_time_field(isotropic(1.0), InitialFront.point_source([0.0, 0.0], 256), grid, IntegratorParams(DT, 1.5))
    xs, ys = grid.centres()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    assert np.all(np.isfinite(F))
    assert np.abs(F - np.hypot(X, Y)).max() < grid.diameter


def test_arrival_tail_and_headwind():
    wm, cuts = _run(zermelo(I2, [0.5, 0.0]), InitialFront.point_source([0.0, 0.0], 256), 2.2)
    T = arrival_at_points(wm, cuts, [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert T == pytest.approx([2 / 3, 2.0, 2 / np.sqrt(3)], abs=1e-3)
    grid = Grid2D(-1.05, 1.05, -0.05, 0.05, 21, 1)
    F = arrival_field(wm, cuts, grid)[:, 0]
    assert F[-1] == pytest.approx(2 / 3, abs=grid.diameter)
    assert F[0] == pytest.approx(2.0, abs=grid.diameter)


def test_strong_wind_unreachable_cells():
    wm, cuts = _run(zermelo(I2, [2.0, 0.0]), InitialFront.point_source([0.0, 0.0], 256), 1.0)
    grid = Grid2D(-2.0, 4.0, -2.0, 2.0, 60, 40)
    F = arrival_field(wm, cuts, grid)
    xs, ys = grid.centres()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    # reachable by t = 1 iff |x - s W| <= s for some s in [0, 1]
    s = np.linspace(0, 1, 2001)
    gap = np.min(np.hypot(X[..., None] - 2 * s, Y[..., None]) - s, axis=-1)
    h = grid.diameter
    assert np.all(np.isfinite(F[gap < -h]))
    assert np.all(np.isinf(F[gap > h]))
    T = arrival_at_points(wm, cuts, [[0.0, 1.0], [1.0, 0.0], [2.0, 0.0], [-0.5, 0.0]])
    assert np.isinf(T[0]) and np.isinf(T[3])
    # downstream the first arrival rides wind plus full engine speed: |x| / 3
    assert T[1:3] == pytest.approx([1 / 3, 2 / 3], abs=DT)


def test_deterministic_across_thread_counts(monkeypatch):
    front = InitialFront.ellipse([0.0, 0.0], [2.0, 1.0], 300)
    a = _run(SHEAR, front, 0.6, "inward", threads=1)
    b = _run(SHEAR, front, 0.6, "inward", threads=4)
    monkeypatch.setenv("WINDFRONT_THREADS", "3")
    c = _run(SHEAR, front, 0.6, "inward")
    for other in (b, c):
        assert np.array_equal(a[0].x, other[0].x, equal_nan=True)
        assert np.array_equal(cut_array(a[1]), cut_array(other[1]))
        assert [r.cause for r in a[1]] == [r.cause for r in other[1]]
